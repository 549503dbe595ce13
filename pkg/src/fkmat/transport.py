"""Matrix-valued multiplicative functionals along discrete paths.

Three discretisations of the ordered exponential driven by
``A = sum_j int alpha_j(X) o dX^j - int V(X) dt``:

``exp_midpoint``
    ordered product of ``exp(sum_j alpha_j(m_k) dX_k^j - V(m_k) dt)`` with
    ``m_k`` the step midpoint (the Stratonovich point).
``product_integral``
    ordered product of ``1 + dB_k`` where ``dB_k`` adds the quadratic
    covariation term ``1/2 sum_l alpha_l(m_k)^2 dt`` to the increment above.
``interaction_picture``
    ``A_tilde @ U`` with ``U`` the ``V = 0`` exp_midpoint transport and
    ``A_tilde`` the exponential-midpoint solution of
    ``A_tilde' = -A_tilde U V U^{-1}``, ``U`` taken at half steps.

All products are left folds (new factors multiply on the right).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import NumericError, SampleError, ValidationError
from .ode import propagate

SCHEMES = ("exp_midpoint", "product_integral", "interaction_picture")
STEP_BLOCK = 128


@dataclass(frozen=True)
class Scheme:
    tag: str = "exp_midpoint"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.tag!r}; expected one of {SCHEMES}")


def as_scheme(scheme):
    return scheme if isinstance(scheme, Scheme) else Scheme(str(scheme))


@dataclass(frozen=True)
class BIncrement:
    matrix: np.ndarray
    step: int


@dataclass(frozen=True)
class TransportResult:
    matrix: np.ndarray
    scheme: Scheme
    segment: tuple
    diagnostics: dict


@dataclass
class BatchTransport:
    """Transport of a batch of paths; arrays are indexed by path first."""

    matrices: np.ndarray
    norms: np.ndarray
    v_integrals: np.ndarray
    unitarity_defects: np.ndarray | None = None
    potential_factors: np.ndarray | None = None
    gauge_factors: np.ndarray | None = None


# --------------------------------------------------------------------------
# per-step quantities


def _step_data(X, dt, gauge, pot, check):
    """Midpoint gauge components, gauge increments and potentials on ``X (B, K+1, n)``."""
    mid = 0.5 * (X[:, 1:, :] + X[:, :-1, :])
    dX = X[:, 1:, :] - X[:, :-1, :]
    alpha = gauge.batch(mid, check=check)
    try:
        V = pot.batch(mid, check=check)
    except SampleError as exc:
        B, K = mid.shape[:2]
        row, step = divmod(exc.index, K) if exc.index is not None else (None, None)
        raise SampleError(f"potential not finite on path row {row} at step {step}",
                          index=row) from None
    G = alpha[:, :, 0] * dX[:, :, 0, None, None]
    for j in range(1, X.shape[-1]):
        G = G + alpha[:, :, j] * dX[:, :, j, None, None]
    return alpha, G, V


def _ito_correction(alpha):
    corr = alpha[:, :, 0] @ alpha[:, :, 0]
    for j in range(1, alpha.shape[2]):
        corr = corr + alpha[:, :, j] @ alpha[:, :, j]
    return 0.5 * corr


def b_increment(path, k, gauge, pot):
    """The increment of the Ito-form driver ``B`` over step ``k``."""
    N = path.grid.steps
    if not 0 <= k < N:
        raise ValidationError(f"step index {k} outside [0, {N})")
    X = path.positions[None, k:k + 2, :]
    alpha, G, V = _step_data(X, path.grid.dt, gauge, pot, check=True)
    dB = G - V * path.grid.dt + _ito_correction(alpha) * path.grid.dt
    return BIncrement(dB[0, 0], int(k))


def _check_segment(N, start, end):
    if end is None:
        end = N
    if not (0 <= start <= end <= N):
        raise ValidationError(f"segment [{start}, {end}) outside [0, {N}]")
    return int(start), int(end)


# --------------------------------------------------------------------------
# batched transport


def transport_batch(positions, dt, gauge, pot, scheme="exp_midpoint", start=0, end=None,
                    check=True, path_offset=0):
    """Transport every path of ``positions (B, N+1, n)`` over steps ``[start, end)``."""
    scheme = as_scheme(scheme)
    positions = np.asarray(positions, dtype=float)
    B, N1, n = positions.shape
    if n != gauge.space_dim or n != pot.space_dim:
        raise ValidationError("path dimension does not match the fields")
    if gauge.fiber_dim != pot.fiber_dim:
        raise ValidationError("gauge and potential fibre dimensions differ")
    start, end = _check_segment(N1 - 1, start, end)
    d = gauge.fiber_dim
    eye = np.broadcast_to(np.eye(d, dtype=complex), (B, d, d))
    P = eye.copy()
    U = eye.copy()
    At = eye.copy()
    v_int = np.zeros(B)
    for a in range(start, end, STEP_BLOCK):
        b = min(a + STEP_BLOCK, end)
        alpha, G, V = _step_data(positions[:, a:b + 1, :], dt, gauge, pot, check)
        if not pot.is_zero:
            v_int += linalg.hermitian_norm(V).sum(axis=1) * dt
        if scheme.tag == "exp_midpoint":
            P = linalg.ordered_product(linalg._expm(G - V * dt), out=P)
        elif scheme.tag == "product_integral":
            factors = eye[:, None] + G - V * dt + _ito_correction(alpha) * dt
            P = _fold_checked(factors, P, a, path_offset)
        else:
            U, At = _interaction_block(G, V, dt, U, At)
    if scheme.tag == "interaction_picture":
        P = At @ U
    out = BatchTransport(P, linalg._operator_norm(P), v_int)
    if not np.all(np.isfinite(P)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(P), axis=(1, 2)))[0])
        raise NumericError("transport is not finite", step=end - 1, path=path_offset + bad)
    if pot.is_zero or np.all(v_int == 0):
        out.unitarity_defects = linalg.unitarity_defect(P)
    if scheme.tag == "interaction_picture":
        out.potential_factors = At
        out.gauge_factors = U
    return out


def _fold_checked(factors, P, first_step, path_offset):
    for k in range(factors.shape[1]):
        with np.errstate(over="ignore", invalid="ignore"):
            P = P @ factors[:, k]
        finite = np.all(np.isfinite(P), axis=(1, 2))
        if not np.all(finite):
            bad = int(np.flatnonzero(~finite)[0])
            raise NumericError(
                f"product integral overflowed at step {first_step + k}",
                step=first_step + k, path=path_offset + bad,
            )
    return P


def _interaction_block(G, V, dt, U, At):
    full = linalg._expm(G)
    half = linalg._expm(0.5 * G)
    K = G.shape[1]
    prefix = np.empty_like(G)
    for k in range(K):
        prefix[:, k] = U
        U = U @ full[:, k]
    Uh = prefix @ half
    W = Uh @ V @ linalg.dagger(Uh)
    W = 0.5 * (W + linalg.dagger(W))
    At = propagate(-W, dt, out=At)
    return U, At


def inverse_batch(positions, dt, gauge, pot, scheme="exp_midpoint", start=0, end=None,
                  check=True):
    """Inverse transports ``(B, d, d)`` built from inverted factors in reverse order."""
    scheme = as_scheme(scheme)
    positions = np.asarray(positions, dtype=float)
    B, N1, _ = positions.shape
    start, end = _check_segment(N1 - 1, start, end)
    d = gauge.fiber_dim
    eye = np.broadcast_to(np.eye(d, dtype=complex), (B, d, d))
    Q = eye.copy()
    Uinv = eye.copy()
    Ainv = eye.copy()
    U = eye.copy()
    for a in range(start, end, STEP_BLOCK):
        b = min(a + STEP_BLOCK, end)
        alpha, G, V = _step_data(positions[:, a:b + 1, :], dt, gauge, pot, check)
        if scheme.tag == "exp_midpoint":
            Q = linalg.reverse_ordered_product(linalg._expm(-(G - V * dt)), out=Q)
        elif scheme.tag == "product_integral":
            factors = eye[:, None] + G - V * dt + _ito_correction(alpha) * dt
            cond = np.linalg.cond(factors)
            if np.any(~np.isfinite(cond)) or np.any(cond > 1.0 / linalg.EPS):
                k = int(np.argwhere(~(cond <= 1.0 / linalg.EPS))[0][1])
                raise NumericError(f"factor 1 + dB is singular at step {a + k}", step=a + k)
            Q = linalg.reverse_ordered_product(np.linalg.inv(factors), out=Q)
        else:
            Uinv = linalg.reverse_ordered_product(linalg._expm(-G), out=Uinv)
            full = linalg._expm(G)
            half = linalg._expm(0.5 * G)
            prefix = np.empty_like(G)
            for k in range(G.shape[1]):
                prefix[:, k] = U
                U = U @ full[:, k]
            Uh = prefix @ half
            W = Uh @ V @ linalg.dagger(Uh)
            W = 0.5 * (W + linalg.dagger(W))
            Ainv = linalg.reverse_ordered_product(linalg._expm(W * dt), out=Ainv)
    if scheme.tag == "interaction_picture":
        Q = Uinv @ Ainv
    return Q


# --------------------------------------------------------------------------
# single-path API


def _diagnostics(bt, scheme):
    diag = {
        "norm": float(bt.norms[0]),
        "unitarity_defect": None if bt.unitarity_defects is None else float(bt.unitarity_defects[0]),
        "accumulated_V_integral": float(bt.v_integrals[0]),
    }
    if scheme.tag == "interaction_picture":
        diag["potential_factor"] = bt.potential_factors[0]
        diag["gauge_factor"] = bt.gauge_factors[0]
    return diag


def transport(path, start, end, gauge, pot, scheme="exp_midpoint"):
    """Ordered exponential over steps ``[start, end)`` of a single path."""
    scheme = as_scheme(scheme)
    bt = transport_batch(path.positions[None], path.grid.dt, gauge, pot, scheme, start, end)
    return TransportResult(bt.matrices[0], scheme, (int(start), int(end)), _diagnostics(bt, scheme))


def transport_inverse(path, start, end, gauge, pot, scheme="exp_midpoint"):
    """Inverse of :func:`transport` assembled from inverted factors."""
    scheme = as_scheme(scheme)
    Q = inverse_batch(path.positions[None], path.grid.dt, gauge, pot, scheme, start, end)[0]
    diag = {"norm": float(linalg._operator_norm(Q)), "unitarity_defect": None,
            "accumulated_V_integral": None}
    return TransportResult(Q, scheme, (int(start), int(end)), diag)


def adjoint_reversal_check(path, gauge, pot, scheme="exp_midpoint"):
    """``|| transport(reversed path)^H - transport(path) ||`` over the whole path."""
    from .paths import reverse

    scheme = as_scheme(scheme)
    if scheme.tag not in ("exp_midpoint", "product_integral"):
        raise ValidationError("adjoint reversal is checked for exp_midpoint and product_integral")
    N = path.grid.steps
    forward = transport(path, 0, N, gauge, pot, scheme).matrix
    backward = transport(reverse(path), 0, N, gauge, pot, scheme).matrix
    return float(linalg._operator_norm(linalg.dagger(backward) - forward))
