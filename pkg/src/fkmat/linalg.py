"""Small dense complex matrices: structure checks, norms, exponentials, spectra.

Every function accepts a single ``(d, d)`` matrix or a stack ``(..., d, d)`` and
works elementwise over the leading axes.  Scaling decisions are made per
element, so a stacked element agrees with its standalone evaluation to
roundoff; bit-level equality holds only between stacks of the same layout
(numpy's vectorised loops may round a lone element differently).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

EPS = np.finfo(float).eps
DEFAULT_TOLERANCE = 1e-10

MATRIX_CLASSES = ("general", "hermitian", "skew_hermitian", "unitary")


def as_matrix(M, name="matrix"):
    """Return ``M`` as a complex array of square matrices, validating entries."""
    M = np.asarray(M, dtype=complex)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2] or M.shape[-1] < 1:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries")
    return M


def dagger(M):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(M, -1, -2))


def identity_like(M):
    d = M.shape[-1]
    return np.broadcast_to(np.eye(d, dtype=complex), M.shape).copy()


def operator_norm(M):
    """Largest singular value of ``M`` (elementwise over a stack)."""
    M = as_matrix(M)
    return _operator_norm(M)


def _operator_norm(M):
    d = M.shape[-1]
    if d == 1:
        return np.abs(M[..., 0, 0])
    if d == 2:
        # scale first so the Gram matrix neither underflows nor overflows
        s = np.abs(M).max(axis=(-2, -1))
        safe = np.where(s > 0, s, 1.0)
        # real divisor, part by part: complex division overflows for subnormal scales
        r = safe[..., None, None]
        A = M.real / r + 1j * (M.imag / r)
        G = dagger(A) @ A
        return s * np.sqrt(_hermitian_2x2_extreme(G, largest=True).clip(min=0.0))
    return np.linalg.norm(M, ord=2, axis=(-2, -1))


def _hermitian_2x2_extreme(H, largest):
    a = H[..., 0, 0].real
    c = H[..., 1, 1].real
    b = H[..., 0, 1]
    mean = 0.5 * (a + c)
    radius = np.hypot(0.5 * (a - c), np.abs(b))
    return mean + radius if largest else mean - radius


def hermitian_extreme_eigenvalues(H):
    """(smallest, largest) eigenvalue of Hermitian ``H``, elementwise over a stack."""
    H = np.asarray(H, dtype=complex)
    d = H.shape[-1]
    if d == 1:
        v = H[..., 0, 0].real
        return v, v.copy()
    if d == 2:
        return (_hermitian_2x2_extreme(H, largest=False),
                _hermitian_2x2_extreme(H, largest=True))
    w = np.linalg.eigvalsh(H)
    return w[..., 0], w[..., -1]


def hermitian_norm(H):
    """Operator norm of Hermitian ``H``: the largest eigenvalue modulus."""
    lo, hi = hermitian_extreme_eigenvalues(H)
    return np.maximum(np.abs(lo), np.abs(hi))


def hermitian_defect(M):
    """Operator norm of ``M - M^H``."""
    return _operator_norm(M - dagger(M))


def skew_defect(M):
    """Operator norm of ``M + M^H``."""
    return _operator_norm(M + dagger(M))


def unitarity_defect(M):
    """Operator norm of ``M^H M - I``."""
    G = dagger(M) @ M
    return _operator_norm(G - identity_like(G))


@dataclass(frozen=True)
class MatrixClass:
    tag: str
    tolerance: float


def classify(M, tolerance=DEFAULT_TOLERANCE):
    """Classify a single matrix; the first matching tag in
    hermitian, skew_hermitian, unitary wins, otherwise general."""
    M = as_matrix(M)
    if M.ndim != 2:
        raise ValidationError("classify takes a single matrix")
    if tolerance < 0:
        raise ValidationError("tolerance must be nonnegative")
    if hermitian_defect(M) <= tolerance:
        tag = "hermitian"
    elif skew_defect(M) <= tolerance:
        tag = "skew_hermitian"
    elif unitarity_defect(M) <= tolerance:
        tag = "unitary"
    else:
        tag = "general"
    return MatrixClass(tag, float(tolerance))


# --------------------------------------------------------------------------
# matrix exponential

_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def matrix_exp(M):
    """Matrix exponential by scaling and squaring.

    The scaling power is chosen per stacked element.  ``d = 1`` uses the
    scalar exponential, ``d = 2`` splits off the trace and sums the cosh and
    sinh series of the traceless part (scaled so its square has modulus at
    most one), larger ``d`` the degree-13 Pade core.
    """
    M = as_matrix(M)
    return _expm(M)


def _expm(M):
    d = M.shape[-1]
    if d == 1:
        return np.exp(M)
    if d == 2:
        return _expm_2x2(M)
    return _expm_pade13(M)


def _square_repeatedly(R, s):
    smax = int(s.max(initial=0))
    for j in range(smax):
        mask = s > j
        R[mask] = R[mask] @ R[mask]
    return R


# Taylor coefficients of cosh(sqrt z) and sinh(sqrt z)/sqrt z; after scaling
# |z| <= 1 and eleven terms leave a remainder below 1/22! ~ 1e-21.
_COSH_SERIES = tuple(1.0 / math.factorial(2 * k) for k in range(11))
_SINHC_SERIES = tuple(1.0 / math.factorial(2 * k + 1) for k in range(11))


def _horner(coeffs, z):
    acc = np.full(z.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        acc *= z
        acc += c
    return acc


def _expm_2x2(M):
    a = M[..., 0, 0]
    b = M[..., 0, 1]
    c = M[..., 1, 0]
    e = M[..., 1, 1]
    mean = 0.5 * (a + e)
    half = 0.5 * (a - e)
    z = half * half + b * c  # delta**2 for the traceless part
    absz = np.abs(z)
    s = np.zeros(z.shape, dtype=np.int64)
    big = absz > 1.0
    if np.any(big):
        # |delta| / 2**s <= 1
        s[big] = np.ceil(0.5 * np.log2(absz[big])).astype(np.int64)
        scale = np.ldexp(1.0, -s)
        zs = z * scale * scale
    else:
        scale = 1.0
        zs = z
    cosh = _horner(_COSH_SERIES, zs)
    k = _horner(_SINHC_SERIES, zs) * scale
    R = np.empty(M.shape, dtype=complex)
    R[..., 0, 0] = cosh + k * half
    R[..., 1, 1] = cosh - k * half
    R[..., 0, 1] = k * b
    R[..., 1, 0] = k * c
    if np.any(big):
        R = _square_repeatedly(R, s)
    R *= np.exp(mean)[..., None, None]
    return R


def _expm_pade13(M):
    b = _PADE13
    norm1 = np.abs(M).sum(axis=-2).max(axis=-1)
    s = np.zeros(norm1.shape, dtype=np.int64)
    big = norm1 > _THETA13
    if np.any(big):
        s[big] = np.ceil(np.log2(norm1[big] / _THETA13)).astype(np.int64)
    A = M * np.ldexp(1.0, -s)[..., None, None]
    ident = identity_like(A)
    zero = norm1 == 0
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    R[zero] = ident[zero]
    return _square_repeatedly(R, s)


# --------------------------------------------------------------------------
# spectral operations


def _canonical_phases(Q):
    """Rotate each eigenvector column so its first non-negligible entry is real positive."""
    d = Q.shape[-1]
    mags = np.abs(Q)
    first = np.argmax(mags > 1e-8, axis=-2)  # (..., d)
    pivot = np.take_along_axis(Q, first[..., None, :], axis=-2)[..., 0, :]
    phase = pivot / np.abs(pivot)
    return Q * np.conj(phase)[..., None, :] if d else Q


def hermitian_eigendecomposition(M, tolerance=DEFAULT_TOLERANCE):
    """Return ``(eigenvalues, U)`` with ``M = U^H diag(eigenvalues) U``.

    Eigenvalues ascend.  Eigenvectors are phase-normalised and exactly tied
    eigenvalues are ordered by the real parts of their eigenvector entries,
    so the output is a deterministic function of the input.
    """
    M = as_matrix(M)
    if M.ndim != 2:
        raise ValidationError("hermitian_eigendecomposition takes a single matrix")
    if hermitian_defect(M) > tolerance:
        raise ValidationError("matrix is not Hermitian within tolerance")
    H = 0.5 * (M + dagger(M))
    w, Q = np.linalg.eigh(H)
    Q = _canonical_phases(Q)
    keys = [tuple(np.round(Q[:, j].real, 12)) for j in range(len(w))]
    order = sorted(range(len(w)), key=lambda j: (w[j], keys[j]))
    w = w[order]
    Q = Q[:, order]
    return w, dagger(Q)


def truncate_nonnegative(M, m, tolerance=DEFAULT_TOLERANCE):
    """Clip the spectrum of a nonnegative Hermitian matrix to ``[0, m]``.

    Works on stacks.  Elements whose spectrum already lies in ``[0, m]`` are
    returned unchanged bit for bit.
    """
    M = as_matrix(M)
    if not m > 0:
        raise ValidationError("truncation level must be positive")
    if np.any(hermitian_defect(M) > tolerance):
        raise ValidationError("matrix is not Hermitian within tolerance")
    H = 0.5 * (M + dagger(M))
    w, Q = np.linalg.eigh(H)
    if np.any(w[..., 0] < -tolerance):
        raise DomainError("potential not nonnegative")
    clipped = np.clip(w, 0.0, m)
    R = (Q * clipped[..., None, :]) @ dagger(Q)
    R = 0.5 * (R + dagger(R))
    inactive = (w[..., 0] >= 0.0) & (w[..., -1] <= m)
    return np.where(inactive[..., None, None], M, R)


def ordered_product(factors, out=None):
    """Left-to-right product ``F_0 F_1 ... F_{K-1}`` over axis -3 of ``(..., K, d, d)``.

    ``out`` optionally supplies the running product to continue from.
    """
    factors = np.asarray(factors)
    P = identity_like(factors[..., 0, :, :]) if out is None else out
    for k in range(factors.shape[-3]):
        P = P @ factors[..., k, :, :]
    return P


def reverse_ordered_product(factors, out=None):
    """``F_{K-1} ... F_1 F_0``: accumulates by left multiplication."""
    factors = np.asarray(factors)
    P = identity_like(factors[..., 0, :, :]) if out is None else out
    for k in range(factors.shape[-3]):
        P = factors[..., k, :, :] @ P
    return P
