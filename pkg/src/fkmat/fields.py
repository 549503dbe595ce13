"""Gauge fields (skew-Hermitian 1-forms) and matrix potentials over R^n.

Evaluators are vectorised: they map points of shape ``(..., n)`` to
``(..., n, d, d)`` gauge components or ``(..., d, d)`` potential values.
Preset evaluators are plain module-level classes so fields pickle cleanly
into worker processes.

Note on the integrability literature: the usual inclusion
``L^p_loc ⊂ K_loc ⊂ L^1_loc`` holds for ``p >= 1`` when the space dimension
is 1 and ``p > n/2`` otherwise; some sources write the dimension as ``m``.
:func:`kato_diagnostic` does not depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import ensemble, linalg
from .errors import (
    DiagnosticError,
    DomainError,
    FieldError,
    SampleError,
    UnsupportedOperationError,
    ValidationError,
)
from .paths import TimeGrid, brownian_batch

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def _points(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise ValidationError(f"points must have trailing dimension {n}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("points must be finite")
    return x


def _max_entry(M):
    return float(np.abs(M).max(initial=0.0))


# --------------------------------------------------------------------------
# gauge fields


class GaugeField:
    """A 1-form with values in the skew-Hermitian d x d matrices.

    ``derivative_mode`` is ``"analytic"`` (needs ``divergence``),
    ``"finite_difference"`` (central differences, step ``fd_step`` or
    ``1e-4 * (1 + |x|)``) or ``"none"``.  The default picks analytic when a
    divergence evaluator is supplied.
    """

    def __init__(self, space_dim, fiber_dim, components, divergence=None,
                 derivative_mode=None, fd_step=None,
                 tolerance=linalg.DEFAULT_TOLERANCE, name="custom"):
        if derivative_mode is None:
            derivative_mode = "analytic" if divergence is not None else "finite_difference"
        if derivative_mode not in ("analytic", "finite_difference", "none"):
            raise ValidationError(f"unknown derivative mode {derivative_mode!r}")
        if derivative_mode == "analytic" and divergence is None:
            raise ValidationError("analytic derivative mode needs a divergence evaluator")
        self.space_dim = int(space_dim)
        self.fiber_dim = int(fiber_dim)
        self.components = components
        self.divergence_evaluator = divergence
        self.derivative_mode = derivative_mode
        self.fd_step = fd_step
        self.tolerance = tolerance
        self.name = name

    def __repr__(self):
        return f"GaugeField({self.name}, n={self.space_dim}, d={self.fiber_dim})"

    def batch(self, points, check=True):
        """Components at a batch of points, shape ``(..., n, d, d)``."""
        values = np.asarray(self.components(points), dtype=complex)
        expected = points.shape[:-1] + (self.space_dim, self.fiber_dim, self.fiber_dim)
        if values.shape != expected:
            raise FieldError(f"gauge evaluator returned shape {values.shape}, expected {expected}")
        if check:
            if not np.all(np.isfinite(values)):
                raise FieldError("gauge evaluation is not finite")
            if _max_entry(values + linalg.dagger(values)) > self.tolerance / self.fiber_dim:
                raise FieldError("gauge component is not skew-Hermitian")
        return values

    @property
    def is_zero(self):
        return isinstance(self.components, ZeroGauge)


def evaluate_gauge(field, x):
    """The n skew-Hermitian components at a single point."""
    x = _points(x, field.space_dim)
    if x.ndim != 1:
        raise ValidationError("evaluate_gauge takes a single point")
    values = field.batch(x, check=False)
    if not np.all(np.isfinite(values)):
        raise FieldError("gauge evaluation is not finite")
    if np.any(linalg.skew_defect(values) > field.tolerance):
        raise FieldError("gauge component is not skew-Hermitian")
    return values


def divergence_batch(field, points):
    if field.derivative_mode == "none":
        raise UnsupportedOperationError("gauge field has no derivative information")
    if field.derivative_mode == "analytic":
        return np.asarray(field.divergence_evaluator(points), dtype=complex)
    n = field.space_dim
    if field.fd_step is None:
        h = 1e-4 * (1.0 + np.linalg.norm(points, axis=-1))
    else:
        h = np.full(points.shape[:-1], float(field.fd_step))
    total = np.zeros(points.shape[:-1] + (field.fiber_dim, field.fiber_dim), dtype=complex)
    for j in range(n):
        shift = np.zeros(n)
        shift[j] = 1.0
        step = h[..., None] * shift
        plus = field.batch(points + step, check=False)[..., j, :, :]
        minus = field.batch(points - step, check=False)[..., j, :, :]
        total += (plus - minus) / (2.0 * h[..., None, None])
    return total


def evaluate_divergence(field, x):
    """Sum over j of the partial derivative of alpha_j along x_j."""
    x = _points(x, field.space_dim)
    return divergence_batch(field, x)


class ZeroGauge:
    def __init__(self, n, d):
        self.n, self.d = n, d

    def __call__(self, x):
        return np.zeros(x.shape[:-1] + (self.n, self.d, self.d), dtype=complex)

    def divergence(self, x):
        return np.zeros(x.shape[:-1] + (self.d, self.d), dtype=complex)


class ConstantGauge:
    def __init__(self, matrices):
        self.matrices = np.asarray(matrices, dtype=complex)

    def __call__(self, x):
        return np.broadcast_to(self.matrices, x.shape[:-1] + self.matrices.shape).copy()

    def divergence(self, x):
        d = self.matrices.shape[-1]
        return np.zeros(x.shape[:-1] + (d, d), dtype=complex)


class ScalarOneForm:
    """``i * (b + G x)`` tensored with the d x d identity (d = 1: magnetic field)."""

    def __init__(self, b, gradient=None, d=1):
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        n = self.b.size
        self.gradient = np.zeros((n, n)) if gradient is None else np.asarray(gradient, dtype=float)
        if self.gradient.shape != (n, n):
            raise ValidationError("gradient must be n x n")
        self.d = d

    def __call__(self, x):
        coeff = self.b + x @ self.gradient.T  # (..., n)
        eye = np.eye(self.d)
        return 1j * coeff[..., None, None] * eye

    def divergence(self, x):
        div = np.trace(self.gradient)
        return np.broadcast_to(1j * div * np.eye(self.d), x.shape[:-1] + (self.d, self.d)).astype(complex)


class SU2Rotation:
    """Smooth nonconstant su(2) field.

    ``alpha_j(x) = i g (cos th_j sigma_x + sin th_j sigma_y + tilt_j sigma_z)``
    with ``th_j = k . x + phase_j``.
    """

    def __init__(self, n, strength=1.0, wavevector=None, phases=None, tilt=None):
        self.n = n
        self.g = float(strength)
        self.k = np.ones(n) if wavevector is None else np.asarray(wavevector, dtype=float)
        self.phases = np.zeros(n) if phases is None else np.asarray(phases, dtype=float)
        self.tilt = np.zeros(n) if tilt is None else np.asarray(tilt, dtype=float)

    def __call__(self, x):
        th = (x @ self.k)[..., None] + self.phases  # (..., n)
        c, s = np.cos(th), np.sin(th)
        out = (c[..., None, None] * PAULI[0] + s[..., None, None] * PAULI[1]
               + self.tilt[:, None, None] * PAULI[2])
        return 1j * self.g * out

    def divergence(self, x):
        th = (x @ self.k)[..., None] + self.phases
        c, s = np.cos(th), np.sin(th)
        out = (-(self.k * s)[..., None, None] * PAULI[0]
               + (self.k * c)[..., None, None] * PAULI[1])
        return 1j * self.g * out.sum(axis=-3)


# --------------------------------------------------------------------------
# potentials


class Potential:
    """Hermitian-matrix-valued potential.

    ``singular_policy`` is ``"reject"`` (non-finite values raise
    :class:`SampleError`) or ``"clip"``: NaN entries become 0, infinite
    entries become ``+-clip_norm`` and the spectrum is clipped to
    ``[-clip_norm, clip_norm]``.
    """

    def __init__(self, space_dim, fiber_dim, evaluator, nonneg_required=True,
                 singular_policy="reject", clip_norm=None,
                 tolerance=linalg.DEFAULT_TOLERANCE, name="custom"):
        if singular_policy not in ("reject", "clip"):
            raise ValidationError(f"unknown singular policy {singular_policy!r}")
        if singular_policy == "clip" and not (clip_norm and clip_norm > 0):
            raise ValidationError("clip policy needs a positive clip_norm")
        self.space_dim = int(space_dim)
        self.fiber_dim = int(fiber_dim)
        self.evaluator = evaluator
        self.nonneg_required = bool(nonneg_required)
        self.singular_policy = singular_policy
        self.clip_norm = clip_norm
        self.tolerance = tolerance
        self.name = name

    def __repr__(self):
        return f"Potential({self.name}, n={self.space_dim}, d={self.fiber_dim})"

    @property
    def is_zero(self):
        return isinstance(self.evaluator, ZeroPotential)

    def raw(self, points):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            values = np.asarray(self.evaluator(points), dtype=complex)
        expected = points.shape[:-1] + (self.fiber_dim, self.fiber_dim)
        if values.shape != expected:
            raise FieldError(f"potential evaluator returned shape {values.shape}, expected {expected}")
        return values

    def sanitize(self, values):
        """Apply the singular policy; returns ``(values, rejected_mask)``."""
        bad = ~np.all(np.isfinite(values), axis=(-2, -1))
        if self.singular_policy == "reject":
            return values, bad
        c = float(self.clip_norm)
        re = np.nan_to_num(values.real, nan=0.0, posinf=c, neginf=-c)
        im = np.nan_to_num(values.imag, nan=0.0, posinf=c, neginf=-c)
        values = re + 1j * im
        lo, hi = linalg.hermitian_extreme_eigenvalues(0.5 * (values + linalg.dagger(values)))
        over = (hi > c) | (lo < -c)
        if np.any(over):
            H = 0.5 * (values[over] + linalg.dagger(values[over]))
            w, Q = np.linalg.eigh(H)
            values[over] = (Q * np.clip(w, -c, c)[..., None, :]) @ linalg.dagger(Q)
        return values, np.zeros(bad.shape, dtype=bool)

    def batch(self, points, check=True):
        """Values at a batch of points; raises on contract violations."""
        values, bad = self.sanitize(self.raw(points))
        if np.any(bad):
            first = int(np.flatnonzero(bad.reshape(-1))[0])
            raise SampleError("potential is not finite at a sampled point", index=first)
        if check:
            self.check(values)
        return values

    def check(self, values):
        if _max_entry(values - linalg.dagger(values)) > self.tolerance / self.fiber_dim:
            raise FieldError("potential value is not Hermitian")
        if self.nonneg_required:
            lo, _ = linalg.hermitian_extreme_eigenvalues(values)
            if np.any(lo < -self.tolerance):
                raise FieldError("potential not nonnegative")


def evaluate_potential(pot, x):
    x = _points(x, pot.space_dim)
    if x.ndim != 1:
        raise ValidationError("evaluate_potential takes a single point")
    values, bad = pot.sanitize(pot.raw(x))
    if bad:
        raise SampleError("potential is not finite at this point")
    if linalg.hermitian_defect(values) > pot.tolerance:
        raise FieldError("potential value is not Hermitian")
    if pot.nonneg_required:
        lo, _ = linalg.hermitian_extreme_eigenvalues(values)
        if lo < -pot.tolerance:
            raise FieldError("potential not nonnegative")
    return values


class ZeroPotential:
    def __init__(self, d):
        self.d = d

    def __call__(self, x):
        return np.zeros(x.shape[:-1] + (self.d, self.d), dtype=complex)


class ConstantPotential:
    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=complex)

    def __call__(self, x):
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape).copy()


class DiagonalPolynomialWell:
    """``diag(scales) * min(|x - center|**power, cap)``."""

    def __init__(self, scales, power=2.0, center=None, cap=None):
        self.scales = np.asarray(scales, dtype=float)
        self.power = float(power)
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.cap = cap

    def __call__(self, x):
        r = x if self.center is None else x - self.center
        if self.power == 2.0:
            radial = np.sum(r * r, axis=-1)
        else:
            radial = np.linalg.norm(r, axis=-1) ** self.power
        if self.cap is not None:
            radial = np.minimum(radial, self.cap)
        out = np.zeros(x.shape[:-1] + (self.scales.size,) * 2, dtype=complex)
        idx = np.arange(self.scales.size)
        out[..., idx, idx] = radial[..., None] * self.scales
        return out


class InverseDistance:
    """``strength / |x - center|`` times the identity (Coulomb-like)."""

    def __init__(self, d, strength=1.0, center=None):
        self.d = d
        self.strength = float(strength)
        self.center = None if center is None else np.asarray(center, dtype=float)

    def __call__(self, x):
        r = x if self.center is None else x - self.center
        v = self.strength / np.linalg.norm(r, axis=-1)
        return v[..., None, None] * np.eye(self.d)


class Truncated:
    """Spectral truncation ``min(v_j, m)`` of another evaluator."""

    def __init__(self, base, level, tolerance=linalg.DEFAULT_TOLERANCE):
        self.base = base
        self.level = float(level)
        self.tolerance = tolerance

    def __call__(self, x):
        return linalg.truncate_nonnegative(self.base(x), self.level, self.tolerance)


def truncated(pot, level):
    """The bounded nonnegative potential ``V_m`` obtained by clipping eigenvalues at ``level``."""
    if not pot.nonneg_required:
        raise DomainError("truncation is defined for nonnegative potentials")
    return Potential(pot.space_dim, pot.fiber_dim, Truncated(pot.evaluator, level, pot.tolerance),
                     nonneg_required=True, singular_policy=pot.singular_policy,
                     clip_norm=pot.clip_norm, tolerance=pot.tolerance,
                     name=f"{pot.name}|m={level:g}")


# --------------------------------------------------------------------------
# tabulated fields


class Tabulated:
    """Multilinear interpolation of matrix values on a tensor grid.

    Points outside the grid are clamped onto it.
    """

    def __init__(self, axes, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.values = np.asarray(values, dtype=complex)
        stacked = np.stack([self.values.real, self.values.imag], axis=-1)
        self._interp = RegularGridInterpolator(self.axes, stacked, method="linear")
        self._lo = np.array([a[0] for a in self.axes])
        self._hi = np.array([a[-1] for a in self.axes])

    def __call__(self, x):
        flat = np.clip(x.reshape(-1, x.shape[-1]), self._lo, self._hi)
        out = self._interp(flat)
        tail = self.values.shape[len(self.axes):]
        out = out[..., 0] + 1j * out[..., 1]
        return out.reshape(x.shape[:-1] + tail)

    def __getstate__(self):
        return {"axes": self.axes, "values": self.values}

    def __setstate__(self, state):
        self.__init__(state["axes"], state["values"])


def read_tabulated(path, space_dim, fiber_dim, components=None):
    """Read a grid file: per line n coordinates then ``components * d*d`` (re, im) pairs.

    ``components=None`` reads a single matrix per node (a potential); an
    integer keeps the component axis (a gauge field).
    """
    data = np.loadtxt(path, ndmin=2)
    d2 = fiber_dim * fiber_dim
    k = 1 if components is None else components
    width = space_dim + 2 * k * d2
    if data.shape[1] != width:
        raise ValidationError(f"tabulated file has {data.shape[1]} columns, expected {width}")
    coords = data[:, :space_dim]
    axes = [np.unique(coords[:, j]) for j in range(space_dim)]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != len(data):
        raise ValidationError("tabulated nodes do not form a full tensor grid")
    idx = tuple(np.searchsorted(axes[j], coords[:, j]) for j in range(space_dim))
    pairs = data[:, space_dim:].reshape(len(data), k, fiber_dim, fiber_dim, 2)
    values = np.empty(shape + (k, fiber_dim, fiber_dim), dtype=complex)
    values[idx] = pairs[..., 0] + 1j * pairs[..., 1]
    if components is None:
        values = values[..., 0, :, :]
    return axes, values


def write_tabulated(path, axes, values):
    """Inverse of :func:`read_tabulated` (``values`` shaped grid + (k,) d x d or grid + d x d)."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    values = np.asarray(values, dtype=complex)
    n = len(axes)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    flat = values.reshape(mesh.shape[0], -1)
    with open(path, "w") as fh:
        for x, row in zip(mesh, flat):
            nums = [repr(float(c)) for c in x]
            for z in row:
                nums += [repr(float(z.real)), repr(float(z.imag))]
            fh.write(" ".join(nums) + "\n")


# --------------------------------------------------------------------------
# presets


def _complex_matrix(literal, name):
    """Matrix literal: rows of [re, im] pairs (plain numbers are real)."""
    arr = np.asarray(literal, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] == 2 and arr.ndim == 3:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ValidationError(f"{name}: cannot read matrix literal of shape {arr.shape}")


def _complex_matrices(literal, name):
    arr = np.asarray(literal, dtype=float)
    if arr.ndim == 4 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 3:
        return arr.astype(complex)
    raise ValidationError(f"{name}: cannot read matrix list of shape {arr.shape}")


GAUGE_PRESETS = ("zero", "constant_gauge", "scalar_magnetic", "pauli_like", "su2_rotation", "tabulated")
POTENTIAL_PRESETS = ("zero", "constant_potential", "diagonal_polynomial_well",
                     "inverse_distance", "tabulated")


def make_gauge(preset, space_dim, fiber_dim, **params):
    """Build a :class:`GaugeField` from a preset name and parameters."""
    n, d = int(space_dim), int(fiber_dim)
    tol = params.pop("tolerance", linalg.DEFAULT_TOLERANCE)
    if preset == "zero":
        ev = ZeroGauge(n, d)
    elif preset == "constant_gauge":
        if "pauli" in params:
            if d != 2:
                raise ValidationError("pauli coefficients need fiber_dim 2")
            coeffs = np.asarray(params.pop("pauli"), dtype=float)
            if coeffs.shape != (n, 3):
                raise ValidationError("pauli coefficients must be n rows of 3 numbers")
            mats = 1j * np.tensordot(coeffs, PAULI, axes=(1, 0))
        else:
            mats = _complex_matrices(params.pop("matrices"), "constant_gauge.matrices")
        if mats.shape != (n, d, d):
            raise ValidationError(f"constant_gauge needs {n} matrices of size {d}x{d}")
        if np.any(linalg.skew_defect(mats) > tol):
            raise ValidationError("constant_gauge matrices must be skew-Hermitian")
        ev = ConstantGauge(mats)
    elif preset in ("scalar_magnetic", "pauli_like"):
        if preset == "scalar_magnetic" and d != 1:
            raise ValidationError("scalar_magnetic needs fiber_dim 1")
        b = np.atleast_1d(np.asarray(params.pop("b"), dtype=float))
        if b.shape != (n,):
            raise ValidationError(f"{preset}.b must have {n} entries")
        ev = ScalarOneForm(b, params.pop("gradient", None), d)
    elif preset == "su2_rotation":
        if d != 2:
            raise ValidationError("su2_rotation needs fiber_dim 2")
        ev = SU2Rotation(n, params.pop("strength", 1.0), params.pop("wavevector", None),
                         params.pop("phases", None), params.pop("tilt", None))
    elif preset == "tabulated":
        axes, values = read_tabulated(params.pop("file"), n, d, n)
        gauge = GaugeField(n, d, Tabulated(axes, values), derivative_mode="finite_difference",
                           fd_step=params.pop("fd_step", None), tolerance=tol, name="tabulated")
        _no_leftovers(preset, params)
        return gauge
    else:
        raise ValidationError(f"unknown gauge preset {preset!r}")
    _no_leftovers(preset, params)
    return GaugeField(n, d, ev, divergence=ev.divergence, tolerance=tol, name=preset)


def make_potential(preset, space_dim, fiber_dim, **params):
    """Build a :class:`Potential` from a preset name and parameters."""
    n, d = int(space_dim), int(fiber_dim)
    common = {
        "nonneg_required": params.pop("nonneg_required", True),
        "singular_policy": params.pop("singular_policy", "reject"),
        "clip_norm": params.pop("clip_norm", None),
        "tolerance": params.pop("tolerance", linalg.DEFAULT_TOLERANCE),
    }
    if preset == "zero":
        ev = ZeroPotential(d)
    elif preset == "constant_potential":
        mat = _complex_matrix(params.pop("matrix"), "constant_potential.matrix")
        if mat.shape != (d, d):
            raise ValidationError(f"constant_potential needs a {d}x{d} matrix")
        if linalg.hermitian_defect(mat) > common["tolerance"]:
            raise ValidationError("constant_potential matrix must be Hermitian")
        ev = ConstantPotential(mat)
    elif preset == "diagonal_polynomial_well":
        scales = np.asarray(params.pop("scales", np.ones(d)), dtype=float)
        if scales.shape != (d,):
            raise ValidationError(f"diagonal_polynomial_well.scales must have {d} entries")
        center = params.pop("center", None)
        if center is not None and np.asarray(center).shape != (n,):
            raise ValidationError(f"diagonal_polynomial_well.center must have {n} entries")
        ev = DiagonalPolynomialWell(scales, params.pop("power", 2.0), center, params.pop("cap", None))
    elif preset == "inverse_distance":
        center = params.pop("center", None)
        if center is not None and np.asarray(center).shape != (n,):
            raise ValidationError(f"inverse_distance.center must have {n} entries")
        ev = InverseDistance(d, params.pop("strength", 1.0), center)
    elif preset == "tabulated":
        axes, values = read_tabulated(params.pop("file"), n, d)
        ev = Tabulated(axes, values)
    else:
        raise ValidationError(f"unknown potential preset {preset!r}")
    _no_leftovers(preset, params)
    return Potential(n, d, ev, name=preset, **common)


def _no_leftovers(preset, params):
    if params:
        raise ValidationError(f"unknown parameters for preset {preset!r}: {sorted(params)}")


# --------------------------------------------------------------------------
# Kato-class diagnostic


@dataclass(frozen=True)
class KatoResult:
    sup_estimate: float
    per_probe: list  # (mean, std_error) per probe
    rejected: list  # rejected path count per probe
    t: float
    n_paths: int
    steps: int
    seed: int


def _kato_chunk(pot, probe, grid, seed, start, stop):
    X = brownian_batch(probe, grid, seed, range(start, stop))
    values, bad = pot.sanitize(pot.raw(X[:, :-1, :]))
    bad_path = bad.any(axis=1)
    good = ~bad_path
    ok = values[good]
    if ok.size and pot.nonneg_required:
        pot.check(ok)
    norms = linalg._operator_norm(ok) if ok.size else np.zeros((0, grid.steps))
    integral = norms.sum(axis=1) * grid.dt if ok.size else np.zeros(0)
    if integral.size:
        m = ensemble.Moments.of(integral[:, None])
    else:
        m = ensemble.Moments(0, np.zeros(1), np.zeros(1))
    return {"integral": m, "rejected": ensemble.Moments(int(bad_path.sum()), np.zeros(1), np.zeros(1))}


def _merge_kato(a, b):
    return {
        "integral": a["integral"].merge(b["integral"]),
        "rejected": ensemble.Moments(a["rejected"].count + b["rejected"].count,
                                     np.zeros(1), np.zeros(1)),
    }


def kato_diagnostic(pot, probes, t, n_paths, steps, seed, workers=1):
    """Monte Carlo estimate of ``E^x[int_0^t |V(X_s)| ds]`` at each probe.

    Left-endpoint Riemann sums on the path grid; paths hitting a non-finite
    value under the ``reject`` policy are dropped.
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    if n_paths < 2:
        raise ValidationError("need at least two paths")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[0] == 0 or probes.shape[1] != pot.space_dim:
        raise ValidationError("probes must be a nonempty list of points")
    grid = TimeGrid(float(t), int(steps))
    per_probe, rejected = [], []
    for probe in probes:
        task = partial(_kato_chunk, pot, probe, grid, seed)
        chunks = ensemble.run_chunks(task, n_paths, workers)
        stats = ensemble.tree_reduce(chunks, _merge_kato)
        m = stats["integral"]
        if m.count == 0:
            raise DiagnosticError(f"all paths from probe {probe.tolist()} were rejected")
        se = float(m.std_error[0]) if m.count > 1 else float("inf")
        per_probe.append((float(m.mean[0]), se))
        rejected.append(stats["rejected"].count)
    sup = max(mean for mean, _ in per_probe)
    return KatoResult(sup, per_probe, rejected, float(t), int(n_paths), int(steps), int(seed))
