"""Monte Carlo estimators for ``exp(-tH)``: action on functions, kernel, trace.

``H`` is the closure of ``-1/2 sum_j (d_j + alpha_j)^2 + V``.  With ``A`` the
ordered exponential of :mod:`fkmat.transport`,

* ``exp(-tH) f(x) = E^x[A_t f(X_t)]`` over Brownian paths from ``x``;
* ``exp(-tH)(x, y) = p_t(x, y) E^{x,y}[A_t]`` over bridges from ``x`` to ``y``;
* ``tr exp(-tH) = int tr exp(-tH)(x, x) dx``, truncated to a box.

All ensembles run through :mod:`fkmat.ensemble`, so estimates are bit-identical
for a fixed ``(seed, n_paths)`` whatever the worker count.  Path ``i`` always
uses the random stream ``(seed, i)``; estimates at different points therefore
share random numbers, which is what the line profile and the trace quadrature
rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import ensemble, linalg
from .errors import DomainError, FieldError, ValidationError
from .fields import Tabulated, _points
from .paths import TimeGrid, bridge_batch, brownian_batch, heat_kernel
from .transport import as_scheme, transport_batch

# --------------------------------------------------------------------------
# vector fields


class VectorField:
    """``f: R^n -> C^d`` with a vectorised evaluator ``(..., n) -> (..., d)``.

    ``bound`` is an optional hint for ``sup |f|``.
    """

    def __init__(self, space_dim, fiber_dim, evaluator, bound=None, name="custom"):
        self.space_dim = int(space_dim)
        self.fiber_dim = int(fiber_dim)
        self.evaluator = evaluator
        self.bound = bound
        self.name = name

    def __repr__(self):
        return f"VectorField({self.name}, n={self.space_dim}, d={self.fiber_dim})"

    def batch(self, points):
        points = _points(points, self.space_dim)
        values = np.asarray(self.evaluator(points), dtype=complex)
        if values.shape != points.shape[:-1] + (self.fiber_dim,):
            raise FieldError(f"vector field returned shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise FieldError("vector field is not finite")
        return values

    def __call__(self, x):
        return self.batch(np.asarray(x, dtype=float))


class GaussianBump:
    def __init__(self, center, width, direction):
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)
        self.direction = np.asarray(direction, dtype=complex)

    def __call__(self, x):
        r2 = np.sum((x - self.center) ** 2, axis=-1)
        return np.exp(-0.5 * r2 / self.width**2)[..., None] * self.direction


class BoxIndicator:
    def __init__(self, lower, upper, direction):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.direction = np.asarray(direction, dtype=complex)

    def __call__(self, x):
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        return inside[..., None] * self.direction


class ConstantVector:
    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=complex)

    def __call__(self, x):
        return np.broadcast_to(self.vector, x.shape[:-1] + self.vector.shape).copy()


VECTOR_PRESETS = ("gaussian_bump", "coordinate_indicator", "constant", "tabulated")


def _direction(params, d):
    raw = params.pop("direction", None)
    if raw is None:
        v = np.zeros(d, dtype=complex)
        v[0] = 1.0
        return v
    arr = np.asarray(raw, dtype=float)
    v = arr[..., 0] + 1j * arr[..., 1] if arr.ndim == 2 else arr.astype(complex)
    if v.shape != (d,):
        raise ValidationError(f"direction must have {d} entries")
    return v


def make_vector_field(preset, space_dim, fiber_dim, **params):
    """Build a :class:`VectorField` from a preset name.

    ``gaussian_bump(center, width, direction)``,
    ``coordinate_indicator(lower, upper, direction)`` (indicator of a box),
    ``constant(direction)`` and ``tabulated(axes, values)`` (values shaped
    grid + ``(d,)``, multilinear interpolation, clamped outside the grid).
    """
    n, d = int(space_dim), int(fiber_dim)

    def vec(key, default):
        v = np.asarray(params.pop(key, default), dtype=float).reshape(-1)
        if v.shape != (n,):
            raise ValidationError(f"{preset}.{key} must have {n} entries")
        return v

    if preset == "gaussian_bump":
        center = vec("center", np.zeros(n))
        width = float(params.pop("width", 1.0))
        if not width > 0:
            raise ValidationError("gaussian_bump.width must be positive")
        direction = _direction(params, d)
        ev, bound = GaussianBump(center, width, direction), float(np.linalg.norm(direction))
    elif preset == "coordinate_indicator":
        lower, upper = vec("lower", -np.ones(n)), vec("upper", np.ones(n))
        direction = _direction(params, d)
        ev, bound = BoxIndicator(lower, upper, direction), float(np.linalg.norm(direction))
    elif preset == "constant":
        direction = _direction(params, d)
        ev, bound = ConstantVector(direction), float(np.linalg.norm(direction))
    elif preset == "tabulated":
        axes = params.pop("axes")
        values = np.asarray(params.pop("values"), dtype=complex)
        if len(axes) != n or values.shape[-1] != d:
            raise ValidationError("tabulated vector field has the wrong dimensions")
        ev, bound = Tabulated(axes, values), float(np.abs(values).max(initial=0.0) * np.sqrt(d))
    else:
        raise ValidationError(f"unknown vector field preset {preset!r}")
    if params:
        raise ValidationError(f"unknown parameters for preset {preset!r}: {sorted(params)}")
    return VectorField(n, d, ev, bound=bound, name=preset)


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with per-real-component standard errors packed as ``re + 1j*im``."""

    value: np.ndarray
    std_error: np.ndarray
    n_paths: int
    seed: int
    scheme: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class KernelEstimate:
    matrix: np.ndarray
    prefactor: float
    bridge_mean: np.ndarray
    std_error: np.ndarray  # of ``matrix``, packed like McEstimate
    n_paths: int
    seed: int
    scheme: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TraceEstimate:
    value: float
    std_error: float
    box: tuple
    nodes: int
    n_paths: int
    seed: int
    scheme: str
    note: str = "integral truncated to the box; the trace over R^n may be larger or infinite"


class _Max:
    """Running maximum that merges like :class:`ensemble.Moments`."""

    def __init__(self, value):
        self.value = float(value)

    def merge(self, other):
        return _Max(max(self.value, other.value))


def _require_nonneg(pot):
    if not pot.nonneg_required:
        raise DomainError("semigroup estimators need a potential with nonneg_required=True")


def _check_common(gauge, pot, t, n_paths):
    _require_nonneg(pot)
    if not t > 0:
        raise DomainError("t must be positive")
    if n_paths < 2:
        raise ValidationError("need at least two paths")
    if gauge.space_dim != pot.space_dim or gauge.fiber_dim != pot.fiber_dim:
        raise ValidationError("gauge and potential dimensions differ")


def _estimate(mom):
    return ensemble.complex_mean(mom), ensemble.complex_std_error(mom)


# --------------------------------------------------------------------------
# action on functions


def _action_chunk(f, x, grid, gauge, pot, scheme, seed, start, stop):
    X = brownian_batch(x, grid, seed, range(start, stop))
    bt = transport_batch(X, grid.dt, gauge, pot, scheme, path_offset=start)
    fx = f.batch(X[:, -1, :])
    samples = np.einsum("bij,bj->bi", bt.matrices, fx)
    return {
        "value": ensemble.complex_moments(samples),
        "fnorm": ensemble.Moments.of(np.linalg.norm(fx, axis=-1)[:, None]),
        "max_norm": _Max(bt.norms.max()),
        "max_sample_excess": _Max(np.max(np.linalg.norm(samples, axis=-1)
                                         - np.linalg.norm(fx, axis=-1))),
    }


def _run_action(f, x, t, gauge, pot, scheme, n_paths, steps, seed, workers):
    _check_common(gauge, pot, t, n_paths)
    x = _points(np.atleast_1d(x), gauge.space_dim)
    if f.fiber_dim != gauge.fiber_dim or f.space_dim != gauge.space_dim:
        raise ValidationError("vector field dimensions do not match the fields")
    grid = TimeGrid(float(t), int(steps))
    task = partial(_action_chunk, f, x, grid, gauge, pot, as_scheme(scheme).tag, int(seed))
    return ensemble.reduce_chunks(task, int(n_paths), workers)


def apply_semigroup(f, x, t, gauge, pot, scheme="exp_midpoint", n_paths=10_000, steps=128,
                    seed=0, workers=1):
    """Estimate ``exp(-tH) f(x)`` as the mean of ``A_t f(X_t)`` over Brownian paths."""
    stats = _run_action(f, x, t, gauge, pot, scheme, n_paths, steps, seed, workers)
    value, se = _estimate(stats["value"])
    diag = {"max_transport_norm": stats["max_norm"].value,
            "max_sample_excess": stats["max_sample_excess"].value}
    return McEstimate(value, se, int(n_paths), int(seed), as_scheme(scheme).tag, diag)


def semigroup_domination_check(f, x, t, gauge, pot, scheme="exp_midpoint", n_paths=10_000,
                               steps=128, seed=0, workers=1):
    """``(|E[A_t f(X_t)]|, E[|f(X_t)|])`` on the same paths, plus the rhs standard error."""
    stats = _run_action(f, x, t, gauge, pot, scheme, n_paths, steps, seed, workers)
    value, se = _estimate(stats["value"])
    lhs = float(np.linalg.norm(value))
    rhs = float(stats["fnorm"].mean[0])
    lhs_err = float(np.linalg.norm(np.concatenate([se.real, se.imag])))
    return lhs, rhs, lhs_err + float(stats["fnorm"].std_error[0])


# --------------------------------------------------------------------------
# kernel


def _bridges(x, y, grid, seed, start, stop, pairing):
    """Bridges ``x -> y``; with pairing, the ordered pair decides which end is sampled."""
    if pairing and tuple(x) > tuple(y):
        return bridge_batch(y, x, grid, seed, range(start, stop))[:, ::-1, :]
    return bridge_batch(x, y, grid, seed, range(start, stop))


def _kernel_chunk(x, y, grid, gauge, pot, scheme, seed, pairing, start, stop):
    X = _bridges(x, y, grid, seed, start, stop, pairing)
    bt = transport_batch(X, grid.dt, gauge, pot, scheme, path_offset=start)
    return {"mean": ensemble.complex_moments(bt.matrices), "max_norm": _Max(bt.norms.max())}


def kernel(x, y, t, gauge, pot, scheme="exp_midpoint", n_paths=10_000, steps=128, seed=0,
           workers=1, pairing=True):
    """Estimate the integral kernel ``exp(-tH)(x, y) = p_t(x, y) E^{x,y}[A_t]``.

    With ``pairing`` (the default) the bridges for ``(x, y)`` and ``(y, x)``
    are exact time reversals of each other, so the estimates satisfy
    ``K(y, x) = K(x, y)^H`` up to roundoff.
    """
    _check_common(gauge, pot, t, n_paths)
    x = _points(np.atleast_1d(x), gauge.space_dim)
    y = _points(np.atleast_1d(y), gauge.space_dim)
    grid = TimeGrid(float(t), int(steps))
    tag = as_scheme(scheme).tag
    task = partial(_kernel_chunk, x, y, grid, gauge, pot, tag, int(seed), bool(pairing))
    stats = ensemble.reduce_chunks(task, int(n_paths), workers)
    mean, se = _estimate(stats["mean"])
    p = heat_kernel(x, y, t)
    diag = {"max_transport_norm": stats["max_norm"].value,
            "norm_bound": (2.0 * np.pi * t) ** (-0.5 * gauge.space_dim)}
    return KernelEstimate(p * mean, float(p), mean, p * se, int(n_paths), int(seed), tag, diag)


# --------------------------------------------------------------------------
# quadrature over boxes


def box_quadrature(box, spacing):
    """Nodes and trapezoid weights on an axis-aligned box with the given spacing.

    ``box`` is a list of ``(lo, hi)`` per axis; each axis gets
    ``round((hi - lo) / spacing) + 1`` equispaced nodes including both ends.
    """
    axes, weights = [], []
    for lo, hi in box:
        if not hi > lo:
            raise ValidationError("box needs lo < hi on every axis")
        m = int(round((hi - lo) / spacing))
        if m < 1:
            raise ValidationError("quadrature spacing is larger than the box")
        a = np.linspace(lo, hi, m + 1)
        w = np.full(m + 1, (hi - lo) / m)
        w[[0, -1]] *= 0.5
        axes.append(a)
        weights.append(w)
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    W = weights[0]
    for w in weights[1:]:
        W = np.multiply.outer(W, w)
    return nodes, np.asarray(W).reshape(-1)


def _kernel_quadrature_chunk(x, nodes, coeffs, grid, gauge, pot, scheme, seed, pairing,
                             start, stop, trace=False):
    """Per-path sum over nodes ``i`` of ``coeffs_i * A(path_i)`` (contracted with a vector or traced)."""
    total = None
    for i, y in enumerate(nodes):
        xi = y if trace else x
        X = _bridges(xi, y, grid, seed, start, stop, pairing)
        M = transport_batch(X, grid.dt, gauge, pot, scheme, path_offset=start).matrices
        term = np.trace(M, axis1=-2, axis2=-1) * coeffs[i] if trace else M @ coeffs[i]
        total = term if total is None else total + term
    if trace:
        return {"sum": ensemble.Moments.of(total.real[:, None])}
    return {"sum": ensemble.complex_moments(total)}


def kernel_consistency(f, x, t, box, spacing, gauge, pot, scheme="exp_midpoint",
                       n_paths=10_000, steps=128, seed=0, workers=1):
    """``(direct, via_kernel)`` estimates of ``exp(-tH) f(x)``.

    ``via_kernel`` is the trapezoid sum over box nodes ``y_i`` of
    ``K(x, y_i) f(y_i) w_i``; every node uses the same path indices and the
    standard error is taken over the per-path quadrature sums.
    """
    direct = apply_semigroup(f, x, t, gauge, pot, scheme, n_paths, steps, seed, workers)
    x = _points(np.atleast_1d(x), gauge.space_dim)
    nodes, w = box_quadrature(box, spacing)
    coeffs = np.array([heat_kernel(x, y, t) for y in nodes])[:, None] * w[:, None] * f.batch(nodes)
    grid = TimeGrid(float(t), int(steps))
    tag = as_scheme(scheme).tag
    task = partial(_kernel_quadrature_chunk, x, nodes, coeffs, grid, gauge, pot, tag, int(seed),
                   True)
    stats = ensemble.reduce_chunks(task, int(n_paths), workers)
    value, se = _estimate(stats["sum"])
    via = McEstimate(value, se, int(n_paths), int(seed), tag, {"nodes": len(nodes)})
    return direct, via


def trace_estimate(t, box, spacing, gauge, pot, scheme="exp_midpoint", n_paths=1_000,
                   steps=64, seed=0, workers=1):
    """Box-truncated ``int tr exp(-tH)(x, x) dx`` by trapezoid quadrature.

    Each node uses ``n_paths`` closed bridges; the standard error is taken
    over the per-path quadrature sums.
    """
    _check_common(gauge, pot, t, n_paths)
    box = [tuple(map(float, b)) for b in box]
    if len(box) != gauge.space_dim:
        raise ValidationError(f"box needs {gauge.space_dim} axis ranges")
    nodes, w = box_quadrature(box, spacing)
    coeffs = w * (2.0 * np.pi * t) ** (-0.5 * gauge.space_dim)
    grid = TimeGrid(float(t), int(steps))
    tag = as_scheme(scheme).tag
    task = partial(_kernel_quadrature_chunk, None, nodes, coeffs, grid, gauge, pot, tag,
                   int(seed), False, trace=True)
    stats = ensemble.reduce_chunks(task, int(n_paths), workers)
    m = stats["sum"]
    return TraceEstimate(float(m.mean[0]), float(m.std_error[0]), tuple(box), len(nodes),
                         int(n_paths), int(seed), tag)


# --------------------------------------------------------------------------
# diagnostics


def _defect_chunk(x, grid, gauge, pot, scheme, seed, start, stop):
    X = brownian_batch(x, grid, seed, range(start, stop))
    M = transport_batch(X, grid.dt, gauge, pot, scheme, path_offset=start).matrices
    defect = linalg._operator_norm(M - np.eye(M.shape[-1]))
    return {"defect": ensemble.Moments.of(defect[:, None])}


def small_time_statistic(probes, times, gauge, pot, scheme="exp_midpoint", n_paths=4_096,
                         steps=64, seed=0, workers=1):
    """For each ``t``: ``(max over probes of mean |A_t - 1|, std error at the maximising probe)``.

    Every ``t`` uses ``steps`` steps and the same path indices.
    """
    _require_nonneg(pot)
    probes = np.atleast_2d(_points(probes, gauge.space_dim))
    out = []
    for t in times:
        grid = TimeGrid(float(t), int(steps))
        best = None
        for x in probes:
            task = partial(_defect_chunk, x, grid, gauge, pot, as_scheme(scheme).tag, int(seed))
            m = ensemble.reduce_chunks(task, int(n_paths), workers)["defect"]
            cand = (float(m.mean[0]), float(m.std_error[0]))
            if best is None or cand[0] > best[0]:
                best = cand
        out.append(best)
    return out


def line_profile(f, start, stop, count, t, gauge, pot, scheme="exp_midpoint", n_paths=4_096,
                 steps=64, seed=0, workers=1):
    """Estimates of ``exp(-tH) f`` at ``count`` equispaced points on a segment.

    All points share random numbers, so adjacent differences are smooth.
    Returns ``(points, values)`` with ``values`` of shape ``(count, d)``.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    stop = np.atleast_1d(np.asarray(stop, dtype=float))
    s = np.linspace(0.0, 1.0, int(count))
    points = start + s[:, None] * (stop - start)
    values = np.array([apply_semigroup(f, p, t, gauge, pot, scheme, n_paths, steps, seed,
                                       workers).value for p in points])
    return points, values


def lipschitz_statistic(points, values):
    """``max_k |v_{k+1} - v_k| / |x_{k+1} - x_k|`` along a profile."""
    dv = np.linalg.norm(np.diff(values, axis=0), axis=-1)
    dx = np.linalg.norm(np.diff(points, axis=0), axis=-1)
    return float(np.max(dv / dx))
