"""Linear matrix initial value problems ``Y' = Y F(s)``, ``Y(t0) = I``.

Integrated by the exponential midpoint rule
``Y_{k+1} = Y_k exp(h F(s_k + h/2))``.  The rule is second order, exact for
constant ``F``, and its one-step factors obey the same norm estimates as the
continuous flow, so the discrete Gronwall bounds checked here hold up to
roundoff rather than up to truncation error.

``F`` must be evaluable pointwise.  A piecewise continuous ``F`` should be
integrated with grid nodes placed on its discontinuities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .errors import NumericError, ValidationError


@dataclass(frozen=True)
class MatrixOdeProblem:
    t0: float
    t1: float
    F: Callable[[float], np.ndarray]

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)) or self.t1 < self.t0:
            raise ValidationError("need finite t0 <= t1")

    def midpoints(self, steps):
        h = (self.t1 - self.t0) / steps
        return self.t0 + h * (np.arange(steps) + 0.5), h

    def sample(self, steps):
        """``F`` at the step midpoints, shape ``(steps, d, d)``, and the step ``h``."""
        if steps < 1:
            raise ValidationError("steps must be >= 1")
        s, h = self.midpoints(steps)
        values = np.array([np.asarray(self.F(float(si)), dtype=complex) for si in s])
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise ValidationError("F must return square matrices")
        if not np.all(np.isfinite(values)):
            k = int(np.flatnonzero(~np.all(np.isfinite(values), axis=(1, 2)))[0])
            raise NumericError(f"F is not finite at s = {s[k]}", step=k)
        return values, h


@dataclass(frozen=True)
class OdeSolution:
    Y: np.ndarray
    norm_trace: np.ndarray


def propagate(F_values, h, out=None):
    """Fold ``Y <- Y exp(h F_k)`` over axis -3 of ``F_values``; ``out`` is the start value."""
    return linalg.ordered_product(linalg._expm(np.asarray(F_values) * h), out=out)


def solve(problem, steps):
    """Integrate ``problem`` on a uniform grid of ``steps`` steps.

    Returns the end value and ``||Y||`` at every node (``steps + 1`` entries).
    """
    F, h = problem.sample(steps)
    factors = linalg._expm(F * h)
    Y = np.eye(F.shape[-1], dtype=complex)
    norms = np.empty(steps + 1)
    norms[0] = 1.0
    for k in range(steps):
        Y = Y @ factors[k]
        norms[k + 1] = linalg._operator_norm(Y)
    if not np.all(np.isfinite(Y)):
        raise NumericError("solution overflowed")
    return OdeSolution(Y, norms)


def adjoint_problem(problem):
    """The problem with ``F`` replaced by ``-F^H``; its solution ``Z`` has ``Z^H Y = I``."""
    return MatrixOdeProblem(problem.t0, problem.t1,
                            lambda s: -linalg.dagger(np.asarray(problem.F(s), dtype=complex)))


def bound_check_a(problem, c, steps, tolerance=linalg.DEFAULT_TOLERANCE):
    """``(||Y(t1)||, exp(int c))`` for Hermitian ``F(s) <= c(s)``.

    The integral of ``c`` uses the same midpoint nodes as the solver.
    """
    F, h = problem.sample(steps)
    if np.any(linalg.hermitian_defect(F) > tolerance):
        raise ValidationError("bound (a) needs Hermitian F")
    s, _ = problem.midpoints(steps)
    cs = np.array([float(c(float(si))) for si in s])
    _, top = linalg.hermitian_extreme_eigenvalues(F)
    if np.any(top > cs + tolerance * (1.0 + np.abs(cs))):
        raise ValidationError("bound (a) needs F(s) <= c(s)")
    Y = propagate(F, h)
    return float(linalg._operator_norm(Y)), float(np.exp(np.sum(cs) * h))


def bound_check_b(F1, F2, t0, t1, steps):
    """``(||Y1 - Y2||, exp(2 int|F1| + int|F2|) int|F1 - F2|)`` at ``t1``."""
    p1 = MatrixOdeProblem(t0, t1, F1)
    p2 = MatrixOdeProblem(t0, t1, F2)
    A, h = p1.sample(steps)
    B, _ = p2.sample(steps)
    if A.shape != B.shape:
        raise ValidationError("F1 and F2 must have the same size")
    diff = float(linalg._operator_norm(propagate(A, h) - propagate(B, h)))
    n1 = linalg._operator_norm(A).sum() * h
    n2 = linalg._operator_norm(B).sum() * h
    gap = linalg._operator_norm(A - B).sum() * h
    return diff, float(np.exp(2.0 * n1 + n2) * gap)
