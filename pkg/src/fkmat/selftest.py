"""Fast invariant checks over every module, for ``fkmat selftest``."""

from __future__ import annotations

import numpy as np

from . import exact, linalg, ode, reference
from .fields import make_gauge, make_potential
from .paths import RandomnessSpec, TimeGrid, heat_kernel, reverse, sample_bridge
from .semigroup import kernel
from .transport import SCHEMES, adjoint_reversal_check, transport, transport_inverse


def _skew_exp_unitarity():
    rng = np.random.default_rng(11)
    worst = 0.0
    for d in (1, 2, 3, 4):
        G = rng.normal(size=(200, d, d)) + 1j * rng.normal(size=(200, d, d))
        S = 0.5 * (G - linalg.dagger(G))
        ratio = linalg.unitarity_defect(linalg.matrix_exp(S)) / (16 * d * linalg.EPS * (1 + linalg.operator_norm(S)))
        worst = max(worst, float(ratio.max()))
    return worst <= 1.0, f"max defect / bound = {worst:.3g}"


def _transport_identities():
    gauge = make_gauge("su2_rotation", 1, 2, strength=1.2)
    pot = make_potential("diagonal_polynomial_well", 1, 2, scales=[0.5, 1.0])
    grid = TimeGrid(1.0, 256)
    path = sample_bridge([0.2], [-0.4], grid, RandomnessSpec(5, 0))
    worst = 0.0
    for scheme in SCHEMES:
        full = transport(path, 0, 256, gauge, pot, scheme).matrix
        split = transport(path, 0, 97, gauge, pot, scheme).matrix @ transport(path, 97, 256, gauge, pot, scheme).matrix
        inv = transport_inverse(path, 0, 256, gauge, pot, scheme).matrix
        worst = max(worst, float(linalg.operator_norm(full - split)),
                    float(linalg.operator_norm(inv @ full - np.eye(2))))
    for scheme in ("exp_midpoint", "product_integral"):
        worst = max(worst, adjoint_reversal_check(path, gauge, pot, scheme))
    same = reverse(reverse(path)).same_as(path)
    return worst <= 1e-10 and same, f"max identity defect = {worst:.3g}"


def _free_kernel():
    gauge = make_gauge("zero", 1, 1)
    pot = make_potential("zero", 1, 1)
    est = kernel([0.3], [-0.9], 0.7, gauge, pot, n_paths=64, steps=16, seed=3)
    ref = heat_kernel([0.3], [-0.9], 0.7)
    err = abs(est.matrix[0, 0] - ref) / ref
    return err <= 1e-12, f"relative error = {err:.3g}"


def _gronwall():
    rng = np.random.default_rng(12)
    worst_a = worst_b = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 5))
        A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        H = 0.5 * (A + linalg.dagger(A))
        B = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        problem = ode.MatrixOdeProblem(0.0, 1.0, lambda s, H=H: np.cos(3 * s) * H)
        c = lambda s, H=H: float(linalg.hermitian_extreme_eigenvalues(np.cos(3 * s) * H)[1])
        lhs, rhs = ode.bound_check_a(problem, c, 64)
        worst_a = max(worst_a, lhs / rhs)
        diff, bound = ode.bound_check_b(lambda s, A=A: np.sin(s) * A, lambda s, B=B: s * B, 0.0, 1.0, 64)
        worst_b = max(worst_b, diff / bound)
    ok = worst_a <= 1 + 1e-10 and worst_b <= 1 + 1e-10
    return ok, f"max ratios a = {worst_a:.6f}, b = {worst_b:.3g}"


def _reference_free_spectrum():
    gauge = make_gauge("zero", 1, 1)
    pot = make_potential("zero", 1, 1)
    op = reference.assemble([(0.0, 1.0)], [50], gauge, pot)
    want = exact.discrete_dirichlet_eigenvalues(op.h[0], 50)
    err = float(np.max(np.abs(op.eigenvalues - want) / want))
    return err <= 1e-10, f"relative eigenvalue error = {err:.3g}"


CHECKS = {
    "skew exponential is unitary": _skew_exp_unitarity,
    "transport multiplicativity, inverse and reversal": _transport_identities,
    "free kernel equals heat kernel": _free_kernel,
    "Gronwall bounds": _gronwall,
    "discrete free Dirichlet spectrum": _reference_free_spectrum,
}


def run():
    """Run every check; returns a list of ``(name, passed, detail)``."""
    return [(name, *check()) for name, check in CHECKS.items()]
