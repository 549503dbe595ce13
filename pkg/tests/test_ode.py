import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fkmat import linalg
from fkmat.errors import NumericError, ValidationError
from fkmat.ode import MatrixOdeProblem, adjoint_problem, bound_check_a, bound_check_b, solve


def hermitian(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (A + A.conj().T)


def smooth_F(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    B = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return lambda s: np.sin(s) * A + np.cos(2 * s) * B


def oracle(F, t0, t1, d):
    """Y(t1) from an adaptive Runge-Kutta solve of the flattened system."""
    def rhs(s, y):
        Y = y.reshape(d, d)
        return (Y @ F(s)).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.eye(d, dtype=complex).ravel(), method="DOP853",
                    rtol=1e-13, atol=1e-13)
    return sol.y[:, -1].reshape(d, d)


def test_zero_generator():
    sol = solve(MatrixOdeProblem(0.0, 2.0, lambda s: np.zeros((3, 3))), 10)
    assert np.array_equal(sol.Y, np.eye(3)) and np.all(sol.norm_trace == 1.0)
    assert sol.norm_trace.size == 11


def test_constant_scalar_generator():
    c = -0.8
    sol = solve(MatrixOdeProblem(0.5, 2.0, lambda s: c * np.eye(2)), 7)
    assert np.allclose(sol.Y, np.exp(c * 1.5) * np.eye(2), atol=1e-14, rtol=0)


def test_skew_generator_gives_unitary_flow():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    S = 0.5 * (A - A.conj().T)
    sol = solve(MatrixOdeProblem(0.0, 3.0, lambda s: np.cos(s) * S + 1j * s * np.eye(3)), 1000)
    assert linalg.unitarity_defect(sol.Y) <= 1e-8


def test_non_finite_generator():
    with pytest.raises(NumericError):
        solve(MatrixOdeProblem(0.0, 1.0, lambda s: np.full((2, 2), np.inf if s > 0.5 else 0.0)), 4)
    with pytest.raises(ValidationError):
        solve(MatrixOdeProblem(0.0, 1.0, lambda s: np.eye(2)), 0)
    with pytest.raises(ValidationError):
        MatrixOdeProblem(1.0, 0.0, lambda s: np.eye(2))


def test_second_order_convergence():
    rng = np.random.default_rng(2)
    F = smooth_F(rng, 3)
    ref = oracle(F, 0.0, 1.0, 3)
    errs = [np.linalg.norm(solve(MatrixOdeProblem(0.0, 1.0, F), n).Y - ref, 2) for n in (32, 64, 128)]
    for coarse, fine in zip(errs, errs[1:]):
        assert np.log2(coarse / fine) == pytest.approx(2.0, abs=0.15)


def test_adjoint_problem_gives_inverse():
    rng = np.random.default_rng(3)
    p = MatrixOdeProblem(0.0, 1.5, smooth_F(rng, 4))
    Y = solve(p, 200).Y
    Z = solve(adjoint_problem(p), 200).Y
    assert linalg.operator_norm(Z.conj().T @ Y - np.eye(4)) <= 1e-12


def test_bound_a_examples():
    lhs, rhs = bound_check_a(MatrixOdeProblem(0.0, 2.0, lambda s: -np.eye(2)), lambda s: -1.0, 16)
    assert lhs == pytest.approx(np.exp(-2.0), rel=1e-14) and rhs == pytest.approx(np.exp(-2.0), rel=1e-14)
    lhs, rhs = bound_check_a(MatrixOdeProblem(0.0, 1.0, lambda s: np.diag([-2.0, -1.0])),
                             lambda s: -1.0, 16)
    assert lhs == pytest.approx(np.exp(-1.0), rel=1e-14) and rhs == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_bound_a_preconditions():
    with pytest.raises(ValidationError):
        bound_check_a(MatrixOdeProblem(0.0, 1.0, lambda s: np.array([[0, 1.0], [0, 0]])),
                      lambda s: 5.0, 4)
    with pytest.raises(ValidationError):
        bound_check_a(MatrixOdeProblem(0.0, 1.0, lambda s: np.eye(2)), lambda s: 0.5, 4)


def test_bound_b_examples():
    F = lambda s: np.array([[0.0, s], [1.0, 0.0]])
    diff, bound = bound_check_b(F, F, 0.0, 1.0, 32)
    assert diff == 0.0 and bound == 0.0

    c = 0.7
    diff, bound = bound_check_b(lambda s: np.zeros((2, 2)), lambda s: c * np.eye(2), 0.0, 2.0, 32)
    assert diff == pytest.approx(np.expm1(2 * c), rel=1e-13)
    assert bound == pytest.approx(np.exp(2 * c) * 2 * c, rel=1e-13) and diff <= bound

    rng = np.random.default_rng(4)
    diff, bound = bound_check_b(smooth_F(rng, 3), smooth_F(rng, 3), 0.0, 0.5, 64)
    assert diff / bound < 1.0


def test_gronwall_bounds_on_random_problems():
    rng = np.random.default_rng(5)
    worst_a = worst_b = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        H1, H2 = hermitian(rng, d), hermitian(rng, d)
        w = rng.uniform(0.5, 4.0)
        F = lambda s, H1=H1, H2=H2, w=w: np.sin(w * s) * H1 + s * H2
        c = lambda s, F=F: float(np.linalg.eigvalsh(F(s))[-1])
        lhs, rhs = bound_check_a(MatrixOdeProblem(0.0, 1.0, F), c, 24)
        worst_a = max(worst_a, lhs / rhs)
        G1, G2 = smooth_F(rng, d), smooth_F(rng, d)
        diff, bound = bound_check_b(G1, G2, 0.0, rng.uniform(0.1, 1.0), 24)
        worst_b = max(worst_b, diff / bound)
    assert worst_a <= 1 + 1e-6
    assert worst_b <= 1 + 1e-6
