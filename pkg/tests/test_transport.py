import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fkmat import linalg
from fkmat.errors import NumericError, ValidationError
from fkmat.fields import Potential, make_gauge, make_potential
from fkmat.paths import RandomnessSpec, TimeGrid, brownian_batch, sample_bridge, sample_brownian
from fkmat.transport import (
    SCHEMES,
    Scheme,
    adjoint_reversal_check,
    b_increment,
    inverse_batch,
    transport,
    transport_batch,
    transport_inverse,
)

EPS = np.finfo(float).eps
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0 + 0j, -1.0])


def su2():
    return make_gauge("su2_rotation", 1, 2, strength=1.2)


def well():
    return make_potential("diagonal_polynomial_well", 1, 2, scales=[0.5, 1.0])


def path1d(N=256, seed=0, index=0, t=1.0):
    return sample_brownian([0.2], TimeGrid(t, N), RandomnessSpec(seed, index))


def test_scheme_tag_validation():
    with pytest.raises(ValidationError):
        Scheme("euler")


# --- B increments -------------------------------------------------------------------------


def test_b_increment_constant_potential():
    p = path1d(8)
    pot = make_potential("constant_potential", 1, 2, matrix=np.diag([3.0, 3.0]))
    dB = b_increment(p, 2, make_gauge("zero", 1, 2), pot).matrix
    assert np.allclose(dB, -3.0 * p.grid.dt * np.eye(2), atol=1e-16, rtol=0)


def test_b_increment_scalar_magnetic():
    p = path1d(8)
    b = 1.7
    dB = b_increment(p, 5, make_gauge("scalar_magnetic", 1, 1, b=[b]), make_potential("zero", 1, 1))
    dX = p.positions[6, 0] - p.positions[5, 0]
    assert dB.matrix[0, 0] == pytest.approx(1j * b * dX - 0.5 * b * b * p.grid.dt, abs=1e-15)


def test_b_increment_constant_su2_by_hand():
    u = np.array([0.8, 0.0, 0.5])
    g = make_gauge("constant_gauge", 1, 2, pauli=[u.tolist()])
    pot = well()
    p = path1d(16, seed=3)
    k = 7
    dt = p.grid.dt
    dX = p.positions[k + 1, 0] - p.positions[k, 0]
    m = 0.5 * (p.positions[k + 1, 0] + p.positions[k, 0])
    a = 1j * (u[0] * SX + u[1] * SY + u[2] * SZ)
    # a^2 = -|u|^2 I for Pauli combinations
    want = a * dX - np.diag([0.5 * m * m, m * m]) * dt - 0.5 * (u @ u) * dt * np.eye(2)
    assert np.abs(b_increment(p, k, g, pot).matrix - want).max() <= 1e-14


def test_b_increment_index_range():
    with pytest.raises(ValidationError):
        b_increment(path1d(4), 4, su2(), well())


# --- closed-form examples -------------------------------------------------------------------


@pytest.mark.parametrize("scheme", SCHEMES)
def test_free_transport_is_identity(scheme):
    p = path1d(64)
    r = transport(p, 0, 64, make_gauge("zero", 1, 3), make_potential("zero", 1, 3), scheme)
    assert np.array_equal(r.matrix, np.eye(3))
    assert r.diagnostics["unitarity_defect"] == 0.0


@pytest.mark.parametrize("scheme", SCHEMES)
def test_empty_segment_is_identity(scheme):
    p = path1d(16)
    r = transport(p, 5, 5, su2(), well(), scheme)
    assert np.array_equal(r.matrix, np.eye(2)) and r.segment == (5, 5)


def test_segment_bounds():
    with pytest.raises(ValidationError):
        transport(path1d(16), 3, 17, su2(), well())
    with pytest.raises(ValidationError):
        transport(path1d(16), 4, 3, su2(), well())


def test_constant_scalar_potential():
    c, N = 0.7, 100
    p = path1d(N, t=1.3)
    pot = make_potential("constant_potential", 1, 2, matrix=np.diag([c, c]))
    gz = make_gauge("zero", 1, 2)
    for scheme in ("exp_midpoint", "interaction_picture"):
        M = transport(p, 10, 90, gz, pot, scheme).matrix
        assert np.allclose(M, np.exp(-c * 80 * p.grid.dt) * np.eye(2), atol=1e-12, rtol=0)
    M = transport(p, 0, N, gz, pot, "product_integral").matrix
    assert np.allclose(M, (1 - c * p.grid.dt) ** N * np.eye(2), atol=1e-14, rtol=0)
    assert abs(M[0, 0] - np.exp(-c * 1.3)) <= c * c * 1.3 * p.grid.dt


def test_scalar_magnetic_closed_form():
    b = 2.3
    p = path1d(512)
    g = make_gauge("scalar_magnetic", 1, 1, b=[b])
    M = transport(p, 40, 400, g, make_potential("zero", 1, 1)).matrix
    want = np.exp(1j * b * (p.positions[400, 0] - p.positions[40, 0]))
    assert abs(M[0, 0] - want) <= 1e-12


@pytest.mark.parametrize("scheme", SCHEMES)
def test_scalar_reduction(scheme):
    # d = 1: the product of scalar factors is the exponential of the summed exponent
    g = make_gauge("scalar_magnetic", 2, 1, b=[0.4, -1.1], gradient=[[0.0, 0.8], [-0.8, 0.0]])
    pot = make_potential("diagonal_polynomial_well", 2, 1, scales=[0.6])
    p = sample_brownian([0.1, -0.3], TimeGrid(1.0, 256), RandomnessSpec(1, 2))
    X, dt = p.positions, p.grid.dt
    mid, dX = 0.5 * (X[1:] + X[:-1]), np.diff(X, axis=0)
    alpha = g.batch(mid)[:, :, 0, 0]
    V = pot.batch(mid)[:, 0, 0].real
    z = (alpha * dX).sum(axis=1) - V * dt
    if scheme == "product_integral":
        want = np.exp(np.log1p(z + 0.5 * (alpha**2).sum(axis=1) * dt).sum())
    else:
        want = np.exp(z.sum())
    got = transport(p, 0, 256, g, pot, scheme).matrix[0, 0]
    assert abs(got - want) <= 1e-12


# --- structural identities ------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 256), st.sampled_from(SCHEMES))
def test_multiplicativity(seed, k, scheme):
    N = 256
    p = sample_bridge([0.3], [-0.5], TimeGrid(1.0, N), RandomnessSpec(seed, 0))
    g, pot = su2(), well()
    full = transport(p, 0, N, g, pot, scheme).matrix
    left = transport(p, 0, k, g, pot, scheme).matrix
    right = transport(p, k, N, g, pot, scheme).matrix
    scale = max(1.0, linalg.operator_norm(left) * linalg.operator_norm(right))
    assert linalg.operator_norm(full - left @ right) <= 64 * 2 * EPS * N * scale


@pytest.mark.parametrize("seed", range(5))
def test_unitarity_without_potential(seed):
    N = 512
    g = make_gauge("su2_rotation", 2, 2, wavevector=[1.0, 0.3], tilt=[0.2, -0.4])
    X = brownian_batch([0.0, 0.5], TimeGrid(2.0, N), seed, range(64))
    bt = transport_batch(X, 2.0 / N, g, make_potential("zero", 2, 2))
    assert bt.unitarity_defects.max() <= 16 * 2 * EPS * N


@pytest.mark.parametrize("scheme", ["exp_midpoint", "interaction_picture"])
@pytest.mark.parametrize("preset, params", [
    ("su2_rotation", {"strength": 2.0}),
    ("constant_gauge", {"pauli": [[0.8, 0.0, 0.5]]}),
    ("pauli_like", {"b": [1.0]}),
])
def test_contraction_with_nonnegative_potential(scheme, preset, params):
    N = 256
    g = make_gauge(preset, 1, 2, **params)
    pot = make_potential("diagonal_polynomial_well", 1, 2, scales=[0.3, 2.0])
    X = brownian_batch([0.0], TimeGrid(1.0, N), 8, range(256))
    bt = transport_batch(X, 1.0 / N, g, pot, scheme)
    assert bt.norms.max() <= 1 + 64 * 2 * EPS * N


def test_two_point_bound():
    N = 128
    p = path1d(N, seed=4)
    g, pot = su2(), well()
    for s in range(0, N, 16):
        for t in range(s, N + 1, 16):
            for scheme in ("exp_midpoint", "interaction_picture"):
                assert transport(p, s, t, g, pot, scheme).diagnostics["norm"] <= 1 + 1e-12


class IndefinitePotential:
    def __call__(self, x):
        s = x[..., 0, None, None]
        return np.cos(2 * s) * SZ + 0.5 * np.sin(s) * SX + 0.3 * SY


def test_gronwall_envelope_for_indefinite_potential():
    N = 256
    pot = Potential(1, 2, IndefinitePotential(), nonneg_required=False)
    X = brownian_batch([0.0], TimeGrid(1.5, N), 2, range(200))
    bt = transport_batch(X, 1.5 / N, su2(), pot, "interaction_picture")
    factor_norms = linalg.operator_norm(bt.potential_factors)
    assert np.all(factor_norms <= np.exp(bt.v_integrals) * (1 + 1e-12))
    # the bound is not vacuous: some transports grow
    assert bt.norms.max() > 1.0


def test_indefinite_potential_rejected_by_default():
    pot = Potential(1, 2, IndefinitePotential())
    with pytest.raises(Exception, match="nonnegative"):
        transport(path1d(16), 0, 16, su2(), pot)


# --- inverses and adjoint reversal -----------------------------------------------------------------


def test_inverse_of_unitary_transport_is_adjoint():
    p = path1d(256, seed=6)
    g, zero = su2(), make_potential("zero", 1, 2)
    for scheme in ("exp_midpoint", "interaction_picture"):
        fwd = transport(p, 0, 256, g, zero, scheme).matrix
        inv = transport_inverse(p, 0, 256, g, zero, scheme).matrix
        assert linalg.operator_norm(inv - linalg.dagger(fwd)) <= 1e-12


def test_inverse_of_constant_potential():
    c = 1.5
    p = path1d(64)
    pot = make_potential("constant_potential", 1, 2, matrix=np.diag([c, c]))
    inv = transport_inverse(p, 0, 64, make_gauge("zero", 1, 2), pot).matrix
    assert np.allclose(inv, np.exp(c) * np.eye(2), atol=1e-10, rtol=0)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_inverse_times_forward_is_identity(scheme):
    N = 256
    X = brownian_batch([0.1], TimeGrid(1.0, N), 12, range(32))
    g, pot = su2(), well()
    fwd = transport_batch(X, 1.0 / N, g, pot, scheme).matrices
    inv = inverse_batch(X, 1.0 / N, g, pot, scheme)
    assert linalg.operator_norm(inv @ fwd - np.eye(2)).max() <= 1e-10


def test_singular_product_integral_factor():
    # one step with dB = -I makes the factor 1 + dB vanish
    pot = make_potential("constant_potential", 1, 1, matrix=[[4.0]])
    X = np.zeros((1, 5, 1))
    with pytest.raises(NumericError) as info:
        inverse_batch(X, 0.25, make_gauge("zero", 1, 1), pot, "product_integral")
    assert info.value.step == 0


def test_product_integral_overflow_names_step():
    # |1 + dB| = 9 per step overflows after a few hundred steps
    pot = make_potential("constant_potential", 1, 1, matrix=[[10.0]])
    N = 400
    X = np.zeros((3, N + 1, 1))
    with pytest.raises(NumericError) as info:
        transport_batch(X, 1.0, make_gauge("zero", 1, 1), pot, "product_integral")
    assert info.value.step == int(np.ceil(np.log(np.finfo(float).max) / np.log(9.0))) - 1
    assert info.value.path == 0


def test_adjoint_reversal_examples():
    p = sample_bridge([0.2], [-0.7], TimeGrid(1.0, 512), RandomnessSpec(7, 1))
    zero_g, zero_p = make_gauge("zero", 1, 2), make_potential("zero", 1, 2)
    assert adjoint_reversal_check(p, zero_g, zero_p) == 0.0
    g1 = make_gauge("scalar_magnetic", 1, 1, b=[1.3])
    assert adjoint_reversal_check(p, g1, make_potential("zero", 1, 1)) <= 1e-12
    for scheme in ("exp_midpoint", "product_integral"):
        assert adjoint_reversal_check(p, su2(), well(), scheme) <= 1e-10
    with pytest.raises(ValidationError):
        adjoint_reversal_check(p, su2(), well(), "interaction_picture")


# --- convergence --------------------------------------------------------------------------------------


def test_self_convergence_under_refinement():
    # n = 1 noise is commutative, so the midpoint scheme converges at order dt pathwise
    Nf = 1024
    X = brownian_batch([0.2], TimeGrid(1.0, Nf), 3, range(20))
    g, pot = su2(), well()

    def at(N):
        return transport_batch(X[:, :: Nf // N], 1.0 / N, g, pot).matrices

    d1 = linalg.operator_norm(at(16) - at(64)).mean()
    d2 = linalg.operator_norm(at(64) - at(256)).mean()
    assert d1 <= 1.0 / 16 and 1.5 <= np.log(d1 / d2) / np.log(2) <= 2.5


def test_scheme_agreement_ratio():
    # pathwise the two schemes differ by a zero-mean O(sqrt dt) term; the ensemble
    # mean difference is O(dt)
    Nf = 32
    X = brownian_batch([0.2], TimeGrid(1.0, Nf), 3, range(20_000))
    g, pot = su2(), well()
    diffs = []
    for N in (8, 16, 32):
        Y = X[:, :: Nf // N]
        a = transport_batch(Y, 1.0 / N, g, pot, "exp_midpoint").matrices
        b = transport_batch(Y, 1.0 / N, g, pot, "product_integral").matrices
        diffs.append(linalg.operator_norm((a - b).mean(axis=0)))
    for coarse, fine in zip(diffs, diffs[1:]):
        assert 1.5 <= coarse / fine <= 3.0
