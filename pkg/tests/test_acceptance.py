"""Acceptance suite: twelve end-to-end criteria, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``. The two reference comparisons
use 1e5 paths of 512 steps and take several minutes on a single core.
"""

import os

import numpy as np
import pytest

from fkmat import exact, linalg, reference
from fkmat.cli import main
from fkmat.fields import make_gauge, make_potential, truncated, write_tabulated
from fkmat.ode import MatrixOdeProblem, bound_check_a, bound_check_b
from fkmat.paths import RandomnessSpec, TimeGrid, brownian_batch, heat_kernel, sample_bridge
from fkmat.semigroup import apply_semigroup, kernel, make_vector_field, small_time_statistic
from fkmat.transport import transport, transport_batch
from fkmat.validation import compare, reference_operator

EPS = np.finfo(float).eps
CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")

PROBES = [[-0.5], [0.0], [0.5]]
BOX = [(-7.0, 7.0)]


def benchmark_fields():
    g = make_gauge("constant_gauge", 1, 2, pauli=[[0.8, 0.0, 0.5]])
    p = make_potential("diagonal_polynomial_well", 1, 2, scales=[0.5, 1.0])
    return g, p


@pytest.fixture(scope="module")
def benchmark_operator():
    g, p = benchmark_fields()
    return reference_operator(BOX, 0.02, g, p)


def test_free_kernel_exactness(report):
    rng = np.random.default_rng(101)
    worst = 0.0
    for n, d in [(1, 1), (1, 2), (2, 3), (3, 2)]:
        g, p = make_gauge("zero", n, d), make_potential("zero", n, d)
        for _ in range(5):
            x, y = rng.uniform(-2, 2, n), rng.uniform(-2, 2, n)
            t = float(rng.uniform(0.05, 3.0))
            est = kernel(x, y, t, g, p, n_paths=64, steps=16, seed=int(rng.integers(1 << 30)))
            want = heat_kernel(x, y, t) * np.eye(d)
            worst = max(worst, np.abs(est.matrix - want).max() / np.abs(want).max())
    ok = worst <= 1e-12 and report.elapsed() < 1.0
    report(1, "free kernel equals p_t I", ok, f"max rel err {worst:.2e}")
    assert ok


def test_scalar_magnetic_gauge_equivalence(report):
    b, x, t, c, w = 1.5, 0.2, 1.0, 0.0, 0.8
    g = make_gauge("scalar_magnetic", 1, 1, b=[b])
    f = make_vector_field("gaussian_bump", 1, 1, center=[c], width=w)
    est = apply_semigroup(f, [x], t, g, make_potential("zero", 1, 1), n_paths=100_000, steps=512, seed=17)
    want = exact.gauge_transformed_gaussian(x, t, b, c, w)
    err = abs(est.value[0] - want)
    three = 3 * np.hypot(est.std_error[0].real, est.std_error[0].imag)
    ok = err <= three and report.elapsed() < 30
    report(2, "scalar magnetic gauge equivalence", ok, f"|err| {err:.2e} vs 3 sigma {three:.2e}")
    assert ok


def test_semigroup_matches_reference(report, benchmark_operator):
    g, p = benchmark_fields()
    op, t = benchmark_operator, 1.0
    mass = max(reference.boundary_mass(op, x, t) for x in PROBES)
    f = make_vector_field("gaussian_bump", 1, 2, center=[0.3], width=0.7, direction=[[1, 0], [0, 1]])
    ref = reference.expm_apply(op, reference.sample_on_mesh(op, f), t).reshape(-1, 2)
    rows = []
    for k, x in enumerate(PROBES):
        est = apply_semigroup(f, x, t, g, p, n_paths=100_000, steps=512, seed=300 + k)
        rows.append(compare("semigroup", x, est.value, est.std_error, ref[op.node_index(x)], 0.02))
    ok = all(r.passed for r in rows) and mass < 1e-6 and report.elapsed() < 300
    detail = ", ".join(f"x={r.probe[0]:g} rel {r.relative_error:.4f}" for r in rows)
    report(3, "semigroup vs finite-difference reference", ok, f"{detail}; outside mass {mass:.1e}")
    assert ok


def test_kernel_matches_reference(report, benchmark_operator):
    g, p = benchmark_fields()
    op, t = benchmark_operator, 1.0
    rows = []
    for k, (x, y) in enumerate((x, y) for x in PROBES for y in PROBES):
        est = kernel(x, y, t, g, p, n_paths=100_000, steps=512, seed=400 + k)
        rows.append(compare("kernel", (*x, *y), est.matrix, est.std_error,
                            reference.kernel_matrix(op, x, y, t), 0.03))
    ok = all(r.passed for r in rows) and report.elapsed() < 600
    worst = max(rows, key=lambda r: r.relative_error)
    report(4, "kernel vs finite-difference reference", ok,
           f"{sum(r.passed for r in rows)}/9 pass, worst rel {worst.relative_error:.4f} at {worst.probe}")
    assert ok


def contraction_cases(tmp_path):
    """(gauge, potential) pairs covering every preset, all potentials nonnegative."""
    axis = np.linspace(-10, 10, 401)
    su2 = make_gauge("su2_rotation", 1, 2, strength=1.5)
    gauge_file = tmp_path / "gauge.txt"
    write_tabulated(gauge_file, [axis], su2.batch(axis[:, None]))
    well = make_potential("diagonal_polynomial_well", 1, 2, scales=[0.3, 2.0])
    pot_file = tmp_path / "pot.txt"
    write_tabulated(pot_file, [axis], well.batch(axis[:, None]) + np.array([[0.5, 0.2j], [-0.2j, 0.1]]))
    gauges = [
        make_gauge("zero", 1, 2),
        make_gauge("constant_gauge", 1, 2, pauli=[[0.8, 0.0, 0.5]]),
        make_gauge("pauli_like", 1, 2, b=[1.2]),
        su2,
        make_gauge("tabulated", 1, 2, file=str(gauge_file)),
    ]
    pots = [
        make_potential("zero", 1, 2),
        make_potential("constant_potential", 1, 2,
                       matrix=[[[1.0, 0.0], [0.0, 0.5]], [[0.0, -0.5], [0.8, 0.0]]]),
        well,
        make_potential("inverse_distance", 1, 2, center=[0.05]),
        make_potential("tabulated", 1, 2, file=str(pot_file)),
    ]
    cases = [(g, p) for g in gauges for p in pots]
    cases += [(make_gauge("scalar_magnetic", 1, 1, b=[0.7]), make_potential(name, 1, 1, **kw))
              for name, kw in [("zero", {}), ("constant_potential", {"matrix": [[0.4]]}),
                               ("diagonal_polynomial_well", {}), ("inverse_distance", {"center": [0.05]})]]
    return cases


def test_contraction_and_unitarity(report, tmp_path):
    N, total, chunk = 32, 1_000_000, 8192
    grid = TimeGrid(1.0, N)
    cases = contraction_cases(tmp_path)
    per_case = -(-total // len(cases))
    sampled = violations = unit_runs = unit_violations = 0
    worst_norm = worst_unit = 0.0
    for c, (g, p) in enumerate(cases):
        d = g.fiber_dim
        for start in range(0, per_case, chunk):
            idx = range(start, min(start + chunk, per_case))
            X = brownian_batch([0.3], grid, 500 + c, idx)
            sampled += len(idx)
            for scheme in ("exp_midpoint", "interaction_picture"):
                bt = transport_batch(X, grid.dt, g, p, scheme, path_offset=start)
                excess = bt.norms - 1.0
                violations += int(np.sum(excess > 64 * d * EPS * N))
                worst_norm = max(worst_norm, excess.max() / (64 * d * EPS * N))
                if p.is_zero:
                    unit_runs += len(idx)
                    unit_violations += int(np.sum(bt.unitarity_defects > 16 * d * EPS * N))
                    worst_unit = max(worst_unit, bt.unitarity_defects.max() / (16 * d * EPS * N))
    ok5 = sampled >= total and violations == 0 and report.elapsed() < 300
    report(5, "contraction bound", ok5, f"{violations} violations over {sampled} paths x 2 schemes, "
           f"worst excess {worst_norm:.3f} of allowance")
    ok6 = unit_runs > 0 and unit_violations == 0
    report(6, "unitarity without potential", ok6,
           f"{unit_violations} violations over {unit_runs} transports, worst {worst_unit:.3f} of allowance")
    assert ok5 and ok6


def test_multiplicativity(report):
    rng = np.random.default_rng(7)
    g = make_gauge("su2_rotation", 1, 2, strength=1.5)
    p = make_potential("diagonal_polynomial_well", 1, 2, scales=[0.5, 1.0])
    worst = 0.0
    for i in range(1000):
        N = int(rng.integers(8, 129))
        path = sample_bridge([0.3], [-0.4], TimeGrid(1.0, N), RandomnessSpec(int(rng.integers(1 << 30)), i))
        k = int(rng.integers(0, N + 1))
        for scheme in ("exp_midpoint", "product_integral", "interaction_picture"):
            full = transport(path, 0, N, g, p, scheme).matrix
            split = transport(path, 0, k, g, p, scheme).matrix @ transport(path, k, N, g, p, scheme).matrix
            worst = max(worst, linalg.operator_norm(full - split) / (1e-11 * N))
    ok = worst <= 1.0 and report.elapsed() < 60
    report(7, "multiplicativity", ok, f"worst defect {worst:.2e} of 1e-11 N")
    assert ok


def test_kernel_hermitian_symmetry(report):
    g, p = benchmark_fields()
    worst = 0.0
    for x, y in [([0.5], [-0.2]), ([0.0], [0.5]), ([-0.5], [0.3])]:
        a = kernel(x, y, 1.0, g, p, n_paths=4000, steps=512, seed=80)
        b = kernel(y, x, 1.0, g, p, n_paths=4000, steps=512, seed=80)
        worst = max(worst, linalg.operator_norm(a.matrix - b.matrix.conj().T))
    ok = worst <= 1e-10 and report.elapsed() < 60
    report(8, "kernel Hermitian symmetry", ok, f"max |K(x,y)^H - K(y,x)| {worst:.2e}")
    assert ok


def test_small_time_convergence(report):
    g, p = benchmark_fields()
    stats = small_time_statistic(PROBES, [0.2, 0.1, 0.05, 0.025], g, p, n_paths=8192, steps=64, seed=90)
    ok = all(m2 < m1 + 2 * np.hypot(s1, s2) for (m1, s1), (m2, s2) in zip(stats, stats[1:]))
    ok = ok and report.elapsed() < 120
    report(9, "small-time statistic decreases", ok, " > ".join(f"{m:.4f}" for m, _ in stats))
    assert ok


def test_gronwall_suite(report):
    rng = np.random.default_rng(11)
    violations_a = violations_b = 0
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        H1 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        H2 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        H1, H2 = H1 + H1.conj().T, H2 + H2.conj().T
        w = rng.uniform(0.5, 4.0)
        F = lambda s, H1=H1, H2=H2, w=w: np.sin(w * s) * H1 + s * H2
        top = lambda s, F=F: float(np.linalg.eigvalsh(F(s))[-1])
        lhs, rhs = bound_check_a(MatrixOdeProblem(0.0, 1.0, F), top, 24)
        violations_a += lhs > rhs * (1 + 1e-10)
        G1 = lambda s, A=rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)): np.cos(s) * A
        G2 = lambda s, B=rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)): s * B
        diff, bound = bound_check_b(G1, G2, 0.0, rng.uniform(0.1, 1.0), 24)
        violations_b += diff > bound * (1 + 1e-10)
    # equality cases: a scalar generator for (a), identical generators for (b)
    sat = 0.0
    for c0 in (-1.5, 0.0, 0.7):
        cfun = lambda s, c0=c0: c0 + np.sin(3 * s)
        lhs, rhs = bound_check_a(MatrixOdeProblem(0.0, 1.3, lambda s, cfun=cfun: cfun(s) * np.eye(3)), cfun, 40)
        sat = max(sat, abs(lhs - rhs) / rhs)
    same = lambda s: np.array([[0.0, s], [1.0, 1j]])
    diff, bound = bound_check_b(same, same, 0.0, 1.0, 40)
    sat = max(sat, diff, bound)
    ok = violations_a == 0 and violations_b == 0 and sat <= 1e-10 and report.elapsed() < 60
    report(10, "Gronwall inequalities", ok,
           f"violations a={violations_a} b={violations_b}, saturation gap {sat:.1e}")
    assert ok


def test_truncation_consistency(report):
    g = make_gauge("constant_gauge", 1, 2, pauli=[[0.8, 0.0, 0.5]])
    p = make_potential("diagonal_polynomial_well", 1, 2, scales=[4.0, 10.0], cap=6.0)
    f = make_vector_field("gaussian_bump", 1, 2, center=[0.3], width=0.7, direction=[[1, 0], [0, 1]])
    mc = dict(n_paths=50_000, steps=256, seed=110)
    full = apply_semigroup(f, [0.2], 1.0, g, p, **mc)
    gaps, last = [], None
    for m in (1, 4, 16, 64):
        last = apply_semigroup(f, [0.2], 1.0, g, truncated(p, m), **mc)
        gaps.append(float(np.linalg.norm(last.value - full.value)))
    sigma = np.sqrt(np.sum(np.abs(full.std_error) ** 2 + np.abs(last.std_error) ** 2))
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    ok = monotone and gaps[-1] <= 3 * sigma and report.elapsed() < 300
    report(11, "truncation converges", ok, ", ".join(f"{g:.2e}" for g in gaps) + f"; 3 sigma {3 * sigma:.1e}")
    assert ok


CLI_RUNS = [
    ("semigroup", "semigroup.yaml", 3000),
    ("kernel", "kernel.yaml", 3000),
    ("trace", "trace.yaml", 300),
    ("kato", "kato.yaml", 1500),
    ("heatmap", "heatmap.yaml", 16),
    ("validate", "validate.yaml", 1100),
    ("selftest", None, None),
]


def test_cli_determinism(report, tmp_path, monkeypatch):
    monkeypatch.setenv("FKMAT_OUTPUT_DIR", str(tmp_path))
    many = max(os.cpu_count() or 1, 2)
    mismatched = []
    for command, config, n_paths in CLI_RUNS:
        outputs = []
        for i, workers in enumerate((1, many, 1)):
            argv = [command] + ([os.path.join(CONFIGS, config)] if config else [])
            if n_paths:
                argv += ["--n-paths", str(n_paths)]
            name = f"{command}-{i}.out"
            argv += ["--workers", str(workers), "--output", name, "--log-level", "WARNING"]
            # validate may legitimately report a failed row at reduced path counts
            assert main(argv) in (0, 4)
            outputs.append((tmp_path / name).read_bytes())
        if len(set(outputs)) != 1:
            mismatched.append(command)
    ok = not mismatched and report.elapsed() < 120
    report(12, "CLI determinism", ok, f"{len(CLI_RUNS)} commands at 1 and {many} workers, "
           f"mismatched: {mismatched or 'none'}")
    assert ok
