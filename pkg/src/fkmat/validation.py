"""Monte Carlo versus finite-difference comparisons.

A row passes when ``|mc - ref| <= max(3 |sigma|, tolerance |ref|)`` with
``sigma`` the vector of per-real-component standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reference
from .semigroup import apply_semigroup, kernel


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    probe: tuple
    mc_norm: float
    ref_norm: float
    abs_error: float
    three_sigma: float
    tolerance: float
    relative_error: float
    passed: bool


def _sigma(se):
    se = np.asarray(se)
    return float(np.sqrt(np.sum(se.real**2 + se.imag**2)))


def compare(quantity, probe, mc, se, ref, tolerance):
    mc = np.asarray(mc)
    ref = np.asarray(ref)
    err = float(np.linalg.norm((mc - ref).ravel()))
    ref_norm = float(np.linalg.norm(ref.ravel()))
    three = 3.0 * _sigma(se)
    allowed = max(three, tolerance * ref_norm)
    return ComparisonRow(quantity, tuple(np.ravel(probe).tolist()), float(np.linalg.norm(mc.ravel())),
                         ref_norm, err, three, tolerance, err / ref_norm if ref_norm else np.inf,
                         bool(err <= allowed))


def reference_operator(box, spacing, gauge, pot):
    """Dirichlet operator whose mesh nodes sit on multiples of ``spacing`` from ``lo``."""
    mesh = [int(round((hi - lo) / spacing)) - 1 for lo, hi in box]
    return reference.assemble(box, mesh, gauge, pot)


def semigroup_rows(op, f, probes, t, gauge, pot, tolerance, **mc):
    ref = reference.expm_apply(op, reference.sample_on_mesh(op, f), t).reshape(-1, op.fiber_dim)
    rows = []
    for x in probes:
        est = apply_semigroup(f, x, t, gauge, pot, **mc)
        rows.append(compare("semigroup", x, est.value, est.std_error,
                            ref[op.node_index(x)], tolerance))
    return rows


def kernel_rows(op, pairs, t, gauge, pot, tolerance, **mc):
    rows = []
    for x, y in pairs:
        est = kernel(x, y, t, gauge, pot, **mc)
        ref = reference.kernel_matrix(op, x, y, t)
        rows.append(compare("kernel", (*np.ravel(x), *np.ravel(y)), est.matrix, est.std_error,
                            ref, tolerance))
    return rows


def format_table(rows):
    head = f"{'quantity':<10} {'probe':<18} {'mc':>10} {'ref':>10} {'rel_err':>9} {'3sigma/ref':>10} {'tol':>6}  result"
    lines = [head]
    for r in rows:
        probe = ",".join(f"{c:g}" for c in r.probe)
        rel3 = r.three_sigma / r.ref_norm if r.ref_norm else np.inf
        lines.append(f"{r.quantity:<10} {probe:<18} {r.mc_norm:>10.6f} {r.ref_norm:>10.6f} "
                     f"{r.relative_error:>9.5f} {rel3:>10.5f} {r.tolerance:>6.3f}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
