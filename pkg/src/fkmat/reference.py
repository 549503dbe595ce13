"""Finite-difference oracle for ``exp(-tH)`` on a Dirichlet box in 1 or 2 dimensions.

The operator ``-1/2 Lap - 1/2 sum a_j^2 - 1/2 sum d_j a_j - sum a_j d_j + V`` is
discretised on the interior nodes of a uniform mesh: second differences for the
Laplacian, centred first differences for ``a_j d_j`` and pointwise values for the
rest.  The matrix is symmetrised and diagonalised once; the semigroup is then
applied by spectral calculus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import linalg
from .errors import NumericError, SizeError, ValidationError
from .fields import divergence_batch

DENSE_CAP = 6000


@dataclass(frozen=True)
class DiscreteOperator:
    """Assembled operator on a tensor mesh of interior nodes.

    Unknowns are ordered node-major (C order over axes), fibre index last.
    """

    box: tuple
    mesh: tuple
    h: tuple
    axes: tuple
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    fiber_dim: int
    symmetrization_defect: float

    @property
    def nodes(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, len(self.axes))

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def smallest_eigenvalue(self):
        return float(self.eigenvalues[0])

    def node_index(self, point):
        """Index of the mesh node at ``point`` (must coincide with a node)."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for a, hj, p in zip(self.axes, self.h, point):
            k = int(round((p - a[0]) / hj))
            if not (0 <= k < len(a)) or abs(a[k] - p) > 1e-9 * max(1.0, abs(p)):
                raise ValidationError(f"point {point.tolist()} is not a mesh node")
            idx.append(k)
        return int(np.ravel_multi_index(tuple(idx), self.mesh))


def _axis(lo, hi, m):
    h = (hi - lo) / (m + 1)
    return lo + h * np.arange(1, m + 1), h


def _second_difference(m, h):
    D = np.diag(np.full(m, -2.0)) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)
    return D / h**2


def _shift(m, k):
    return np.eye(m, k=k)


def assemble(box, mesh, gauge, pot, cap=DENSE_CAP):
    """Assemble and diagonalise the discrete operator.

    ``box`` is ``[(lo, hi)]`` per axis and ``mesh`` the interior node count per
    axis, so the spacing is ``(hi - lo) / (mesh + 1)``.
    """
    n, d = gauge.space_dim, gauge.fiber_dim
    if n not in (1, 2):
        raise ValidationError("the reference solver supports 1 or 2 space dimensions")
    if pot.space_dim != n or pot.fiber_dim != d:
        raise ValidationError("gauge and potential dimensions differ")
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    mesh = tuple(int(m) for m in np.atleast_1d(mesh))
    if len(box) != n or len(mesh) != n:
        raise ValidationError(f"box and mesh need {n} entries")
    if min(mesh) < 2:
        raise ValidationError("mesh needs at least two interior nodes per axis")
    size = int(np.prod(mesh)) * d
    if size > cap:
        raise SizeError(f"dense problem of size {size} exceeds the cap {cap}")
    axes, hs = zip(*(_axis(lo, hi, m) for (lo, hi), m in zip(box, mesh)))
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    N = nodes.shape[0]

    # scalar Laplacian as a Kronecker sum
    lap = np.zeros((N, N))
    for j in range(n):
        factors = [np.eye(m) for m in mesh]
        factors[j] = _second_difference(mesh[j], hs[j])
        term = factors[0]
        for F in factors[1:]:
            term = np.kron(term, F)
        lap += term
    M = np.kron(-0.5 * lap, np.eye(d)).astype(complex)

    alpha = gauge.batch(nodes)  # (N, n, d, d)
    V = pot.batch(nodes)
    zeroth = V.copy()
    for j in range(n):
        zeroth -= 0.5 * alpha[:, j] @ alpha[:, j]
    if not gauge.is_zero:
        zeroth -= 0.5 * divergence_batch(gauge, nodes)

    # -a_j d_j with centred differences: row i couples to i +- e_j
    Mb = M.reshape(N, d, N, d)
    for i in range(N):
        Mb[i, :, i, :] += zeroth[i]
    for j in range(n):
        factors = [np.eye(m) for m in mesh]
        factors[j] = _shift(mesh[j], 1)
        fwd = factors[0]
        for F in factors[1:]:
            fwd = np.kron(fwd, F)
        rows, cols = np.nonzero(fwd)
        for i, k in zip(rows, cols):
            Mb[i, :, k, :] += -alpha[i, j] / (2.0 * hs[j])
            Mb[k, :, i, :] += alpha[k, j] / (2.0 * hs[j])
    M = Mb.reshape(size, size)
    defect = float(np.abs(M - M.conj().T).sum(axis=1).max())
    H = 0.5 * (M + M.conj().T)
    try:
        w, Q = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from None
    return DiscreteOperator(box, mesh, tuple(hs), tuple(axes), H, w, Q, d, defect)


def sample_on_mesh(op, f):
    """Values of a vector field at the mesh nodes, flattened to the operator's ordering."""
    return np.asarray(f.batch(op.nodes), dtype=complex).reshape(-1)


def expm_apply(op, values, t):
    """``exp(-tH) f`` for ``f`` sampled on the mesh (flat or ``(nodes, d)``)."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    v = np.asarray(values, dtype=complex)
    shape = v.shape
    v = v.reshape(-1)
    if v.size != op.matrix.shape[0]:
        raise ValidationError("sampled function does not match the mesh")
    if t == 0:
        return v.reshape(shape).copy()
    Q = op.eigenvectors
    out = Q @ (np.exp(-t * op.eigenvalues) * (Q.conj().T @ v))
    return out.reshape(shape)


def kernel_column(op, node, t):
    """Discrete kernel ``K(., y)`` at mesh node index ``node``: shape ``(nodes, d, d)``."""
    d = op.fiber_dim
    N = op.matrix.shape[0] // d
    if not 0 <= node < N:
        raise ValidationError("node index out of range")
    E = np.zeros((N * d, d), dtype=complex)
    E[node * d:(node + 1) * d, :] = np.eye(d) / op.cell_volume
    Q = op.eigenvectors
    cols = Q @ (np.exp(-t * op.eigenvalues)[:, None] * (Q.conj().T @ E))
    return cols.reshape(N, d, d)


def kernel_matrix(op, x, y, t):
    """``K(x, y)`` for mesh points ``x`` and ``y``."""
    return kernel_column(op, op.node_index(y), t)[op.node_index(x)]


def boundary_mass(op, x, t):
    """Upper bound on the free heat-kernel mass from ``x`` outside the box at time ``t``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(t)
    inside = 1.0
    for (lo, hi), xj in zip(op.box, x):
        inside *= ndtr((hi - xj) / s) - ndtr((lo - xj) / s)
    return float(1.0 - inside)


def nonnegativity_slack(op):
    """``max(0, -lambda_min)``: how far the discrete spectrum dips below zero."""
    return max(0.0, -op.smallest_eigenvalue)


def write_mesh_dump(path, op, values):
    """Delimited text: node coordinates then (re, im) of each of the d entries."""
    v = np.asarray(values, dtype=complex).reshape(op.nodes.shape[0], -1)
    with open(path, "w") as fh:
        for x, row in zip(op.nodes, v):
            cols = [f"{c:.17g}" for c in x]
            for z in row:
                cols += [f"{z.real:.17g}", f"{z.imag:.17g}"]
            fh.write(",".join(cols) + "\n")


def unitary_check(op):
    """Orthonormality defect of the stored eigenvectors."""
    return float(linalg.unitarity_defect(op.eigenvectors))
