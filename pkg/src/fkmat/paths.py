"""Brownian motions and Brownian bridges on uniform time grids.

Randomness is counter based: the normal variates of a path are a pure
function of ``(master_seed, path_index)``, drawn from a Philox stream keyed
by that pair.  Ensembles split into any number of workers therefore see the
same paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    steps: int
    t_start: float = 0.0

    def __post_init__(self):
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 1:
            raise ValidationError("time grid needs at least one step")
        if not np.isfinite(self.t_end) or not self.t_end > self.t_start:
            raise ValidationError("time grid needs t_end > t_start")

    @property
    def dt(self):
        return (self.t_end - self.t_start) / self.steps

    @property
    def duration(self):
        return self.t_end - self.t_start

    @property
    def nodes(self):
        k = np.arange(self.steps + 1)
        return self.t_start + self.duration * k / self.steps


@dataclass(frozen=True)
class RandomnessSpec:
    master_seed: int
    path_index: int = 0

    def generator(self):
        return stream(self.master_seed, self.path_index)


def stream(master_seed, path_index):
    """Independent normal stream for one path."""
    key = np.array([int(master_seed) % 2**64, int(path_index) % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Positions of a sampled path on a uniform grid.

    ``kind`` is ``"brownian"`` or ``"bridge"``; ``start``/``end`` are the
    pinned endpoints (``end`` is ``None`` for a free Brownian path).
    ``reversed`` flips on every call to :func:`reverse`.
    """

    grid: TimeGrid
    positions: np.ndarray
    kind: str
    start: np.ndarray
    end: np.ndarray | None = None
    reversed: bool = field(default=False)

    @property
    def increments(self):
        return np.diff(self.positions, axis=0)

    @property
    def space_dim(self):
        return self.positions.shape[1]

    def same_as(self, other):
        return (
            self.grid == other.grid
            and self.kind == other.kind
            and self.reversed == other.reversed
            and np.array_equal(self.positions, other.positions)
        )


def _point(x, name="point"):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} must be a finite vector")
    return x


def heat_kernel(x, y, t):
    """Gaussian heat kernel of R^n with generator Delta/2."""
    if not t > 0:
        raise DomainError("heat kernel needs t > 0")
    x = _point(x, "x")
    y = _point(y, "y")
    if x.shape != y.shape:
        raise ValidationError("x and y must have the same dimension")
    n = x.size
    r2 = float(np.sum((x - y) ** 2))
    return (2.0 * np.pi * t) ** (-0.5 * n) * np.exp(-r2 / (2.0 * t))


def brownian_batch(x, grid, seed, indices):
    """Brownian positions ``(len(indices), steps + 1, n)`` started at ``x``."""
    x = _point(x, "x")
    n = x.size
    N = grid.steps
    sq = np.sqrt(grid.dt)
    out = np.empty((len(indices), N + 1, n))
    out[:, 0, :] = x
    for row, idx in enumerate(indices):
        xi = stream(seed, idx).standard_normal((N, n))
        out[row, 1:, :] = sq * xi
    np.cumsum(out, axis=1, out=out)
    return out


def bridge_batch(x, y, grid, seed, indices):
    """Brownian bridges from ``x`` to ``y`` by pinning Brownian paths."""
    y = _point(y, "y")
    W = brownian_batch(x, grid, seed, indices)
    if W.shape[-1] != y.size:
        raise ValidationError("x and y must have the same dimension")
    frac = (grid.nodes - grid.t_start) / grid.duration
    X = W - frac[None, :, None] * (W[:, -1:, :] - y)
    X[:, 0, :] = W[:, 0, :]
    X[:, -1, :] = y
    return X


def sample_brownian(x, grid, rng):
    x = _point(x, "x")
    pos = brownian_batch(x, grid, rng.master_seed, [rng.path_index])[0]
    return DiscretePath(grid, pos, "brownian", x.copy())


def sample_bridge(x, y, grid, rng):
    if grid.t_start != 0:
        raise ValidationError("bridges are sampled on grids starting at 0")
    x = _point(x, "x")
    y = _point(y, "y")
    pos = bridge_batch(x, y, grid, rng.master_seed, [rng.path_index])[0]
    return DiscretePath(grid, pos, "bridge", x.copy(), y.copy())


def reverse(path):
    """Time reversal; a bridge x -> y becomes a bridge y -> x."""
    pos = path.positions[::-1].copy()
    end = None if path.end is None else pos[-1].copy()
    return DiscretePath(path.grid, pos, path.kind, pos[0].copy(), end, not path.reversed)


def write_path(path, fh):
    """Text dump, one node per line: time then coordinates."""
    for t, row in zip(path.grid.nodes, path.positions):
        fh.write(" ".join([repr(float(t))] + [repr(float(v)) for v in row]) + "\n")


def read_path(fh, kind="brownian"):
    data = np.loadtxt(fh, ndmin=2)
    times, pos = data[:, 0], data[:, 1:]
    grid = TimeGrid(float(times[-1]), len(times) - 1, float(times[0]))
    end = pos[-1].copy() if kind == "bridge" else None
    return DiscretePath(grid, pos, kind, pos[0].copy(), end)
