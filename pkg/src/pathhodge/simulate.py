"""Wiener paths, the Stratonovich gradient SDE, and its variational equation.

The SDE ``dx = X(x) o dB`` is solved with the Stratonovich Heun scheme followed
by nearest-point retraction.  The derivative paths (flow derivative and the
H-derivative of the Ito map) are the exact derivatives of that discrete map,
so finite differences of the solver converge to them at rate ``eps``.

Arrays may carry leading batch axes: increments ``(..., N, m)`` produce nodes
``(..., N+1, m)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .geometry import EmbeddedManifold, GeometryError


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError(f"need at least 2 steps, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)

    def index_of(self, t: float) -> int:
        k = int(round(t / self.dt))
        if not 0 <= k <= self.steps:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        return k


def check_same_grid(*grids):
    g0 = grids[0]
    for g in grids[1:]:
        if g.steps != g0.steps or not np.isclose(g.horizon, g0.horizon, rtol=1e-14, atol=0):
            raise GridMismatchError(f"grid mismatch: {g0} vs {g}")


@dataclass(frozen=True)
class DrivingPath:
    """Gaussian increments of a Wiener path, possibly a batch of them.

    ``increments`` has shape ``(N, m)`` or ``(B, N, m)``; ``indices`` records
    the stream index of each path (``None`` for derived, non-sampled paths).
    """

    grid: TimeGrid
    increments: np.ndarray
    seed: int
    indices: np.ndarray | None = None

    @property
    def ambient_dim(self) -> int:
        return self.increments.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.increments.shape[:-2]

    def brownian(self) -> np.ndarray:
        """``B_{t_k}`` for ``k = 0..N``, starting at 0."""
        inc = self.increments
        zero = np.zeros(inc.shape[:-2] + (1, inc.shape[-1]))
        return np.concatenate([zero, np.cumsum(inc, axis=-2)], axis=-2)

    def perturbed(self, h: "CameronMartinVector", eps: float) -> "DrivingPath":
        """The shifted path ``omega + eps h``."""
        check_same_grid(self.grid, h.grid)
        return DrivingPath(self.grid, self.increments + eps * h.hdot * self.grid.dt, self.seed, self.indices)

    def coarsen(self, factor: int) -> "DrivingPath":
        """Same Brownian path observed on a grid ``factor`` times coarser."""
        N = self.grid.steps
        if N % factor:
            raise ValueError(f"{factor} does not divide {N}")
        inc = self.increments
        inc = inc.reshape(inc.shape[:-2] + (N // factor, factor, inc.shape[-1])).sum(axis=-2)
        return DrivingPath(TimeGrid(self.grid.horizon, N // factor), inc, self.seed, self.indices)

    def select(self, i: int) -> "DrivingPath":
        idx = None if self.indices is None else self.indices[i : i + 1]
        return DrivingPath(self.grid, self.increments[i], self.seed, idx)


@dataclass(frozen=True)
class ManifoldPath:
    grid: TimeGrid
    nodes: np.ndarray  # (..., N+1, m)

    @property
    def x0(self) -> np.ndarray:
        return self.nodes[..., 0, :]

    def to_csv(self, path) -> None:
        """Write columns ``t, x1..xm`` (single path only)."""
        if self.nodes.ndim != 2:
            raise ValueError("CSV export takes a single path")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(self.nodes.shape[1])])
            for t, x in zip(self.grid.times, self.nodes):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x])


@dataclass(frozen=True)
class CameronMartinVector:
    """Piecewise-linear ``h`` with ``h(0) = 0``; ``hdot[k]`` is its slope on step k."""

    grid: TimeGrid
    hdot: np.ndarray  # (..., N, m)

    def values(self) -> np.ndarray:
        zero = np.zeros(self.hdot.shape[:-2] + (1, self.hdot.shape[-1]))
        return np.concatenate([zero, np.cumsum(self.hdot, axis=-2) * self.grid.dt], axis=-2)

    def inner(self, other: "CameronMartinVector"):
        check_same_grid(self.grid, other.grid)
        return np.sum(self.hdot * other.hdot, axis=(-2, -1)) * self.grid.dt

    def norm(self):
        return np.sqrt(self.inner(self))

    def __add__(self, other):
        check_same_grid(self.grid, other.grid)
        return CameronMartinVector(self.grid, self.hdot + other.hdot)

    def __mul__(self, a):
        return CameronMartinVector(self.grid, a * self.hdot)

    __rmul__ = __mul__

    @classmethod
    def zero(cls, grid: TimeGrid, m: int):
        return cls(grid, np.zeros((grid.steps, m)))


@dataclass(frozen=True)
class TangentPath:
    grid: TimeGrid
    vectors: np.ndarray  # (..., N+1, m)
    base: ManifoldPath | None = field(default=None, repr=False)

    def __add__(self, other):
        return TangentPath(self.grid, self.vectors + other.vectors, self.base)

    def __sub__(self, other):
        return TangentPath(self.grid, self.vectors - other.vectors, self.base)

    def __mul__(self, a):
        return TangentPath(self.grid, a * self.vectors, self.base)

    __rmul__ = __mul__


def sample_driving_path(m: int, grid: TimeGrid, seed: int, index: int = 0) -> DrivingPath:
    """One Wiener path; increments are i.i.d. ``Normal(0, dt I_m)``."""
    if m < 1:
        raise ValueError("ambient dimension must be >= 1")
    inc = rng.normals(seed, [index], (grid.steps, m), scale=np.sqrt(grid.dt))[0]
    return DrivingPath(grid, inc, int(seed), np.array([index]))


def sample_driving_paths(m: int, grid: TimeGrid, seed: int, count: int, start: int = 0) -> DrivingPath:
    """A batch of ``count`` independent paths with stream indices ``start, start+1, ...``."""
    idx = np.arange(start, start + count)
    inc = rng.normals(seed, idx, (grid.steps, m), scale=np.sqrt(grid.dt))
    return DrivingPath(grid, inc, int(seed), idx)


# -- the discrete Heun map and its linearisation --------------------------


def heun_step(M: EmbeddedManifold, x, dB):
    a = M.tangent(x, dB)
    b = M.tangent(x + a, dB)
    return M.point_projection(x + 0.5 * (a + b))


def heun_step_tangent(M: EmbeddedManifold, x, dB, dx, ddB):
    """Heun step and its derivative in direction ``(dx, ddB)`` of ``(x, dB)``."""
    a = M.tangent(x, dB)
    da = M.tangent_derivative(x, dx, dB) + M.tangent(x, ddB)
    xs = x + a
    dxs = dx + da
    b = M.tangent(xs, dB)
    db = M.tangent_derivative(xs, dxs, dB) + M.tangent(xs, ddB)
    y = x + 0.5 * (a + b)
    dy = dx + 0.5 * (da + db)
    return M.point_projection(y), M.retraction_derivative(y, dy)


def solve_nodes(M: EmbeddedManifold, x0, increments) -> np.ndarray:
    increments = np.asarray(increments, dtype=float)
    N = increments.shape[-2]
    x = np.broadcast_to(np.asarray(x0, dtype=float), increments.shape[:-2] + (M.ambient_dim,)).copy()
    nodes = np.empty(increments.shape[:-2] + (N + 1, M.ambient_dim))
    nodes[..., 0, :] = x
    for k in range(N):
        x = heun_step(M, x, increments[..., k, :])
        nodes[..., k + 1, :] = x
    return nodes


def solve_gradient_sde(M: EmbeddedManifold, x0, omega: DrivingPath) -> ManifoldPath:
    """Solve ``dx = X(x) o dB`` from ``x0`` along ``omega``."""
    if omega.ambient_dim != M.ambient_dim:
        raise GeometryError(f"driving path lives in R^{omega.ambient_dim}, manifold in R^{M.ambient_dim}")
    x0 = M.check_point(x0)
    return ManifoldPath(omega.grid, solve_nodes(M, x0, omega.increments))


def tangent_nodes(M, nodes, increments, v0=None, hdot=None, dt=None) -> np.ndarray:
    """Integrate the linearised Heun map along precomputed ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    increments = np.asarray(increments, dtype=float)
    N = increments.shape[-2]
    shape = np.broadcast_shapes(nodes.shape[:-2], increments.shape[:-2])
    if hdot is not None:
        shape = np.broadcast_shapes(shape, np.shape(hdot)[:-2])
    v = np.zeros(shape + (M.ambient_dim,))
    if v0 is not None:
        v = v + M.tangent(nodes[..., 0, :], v0)
    out = np.empty(shape + (N + 1, M.ambient_dim))
    out[..., 0, :] = v
    zero = np.zeros(M.ambient_dim)
    for k in range(N):
        x = nodes[..., k, :]
        ddB = zero if hdot is None else hdot[..., k, :] * dt
        _, v = heun_step_tangent(M, x, increments[..., k, :], v, ddB)
        v = M.tangent(nodes[..., k + 1, :], v)
        out[..., k + 1, :] = v
    return out


def flow_and_ito_derivative(
    M: EmbeddedManifold,
    path: ManifoldPath,
    omega: DrivingPath,
    h: CameronMartinVector | None = None,
    v0=None,
) -> TangentPath:
    """Derivative paths along a solution.

    With ``h`` absent and ``v0 = u`` this is the flow derivative ``T xi_t(u)``;
    with ``h`` given and ``v0`` absent it is ``T I(h)_t``.
    """
    check_same_grid(path.grid, omega.grid)
    hdot = None
    if h is not None:
        check_same_grid(path.grid, h.grid)
        hdot = h.hdot
    vec = tangent_nodes(M, path.nodes, omega.increments, v0=v0, hdot=hdot, dt=omega.grid.dt)
    return TangentPath(path.grid, vec, path)


def heun_jacobians(M: EmbeddedManifold, path: ManifoldPath, omega: DrivingPath):
    """Per-step Jacobians with ``v_{k+1} = Jx[k] v_k + JB[k] hdot_k dt``.

    Both are returned as ``(..., N, m, m)`` arrays mapping into ``T_{x_{k+1}} M``.
    """
    check_same_grid(path.grid, omega.grid)
    m = M.ambient_dim
    nodes = path.nodes[..., :-1, None, :]  # broadcast against m probe directions
    inc = omega.increments[..., :, None, :]
    eye = np.eye(m)
    zero = np.zeros(m)
    nxt = path.nodes[..., 1:, None, :]
    _, jx = heun_step_tangent(M, nodes, inc, eye, zero)
    _, jb = heun_step_tangent(M, nodes, inc, zero, eye)
    jx = M.tangent(nxt, jx)
    jb = M.tangent(nxt, jb)
    # rows above are images of basis vectors; transpose to column convention
    return np.swapaxes(jx, -1, -2), np.swapaxes(jb, -1, -2)


def linear_heat_decay(M: EmbeddedManifold, horizon: float) -> float:
    """Exact ``E <x_T, x_0>`` for Brownian motion started at ``M.base_point()``.

    Each block is a round sphere of dimension ``d`` and radius ``r`` on which
    linear functions are Laplace eigenfunctions with eigenvalue ``d / r^2``.
    """
    total = 0.0
    for (lo, hi), r in zip(M.blocks, M.radii):
        d = hi - lo - 1
        total += r * r * np.exp(-0.5 * d * horizon / (r * r))
    return float(total)


def smooth_cameron_martin(grid: TimeGrid, m: int, rng_: np.random.Generator, modes: int = 3, scale: float = 1.0):
    """A random smooth ``h``: ``hdot`` is a short cosine series at step midpoints."""
    t = (np.arange(grid.steps) + 0.5) * grid.dt / grid.horizon
    coef = rng_.standard_normal((modes, m)) * scale
    basis = np.cos(np.pi * np.arange(modes)[:, None] * t[None, :])  # (modes, N)
    return CameronMartinVector(grid, basis.T @ coef)
