"""Bismut tangent spaces along a path: the filtered derivative, the damped
H^1 inner product, the submersion pair, and the 2-vector space ``{V + Q(V)}``.

Two-vectors on a path are stored as ambient matrices ``V[(s, t)]`` in
``T_{sigma(s)} M (x) T_{sigma(t)} M`` on an evaluation subgrid ``indices``,
plus the diagonal ``V[(r, r)]`` at every grid node, which is what the
curvature correction integrates.  Values below the diagonal follow from
``V[(t, s)] = -V[(s, t)]^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulate import CameronMartinVector, TangentPath, TimeGrid, check_same_grid
from .transport import FramedPath, damped_integral, dd_dt


class DegenerateBasisError(np.linalg.LinAlgError):
    pass


def filtered_derivative(framed: FramedPath, h: CameronMartinVector) -> TangentPath:
    """``W_k sum_{j<k} W_j^{-1} X(sigma_j) hdot_j dt``."""
    check_same_grid(framed.grid, h.grid)
    M = framed.manifold
    u = M.tangent(framed.nodes[..., :-1, :], h.hdot)
    return damped_integral(framed, u)


def h1_inner(framed: FramedPath, u1: TangentPath, u2: TangentPath):
    d1 = dd_dt(framed, u1)
    d2 = dd_dt(framed, u2)
    return np.sum(d1 * d2, axis=(-2, -1)) * framed.grid.dt


def h1_norm(framed: FramedPath, u: TangentPath):
    return np.sqrt(h1_inner(framed, u, u))


def to_cameron_martin(framed: FramedPath, v: TangentPath) -> CameronMartinVector:
    """Right inverse of :func:`filtered_derivative`: ``hdot_j = Y(x_j) (Dv)_j``."""
    return CameronMartinVector(framed.grid, dd_dt(framed, v))


def filtered_adjoint(framed: FramedPath, times, covectors) -> CameronMartinVector:
    """H-representative of ``h -> sum_i <c_i, filtered_derivative(h)_{t_i}>``.

    ``times`` are node indices and ``covectors`` has shape ``(..., len(times), m)``;
    only the tangential part of each covector matters.
    """
    E = framed.frames
    L = framed.damping
    Linv = framed.damping_inv
    N = framed.grid.steps
    covectors = np.asarray(covectors, dtype=float)
    n = E.shape[-1]
    # a_i = L_{t_i}^T E_{t_i}^T c_i in x0-frame coordinates, summed over t_i > j
    acc = np.zeros(np.broadcast_shapes(E.shape[:-3], covectors.shape[:-2]) + (N + 1, n))
    for i, t in enumerate(times):
        a = np.einsum("...mi,...m->...i", E[..., t, :, :], covectors[..., i, :])
        a = np.einsum("...ji,...j->...i", L[..., t, :, :], a)
        acc[..., t, :] += a
    # suffix sums: S_j = sum_{t > j} a_t
    suffix = np.cumsum(acc[..., ::-1, :], axis=-2)[..., ::-1, :]
    S = suffix[..., 1:, :]  # j = 0..N-1 collects t >= j+1
    c = np.einsum("...jki,...jk->...ji", Linv[..., :N, :, :], S)  # Linv^T S
    hdot = np.einsum("...jmi,...ji->...jm", E[..., :N, :, :], c)
    return CameronMartinVector(framed.grid, hdot)


# -- Cameron-Martin bases ------------------------------------------------------


def hat_functions(grid: TimeGrid, count: int) -> np.ndarray:
    """``count`` piecewise-linear hats on [0, T], sampled at step midpoints, ``(count, N)``."""
    t = (np.arange(grid.steps) + 0.5) * grid.dt
    if count == 1:
        return np.ones((1, grid.steps))
    centers = np.linspace(0.0, grid.horizon, count)
    width = centers[1] - centers[0]
    return np.clip(1.0 - np.abs(t[None, :] - centers[:, None]) / width, 0.0, None)


def cameron_martin_basis(grid: TimeGrid, m: int, count: int) -> list:
    """``e_c * phi_j`` ordered hat-major, truncated to ``count`` vectors."""
    hats = hat_functions(grid, -(-count // m))
    out = []
    for phi in hats:
        for c in range(m):
            hd = np.zeros((grid.steps, m))
            hd[:, c] = phi
            out.append(CameronMartinVector(grid, hd))
            if len(out) == count:
                return out
    return out


def orthonormal_cameron_martin(grid: TimeGrid, m: int, count: int) -> list:
    """The hat basis orthonormalised in ``H`` (QR of the sampled slopes)."""
    basis = cameron_martin_basis(grid, m, count)
    A = np.stack([b.hdot.ravel() for b in basis], axis=1) * np.sqrt(grid.dt)
    q, r = np.linalg.qr(A)
    q = q * np.sign(np.diag(r))
    return [CameronMartinVector(grid, (q[:, i] / np.sqrt(grid.dt)).reshape(grid.steps, m)) for i in range(count)]


def wedge_pairs(count: int, size: int) -> list:
    """First ``size`` index pairs ``(a, b)``, ``a < b``, in lexicographic order."""
    pairs = [(a, b) for a in range(count) for b in range(a + 1, count)]
    if len(pairs) < size:
        raise ValueError(f"{count} vectors give only {len(pairs)} wedges, need {size}")
    return pairs[:size]


def vectors_for_wedges(size: int) -> int:
    k = 2
    while k * (k - 1) // 2 < size:
        k += 1
    return k


# -- two-vectors ------------------------------------------------------------------


@dataclass(frozen=True)
class TwoVectorOnPath:
    grid: TimeGrid
    indices: np.ndarray  # (L,) evaluation nodes, increasing
    values: np.ndarray  # (..., L, L, m, m); full square, antisymmetry enforced on build
    diagonal: np.ndarray | None = None  # (..., N+1, m, m)

    def __add__(self, other):
        return TwoVectorOnPath(self.grid, self.indices, self.values + other.values, _add_opt(self.diagonal, other.diagonal))

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, a):
        return TwoVectorOnPath(self.grid, self.indices, a * self.values, None if self.diagonal is None else a * self.diagonal)

    __rmul__ = __mul__

    def upper(self) -> np.ndarray:
        """Entries with ``s <= t`` flattened to ``(..., P, m, m)``."""
        L = len(self.indices)
        iu, ju = np.triu_indices(L)
        return self.values[..., iu, ju, :, :]

    def frobenius(self):
        return np.sqrt(np.sum(self.upper() ** 2, axis=(-3, -2, -1)))


def _add_opt(a, b):
    if a is None or b is None:
        return None
    return a + b


def _symmetrize(upper_vals):
    """From values valid for ``s <= t`` build the full square via ``V[t,s] = -V[s,t]^T``."""
    L = upper_vals.shape[-4]
    mask = np.triu(np.ones((L, L), dtype=bool))
    lower = -np.swapaxes(np.swapaxes(upper_vals, -4, -3), -1, -2)
    return np.where(mask[:, :, None, None], upper_vals, lower)


def wedge(a: TangentPath, b: TangentPath, indices) -> TwoVectorOnPath:
    """``(a ^ b)[(s, t)] = a_s (x) b_t - b_s (x) a_t``."""
    indices = np.asarray(indices)
    A = a.vectors[..., indices, :]
    B = b.vectors[..., indices, :]
    vals = np.einsum("...si,...tj->...stij", A, B) - np.einsum("...si,...tj->...stij", B, A)
    diag = np.einsum("...ri,...rj->...rij", a.vectors, b.vectors)
    diag = diag - np.swapaxes(diag, -1, -2)
    return TwoVectorOnPath(a.grid, indices, vals, diag)


def q_map(framed: FramedPath, V: TwoVectorOnPath, tol: float = 1e-8) -> TwoVectorOnPath:
    """Curvature correction ``Q(V)``.

    ``Q(V)[(s, t)] = (1 (x) W_t W_s^{-1}) W2_s sum_{r<s} W2_r^{-1} Rop(V[(r, r)]) dt``.
    """
    if V.diagonal is None:
        raise ValueError("q_map needs the diagonal of V at every node")
    check_same_grid(framed.grid, V.grid)
    M = framed.manifold
    nodes = framed.nodes
    D = V.diagonal
    # fiberwise tangency of the diagonal
    Xr = M.projection_matrix(nodes)
    resid = np.max(np.abs(Xr @ D @ Xr - D), initial=0.0)
    if resid > tol * max(1.0, np.max(np.abs(D), initial=0.0)):
        raise ValueError(f"two-vector is not fiberwise tangent (residual {resid:.2e})")
    E = framed.frames
    n = E.shape[-1]
    Et = np.swapaxes(E, -1, -2)
    p = Et @ D @ E  # frame coordinates (..., N+1, n, n)
    rp = np.einsum("...rabcd,...rcd->...rab", framed.curv, p)
    vec = rp.reshape(rp.shape[:-2] + (n * n,))
    g = np.einsum("...rij,...rj->...ri", framed.damping2_inv, vec) * framed.grid.dt
    zero = np.zeros(g.shape[:-2] + (1, n * n))
    acc = np.concatenate([zero, np.cumsum(g, axis=-2)], axis=-2)[..., :-1, :]
    # acc[s] = sum_{r < s} ...
    q_diag_f = np.einsum("...sij,...sj->...si", framed.damping2, acc).reshape(acc.shape[:-1] + (n, n))
    q_diag = E @ q_diag_f @ Et  # ambient (..., N+1, m, m)

    idx = V.indices
    Ls = framed.damping[..., idx, :, :]
    Ls_inv = framed.damping_inv[..., idx, :, :]
    Es = E[..., idx, :, :]
    # Q[(s, t)] = E_s q_s (L_t L_s^{-1})^T E_t^T  for s <= t
    qs = q_diag_f[..., idx, :, :]
    trans = np.einsum("...tij,...sjk->...stik", Ls, Ls_inv)  # L_t L_s^{-1}
    core = np.einsum("...sab,...stcb->...stac", qs, trans)
    vals = np.einsum("...sma,...stac,...tnc->...stmn", Es, core, Es)
    return TwoVectorOnPath(V.grid, idx, _symmetrize(vals), q_diag)


@dataclass(frozen=True)
class H2Fit:
    coefficients: np.ndarray
    fitted: TwoVectorOnPath  # sum c_i V_i
    residual: float
    condition: float


def h2_basis(framed: FramedPath, basis_size: int, indices, hat_vectors: int | None = None):
    """Wedges ``V_i`` of filtered hat-basis images and their ``V_i + Q(V_i)``."""
    M = framed.manifold
    k = hat_vectors or vectors_for_wedges(basis_size)
    cm = cameron_martin_basis(framed.grid, M.ambient_dim, k)
    hv = [filtered_derivative(framed, h) for h in cm]
    Vs, Bs = [], []
    for a, b in wedge_pairs(k, basis_size):
        V = wedge(hv[a], hv[b], indices)
        Vs.append(V)
        Bs.append(V + q_map(framed, V))
    return cm, Vs, Bs


def h2_residual(framed: FramedPath, Wobs: TwoVectorOnPath, basis_size: int, with_q: bool = True, max_condition: float = 1e12) -> H2Fit:
    """Least-squares fit of ``Wobs`` by ``span{V_i + Q(V_i)}`` in the Frobenius norm over ``s <= t``."""
    if basis_size < 1:
        raise ValueError("basis_size must be >= 1")
    M = framed.manifold
    X = M.projection_matrix(framed.nodes[Wobs.indices])
    tang = np.einsum("sab,stbc,tdc->stad", X, Wobs.values, X)
    if np.max(np.abs(tang - Wobs.values)) > 1e-8 * max(1.0, np.max(np.abs(Wobs.values))):
        raise ValueError("observed two-vector is not fiberwise tangent")
    _, Vs, Bs = h2_basis(framed, basis_size, Wobs.indices)
    basis = Bs if with_q else Vs
    A = np.stack([b.upper().ravel() for b in basis], axis=1)
    y = Wobs.upper().ravel()
    G = A.T @ A
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > max_condition:
        raise DegenerateBasisError(f"two-vector basis Gram matrix is singular (condition {cond:.2e})")
    coef = np.linalg.solve(G, A.T @ y)
    resid = np.linalg.norm(y - A @ coef) / max(np.linalg.norm(y), np.finfo(float).tiny)
    fitted = sum((c * V for c, V in zip(coef[1:], Vs[1:])), coef[0] * Vs[0])
    return H2Fit(coef, fitted, float(resid), float(cond))
