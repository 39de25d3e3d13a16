"""Transports along a discrete manifold path.

* ``//``: an orthonormal tangent frame carried by ``u -> X(x_{k+1}) u`` and
  re-orthonormalised by polar decomposition (the nearest orthonormal frame,
  which keeps the per-step frame change symmetric, i.e. rotation-free).
* ``W``: damped transport ``D/dt W = -1/2 Ric W``, solved for the coefficient
  matrix in the parallel frame by the implicit midpoint rule.
* ``W2``: damped transport of 2-vectors, with the Weitzenbock curvature.
* ``//~``: parallel transport of ``Ker X^perp`` and ``Ker X`` for the
  connections induced by the two projections, built the same way.

Internally everything is stored in frame coordinates: ``W_k = E_k L_k E_0^T``
with ``E_k`` the ``(m, n)`` parallel frame and ``L_k`` an ``(n, n)`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import (
    EmbeddedManifold,
    StepSizeError,
    curv_op_from_riemann,
    riemann_from_sff,
)
from .simulate import ManifoldPath, TangentPath


class NonzeroInitialVectorError(ValueError):
    pass


_RANK_TOL = 1e-3


def nearest_orthonormal(F):
    u, s, vt = np.linalg.svd(F, full_matrices=False)
    if np.any(s < _RANK_TOL):
        raise StepSizeError("frame transport lost rank; increase the number of grid steps")
    return u @ vt


def frame_curvature(M: EmbeddedManifold, nodes, frames):
    """Riemann tensor in frame coordinates and the derived operators.

    Returns ``(ric, curv, weitz)`` with shapes ``(..., n, n)`` and
    ``(..., n, n, n, n)``; the 2-vector operators act as
    ``(T P)[a, b] = sum T[a, b, c, d] P[c, d]``.
    """
    Et = np.swapaxes(frames, -1, -2)  # (..., n, m)
    eye = np.eye(M.ambient_dim)
    # A(E_i, K e_a) for every ambient a and frame vector i: (..., a, i, m)
    A = M.shape_operator(nodes[..., None, None, :], Et[..., None, :, :], eye[:, None, :])
    II_f = np.einsum("...aik,...kj->...aij", A, frames)
    riem = riemann_from_sff(II_f)
    ric = np.einsum("...pqrp->...qr", riem)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    curv = curv_op_from_riemann(riem)
    n = frames.shape[-1]
    eye = np.eye(n)
    weitz = np.einsum("...ac,bd->...abcd", ric, eye) + np.einsum("ac,...db->...abcd", eye, ric) - 2.0 * curv
    return ric, curv, weitz


def _midpoint_damping(R, dt):
    """Solve ``dL/dt = -1/2 R(t) L`` with ``L_0 = I`` by the implicit midpoint rule."""
    N1 = R.shape[-3]
    d = R.shape[-1]
    eye = np.eye(d)
    L = np.empty(R.shape)
    L[..., 0, :, :] = eye
    Rmid = 0.5 * (R[..., :-1, :, :] + R[..., 1:, :, :])
    step = np.linalg.solve(eye + 0.25 * dt * Rmid, eye - 0.25 * dt * Rmid)
    cur = np.broadcast_to(eye, R.shape[:-3] + (d, d))
    for k in range(N1 - 1):
        cur = step[..., k, :, :] @ cur
        L[..., k + 1, :, :] = cur
    return L


@dataclass(frozen=True)
class FramedPath:
    """A solved path with its transports, stored in frame coordinates."""

    manifold: EmbeddedManifold
    base: ManifoldPath
    frames: np.ndarray  # (..., N+1, m, n) parallel tangent frames
    normal_frames: np.ndarray  # (..., N+1, m, m-n) transported normal frames
    damping: np.ndarray  # (..., N+1, n, n)
    damping2: np.ndarray  # (..., N+1, n*n, n*n) acting on row-major vec of n x n
    ric: np.ndarray  # (..., N+1, n, n)
    curv: np.ndarray  # (..., N+1, n, n, n, n)
    weitz: np.ndarray  # (..., N+1, n, n, n, n)

    @property
    def grid(self):
        return self.base.grid

    @property
    def nodes(self):
        return self.base.nodes

    @cached_property
    def damping_inv(self):
        return np.linalg.inv(self.damping)

    @cached_property
    def damping2_inv(self):
        return np.linalg.inv(self.damping2)

    # ambient m x m views ------------------------------------------------

    @property
    def par(self):
        """``//_k`` as ``E_k E_0^T`` (zero on normals at x_0)."""
        return self.frames @ np.swapaxes(self.frames[..., :1, :, :], -1, -2)

    @property
    def damped(self):
        return self.frames @ self.damping @ np.swapaxes(self.frames[..., :1, :, :], -1, -2)

    @property
    def tilde_par(self):
        full = np.concatenate([self.frames, self.normal_frames], axis=-1)
        return full @ np.swapaxes(full[..., :1, :, :], -1, -2)

    def damped2_apply(self, k: int, P):
        """``W2_k`` applied to an antisymmetric ``P`` at ``x_0``."""
        n = self.frames.shape[-1]
        E0 = self.frames[..., 0, :, :]
        Ek = self.frames[..., k, :, :]
        p = np.swapaxes(E0, -1, -2) @ P @ E0
        q = (self.damping2[..., k, :, :] @ p.reshape(p.shape[:-2] + (n * n,))[..., None])[..., 0]
        q = q.reshape(p.shape)
        return Ek @ q @ np.swapaxes(Ek, -1, -2)

    def par2_apply(self, k: int, P):
        E0 = self.frames[..., 0, :, :]
        Ek = self.frames[..., k, :, :]
        R = Ek @ np.swapaxes(E0, -1, -2)
        return R @ P @ np.swapaxes(R, -1, -2)

    # frame coordinates ---------------------------------------------------

    def to_initial(self, v):
        """``W_k^{-1} v_k`` in ``x_0``-frame coordinates, for nodes ``k = 0..K-1``."""
        v = np.asarray(v, dtype=float)
        K = v.shape[-2]
        c = np.einsum("...kmi,...km->...ki", self.frames[..., :K, :, :], v)
        return np.einsum("...kij,...kj->...ki", self.damping_inv[..., :K, :, :], c)

    def from_initial(self, c, upto=None):
        """``W_k c_k`` as ambient vectors."""
        K = c.shape[-2] if upto is None else upto
        w = np.einsum("...kij,...kj->...ki", self.damping[..., :K, :, :], c)
        return np.einsum("...kmi,...ki->...km", self.frames[..., :K, :, :], w)


def compute_transports(M: EmbeddedManifold, path: ManifoldPath) -> FramedPath:
    nodes = np.asarray(path.nodes, dtype=float)
    N1 = nodes.shape[-2]
    dt = path.grid.dt
    n = M.intrinsic_dim

    E = np.empty(nodes.shape + (n,))
    Nf = np.empty(nodes.shape + (M.codim,))
    E[..., 0, :, :] = M.tangent_frame(nodes[..., 0, :])
    Nf[..., 0, :, :] = M.normal_frame(nodes[..., 0, :])
    for k in range(N1 - 1):
        x = nodes[..., k + 1, :]
        E[..., k + 1, :, :] = nearest_orthonormal(M.tangent(x[..., None, :], np.swapaxes(E[..., k, :, :], -1, -2)).swapaxes(-1, -2))
        Nf[..., k + 1, :, :] = nearest_orthonormal(M.normal(x[..., None, :], np.swapaxes(Nf[..., k, :, :], -1, -2)).swapaxes(-1, -2))

    ric, curv, weitz = frame_curvature(M, nodes, E)
    L = _midpoint_damping(ric, dt)
    R2 = weitz.reshape(weitz.shape[:-4] + (n * n, n * n))
    L2 = _midpoint_damping(R2, dt)
    return FramedPath(M, path, E, Nf, L, L2, ric, curv, weitz)


def dd_dt(framed: FramedPath, v: TangentPath, atol: float = 1e-12) -> np.ndarray:
    """Discrete damped derivative, one vector per step ``j = 0..N-1``.

    ``(Dv)_j = W_j (W_{j+1}^{-1} v_{j+1} - W_j^{-1} v_j) / dt`` is the exact
    inverse of :func:`damped_integral`.
    """
    vec = np.asarray(v.vectors if isinstance(v, TangentPath) else v, dtype=float)
    if np.max(np.abs(vec[..., 0, :])) > atol:
        raise NonzeroInitialVectorError("damped derivative needs v_0 = 0")
    c = framed.to_initial(vec)
    dc = np.diff(c, axis=-2) / framed.grid.dt
    return framed.from_initial(dc)


def damped_integral(framed: FramedPath, u) -> TangentPath:
    """``k -> W_k sum_{j<k} W_j^{-1} u_j dt`` (left-point), ``u`` of shape ``(..., N, m)``."""
    u = np.asarray(u, dtype=float)
    c = framed.to_initial(u) * framed.grid.dt
    zero = np.zeros(c.shape[:-2] + (1, c.shape[-1]))
    csum = np.concatenate([zero, np.cumsum(c, axis=-2)], axis=-2)
    return TangentPath(framed.grid, framed.from_initial(csum), framed.base)
