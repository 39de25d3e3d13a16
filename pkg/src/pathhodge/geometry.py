"""Embedded model manifolds and their extrinsic/intrinsic curvature data.

Every supported manifold is a product of round spheres sitting in orthogonal
coordinate blocks of R^m:

* ``Sphere(n)``: the unit sphere in R^{n+1} (one block);
* ``Circle``: the unit circle in R^2 (one block);
* ``CliffordTorus``: (cos a, sin a, cos b, sin b)/sqrt(2) in R^4, two blocks of
  radius 1/sqrt(2).  The induced metric is flat.

Tangent vectors are ambient m-vectors with ``X(x) v = v``; no charts are used.
All array functions broadcast over leading axes, so a batch of points has
shape ``(..., m)``.

Curvature sign convention
-------------------------
``R(u, v) w = nabla_u nabla_v w - nabla_v nabla_u w - nabla_[u,v] w`` so that the
sectional curvature is ``<R(u, v) v, u>``.  The curvature operator on 2-vectors
is fixed by ``<Rop(u^v), w^z> = <R(u, v) z, w>``, which makes ``Rop`` the
identity on the unit 2-sphere.  A 2-vector ``u^v`` is stored as the
antisymmetric matrix ``u v^T - v u^T`` with inner product ``0.5 * tr(P^T Q)``.
The Weitzenbock curvature on 2-vectors is ``Ric(P) + P Ric - 2 Rop(P)``,
which equals ``2 (n - 2)`` times the identity on the unit n-sphere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

ON_MANIFOLD_TOL = 1e-8


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


class GeometryError(ValueError):
    """Raised for unsupported manifolds or inputs off the manifold."""


class StepSizeError(RuntimeError):
    """A discrete step left the domain where the retraction is valid."""


class ManifoldKind(enum.Enum):
    SPHERE = "sphere"
    CIRCLE = "circle"
    CLIFFORD_TORUS = "clifford_torus"

    @classmethod
    def parse(cls, kind):
        if isinstance(kind, cls):
            return kind
        key = str(kind).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"torus": "clifford_torus", "cliffordtorus": "clifford_torus", "flat_torus": "clifford_torus"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise GeometryError(f"unsupported manifold kind {kind!r}") from None


@dataclass(frozen=True)
class EmbeddedManifold:
    """A product of round spheres, one per coordinate block of R^m."""

    kind: ManifoldKind
    intrinsic_dim: int
    blocks: tuple  # tuple of (start, stop) slices into R^m
    radii: tuple

    @property
    def ambient_dim(self) -> int:
        return self.blocks[-1][1]

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.intrinsic_dim

    @property
    def name(self) -> str:
        if self.kind is ManifoldKind.SPHERE:
            return f"sphere{self.intrinsic_dim}"
        return self.kind.value

    def __repr__(self):
        return f"EmbeddedManifold({self.name}, m={self.ambient_dim}, n={self.intrinsic_dim})"

    def base_point(self) -> np.ndarray:
        """A canonical point: ``radius * e_0`` in every block."""
        x = np.zeros(self.ambient_dim)
        for (lo, _), r in zip(self.blocks, self.radii):
            x[lo] = r
        return x

    # -- point-level maps -------------------------------------------------

    def constraint_eval(self, y):
        """``|y_b|^2 - r_b^2`` per block; shape ``(..., m - n)``."""
        y = np.asarray(y, dtype=float)
        out = [np.sum(y[..., lo:hi] ** 2, axis=-1) - r * r for (lo, hi), r in zip(self.blocks, self.radii)]
        return np.stack(out, axis=-1)

    def distance_to_manifold(self, y):
        y = np.asarray(y, dtype=float)
        d2 = 0.0
        for (lo, hi), r in zip(self.blocks, self.radii):
            d2 = d2 + (np.linalg.norm(y[..., lo:hi], axis=-1) - r) ** 2
        return np.sqrt(d2)

    def point_projection(self, y):
        """Nearest-point retraction onto M."""
        y = np.asarray(y, dtype=float)
        if len(self.blocks) == 1:
            blocks = [(slice(None), self.radii[0])]
        else:
            blocks = [(slice(lo, hi), r) for (lo, hi), r in zip(self.blocks, self.radii)]
        out = np.empty_like(y)
        for sl, r in blocks:
            yb = y[..., sl]
            nb = np.sqrt(_dot(yb, yb))[..., None]
            if np.any(nb < 0.5 * r):
                raise StepSizeError("retraction undefined for this step; increase the number of grid steps")
            out[..., sl] = (r / nb) * yb
        return out

    def retraction_derivative(self, y, w):
        """Directional derivative of :meth:`point_projection` at ``y`` along ``w``."""
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        out = np.empty(np.broadcast_shapes(y.shape, w.shape))
        for (lo, hi), r in zip(self.blocks, self.radii):
            yb, wb = y[..., lo:hi], w[..., lo:hi]
            nb = np.linalg.norm(yb, axis=-1, keepdims=True)
            u = yb / nb
            out[..., lo:hi] = r * (wb - u * np.sum(u * wb, axis=-1, keepdims=True)) / nb
        return out

    def check_point(self, x, tol=ON_MANIFOLD_TOL):
        """Validate ``x`` is on M to ``tol`` and return its exact retraction."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            raise GeometryError(f"expected points in R^{self.ambient_dim}, got shape {x.shape}")
        err = np.max(np.abs(self.constraint_eval(x)))
        if not err <= tol:
            raise GeometryError(f"point is off the manifold (constraint residual {err:.3e})")
        return self.point_projection(x)

    # -- the gradient system X -------------------------------------------
    # These extend off M by the block formula  e - y <y, e> / |y|^2, which is
    # what the Heun predictor evaluates.

    def tangent(self, y, e):
        """``X(y) e``: orthogonal projection of ``e`` onto ``T_y M``."""
        y = np.asarray(y, dtype=float)
        e = np.asarray(e, dtype=float)
        if len(self.blocks) == 1:
            coef = _dot(y, e) / _dot(y, y)
            return e - coef[..., None] * y
        out = np.array(np.broadcast_to(e, np.broadcast_shapes(y.shape, e.shape)), dtype=float)
        for lo, hi in self.blocks:
            yb = y[..., lo:hi]
            coef = _dot(yb, e[..., lo:hi]) / _dot(yb, yb)
            out[..., lo:hi] -= coef[..., None] * yb
        return out

    def normal(self, y, e):
        """``K(y) e = e - X(y) e``."""
        return np.asarray(e, dtype=float) - self.tangent(y, e)

    def tangent_derivative(self, y, w, e):
        """Directional derivative along ``w`` of ``y -> X(y) e`` (full ambient vector)."""
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        e = np.asarray(e, dtype=float)
        out = np.zeros(np.broadcast_shapes(y.shape, w.shape, e.shape))
        for lo, hi in self.blocks:
            yb, wb, eb = y[..., lo:hi], w[..., lo:hi], e[..., lo:hi]
            q = np.sum(yb * yb, axis=-1, keepdims=True)
            ye = np.sum(yb * eb, axis=-1, keepdims=True)
            yw = np.sum(yb * wb, axis=-1, keepdims=True)
            we = np.sum(wb * eb, axis=-1, keepdims=True)
            out[..., lo:hi] = -(wb * ye + yb * we) / q + 2.0 * yb * ye * yw / (q * q)
        return out

    def projection_matrix(self, y):
        """``X(y)`` as an ``(..., m, m)`` matrix."""
        y = np.asarray(y, dtype=float)
        eye = np.broadcast_to(np.eye(self.ambient_dim), y.shape[:-1] + (self.ambient_dim,) * 2)
        # rows of X are X e_i since X is symmetric
        return self.tangent(y[..., None, :], eye)

    def tangent_frame(self, x):
        """An orthonormal basis of ``T_x M`` as the columns of an ``(..., m, n)`` array."""
        x = np.asarray(x, dtype=float)
        u, _, _ = np.linalg.svd(self.projection_matrix(x))
        return u[..., :, : self.intrinsic_dim]

    def normal_frame(self, x):
        """An orthonormal basis of the normal space: ``x_b / r_b`` padded per block."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.codim,))
        for j, ((lo, hi), r) in enumerate(zip(self.blocks, self.radii)):
            out[..., lo:hi, j] = x[..., lo:hi] / r
        return out

    # -- extrinsic curvature --------------------------------------------

    def shape_operator(self, x, v, e):
        """``A(v, K_x e) = nabla_v X (e)`` for tangent ``v`` at on-manifold ``x``."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        e = np.asarray(e, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, v.shape, e.shape))
        for (lo, hi), r in zip(self.blocks, self.radii):
            xe = np.sum(x[..., lo:hi] * e[..., lo:hi], axis=-1, keepdims=True)
            out[..., lo:hi] = -xe * v[..., lo:hi] / (r * r)
        return out

    def second_fundamental_form(self, x):
        """Tensor ``II[..., a, b, c]``: component ``a`` of ``II(X e_b, X e_c)``.

        Built from the shape operator via ``<A(u, K e_a), w> = <II(u, w), e_a>``.
        """
        x = np.asarray(x, dtype=float)
        m = self.ambient_dim
        P = self.projection_matrix(x)  # P[..., b, :] = X e_b
        eye = np.eye(m)
        # A(X e_b, K e_a) for all a, b  -> shape (..., a, b, m)
        A = self.shape_operator(x[..., None, None, :], P[..., None, :, :], eye[:, None, :])
        return np.einsum("...abk,...ck->...abc", A, P)


@dataclass(frozen=True)
class TangentFrameData:
    X: np.ndarray
    K: np.ndarray
    base_point: np.ndarray


@dataclass(frozen=True)
class CurvaturePackage:
    """Curvature operators at a point, all as ambient matrices/tensors.

    ``ric_sharp`` is ``(m, m)``; ``curv_op`` and ``weitzenbock2`` are
    ``(m, m, m, m)`` tensors ``T[a, b, c, d]`` acting on 2-vectors by
    ``(T P)[a, b] = sum_{c,d} T[a, b, c, d] P[c, d]``.
    """

    ric_sharp: np.ndarray
    curv_op: np.ndarray
    weitzenbock2: np.ndarray
    riemann: np.ndarray
    base_point: np.ndarray

    def apply_curv_op(self, P):
        return np.einsum("abcd,...cd->...ab", self.curv_op, P)

    def apply_weitzenbock2(self, P):
        return np.einsum("abcd,...cd->...ab", self.weitzenbock2, P)


def construct_manifold(kind, n: int | None = None) -> EmbeddedManifold:
    """Build one of the supported model manifolds.

    >>> construct_manifold("sphere", 2).ambient_dim
    3
    """
    kind = ManifoldKind.parse(kind)
    if kind is ManifoldKind.SPHERE:
        if n is None or int(n) != n or n < 1:
            raise GeometryError(f"Sphere needs an integer dimension n >= 1, got {n!r}")
        n = int(n)
        return EmbeddedManifold(kind, n, ((0, n + 1),), (1.0,))
    if kind is ManifoldKind.CIRCLE:
        if n not in (None, 1):
            raise GeometryError(f"Circle is one-dimensional, got n={n!r}")
        return EmbeddedManifold(kind, 1, ((0, 2),), (1.0,))
    if n not in (None, 2):
        raise GeometryError(f"CliffordTorus is two-dimensional, got n={n!r}")
    r = 1.0 / np.sqrt(2.0)
    return EmbeddedManifold(kind, 2, ((0, 2), (2, 4)), (r, r))


def projections(M: EmbeddedManifold, x) -> TangentFrameData:
    x = M.check_point(x)
    X = M.projection_matrix(x)
    return TangentFrameData(X=X, K=np.eye(M.ambient_dim) - X, base_point=x)


def nabla_X(M: EmbeddedManifold, x, v, e) -> np.ndarray:
    """``nabla_v X(e)``: tangential part of the derivative of ``y -> X(y) e`` along ``v``."""
    x = M.check_point(x)
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(M.normal(x, v)) > ON_MANIFOLD_TOL * max(1.0, np.linalg.norm(v)):
        raise GeometryError("direction v is not tangent at x")
    return M.shape_operator(x, v, e)


def riemann_from_sff(II) -> np.ndarray:
    """Gauss equation: ``Riem[p, q, r, s] = <R(e_p, e_q) e_r, e_s>``."""
    return np.einsum("...aqr,...aps->...pqrs", II, II) - np.einsum("...apr,...aqs->...pqrs", II, II)


def ricci_from_riemann(riem) -> np.ndarray:
    """``Ric[q, r] = sum_p <R(e_p, e_q) e_r, e_p>``."""
    return np.einsum("...pqrp->...qr", riem)


def curv_op_from_riemann(riem) -> np.ndarray:
    """Curvature-operator tensor: ``(Rop P)[a, b] = 0.5 sum P[p, q] Riem[p, q, b, a]``."""
    return 0.5 * np.einsum("...pqba->...abpq", riem)


def weitzenbock_from(ric, curv) -> np.ndarray:
    """Tensor of ``P -> Ric P + P Ric - 2 Rop(P)`` (``Ric`` symmetric)."""
    m = ric.shape[-1]
    eye = np.eye(m)
    left = np.einsum("...ac,bd->...abcd", ric, eye)
    right = np.einsum("ac,...db->...abcd", eye, ric)
    return left + right - 2.0 * curv


def curvature_package(M: EmbeddedManifold, x) -> CurvaturePackage:
    x = M.check_point(x)
    riem = riemann_from_sff(M.second_fundamental_form(x))
    ric = ricci_from_riemann(riem)
    ric = 0.5 * (ric + ric.T)
    curv = curv_op_from_riemann(riem)
    return CurvaturePackage(
        ric_sharp=ric,
        curv_op=curv,
        weitzenbock2=weitzenbock_from(ric, curv),
        riemann=riem,
        base_point=x,
    )


def random_points(M: EmbeddedManifold, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random points: Gaussian ambient vectors normalised per block."""
    y = rng.standard_normal((count, M.ambient_dim))
    for (lo, hi), r in zip(M.blocks, M.radii):
        y[:, lo:hi] *= r / np.linalg.norm(y[:, lo:hi], axis=-1, keepdims=True)
    return y


def random_tangent(M: EmbeddedManifold, x, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return M.tangent(x, rng.standard_normal(x.shape))


def two_vector(u, v):
    """``u ^ v`` as the antisymmetric matrix ``u v^T - v u^T``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., :, None] * v[..., None, :] - v[..., :, None] * u[..., None, :]


def two_vector_inner(P, Q):
    return 0.5 * np.sum(np.asarray(P) * np.asarray(Q), axis=(-2, -1))
