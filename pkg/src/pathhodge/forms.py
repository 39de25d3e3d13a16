"""Cylinder functions and 1-forms on path space, their pullbacks by the Ito
map, exterior differentiation, Wiener divergence, and a finite-rank Hodge
Laplacian on 1-forms.

A cylinder object lives on ``M^k`` through the evaluation nodes ``times``.
Points are passed as ``y`` of shape ``(..., k, m)``.  Derivatives are
ambient: ``grad[..., i, a] = dF/dy_i[a]`` and
``hess[..., i, a, j, b] = d^2 F / dy_i[a] dy_j[b]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .bismut import filtered_adjoint, filtered_derivative, orthonormal_cameron_martin, q_map, wedge
from .geometry import EmbeddedManifold
from .simulate import (
    CameronMartinVector,
    DrivingPath,
    ManifoldPath,
    TimeGrid,
    check_same_grid,
    heun_jacobians,
    sample_driving_paths,
    solve_gradient_sde,
)
from .transport import FramedPath, compute_transports


class NonCylindricalFieldError(ValueError):
    pass


class BasisConditionError(np.linalg.LinAlgError):
    pass


def _check_times(times, grid: TimeGrid):
    t = np.asarray(times)
    if t.ndim != 1 or len(t) == 0:
        raise ValueError("times must be a non-empty 1-d sequence of node indices")
    if np.any(t < 0) or np.any(t > grid.steps):
        raise IndexError(f"evaluation times {list(t)} outside the grid 0..{grid.steps}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("evaluation times must be strictly increasing")


def _eval_points(path, times):
    nodes = path.nodes if isinstance(path, (ManifoldPath, FramedPath)) else np.asarray(path)
    return nodes[..., list(times), :]


# -- cylinder functions ---------------------------------------------------------


@dataclass(frozen=True)
class CylinderFunction:
    times: tuple
    value: Callable
    grad: Callable
    hess: Callable

    def __call__(self, path):
        return self.value(_eval_points(path, self.times))

    def on_times(self, times) -> "CylinderFunction":
        """The same function viewed on a larger set of evaluation times."""
        sel = _embedding(self.times, times)
        k = len(times)

        def value(y):
            return self.value(y[..., sel, :])

        def grad(y):
            out = np.zeros(y.shape)
            out[..., sel, :] = self.grad(y[..., sel, :])
            return out

        def hess(y):
            m = y.shape[-1]
            return _spread(self.hess(y[..., sel, :]), sel, k, m)

        return CylinderFunction(tuple(times), value, grad, hess)

    def __mul__(self, other: "CylinderFunction") -> "CylinderFunction":
        times = _merged(self.times, other.times)
        f, g = self.on_times(times), other.on_times(times)

        def value(y):
            return f.value(y) * g.value(y)

        def grad(y):
            return f.grad(y) * g.value(y)[..., None, None] + g.grad(y) * f.value(y)[..., None, None]

        def hess(y):
            fg, gg = f.grad(y), g.grad(y)
            cross = np.einsum("...ia,...jb->...iajb", fg, gg)
            return (
                f.hess(y) * g.value(y)[..., None, None, None, None]
                + g.hess(y) * f.value(y)[..., None, None, None, None]
                + cross
                + np.einsum("...iajb->...jbia", cross)
            )

        return CylinderFunction(times, value, grad, hess)


def _merged(a, b):
    return tuple(sorted(set(a) | set(b)))


def _spread(H, sel, k, m):
    """Place a ``(..., k', m, k', m)`` block at positions ``sel`` of a ``k``-time tensor."""
    out = np.zeros(H.shape[:-4] + (k, m, k, m))
    for a, i in enumerate(sel):
        for b, j in enumerate(sel):
            out[..., i, :, j, :] = H[..., a, :, b, :]
    return out


def _embedding(sub, times):
    pos = {t: i for i, t in enumerate(times)}
    try:
        return np.array([pos[t] for t in sub])
    except KeyError as exc:
        raise ValueError(f"{sub} is not contained in {times}") from exc


def constant_function(c: float, times=(0,)) -> CylinderFunction:
    k = len(times)
    return CylinderFunction(
        tuple(times),
        lambda y: np.full(y.shape[:-2], float(c)),
        lambda y: np.zeros(y.shape),
        lambda y: np.zeros(y.shape[:-2] + (k, y.shape[-1], k, y.shape[-1])),
    )


def coordinate_function(time: int, coord: int) -> CylinderFunction:
    """``sigma -> sigma(t)[c]``."""

    def grad(y):
        g = np.zeros(y.shape)
        g[..., 0, coord] = 1.0
        return g

    return CylinderFunction(
        (time,),
        lambda y: y[..., 0, coord].copy(),
        grad,
        lambda y: np.zeros(y.shape[:-2] + (1, y.shape[-1], 1, y.shape[-1])),
    )


def linear_function(time: int, c) -> CylinderFunction:
    """``sigma -> <sigma(t), c>``."""
    c = np.asarray(c, dtype=float)
    return CylinderFunction(
        (time,),
        lambda y: y[..., 0, :] @ c,
        lambda y: np.broadcast_to(c, y.shape).copy(),
        lambda y: np.zeros(y.shape[:-2] + (1, y.shape[-1], 1, y.shape[-1])),
    )


def trig_function(times, m: int, rng: np.random.Generator, terms: int = 3, freq: float = 1.0) -> CylinderFunction:
    """A random smooth function ``sum_r a_r sin(<w_r, y> + p_r)`` on ``M^k``."""
    k = len(times)
    w = rng.standard_normal((terms, k, m)) * freq
    a = rng.standard_normal(terms)
    p = rng.uniform(0, 2 * np.pi, terms)

    def phase(y):
        return np.einsum("rka,...ka->...r", w, y) + p

    def value(y):
        return np.sin(phase(y)) @ a

    def grad(y):
        return np.einsum("...r,rka->...ka", np.cos(phase(y)) * a, w)

    def hess(y):
        return -np.einsum("...r,ria,rjb->...iajb", np.sin(phase(y)) * a, w, w)

    return CylinderFunction(tuple(times), value, grad, hess)


# -- 1-forms and vector fields ------------------------------------------------------


@dataclass(frozen=True)
class CylinderOneForm:
    """``phi(v) = sum_i <a_i(sigma_{t_1..t_k}), v_{t_i}>``.

    ``coeff(y)`` returns ``(..., k, m)``; ``jac(y)[..., i, a, j, b]`` is
    ``d a_i[a] / d y_j[b]``.
    """

    times: tuple
    coeff: Callable
    jac: Callable

    def covectors(self, path):
        return self.coeff(_eval_points(path, self.times))

    def __call__(self, path, v):
        """Action on a tangent path ``v`` (array or TangentPath) along ``path``."""
        vec = getattr(v, "vectors", v)
        return np.sum(self.covectors(path) * vec[..., list(self.times), :], axis=(-2, -1))

    def __add__(self, other):
        times = _merged(self.times, other.times)
        a, b = self.on_times(times), other.on_times(times)
        return CylinderOneForm(times, lambda y: a.coeff(y) + b.coeff(y), lambda y: a.jac(y) + b.jac(y))

    def __mul__(self, s: float):
        return CylinderOneForm(self.times, lambda y: s * self.coeff(y), lambda y: s * self.jac(y))

    __rmul__ = __mul__

    def on_times(self, times) -> "CylinderOneForm":
        sel = _embedding(self.times, times)
        k = len(times)

        def coeff(y):
            out = np.zeros(y.shape)
            out[..., sel, :] = self.coeff(y[..., sel, :])
            return out

        def jac(y):
            m = y.shape[-1]
            return _spread(self.jac(y[..., sel, :]), sel, k, m)

        return CylinderOneForm(tuple(times), coeff, jac)


def zero_form(times=(0,)) -> CylinderOneForm:
    k = len(times)
    return CylinderOneForm(
        tuple(times), lambda y: np.zeros(y.shape), lambda y: np.zeros(y.shape[:-2] + (k, y.shape[-1], k, y.shape[-1]))
    )


def exact_form(f: CylinderFunction) -> CylinderOneForm:
    """``df``."""
    return CylinderOneForm(f.times, f.grad, f.hess)


def scaled_form(g: CylinderFunction, f: CylinderFunction) -> CylinderOneForm:
    """``g df``."""
    times = _merged(g.times, f.times)
    g, f = g.on_times(times), f.on_times(times)

    def coeff(y):
        return g.value(y)[..., None, None] * f.grad(y)

    def jac(y):
        return g.value(y)[..., None, None, None, None] * f.hess(y) + np.einsum("...ia,...jb->...jbia", g.grad(y), f.grad(y))

    return CylinderOneForm(times, coeff, jac)


@dataclass(frozen=True)
class CylinderVectorField:
    """``V(sigma)_{t_i} = X(sigma_{t_i}) c_i(sigma_{t_1..t_k})`` at the evaluation times."""

    times: tuple
    coeff: Callable  # (..., k, m)
    jac: Callable  # (..., k, m, k, m)

    def values(self, M: EmbeddedManifold, y):
        return M.tangent(y, self.coeff(y))

    def jacobian(self, M: EmbeddedManifold, y):
        """``d V_i[a] / d y_j[b]`` of the ambient extension, ``(..., k, m, k, m)``."""
        c = self.coeff(y)
        k, m = y.shape[-2], y.shape[-1]
        eye = np.eye(m)
        # X(y_i) d c_i / d y_j[b]
        dc = self.jac(y)  # (..., i, a, j, b)
        dcT = np.einsum("...iajb->...ijba", dc)  # columns as vectors in a
        J = M.tangent(y[..., :, None, None, :], dcT)  # (..., i, j, b, a)
        J = np.einsum("...ijba->...iajb", J)
        # (d X(y_i) / d y_i[b]) c_i
        dX = M.tangent_derivative(y[..., :, None, :], np.broadcast_to(eye, y.shape[:-1] + (m, m)), c[..., :, None, :])
        for i in range(k):
            J[..., i, :, i, :] += np.swapaxes(dX[..., i, :, :], -1, -2)
        return J


def trig_field(times, m: int, rng: np.random.Generator, terms: int = 3, freq: float = 1.0) -> CylinderVectorField:
    k = len(times)
    w = rng.standard_normal((terms, k, m)) * freq
    a = rng.standard_normal((terms, k, m))
    p = rng.uniform(0, 2 * np.pi, terms)

    def phase(y):
        return np.einsum("rka,...ka->...r", w, y) + p

    def coeff(y):
        return np.einsum("...r,rka->...ka", np.sin(phase(y)), a)

    def jac(y):
        return np.einsum("...r,ria,rjb->...iajb", np.cos(phase(y)), a, w)

    return CylinderVectorField(tuple(times), coeff, jac)


def _common(phi, *fields):
    times = phi.times
    for V in fields:
        if tuple(V.times) != tuple(times):
            raise NonCylindricalFieldError(
                f"vector field evaluated at {V.times}, form at {times}; supply fields on the form's times"
            )
    return times


def directional(M, fn_grad, V: CylinderVectorField, y):
    """Derivative of a function with ambient gradient ``fn_grad`` along ``V``."""
    return np.sum(fn_grad * V.values(M, y), axis=(-2, -1))


def lie_bracket(M: EmbeddedManifold, V1: CylinderVectorField, V2: CylinderVectorField, y):
    """``[V1, V2] = DV2 . V1 - DV1 . V2`` at ``y``, ``(..., k, m)``."""
    u1, u2 = V1.values(M, y), V2.values(M, y)
    J1, J2 = V1.jacobian(M, y), V2.jacobian(M, y)
    return np.einsum("...iajb,...jb->...ia", J2, u1) - np.einsum("...iajb,...jb->...ia", J1, u2)


def exterior_derivative_cylinder(phi: CylinderOneForm, M: EmbeddedManifold):
    """Evaluator ``(V1, V2, path) -> d phi(V1 ^ V2)`` by the Palais formula."""

    def evaluate(V1: CylinderVectorField, V2: CylinderVectorField, path):
        times = _common(phi, V1, V2)
        y = _eval_points(path, times)
        a = phi.coeff(y)
        Ja = phi.jac(y)
        u1, u2 = V1.values(M, y), V2.values(M, y)
        J1, J2 = V1.jacobian(M, y), V2.jacobian(M, y)
        # gradient of y -> phi(V)(y) = sum <a_i, V_i>
        g2 = np.einsum("...ia,...iajb->...jb", u2, Ja) + np.einsum("...ia,...iajb->...jb", a, J2)
        g1 = np.einsum("...ia,...iajb->...jb", u1, Ja) + np.einsum("...ia,...iajb->...jb", a, J1)
        bracket = lie_bracket(M, V1, V2, y)
        return (
            np.sum(g2 * u1, axis=(-2, -1))
            - np.sum(g1 * u2, axis=(-2, -1))
            - np.sum(a * bracket, axis=(-2, -1))
        )

    return evaluate


def wedge_of_forms(M, alpha: CylinderOneForm, beta: CylinderOneForm):
    """``(alpha ^ beta)(V1 ^ V2) = alpha(V1) beta(V2) - alpha(V2) beta(V1)``."""

    def evaluate(V1, V2, path):
        times = _common(alpha, V1, V2)
        _common(beta, V1)
        y = _eval_points(path, times)
        a, b = alpha.coeff(y), beta.coeff(y)
        u1, u2 = V1.values(M, y), V2.values(M, y)

        def pair(c, u):
            return np.sum(c * u, axis=(-2, -1))

        return pair(a, u1) * pair(b, u2) - pair(a, u2) * pair(b, u1)

    return evaluate


def two_form_on_two_vector(phi: CylinderOneForm, path, V) -> np.ndarray:
    """``d phi`` evaluated on a two-vector ``V`` along the path.

    ``V`` is a :class:`TwoVectorOnPath` whose evaluation subgrid is exactly
    ``phi.times``: ``d phi(V) = sum J[i, c, j, b] V[(t_j, t_i)][b, c]``.
    """
    if tuple(np.asarray(V.indices)) != tuple(phi.times):
        raise ValueError("two-vector must be sampled at the form's evaluation times")
    J = phi.jac(_eval_points(path, phi.times))
    return np.einsum("...icjb,...jibc->...", J, V.values)


# -- derivatives along solutions ------------------------------------------------------------


@dataclass(frozen=True)
class HGradient:
    times: tuple
    covectors: np.ndarray  # (..., k, m), tangentially projected at sigma
    representative: CameronMartinVector  # h -> df(filtered_derivative(h))

    def pair(self, v):
        vec = getattr(v, "vectors", v)
        return np.sum(self.covectors * vec[..., list(self.times), :], axis=(-2, -1))


def h_gradient(framed: FramedPath, f: CylinderFunction) -> HGradient:
    _check_times(f.times, framed.grid)
    y = _eval_points(framed, f.times)
    cov = framed.manifold.tangent(y, f.grad(y))
    return HGradient(f.times, cov, filtered_adjoint(framed, f.times, cov))


@dataclass(frozen=True)
class PulledBackForm:
    raw: CameronMartinVector  # h -> phi(T I(h))
    filtered: CameronMartinVector  # h -> phi(filtered_derivative(h))


def raw_representative(M: EmbeddedManifold, path: ManifoldPath, omega: DrivingPath, times, covectors) -> CameronMartinVector:
    """H-representative of ``h -> sum_i <c_i, T I(h)_{t_i}>`` by the adjoint of the Heun linearisation."""
    Jx, JB = heun_jacobians(M, path, omega)
    N = path.grid.steps
    covectors = np.asarray(covectors, dtype=float)
    shape = np.broadcast_shapes(Jx.shape[:-3], covectors.shape[:-2])
    src = np.zeros(shape + (N + 1, M.ambient_dim))
    for i, t in enumerate(times):
        src[..., t, :] += covectors[..., i, :]
    lam = src[..., N, :]
    hdot = np.empty(shape + (N, M.ambient_dim))
    for k in range(N - 1, -1, -1):
        hdot[..., k, :] = np.einsum("...ab,...a->...b", JB[..., k, :, :], lam)
        lam = src[..., k, :] + np.einsum("...ab,...a->...b", Jx[..., k, :, :], lam)
    return CameronMartinVector(path.grid, hdot)


def pullback(phi, omega: DrivingPath, framed: FramedPath):
    """Pull back a cylinder function (scalar) or 1-form (raw and filtered H-forms) by the Ito map."""
    check_same_grid(omega.grid, framed.grid)
    if isinstance(phi, CylinderFunction):
        _check_times(phi.times, framed.grid)
        return phi(framed)
    _check_times(phi.times, framed.grid)
    cov = phi.covectors(framed)
    raw = raw_representative(framed.manifold, framed.base, omega, phi.times, cov)
    return PulledBackForm(raw, filtered_adjoint(framed, phi.times, cov))


def wiener_divergence(lam: CylinderFunction, h: CameronMartinVector, omega: DrivingPath, framed: FramedPath):
    """``div(lam(x(omega)) h) = lam . sum <hdot_k, dB_k> - d(I* lam)(h)``."""
    check_same_grid(omega.grid, framed.grid, h.grid)
    paley_wiener = np.sum(h.hdot * omega.increments, axis=(-2, -1))
    dlam = pullback(exact_form(lam), omega, framed).raw
    return lam(framed) * paley_wiener - dlam.inner(h)


# -- finite-rank Hodge Laplacian -----------------------------------------------------------


@dataclass(frozen=True)
class GalerkinSystem:
    manifold: str
    grid: TimeGrid
    times: tuple
    function_labels: list
    oneform_labels: list
    G0: np.ndarray
    G1: np.ndarray
    D: np.ndarray
    D1: np.ndarray  # per-test-vector pairings, averaged: (tests, forms) root of the 2-form Gram
    Gamma: np.ndarray
    laplacian: np.ndarray  # Delta in coefficient space, G1^{-1} A
    eigenvalues: np.ndarray
    exact_projector: np.ndarray
    coexact_projector: np.ndarray
    harmonic_projector: np.ndarray
    samples: int
    seed: int
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def mat(a):
            return [list(map(float, row)) for row in np.atleast_2d(a)]

        doc = {
            "schema": "pathhodge.galerkin/1",
            "metadata": {
                "manifold": self.manifold,
                "grid": {"horizon": self.grid.horizon, "steps": self.grid.steps},
                "times": list(map(int, self.times)),
                "seed": self.seed,
                "samples": self.samples,
            },
            "function_basis": self.function_labels,
            "oneform_basis": self.oneform_labels,
            "G0": mat(self.G0),
            "G1": mat(self.G1),
            "D": mat(self.D),
            "D1": mat(self.D1),
            "Gamma": mat(self.Gamma),
            "laplacian": mat(self.laplacian),
            "eigenvalues": list(map(float, self.eigenvalues)),
            "projectors": {
                "exact": mat(self.exact_projector),
                "coexact": mat(self.coexact_projector),
                "harmonic": mat(self.harmonic_projector),
            },
            "diagnostics": {k: float(v) for k, v in self.diagnostics.items()},
        }
        return json.dumps(doc, indent=1)

    def spectrum_rows(self):
        return [(i, float(ev)) for i, ev in enumerate(self.eigenvalues)]

    def decompose(self, coeffs):
        """Exact, coexact and harmonic parts of a 1-form given by coefficients."""
        c = np.asarray(coeffs, dtype=float)
        return self.exact_projector @ c, self.coexact_projector @ c, self.harmonic_projector @ c


def _function_basis(times, m):
    """Coordinates ``x_c(t)`` and products ``x_c(s) x_d(t)``, ``s < t``."""
    funcs, labels = [], []
    for t in times:
        for c in range(m):
            funcs.append(("lin", t, c))
            labels.append(f"x{c + 1}(t{t})")
    for i, s in enumerate(times):
        for t in times[i + 1 :]:
            for c in range(m):
                for d in range(m):
                    funcs.append(("prod", s, c, t, d))
                    labels.append(f"x{c + 1}(t{s})*x{d + 1}(t{t})")
    return funcs, labels


def _oneform_basis(times, m):
    """``dx_c(t)`` and ``x_d(s) dx_c(t)`` for ``s != t``."""
    forms, labels = [], []
    for t in times:
        for c in range(m):
            forms.append((None, None, t, c))
            labels.append(f"dx{c + 1}(t{t})")
    for s in times:
        for t in times:
            if s == t:
                continue
            for d in range(m):
                for c in range(m):
                    forms.append((s, d, t, c))
                    labels.append(f"x{d + 1}(t{s}) dx{c + 1}(t{t})")
    return forms, labels


def _derivative_matrix(funcs, forms):
    """Exact coefficients of ``d f_alpha`` in the 1-form basis, ``(forms, funcs)``."""
    index = {f: i for i, f in enumerate(forms)}
    D = np.zeros((len(forms), len(funcs)))
    for a, f in enumerate(funcs):
        if f[0] == "lin":
            _, t, c = f
            D[index[(None, None, t, c)], a] = 1.0
        else:
            _, s, c, t, d = f
            D[index[(s, c, t, d)], a] += 1.0  # x_c(s) dx_d(t)
            D[index[(t, d, s, c)], a] += 1.0  # x_d(t) dx_c(s)
    return D


def _gram_condition(G, name, limit):
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > limit:
        raise BasisConditionError(f"{name} Gram matrix is ill-conditioned (condition {cond:.2e}); reduce the basis")
    return cond


def _g_projector(B, G, rtol=1e-10):
    """G-orthogonal projector onto the column span of ``B``."""
    if B.shape[1] == 0:
        return np.zeros((G.shape[0], G.shape[0]))
    L = np.linalg.cholesky(G)
    C = L.T @ B  # coordinates in a G-orthonormal system
    u, s, _ = np.linalg.svd(C, full_matrices=False)
    r = int(np.sum(s > rtol * max(s[0], np.finfo(float).tiny)))
    Ur = u[:, :r]
    Linv_T = np.linalg.inv(L.T)
    return Linv_T @ Ur @ Ur.T @ L.T


def galerkin_hodge(
    M: EmbeddedManifold,
    grid: TimeGrid,
    times,
    samples: int,
    seed: int,
    test_vectors: int = 4,
    x0=None,
    chunk: int = 250,
    max_condition: float = 1e10,
) -> GalerkinSystem:
    """Assemble and solve the finite-rank Hodge problem on 1-forms.

    The 2-form term uses the test family ``T_ab = V_ab + Q(V_ab)`` with
    ``V_ab = vbar_a ^ vbar_b`` built from ``test_vectors`` H-orthonormal
    Cameron-Martin directions, and treats it as orthonormal.
    """
    times = tuple(int(t) for t in times)
    _check_times(times, grid)
    m = M.ambient_dim
    funcs, flabels = _function_basis(times, m)
    forms, olabels = _oneform_basis(times, m)
    nf, p = len(funcs), len(forms)
    if samples < nf * nf and samples < p * p:
        raise ValueError(f"need at least {min(nf, p) ** 2} samples for {nf} functions and {p} forms")
    D = _derivative_matrix(funcs, forms)
    cm = orthonormal_cameron_martin(grid, m, test_vectors)
    pairs = [(a, b) for a in range(test_vectors) for b in range(a + 1, test_vectors)]
    x0 = M.base_point() if x0 is None else M.check_point(x0)

    G0 = np.zeros((nf, nf))
    G1 = np.zeros((p, p))
    Psi_sq = np.zeros((p, p))
    Psi_mean = np.zeros((len(pairs), p))
    tpos = {t: i for i, t in enumerate(times)}
    for start in range(0, samples, chunk):
        count = min(chunk, samples - start)
        omega = sample_driving_paths(m, grid, seed, count, start)
        framed = compute_transports(M, solve_gradient_sde(M, x0, omega))
        y = framed.nodes[:, list(times), :]  # (S, q, m)
        fv = np.stack([_basis_value(f, y, tpos) for f in funcs], axis=1)
        G0 += fv.T @ fv
        cov = np.stack([_form_covectors(f, y, tpos, m) for f in forms], axis=0)  # (p, S, q, m)
        cov = M.tangent(y[None], cov)
        rep = filtered_adjoint(framed, times, cov).hdot  # (p, S, N, m)
        G1 += np.einsum("isnk,jsnk->ij", rep, rep) * grid.dt
        # 2-form pairings of each basis form with each test two-vector
        vbar = [filtered_derivative(framed, h) for h in cm]
        psi = np.empty((count, len(pairs), p))
        for ab, (a, b) in enumerate(pairs):
            V = wedge(vbar[a], vbar[b], times)
            T = V + q_map(framed, V)
            for i, f in enumerate(forms):
                psi[:, ab, i] = _form_on_two_vector(f, T.values, tpos)
        Psi_sq += np.einsum("sai,saj->ij", psi, psi)
        Psi_mean += psi.sum(axis=0)
    G0 /= samples
    G1 /= samples
    Gamma_raw = Psi_sq / samples
    D1 = Psi_mean / samples
    G0 = 0.5 * (G0 + G0.T)
    G1 = 0.5 * (G1 + G1.T)
    cond0 = _gram_condition(G0, "function", max_condition)
    cond1 = _gram_condition(G1, "1-form", max_condition)

    P_ex = _g_projector(D, G1)
    # enforce d^1 d = 0 at matrix level: restrict the 2-form term to the G1-complement of range(D)
    Rm = np.eye(p) - P_ex
    Gamma = Rm.T @ Gamma_raw @ Rm
    Gamma = 0.5 * (Gamma + Gamma.T)
    dd_star = G1 @ D @ np.linalg.solve(G0, D.T @ G1)
    dd_star = 0.5 * (dd_star + dd_star.T)
    A = Gamma + dd_star
    lap = np.linalg.solve(G1, A)
    evals = scipy.linalg.eigh(A, G1, eigvals_only=True)

    # coexact space: G1^{-1} range(Gamma)
    w, U = np.linalg.eigh(Gamma)
    keep = w > 1e-10 * max(w.max(), np.finfo(float).tiny)
    P_co = _g_projector(np.linalg.solve(G1, U[:, keep]), G1)
    # harmonic space: G1-orthogonal to range(D) and annihilated by Gamma
    K = np.vstack([D.T @ G1, Gamma])
    _, s, vt = np.linalg.svd(K)
    rank = int(np.sum(s > 1e-10 * s[0]))
    P_h = _g_projector(vt[rank:].T, G1)

    eye = np.eye(p)
    norms = np.einsum("ij,ji->i", eye, G1 @ eye)
    parts = sum(np.einsum("ij,ij->j", P @ eye, G1 @ (P @ eye)) for P in (P_ex, P_co, P_h))
    A_sym = G1 @ lap
    diag = {
        "cond_G0": cond0,
        "cond_G1": cond1,
        "laplacian_asymmetry": np.max(np.abs(A_sym - A_sym.T)) / np.max(np.abs(A_sym)),
        "min_eigenvalue": float(evals.min()),
        "cross_projector": np.max(np.abs(P_ex.T @ G1 @ P_co)),
        "projector_sum": np.max(np.abs(P_ex + P_co + P_h - eye)),
        "norm_sum": np.max(np.abs(parts - norms) / norms),
        "d1_d_raw": np.max(np.abs(Gamma_raw @ D)) / max(np.max(np.abs(Gamma_raw)), np.finfo(float).tiny),
        "exact_rank": float(np.trace(P_ex).round()),
        "coexact_rank": float(np.trace(P_co).round()),
        "harmonic_rank": float(np.trace(P_h).round()),
    }
    return GalerkinSystem(
        M.name, grid, times, flabels, olabels, G0, G1, D, D1, Gamma, lap, evals, P_ex, P_co, P_h, samples, seed, diag
    )


def _basis_value(f, y, tpos):
    if f[0] == "lin":
        _, t, c = f
        return y[:, tpos[t], c]
    _, s, c, t, d = f
    return y[:, tpos[s], c] * y[:, tpos[t], d]


def _form_covectors(f, y, tpos, m):
    s, d, t, c = f
    out = np.zeros(y.shape)
    out[:, tpos[t], c] = 1.0 if s is None else y[:, tpos[s], d]
    return out


def _form_on_two_vector(f, values, tpos):
    """``d(x_d(s) dx_c(t))(V) = V[(s, t)][d, c]``; coordinate covectors are closed."""
    s, d, t, c = f
    if s is None:
        return np.zeros(values.shape[0])
    return values[:, tpos[s], tpos[t], d, c]
