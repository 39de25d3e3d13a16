"""Verification suites.  Each suite returns report rows and CSV tables.

A row passes iff ``measured <= bound``.  Rows that combine several checks
report the largest ratio ``value / tolerance`` against ``bound = 1`` and list
the parts in ``details``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import rng
from .bismut import (
    cameron_martin_basis,
    filtered_adjoint,
    filtered_derivative,
    h1_inner,
    h1_norm,
    h2_residual,
    q_map,
    to_cameron_martin,
    wedge,
)
from .forms import (
    exact_form,
    exterior_derivative_cylinder,
    galerkin_hodge,
    pullback,
    scaled_form,
    trig_field,
    trig_function,
    wedge_of_forms,
    wiener_divergence,
)
from .geometry import construct_manifold
from .noise import conditional_expectation_mc, conditional_two_vector, decompose_noise, ito_derivative_functional
from .simulate import (
    CameronMartinVector,
    TimeGrid,
    flow_and_ito_derivative,
    linear_heat_decay,
    sample_driving_path,
    sample_driving_paths,
    smooth_cameron_martin,
    solve_gradient_sde,
    solve_nodes,
)
from .transport import compute_transports


@dataclass
class Row:
    name: str
    measured: float
    bound: float
    stderr: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.bound)

    def as_dict(self):
        return {
            "name": self.name,
            "measured": float(self.measured),
            "bound": float(self.bound),
            "stderr": None if self.stderr is None else float(self.stderr),
            "passed": self.passed,
            "details": _plain(self.details),
        }


@dataclass
class SuiteResult:
    name: str
    rows: list
    tables: dict  # file stem -> (header, rows)
    runtime: float = 0.0
    artifacts: dict = field(default_factory=dict)  # file name -> text
    row_runtimes: dict = field(default_factory=dict)  # row name -> seconds, when rows are timed separately

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    return obj


def parse_manifold(spec: str):
    """``"sphere:2"``, ``"circle"``, ``"clifford_torus"`` -> manifold."""
    kind, _, dim = spec.partition(":")
    return construct_manifold(kind, int(dim) if dim else None)


def _composite(name, parts: dict, tolerances: dict, details=None):
    ratios = {k: parts[k] / tolerances[k] for k in parts}
    d = {"parts": parts, "tolerances": tolerances, "ratios": ratios}
    d.update(details or {})
    return Row(name, max(ratios.values()), 1.0, None, d)


# -- sde: heat kernel and Ito-map derivative ------------------------------------------------


@dataclass
class SdeParams:
    manifold: str = "circle"
    horizon: float = 1.0
    steps: int = 1000
    paths: int = 100_000
    chunk: int = 10_000
    refinement: list = field(default_factory=list)
    derivative_manifolds: list = field(default_factory=lambda: ["sphere:2", "circle"])
    derivative_steps: int = 4000
    derivative_cases: int = 20
    epsilon: float = 1e-4
    heat_sigmas: float = 3.0
    derivative_rel: float = 1e-2


def heat_kernel_estimate(M, grid: TimeGrid, paths: int, seed: int, chunk: int):
    """MC mean of ``<x_T, x_0>`` and its standard error; the exact value is :func:`linear_heat_decay`."""
    x0 = M.base_point()
    total = total_sq = 0.0
    for start in range(0, paths, chunk):
        om = sample_driving_paths(M.ambient_dim, grid, seed, min(chunk, paths - start), start)
        xT = solve_nodes(M, x0, om.increments)[:, -1, :]
        val = xT @ x0
        total += val.sum()
        total_sq += (val * val).sum()
    mean = total / paths
    var = (total_sq / paths - mean * mean) * paths / (paths - 1)
    return mean, np.sqrt(var / paths)


def ito_derivative_errors(M, grid: TimeGrid, cases: int, seed: int, eps: float):
    """Relative sup-norm error of the one-sided difference quotient against ``T I(h)``."""
    errs = []
    gen = rng.generator(seed, 0, rng.TEST_DATA)
    for i in range(cases):
        om = sample_driving_path(M.ambient_dim, grid, seed, i)
        h = smooth_cameron_martin(grid, M.ambient_dim, gen)
        path = solve_gradient_sde(M, M.base_point(), om)
        v = flow_and_ito_derivative(M, path, om, h).vectors
        fd = (solve_gradient_sde(M, M.base_point(), om.perturbed(h, eps)).nodes - path.nodes) / eps
        errs.append(np.max(np.linalg.norm(fd - v, axis=-1)) / np.max(np.linalg.norm(v, axis=-1)))
    return np.array(errs)


def run_sde(p: SdeParams, seed: int) -> SuiteResult:
    t0 = time.perf_counter()
    M = parse_manifold(p.manifold)
    grid = TimeGrid(p.horizon, p.steps)
    exact = linear_heat_decay(M, p.horizon)
    mean, se = heat_kernel_estimate(M, grid, p.paths, seed, p.chunk)
    rows = [
        Row(
            "heat_kernel",
            abs(mean - exact),
            p.heat_sigmas * se,
            se,
            {"manifold": M.name, "steps": p.steps, "paths": p.paths, "mc_mean": mean, "exact": exact},
        )
    ]
    tables = {}
    if p.refinement:
        conv = []
        for N in p.refinement:
            m_, s_ = heat_kernel_estimate(M, TimeGrid(p.horizon, N), p.paths, seed, p.chunk)
            conv.append((N, p.paths, m_, s_, exact, abs(m_ - exact)))
        tables["sde_convergence"] = (["N", "paths", "mc_mean", "stderr", "exact", "abs_error"], conv)

    t1 = time.perf_counter()
    parts, table = {}, []
    dgrid = TimeGrid(p.horizon, p.derivative_steps)
    for spec in p.derivative_manifolds:
        Md = parse_manifold(spec)
        e = ito_derivative_errors(Md, dgrid, p.derivative_cases, seed, p.epsilon)
        parts[Md.name] = float(e.max())
        table += [(Md.name, i, float(x)) for i, x in enumerate(e)]
    rows.append(
        Row(
            "ito_derivative_fd",
            max(parts.values()),
            p.derivative_rel,
            None,
            {"per_manifold": parts, "epsilon": p.epsilon, "steps": p.derivative_steps, "cases": p.derivative_cases},
        )
    )
    tables["sde_derivative"] = (["manifold", "case", "rel_error"], table)
    timed = {"heat_kernel": t1 - t0, "ito_derivative_fd": time.perf_counter() - t1}
    return SuiteResult("sde", rows, tables, row_runtimes=timed)


# -- filtered: the filtering theorem, isometry and submersion ------------------------------------


@dataclass
class FilteredParams:
    manifold: str = "sphere:2"
    horizon: float = 1.0
    steps: int = 2000
    resamples: int = 10_000
    chunk: int = 1000
    identity_steps: int = 200
    identity_cases: int = 100
    filtering_sigmas: float = 3.0
    filtering_allowance: float = 0.02
    identity_tol: float = 1e-10


def filtering_direction(grid: TimeGrid, m: int) -> CameronMartinVector:
    """A fixed smooth Cameron-Martin direction with components in every coordinate."""
    t = (np.arange(grid.steps) + 0.5) * grid.dt / grid.horizon
    cols = [np.cos(np.pi * t), np.ones_like(t), np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)]
    return CameronMartinVector(grid, np.stack([cols[i % 4] for i in range(m)], axis=1))


def filtering_error(M, fine_omega, factor: int, resamples: int, seed: int, chunk: int):
    """``|MC mean - vbar_T|``, its stderr and ``|vbar_T|`` on the grid ``factor`` times coarser.

    The driver and the redundant draws are coarsenings of fine-grid draws, so
    the estimates for different ``factor`` share their randomness.
    """
    om = fine_omega.coarsen(factor) if factor > 1 else fine_omega
    grid = om.grid
    N = grid.steps
    h = filtering_direction(grid, M.ambient_dim)
    est = conditional_expectation_mc(
        M, om, ito_derivative_functional(h, [N]), resamples, seed, chunk, substeps=factor
    )
    framed = compute_transports(M, solve_gradient_sde(M, M.base_point(), om))
    vbar = filtered_derivative(framed, h).vectors[N]
    return (
        float(np.linalg.norm(est.mean[0] - vbar)),
        float(np.linalg.norm(est.stderr[0])),
        float(np.linalg.norm(vbar)),
    )


def identity_errors(M, grid: TimeGrid, cases: int, seed: int):
    """Largest isometry, submersion and adjoint defects over random ``h`` and paths."""
    gen = rng.generator(seed, 1, rng.TEST_DATA)
    iso = sub = adj = rep = 0.0
    for i in range(cases):
        om = sample_driving_path(M.ambient_dim, grid, seed, 10_000 + i)
        framed = compute_transports(M, solve_gradient_sde(M, M.base_point(), om))
        h = smooth_cameron_martin(grid, M.ambient_dim, gen)
        k = smooth_cameron_martin(grid, M.ambient_dim, gen)
        vb = filtered_derivative(framed, h)
        target = np.sqrt(np.sum(M.tangent(framed.nodes[:-1], h.hdot) ** 2) * grid.dt)
        iso = max(iso, abs(h1_norm(framed, vb) - target))
        sub = max(sub, np.max(np.abs(filtered_derivative(framed, to_cameron_martin(framed, vb)).vectors - vb.vectors)))
        w = filtered_derivative(framed, k)
        adj = max(adj, abs(h1_inner(framed, vb, w) - h.inner(to_cameron_martin(framed, w))))
        times = [grid.steps // 3, grid.steps]
        c = gen.standard_normal((2, M.ambient_dim))
        lhs = sum(c[j] @ vb.vectors[t] for j, t in enumerate(times))
        rep = max(rep, abs(lhs - h.inner(filtered_adjoint(framed, times, c))))
    return {"isometry": iso, "submersion": sub, "adjoint": adj, "representative": rep}


def run_filtered(p: FilteredParams, seed: int) -> SuiteResult:
    t0 = time.perf_counter()
    M = parse_manifold(p.manifold)
    fine = sample_driving_path(M.ambient_dim, TimeGrid(p.horizon, p.steps), seed, 0)
    e_fine, se_fine, norm = filtering_error(M, fine, 1, p.resamples, seed, p.chunk)
    e_coarse, se_coarse, _ = filtering_error(M, fine, 2, p.resamples, seed, p.chunk)
    bound = p.filtering_sigmas * se_fine + p.filtering_allowance * norm
    row = _composite(
        "filtering",
        {"error": e_fine, "refinement": e_fine / e_coarse},
        {"error": bound, "refinement": 1.0},
        {"manifold": M.name, "stderr": se_fine, "vbar_norm": norm, "coarse_error": e_coarse},
    )
    row.stderr = se_fine
    table = [
        (p.steps // 2, p.resamples, e_coarse, se_coarse, norm),
        (p.steps, p.resamples, e_fine, se_fine, norm),
    ]
    t1 = time.perf_counter()
    ids = identity_errors(M, TimeGrid(p.horizon, p.identity_steps), p.identity_cases, seed)
    rows = [row, Row("isometry_submersion", max(ids.values()), p.identity_tol, None, {"parts": ids, "manifold": M.name})]
    timed = {"filtering": t1 - t0, "isometry_submersion": time.perf_counter() - t1}
    tables = {"filtered_refinement": (["N", "resamples", "error", "stderr", "vbar_norm"], table)}
    return SuiteResult("filtered", rows, tables, row_runtimes=timed)


# -- noise decomposition -----------------------------------------------------------------


@dataclass
class NoiseParams:
    manifold: str = "sphere:2"
    horizon: float = 1.0
    steps: int = 200
    paths: int = 10_000
    chunk: int = 2000
    reconstruction_tol: float = 1e-12
    correlation_scale: float = 4.0
    variance_tol: float = 0.05


def noise_statistics(M, grid: TimeGrid, paths: int, seed: int, chunk: int):
    """Endpoint statistics of ``B~`` and ``beta`` in frame coordinates at ``x_0``."""
    recon = 0.0
    bt_end, beta_end = [], []
    for start in range(0, paths, chunk):
        om = sample_driving_paths(M.ambient_dim, grid, seed, min(chunk, paths - start), start)
        framed = compute_transports(M, solve_gradient_sde(M, M.base_point(), om))
        dec = decompose_noise(framed, om)
        recon = max(recon, float(np.max(np.abs(dec.recompose() - om.increments))))
        E0 = framed.frames[:, 0]
        N0 = framed.normal_frames[:, 0]
        bt_end.append(np.einsum("smi,sm->si", E0, dec.btilde.sum(axis=1)))
        beta_end.append(np.einsum("smi,sm->si", N0, dec.beta.sum(axis=1)))
    bt = np.concatenate(bt_end)
    be = np.concatenate(beta_end)
    corr = np.corrcoef(np.hstack([bt, be]).T)[: bt.shape[1], bt.shape[1] :]
    return {
        "reconstruction": recon,
        "max_abs_correlation": float(np.max(np.abs(corr))),
        "btilde_variance_ratio": (bt.var(axis=0, ddof=1) / grid.horizon).tolist(),
        "beta_variance_ratio": (be.var(axis=0, ddof=1) / grid.horizon).tolist(),
    }


def run_noise(p: NoiseParams, seed: int) -> SuiteResult:
    M = parse_manifold(p.manifold)
    grid = TimeGrid(p.horizon, p.steps)
    st = noise_statistics(M, grid, p.paths, seed, p.chunk)
    var_dev = max(abs(v - 1.0) for v in st["btilde_variance_ratio"] + st["beta_variance_ratio"])
    parts = {"reconstruction": st["reconstruction"], "correlation": st["max_abs_correlation"], "variance": var_dev}
    tol = {
        "reconstruction": p.reconstruction_tol,
        "correlation": p.correlation_scale / np.sqrt(p.paths),
        "variance": p.variance_tol,
    }
    row = _composite("noise_decomposition", parts, tol, {"manifold": M.name, "statistics": st})
    return SuiteResult("noise", [row], {})


# -- h2 membership ----------------------------------------------------------------------------


@dataclass
class H2Params:
    manifold: str = "sphere:2"
    flat_manifold: str = "clifford_torus"
    horizon: float = 1.0
    steps: int = 1000
    resamples: int = 10_000
    basis_size: int = 16
    points: int = 20
    chunk: int = 500
    residual_tol: float = 0.10
    flat_tol: float = 1e-10


def wedge_directions(grid: TimeGrid, m: int):
    """Two Cameron-Martin directions whose wedge lies in the span of the fitting basis."""
    cm = cameron_martin_basis(grid, m, 7)
    return cm[0] + cm[2], cm[1] + cm[4]


def h2_fit(M, omega, resamples, seed, basis_size, points, chunk, substeps=1):
    grid = omega.grid
    N = grid.steps
    idx = np.unique(np.linspace(0, N, points + 1).round().astype(int))
    h1, h2 = wedge_directions(grid, M.ambient_dim)
    W, _ = conditional_two_vector(M, omega, h1, h2, idx, resamples, seed, chunk, substeps=substeps)
    framed = compute_transports(M, solve_gradient_sde(M, M.base_point(), omega))
    return h2_residual(framed, W, basis_size), h2_residual(framed, W, basis_size, with_q=False)


def run_h2(p: H2Params, seed: int) -> SuiteResult:
    # flat case: Q vanishes and an exact wedge is fitted exactly
    Mf = parse_manifold(p.flat_manifold)
    grid = TimeGrid(p.horizon, p.steps)
    om = sample_driving_path(Mf.ambient_dim, grid, seed, 0)
    framed = compute_transports(Mf, solve_gradient_sde(Mf, Mf.base_point(), om))
    idx = np.unique(np.linspace(0, p.steps, p.points + 1).round().astype(int))
    h1, h2 = wedge_directions(grid, Mf.ambient_dim)
    V = wedge(filtered_derivative(framed, h1), filtered_derivative(framed, h2), idx)
    q_flat = float(np.max(np.abs(q_map(framed, V).values)))
    flat_res = h2_residual(framed, V, p.basis_size).residual

    M = parse_manifold(p.manifold)
    fine = sample_driving_path(M.ambient_dim, grid, seed, 0)
    levels = []
    for f in (4, 2, 1):
        om = fine.coarsen(f) if f > 1 else fine
        fit, fit0 = h2_fit(M, om, p.resamples // f, seed, p.basis_size, p.points, p.chunk, substeps=f)
        levels.append((om.grid.steps, p.resamples // f, p.basis_size, fit.residual, fit0.residual, fit.condition))
    res = [lv[3] for lv in levels]
    parts = {
        "flat_q": q_flat,
        "flat_residual": flat_res,
        "residual": res[-1],
        "refinement": max(b / a for a, b in zip(res, res[1:])),
    }
    tol = {"flat_q": p.flat_tol, "flat_residual": p.flat_tol, "residual": p.residual_tol, "refinement": 1.0}
    row = _composite("h2_membership", parts, tol, {"manifold": M.name, "residuals": res})
    header = ["N", "samples", "basis_size", "residual", "residual_without_q", "condition"]
    return SuiteResult("h2", [row], {"h2_residuals": (header, levels)})


# -- exterior calculus -------------------------------------------------------------------------


@dataclass
class FormsParams:
    manifold: str = "sphere:2"
    horizon: float = 1.0
    dd_cases: int = 50
    chain_steps: int = 1000
    chain_cases: int = 10
    epsilon: float = 1e-4
    ibp_steps: int = 50
    ibp_paths: int = 10_000
    ibp_triples: int = 20
    dd_tol: float = 1e-8
    chain_rel: float = 1e-2
    ibp_sigmas: float = 3.0


def dd_errors(M, cases: int, seed: int):
    """``|d(df)(V1 ^ V2)|`` and the Leibniz defect of ``d(g dF)`` at random points."""
    gen = rng.generator(seed, 2, rng.TEST_DATA)
    grid = TimeGrid(1.0, 40)
    om = sample_driving_paths(M.ambient_dim, grid, seed, 8, 20_000)
    framed = compute_transports(M, solve_gradient_sde(M, M.base_point(), om))
    dd = leib = anti = 0.0
    for _ in range(cases):
        k = int(gen.integers(1, 4))
        times = tuple(sorted(gen.choice(np.arange(1, grid.steps + 1), size=k, replace=False).tolist()))
        f = trig_function(times, M.ambient_dim, gen)
        g = trig_function(times, M.ambient_dim, gen)
        V1 = trig_field(times, M.ambient_dim, gen)
        V2 = trig_field(times, M.ambient_dim, gen)
        d_df = exterior_derivative_cylinder(exact_form(f), M)
        dd = max(dd, float(np.max(np.abs(d_df(V1, V2, framed)))))
        d_gdf = exterior_derivative_cylinder(scaled_form(g, f), M)
        a, b = d_gdf(V1, V2, framed), wedge_of_forms(M, exact_form(g), exact_form(f))(V1, V2, framed)
        leib = max(leib, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))))
        anti = max(anti, float(np.max(np.abs(a + d_gdf(V2, V1, framed)))))
    return {"dd": dd, "leibniz_rel": leib, "antisymmetry": anti}


def chain_rule_errors(M, grid: TimeGrid, cases: int, seed: int, eps: float):
    gen = rng.generator(seed, 3, rng.TEST_DATA)
    errs = []
    for i in range(cases):
        om = sample_driving_path(M.ambient_dim, grid, seed, 30_000 + i)
        h = smooth_cameron_martin(grid, M.ambient_dim, gen)
        times = (grid.steps // 2, grid.steps)
        f = trig_function(times, M.ambient_dim, gen)
        path = solve_gradient_sde(M, M.base_point(), om)
        framed = compute_transports(M, path)
        analytic = pullback(exact_form(f), om, framed).raw.inner(h)
        fd = (f(solve_gradient_sde(M, M.base_point(), om.perturbed(h, eps))) - f(path)) / eps
        errs.append(abs(fd - analytic) / max(abs(analytic), 1e-12))
    return np.array(errs)


def ibp_statistics(M, grid: TimeGrid, paths: int, triples: int, seed: int, eps: float, chunk: int = 2500):
    """Per triple ``(g, lam, h)``: mean and stderr of ``g div(lam h) - dg(h) lam``.

    ``dg(h)`` is a central difference quotient along ``omega + eps h``.
    """
    gen = rng.generator(seed, 4, rng.TEST_DATA)
    cases = []
    for _ in range(triples):
        times = (grid.steps // 2, grid.steps)
        g = trig_function(times, M.ambient_dim, gen, freq=0.7)
        lam = trig_function(times, M.ambient_dim, gen, freq=0.7)
        h = smooth_cameron_martin(grid, M.ambient_dim, gen, modes=2)
        cases.append((g, lam, h))
    sums = np.zeros(triples)
    sq = np.zeros(triples)
    x0 = M.base_point()
    for start in range(0, paths, chunk):
        om = sample_driving_paths(M.ambient_dim, grid, seed, min(chunk, paths - start), 40_000 + start)
        framed = compute_transports(M, solve_gradient_sde(M, x0, om))
        for j, (g, lam, h) in enumerate(cases):
            div = wiener_divergence(lam, h, om, framed)
            gp = g(solve_nodes(M, x0, om.increments + eps * h.hdot * grid.dt))
            gm = g(solve_nodes(M, x0, om.increments - eps * h.hdot * grid.dt))
            val = g(framed) * div - (gp - gm) / (2 * eps) * lam(framed)
            sums[j] += val.sum()
            sq[j] += (val * val).sum()
    mean = sums / paths
    se = np.sqrt(np.maximum(sq / paths - mean**2, 0.0) / (paths - 1))
    return mean, se


def run_forms(p: FormsParams, seed: int) -> SuiteResult:
    M = parse_manifold(p.manifold)
    dd = dd_errors(M, p.dd_cases, seed)
    chain = chain_rule_errors(M, TimeGrid(p.horizon, p.chain_steps), p.chain_cases, seed, p.epsilon)
    mean, se = ibp_statistics(M, TimeGrid(p.horizon, p.ibp_steps), p.ibp_paths, p.ibp_triples, seed, p.epsilon)
    z = np.abs(mean) / se
    parts = {
        "dd": dd["dd"],
        "leibniz": dd["leibniz_rel"],
        "antisymmetry": dd["antisymmetry"],
        "chain_rule": float(chain.max()),
        "ibp_sigmas": float(z.max()),
    }
    tol = {"dd": p.dd_tol, "leibniz": p.dd_tol, "antisymmetry": p.dd_tol, "chain_rule": p.chain_rel, "ibp_sigmas": p.ibp_sigmas}
    row = _composite("exterior_calculus", parts, tol, {"manifold": M.name})
    table = [(j, float(mean[j]), float(se[j]), float(z[j])) for j in range(len(mean))]
    return SuiteResult("forms", [row], {"forms_ibp": (["triple", "mean", "stderr", "z"], table)})


# -- hodge ------------------------------------------------------------------------------------


@dataclass
class HodgeParams:
    manifold: str = "sphere:2"
    horizon: float = 1.0
    steps: int = 64
    paths: int = 1000
    times: list = field(default_factory=lambda: [32, 64])
    test_vectors: int = 4
    symmetry_tol: float = 1e-10
    spectrum_tol: float = 1e-8
    decomposition_tol: float = 1e-6


def run_hodge(p: HodgeParams, seed: int) -> SuiteResult:
    M = parse_manifold(p.manifold)
    sysm = galerkin_hodge(M, TimeGrid(p.horizon, p.steps), p.times, p.paths, seed, p.test_vectors)
    d = sysm.diagnostics
    parts = {
        "symmetry": d["laplacian_asymmetry"],
        "spectrum": max(-d["min_eigenvalue"], 0.0),
        "orthogonality": d["cross_projector"],
        "projector_sum": d["projector_sum"],
        "norm_sum": d["norm_sum"],
    }
    tol = {
        "symmetry": p.symmetry_tol,
        "spectrum": p.spectrum_tol,
        "orthogonality": p.decomposition_tol,
        "projector_sum": p.decomposition_tol,
        "norm_sum": p.decomposition_tol,
    }
    row = _composite("hodge_decomposition", parts, tol, {"manifold": M.name, "diagnostics": d})
    return SuiteResult(
        "hodge",
        [row],
        {"hodge_spectrum": (["index", "eigenvalue"], sysm.spectrum_rows())},
        artifacts={"galerkin_system.json": sysm.to_json()},
    )


SUITES = {
    "sde": (SdeParams, run_sde, "circle heat kernel and Ito-map derivative"),
    "filtered": (FilteredParams, run_filtered, "filtering by redundant-noise resampling; isometry and submersion"),
    "noise": (NoiseParams, run_noise, "relevant/redundant noise decomposition"),
    "h2": (H2Params, run_h2, "two-vector membership in span{V + Q(V)}"),
    "forms": (FormsParams, run_forms, "d o d = 0, chain rule, integration by parts"),
    "hodge": (HodgeParams, run_hodge, "finite-rank Hodge Laplacian on 1-forms"),
}


def run_suite(name: str, params, seed: int) -> SuiteResult:
    _, fn, _ = SUITES[name]
    t0 = time.perf_counter()
    result = fn(params, seed)
    result.runtime = time.perf_counter() - t0
    return result


def default_params(name: str):
    return SUITES[name][0]()


def param_names(name: str):
    return [f.name for f in fields(SUITES[name][0])]


def with_overrides(params, **kw):
    return replace(params, **kw)
