import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathhodge.bismut import (
    DegenerateBasisError,
    TwoVectorOnPath,
    cameron_martin_basis,
    filtered_adjoint,
    filtered_derivative,
    h1_inner,
    h1_norm,
    h2_basis,
    h2_residual,
    hat_functions,
    orthonormal_cameron_martin,
    q_map,
    to_cameron_martin,
    wedge,
    wedge_pairs,
)
from pathhodge.geometry import construct_manifold
from pathhodge.simulate import (
    CameronMartinVector,
    TangentPath,
    TimeGrid,
    sample_driving_path,
    smooth_cameron_martin,
    solve_gradient_sde,
)
from pathhodge.transport import compute_transports

S2 = construct_manifold("sphere", 2)
CIRCLE = construct_manifold("circle")
TORUS = construct_manifold("clifford_torus")
ALL = [S2, CIRCLE, TORUS, construct_manifold("sphere", 3)]
IDS = ["sphere2", "circle", "torus", "sphere3"]


def framed_path(M, steps=200, seed=0):
    grid = TimeGrid(1.0, steps)
    om = sample_driving_path(M.ambient_dim, grid, seed)
    return compute_transports(M, solve_gradient_sde(M, M.base_point(), om))


def test_zero_h_gives_zero():
    fp = framed_path(S2)
    v = filtered_derivative(fp, CameronMartinVector.zero(fp.grid, 3))
    assert np.all(v.vectors == 0.0)
    assert np.all(to_cameron_martin(fp, v).hdot == 0.0)


def test_circle_filtered_derivative_is_undamped():
    fp = framed_path(CIRCLE, steps=300)
    h = smooth_cameron_martin(fp.grid, 2, np.random.default_rng(0))
    P = fp.par
    u = CIRCLE.tangent(fp.nodes[:-1], h.hdot)
    # //_t sum_{s<t} //_s^{-1} X(sigma_s) hdot_s dt, with //_s^{-1} = //_s^T
    back = np.einsum("kji,kj->ki", P[:-1], u) * fp.grid.dt
    acc = np.concatenate([np.zeros((1, 2)), np.cumsum(back, axis=0)])
    ref = np.einsum("kij,kj->ki", P, acc)
    np.testing.assert_allclose(filtered_derivative(fp, h).vectors, ref, atol=1e-13)


@pytest.mark.parametrize("M", ALL, ids=IDS)
def test_isometry_submersion_and_adjoint(M):
    fp = framed_path(M, seed=1)
    gen = np.random.default_rng(2)
    for _ in range(10):
        h = smooth_cameron_martin(fp.grid, M.ambient_dim, gen)
        k = smooth_cameron_martin(fp.grid, M.ambient_dim, gen)
        vb = filtered_derivative(fp, h)
        target = np.sqrt(np.sum(M.tangent(fp.nodes[:-1], h.hdot) ** 2) * fp.grid.dt)
        assert abs(h1_norm(fp, vb) - target) <= 1e-10
        back = filtered_derivative(fp, to_cameron_martin(fp, vb))
        assert np.max(np.abs(back.vectors - vb.vectors)) <= 1e-12
        w = filtered_derivative(fp, k)
        assert abs(h1_inner(fp, vb, w) - h.inner(to_cameron_martin(fp, w))) <= 1e-10


def test_round_trip_recovers_only_tangent_h():
    fp = framed_path(S2, seed=3)
    h = smooth_cameron_martin(fp.grid, 3, np.random.default_rng(4))
    back = to_cameron_martin(fp, filtered_derivative(fp, h))
    np.testing.assert_allclose(back.hdot, S2.tangent(fp.nodes[:-1], h.hdot), atol=1e-12)
    assert np.max(np.abs(back.hdot - h.hdot)) > 1e-3
    tangent_h = CameronMartinVector(fp.grid, S2.tangent(fp.nodes[:-1], h.hdot))
    back2 = to_cameron_martin(fp, filtered_derivative(fp, tangent_h))
    np.testing.assert_allclose(back2.hdot, tangent_h.hdot, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_h1_inner_is_bilinear_and_positive(seed, a, b):
    fp = framed_path(S2, steps=60, seed=5)
    gen = np.random.default_rng(seed)
    u1, u2, u3 = (filtered_derivative(fp, smooth_cameron_martin(fp.grid, 3, gen)) for _ in range(3))
    lhs = h1_inner(fp, a * u1 + b * u2, u3)
    rhs = a * h1_inner(fp, u1, u3) + b * h1_inner(fp, u2, u3)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
    assert h1_inner(fp, u1, u1) > 0
    assert h1_inner(fp, 0.0 * u1, 0.0 * u1) == 0.0


@pytest.mark.parametrize("M", ALL, ids=IDS)
def test_filtered_adjoint_represents_point_evaluations(M):
    fp = framed_path(M, seed=6)
    gen = np.random.default_rng(7)
    times = [0, 50, 123, fp.grid.steps]
    c = gen.standard_normal((len(times), M.ambient_dim))
    rep = filtered_adjoint(fp, times, c)
    for _ in range(5):
        h = smooth_cameron_martin(fp.grid, M.ambient_dim, gen)
        vb = filtered_derivative(fp, h).vectors
        lhs = sum(c[i] @ vb[t] for i, t in enumerate(times))
        assert abs(lhs - h.inner(rep)) <= 1e-12


def test_hat_basis():
    grid = TimeGrid(1.0, 100)
    hats = hat_functions(grid, 5)
    assert hats.shape == (5, 100) and np.all(hats >= 0)
    np.testing.assert_allclose(hats.sum(axis=0), 1.0, atol=1e-12)
    basis = cameron_martin_basis(grid, 3, 7)
    assert len(basis) == 7
    on = orthonormal_cameron_martin(grid, 3, 7)
    gram = np.array([[a.inner(b) for b in on] for a in on])
    np.testing.assert_allclose(gram, np.eye(7), atol=1e-12)
    assert wedge_pairs(4, 3) == [(0, 1), (0, 2), (0, 3)]
    with pytest.raises(ValueError):
        wedge_pairs(3, 4)


def _random_wedge(fp, gen, indices):
    M = fp.manifold
    a = filtered_derivative(fp, smooth_cameron_martin(fp.grid, M.ambient_dim, gen))
    b = filtered_derivative(fp, smooth_cameron_martin(fp.grid, M.ambient_dim, gen))
    return wedge(a, b, indices)


def test_wedge_is_antisymmetric():
    fp = framed_path(S2)
    V = _random_wedge(fp, np.random.default_rng(8), np.arange(0, 201, 25))
    np.testing.assert_allclose(V.values, -np.swapaxes(np.swapaxes(V.values, 0, 1), -1, -2), atol=1e-15)


@pytest.mark.parametrize("M", [CIRCLE, TORUS], ids=["circle", "torus"])
def test_q_vanishes_on_flat_manifolds(M):
    fp = framed_path(M)
    V = _random_wedge(fp, np.random.default_rng(9), np.arange(0, 201, 20))
    Q = q_map(fp, V)
    assert np.max(np.abs(Q.values)) <= 1e-10
    assert np.max(np.abs(Q.diagonal)) <= 1e-10


def test_q_at_time_zero_vanishes_and_q_is_linear():
    fp = framed_path(S2, seed=10)
    gen = np.random.default_rng(11)
    idx = np.arange(0, 201, 20)
    V1, V2 = _random_wedge(fp, gen, idx), _random_wedge(fp, gen, idx)
    Q1, Q2 = q_map(fp, V1), q_map(fp, V2)
    assert np.max(np.abs(Q1.values[0, :])) == 0.0
    assert np.max(np.abs(Q1.values)) > 1e-3
    Q12 = q_map(fp, 2.0 * V1 + (-0.5) * V2)
    assert np.max(np.abs(Q12.values - (2.0 * Q1.values - 0.5 * Q2.values))) <= 1e-12


def test_q_rejects_non_tangent_two_vectors():
    fp = framed_path(S2)
    idx = np.arange(0, 201, 50)
    V = _random_wedge(fp, np.random.default_rng(12), idx)
    bad = V.diagonal.copy()
    bad[:, 0, 2] += 1.0
    bad[:, 2, 0] -= 1.0
    with pytest.raises(ValueError):
        q_map(fp, TwoVectorOnPath(V.grid, idx, V.values, bad))
    with pytest.raises(ValueError):
        q_map(fp, TwoVectorOnPath(V.grid, idx, V.values))


def test_basis_members_fit_exactly():
    fp = framed_path(S2, seed=13)
    idx = np.arange(0, 201, 10)
    _, Vs, Bs = h2_basis(fp, 16, idx)
    W = 0.7 * Bs[3] + (-1.2) * Bs[10] + 0.1 * Bs[15]
    fit = h2_residual(fp, W, 16)
    assert fit.residual <= 1e-10
    assert abs(fit.coefficients[3] - 0.7) <= 1e-8


def test_flat_wedge_fits_exactly():
    fp = framed_path(TORUS, seed=14)
    idx = np.arange(0, 201, 10)
    _, Vs, _ = h2_basis(fp, 16, idx)
    fit = h2_residual(fp, Vs[0] + 2.0 * Vs[5], 16)
    assert fit.residual <= 1e-10


def test_curvature_correction_is_needed_on_the_sphere():
    fp = framed_path(S2, seed=15)
    idx = np.arange(0, 201, 10)
    _, _, Bs = h2_basis(fp, 16, idx)
    W = Bs[0] + Bs[7]
    assert h2_residual(fp, W, 16, with_q=True).residual <= 1e-10
    assert h2_residual(fp, W, 16, with_q=False).residual > 1e-4


def test_degenerate_basis_raises():
    fp = framed_path(S2, seed=16)
    idx = np.array([0, 100])
    _, Vs, _ = h2_basis(fp, 3, idx)
    with pytest.raises(DegenerateBasisError):
        h2_residual(fp, Vs[0], 16)


def test_non_tangent_observation_raises():
    fp = framed_path(S2)
    idx = np.arange(0, 201, 50)
    V = _random_wedge(fp, np.random.default_rng(17), idx)
    vals = V.values.copy()
    vals[1, 2, 0, 1] += 1.0
    with pytest.raises(ValueError):
        h2_residual(fp, TwoVectorOnPath(V.grid, idx, vals, V.diagonal), 4)


def test_tangent_path_arithmetic():
    grid = TimeGrid(1.0, 4)
    a = TangentPath(grid, np.ones((5, 3)))
    assert np.all((2 * a - a).vectors == 1.0)
