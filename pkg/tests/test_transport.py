import numpy as np
import pytest

from pathhodge.geometry import construct_manifold, curvature_package, two_vector
from pathhodge.simulate import TangentPath, TimeGrid, sample_driving_path, solve_gradient_sde
from pathhodge.transport import (
    NonzeroInitialVectorError,
    compute_transports,
    damped_integral,
    dd_dt,
    nearest_orthonormal,
)

S2 = construct_manifold("sphere", 2)
CIRCLE = construct_manifold("circle")
TORUS = construct_manifold("clifford_torus")


def framed_path(M, steps=400, seed=0, horizon=1.0):
    grid = TimeGrid(horizon, steps)
    om = sample_driving_path(M.ambient_dim, grid, seed)
    return compute_transports(M, solve_gradient_sde(M, M.base_point(), om))


def test_nearest_orthonormal_is_polar_factor():
    F = np.random.default_rng(0).standard_normal((5, 3))
    Q = nearest_orthonormal(F)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-14)
    # the symmetric factor Q^T F is positive definite
    S = Q.T @ F
    np.testing.assert_allclose(S, S.T, atol=1e-13)
    assert np.all(np.linalg.eigvalsh(S) > 0)


@pytest.mark.parametrize("M", [S2, CIRCLE, TORUS], ids=["sphere2", "circle", "torus"])
def test_parallel_transport_is_isometric_and_tangent(M):
    fp = framed_path(M)
    P = fp.par
    u = M.tangent(fp.nodes[0], np.random.default_rng(1).standard_normal((100, M.ambient_dim)))
    moved = np.einsum("kij,uj->kui", P, u)
    assert np.max(np.abs(np.linalg.norm(moved, axis=-1) - np.linalg.norm(u, axis=-1))) <= 1e-8
    assert np.max(np.abs(M.normal(fp.nodes[:, None, :], moved))) <= 1e-8


@pytest.mark.parametrize("M", [S2, CIRCLE, TORUS], ids=["sphere2", "circle", "torus"])
def test_tilde_transport_block_structure(M):
    fp = framed_path(M)
    T = fp.tilde_par
    K0 = np.eye(M.ambient_dim) - M.projection_matrix(fp.nodes[0])
    X = M.projection_matrix(fp.nodes)
    assert np.max(np.abs(X @ T @ K0)) <= 1e-8
    np.testing.assert_allclose(np.swapaxes(T, -1, -2) @ T, np.broadcast_to(np.eye(M.ambient_dim), T.shape), atol=1e-12)


@pytest.mark.parametrize("M", [S2, CIRCLE, TORUS], ids=["sphere2", "circle", "torus"])
def test_transports_start_at_identity(M):
    fp = framed_path(M)
    X0 = M.projection_matrix(fp.nodes[0])
    np.testing.assert_allclose(fp.par[0], X0, atol=1e-14)
    np.testing.assert_allclose(fp.damped[0], X0, atol=1e-14)
    np.testing.assert_allclose(fp.tilde_par[0], np.eye(M.ambient_dim), atol=1e-14)


@pytest.mark.parametrize("M", [CIRCLE, TORUS], ids=["circle", "torus"])
def test_flat_damping_is_parallel_transport(M):
    fp = framed_path(M)
    assert np.max(np.abs(fp.damped - fp.par)) <= 1e-10
    n = M.intrinsic_dim
    eye2 = np.broadcast_to(np.eye(n * n), fp.damping2.shape)
    assert np.max(np.abs(fp.damping2 - eye2)) <= 1e-10


def test_sphere_damping_closed_form():
    fp = framed_path(S2, steps=4000)
    decay = np.exp(-0.5 * fp.grid.times)[:, None, None]
    err = np.max(np.abs(fp.damped - decay * fp.par)) / np.max(np.abs(fp.par[-1]))
    assert err / np.exp(-0.5) <= 1e-4


def test_sphere_two_vector_damping_matches_curvature_constant():
    fp = framed_path(S2, steps=4000)
    x0 = fp.nodes[0]
    c = curvature_package(S2, x0)
    u, v = S2.tangent_frame(x0).T
    P = two_vector(u, v)
    # the Weitzenbock operator acts on the single 2-vector direction as a scalar
    rate = 0.5 * float(np.sum(c.apply_weitzenbock2(P) * P) / np.sum(P * P))
    for k in (fp.grid.steps // 2, fp.grid.steps):
        W2 = fp.damped2_apply(k, P)
        P2 = fp.par2_apply(k, P)
        t = fp.grid.times[k]
        assert np.max(np.abs(W2 - np.exp(-rate * t) * P2)) <= 1e-4


def test_dd_dt_examples():
    fp = framed_path(S2, steps=200)
    grid = fp.grid
    w = S2.tangent(fp.nodes[0], np.array([0.3, -0.4, 0.0]))
    c0 = fp.to_initial(w[None, :])[0]
    coeff = np.broadcast_to(c0, (grid.steps + 1, 2)) * grid.times[:, None]
    v = fp.from_initial(coeff)
    d = dd_dt(fp, TangentPath(grid, v))
    np.testing.assert_allclose(d, fp.from_initial(np.broadcast_to(c0, (grid.steps, 2))), atol=1e-12)
    assert np.all(dd_dt(fp, TangentPath(grid, np.zeros((grid.steps + 1, 3)))) == 0.0)


@pytest.mark.parametrize("M", [S2, TORUS], ids=["sphere2", "torus"])
def test_damped_integral_and_derivative_are_inverse(M):
    fp = framed_path(M, steps=300, seed=3)
    u = M.tangent(fp.nodes[:-1], np.random.default_rng(2).standard_normal((300, M.ambient_dim)))
    v = damped_integral(fp, u)
    np.testing.assert_allclose(dd_dt(fp, v), u, atol=1e-12)
    np.testing.assert_allclose(damped_integral(fp, dd_dt(fp, v)).vectors, v.vectors, atol=1e-12)


def test_dd_dt_needs_zero_start():
    fp = framed_path(S2, steps=20)
    v = np.zeros((21, 3))
    v[0] = S2.tangent(fp.nodes[0], np.array([0.0, 1.0, 0.0]))
    with pytest.raises(NonzeroInitialVectorError):
        dd_dt(fp, TangentPath(fp.grid, v))


def test_batched_transports_match_single_paths():
    from pathhodge.simulate import sample_driving_paths

    grid = TimeGrid(1.0, 50)
    om = sample_driving_paths(3, grid, 4, 3)
    batch = compute_transports(S2, solve_gradient_sde(S2, S2.base_point(), om))
    one = compute_transports(S2, solve_gradient_sde(S2, S2.base_point(), om.select(1)))
    np.testing.assert_allclose(batch.damped[1], one.damped, atol=1e-13)
    np.testing.assert_allclose(batch.tilde_par[1], one.tilde_par, atol=1e-13)
