"""Relevant and redundant noise, and conditional expectation given the path.

The increments are split as ``dB_k = //~_k dB~_k + //~_k dbeta_k`` with
``dB~_k`` tangent and ``dbeta_k`` normal at ``x_0``.  Conditioning on the
solution path is approximated by redrawing the redundant part ``beta``
while keeping ``B~`` and the transports of the original path.  ``//~`` is
evaluated at the left end of each step, which makes ``B~`` and ``beta``
discrete Ito integrals and hence exact Gaussian random walks given the past.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .bismut import TwoVectorOnPath
from .geometry import EmbeddedManifold
from .simulate import (
    CameronMartinVector,
    DrivingPath,
    GridMismatchError,
    check_same_grid,
    solve_gradient_sde,
    solve_nodes,
    tangent_nodes,
)
from .transport import FramedPath, compute_transports


class SampleFailure(RuntimeError):
    """A functional raised on one resampled driver."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"functional failed on resample {index}: {cause!r}")
        self.index = index


@dataclass(frozen=True)
class NoiseDecomposition:
    btilde: np.ndarray  # (..., N, m), in Ker X(x0)^perp
    beta: np.ndarray  # (..., N, m), in Ker X(x0)
    framed: FramedPath
    step_transports: np.ndarray  # (..., N, m, m) the left-point //~_k

    def recompose(self, beta=None) -> np.ndarray:
        beta = self.beta if beta is None else beta
        return np.einsum("...kij,...kj->...ki", self.step_transports, self.btilde + beta)

    @property
    def grid(self):
        return self.framed.grid


def decompose_noise(framed: FramedPath, omega: DrivingPath) -> NoiseDecomposition:
    check_same_grid(framed.grid, omega.grid)
    if framed.nodes.shape[:-2] != omega.batch_shape:
        raise GridMismatchError("framed path and driving path have different batch shapes")
    M = framed.manifold
    tp = framed.tilde_par[..., :-1, :, :]
    pulled = np.einsum("...kji,...kj->...ki", tp, omega.increments)  # //~^{-1} = //~^T
    x0 = framed.nodes[..., :1, :]
    btilde = M.tangent(x0, pulled)
    return NoiseDecomposition(btilde, pulled - btilde, framed, tp)


def redundant_increments(decomp: NoiseDecomposition, seed: int, indices, substeps: int = 1) -> np.ndarray:
    """Fresh ``dbeta'`` on ``Ker X(x0)`` for each stream index, ``(len(indices), N, m)``.

    With ``substeps > 1`` the draws are made on a grid that many times finer
    and summed, so the same streams give consistent draws across grids.
    """
    grid = decomp.grid
    m = decomp.btilde.shape[-1]
    fine = grid.steps * substeps
    xi = rng.normals(seed, indices, (fine, m), tag=rng.RESAMPLE, scale=np.sqrt(grid.horizon / fine))
    if substeps > 1:
        xi = xi.reshape(xi.shape[0], grid.steps, substeps, m).sum(axis=2)
    M = decomp.framed.manifold
    x0 = decomp.framed.nodes[..., :1, :]
    return xi - M.tangent(x0, xi)


def resample_redundant(decomp: NoiseDecomposition, seed: int, index: int = 0) -> DrivingPath:
    """``omega'`` sharing ``B~`` with the original, with a fresh redundant part."""
    beta = redundant_increments(decomp, seed, [index])[0]
    return DrivingPath(decomp.grid, decomp.recompose(beta), int(seed), np.array([index]))


def resample_batch(decomp: NoiseDecomposition, seed: int, indices, substeps: int = 1) -> DrivingPath:
    indices = np.asarray(indices)
    beta = redundant_increments(decomp, seed, indices, substeps)
    inc = decomp.recompose(beta)
    return DrivingPath(decomp.grid, inc, int(seed), indices)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    samples: int


def conditional_expectation_mc(
    M: EmbeddedManifold,
    omega: DrivingPath,
    functional,
    samples: int,
    seed: int,
    chunk: int = 1000,
    x0=None,
    substeps: int = 1,
) -> MonteCarloEstimate:
    """Mean and componentwise standard error of ``functional(omega', framed)``.

    ``functional`` takes a batch of resampled drivers and the framed original
    path and returns one array per resample along axis 0.  The reduction runs
    over chunks in index order, so the result does not depend on ``chunk``
    beyond floating point summation order within it.  ``substeps`` is passed
    to :func:`redundant_increments`.
    """
    if samples < 2:
        raise ValueError("need at least two resamples")
    x0 = M.base_point() if x0 is None else x0
    path = solve_gradient_sde(M, x0, omega)
    framed = compute_transports(M, path)
    decomp = decompose_noise(framed, omega)
    shift = total = total_sq = None
    for start in range(0, samples, chunk):
        idx = np.arange(start, min(samples, start + chunk))
        batch = resample_batch(decomp, seed, idx, substeps)
        vals = _evaluate(functional, batch, framed)
        if shift is None:  # sums of deviations from the first sample avoid cancellation
            shift = vals[0].copy()
            total = np.zeros_like(shift)
            total_sq = np.zeros_like(shift)
        dev = vals - shift
        total += dev.sum(axis=0)
        total_sq += (dev * dev).sum(axis=0)
    mean_dev = total / samples
    var = np.maximum(total_sq / samples - mean_dev * mean_dev, 0.0) * samples / (samples - 1)
    return MonteCarloEstimate(shift + mean_dev, np.sqrt(var / samples), samples)


def _evaluate(functional, batch: DrivingPath, framed: FramedPath) -> np.ndarray:
    try:
        return np.asarray(functional(batch, framed), dtype=float)
    except Exception as exc:  # locate the failing resample
        for i in range(batch.increments.shape[0]):
            try:
                functional(_select(batch, i), framed)
            except Exception as inner:
                raise SampleFailure(int(batch.indices[i]), inner) from inner
        raise


def _select(batch: DrivingPath, i: int) -> DrivingPath:
    return DrivingPath(batch.grid, batch.increments[i : i + 1], batch.seed, batch.indices[i : i + 1])


# -- functionals ---------------------------------------------------------------


def ito_derivative_functional(h: CameronMartinVector, times):
    """``omega' -> X(sigma_t) T I(h)_t(omega')`` at node indices ``times``, pinned to the original path."""
    times = np.asarray(times)

    def functional(batch: DrivingPath, framed: FramedPath):
        M = framed.manifold
        nodes = solve_nodes(M, framed.nodes[..., 0, :], batch.increments)
        v = tangent_nodes(M, nodes, batch.increments, hdot=h.hdot, dt=batch.grid.dt)
        return M.tangent(framed.nodes[times], v[:, times, :])

    return functional


def wedge_functional(h1: CameronMartinVector, h2: CameronMartinVector, indices):
    """``omega' -> (T I(h1) ^ T I(h2))[(s, t)]`` on the subgrid, pinned fiberwise to the original path."""
    indices = np.asarray(indices)

    def functional(batch: DrivingPath, framed: FramedPath):
        M = framed.manifold
        nodes = solve_nodes(M, framed.nodes[..., 0, :], batch.increments)
        hd = np.stack([h1.hdot, h2.hdot])[:, None]  # (2, 1, N, m)
        v = tangent_nodes(M, nodes[None], batch.increments[None], hdot=hd, dt=batch.grid.dt)
        v = M.tangent(framed.nodes[indices], v[:, :, indices, :])
        a, b = v[0], v[1]
        return np.einsum("...si,...tj->...stij", a, b) - np.einsum("...si,...tj->...stij", b, a)

    return functional


def conditional_two_vector(
    M: EmbeddedManifold,
    omega: DrivingPath,
    h1: CameronMartinVector,
    h2: CameronMartinVector,
    indices,
    samples: int,
    seed: int,
    chunk: int = 500,
    x0=None,
    substeps: int = 1,
):
    """MC estimate of ``E{T I(h1) ^ T I(h2) | sigma}`` as a :class:`TwoVectorOnPath`."""
    est = conditional_expectation_mc(M, omega, wedge_functional(h1, h2, indices), samples, seed, chunk, x0, substeps)
    return TwoVectorOnPath(omega.grid, np.asarray(indices), est.mean), est
