"""Euler-Maruyama SGM sampler for mixture targets and the synchronous-coupling harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel, streams
from .constants import check_step, delta_sequence, n_h, uniform_l
from .errors import ConfigurationError, NumericError
from .grid import TimeGrid
from .mixture import (
    ConvexityParams,
    GaussianMixture,
    SampleBatch,
    gmm_m2,
    gmm_sample,
    gmm_weak_convexity_params,
)
from .ou_flow import forward_marginal, score_modified

__all__ = [
    "TimeGrid",
    "ScoreOracle",
    "CoupledRun",
    "run_sgm",
    "run_coupled",
    "sample_backward_init_exact",
]


@dataclass(frozen=True)
class ScoreOracle:
    """Modified-score oracle: exact, or exact plus an offset of L2 norm ``eps``.

    ``mode="fixed"`` adds eps * u for a fixed unit vector u (default
    (1, ..., 1)/sqrt(d)); ``mode="random"`` adds eps times a uniformly random
    unit direction drawn per trajectory and step.
    """

    mixture: GaussianMixture
    eps: float = 0.0
    mode: str = "fixed"
    direction: tuple | None = None

    def __post_init__(self):
        if self.eps < 0:
            raise ConfigurationError("eps must be nonnegative")
        if self.mode not in ("fixed", "random"):
            raise ConfigurationError(f"unknown perturbation mode {self.mode!r}")

    @property
    def kind(self) -> str:
        return "exact" if self.eps == 0 else "perturbed"

    def unit_direction(self) -> np.ndarray:
        d = self.mixture.dim
        u = np.ones(d) if self.direction is None else np.asarray(self.direction, dtype=np.float64)
        return u / np.linalg.norm(u)

    def offset(self, seed: int, k: int, n: int) -> np.ndarray:
        d = self.mixture.dim
        if self.eps == 0:
            return np.zeros((1, d))
        if self.mode == "fixed":
            return (self.eps * self.unit_direction()).reshape(1, d)
        v = streams.substream(seed, streams.PERTURB, k).standard_normal((n, d))
        return self.eps * v / np.linalg.norm(v, axis=1, keepdims=True)

    def __call__(self, s: float, x, seed: int = 0, k: int = 0) -> np.ndarray:
        """Oracle value at forward time s (for inspection; the sampler uses the kernel)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return score_modified(self.mixture, s, x) + self.offset(seed, k, len(x))


def _marginal_args(g: GaussianMixture, s: float):
    return forward_marginal(g, s).kernel_args()


def sample_backward_init_exact(g: GaussianMixture, T: float, n: int, seed: int) -> SampleBatch:
    """Exact draw from the forward marginal at time T (the ideal backward start)."""
    batch = gmm_sample(forward_marginal(g, T), n, seed)
    return SampleBatch(batch.points, seed, "em_true_init", labels=batch.labels)


def _stationary_init(n: int, d: int, seed: int) -> np.ndarray:
    return streams.substream(seed, streams.INIT).standard_normal((n, d))


def _resolve_init(g, grid, init, n, seed):
    if isinstance(init, np.ndarray):
        if init.shape != (n, g.dim):
            raise ConfigurationError(f"custom init must have shape {(n, g.dim)}")
        return np.array(init, dtype=np.float64)
    if isinstance(init, SampleBatch):
        return _resolve_init(g, grid, init.points, n, seed)
    if init == "stationary":
        return _stationary_init(n, g.dim, seed)
    if init == "exact_forward_T":
        return sample_backward_init_exact(g, grid.T, n, seed).points
    raise ConfigurationError(f"unknown init {init!r}")


def _check_finite(x, k):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite state after step k={k}")


def run_sgm(
    oracle: ScoreOracle,
    grid: TimeGrid,
    init="stationary",
    n: int = 1024,
    seed: int = 0,
    params: ConvexityParams | None = None,
    tag: str = "star",
) -> SampleBatch:
    """Run X_{k+1} = X_k + h(-X_k + 2 oracle(T - t_k, X_k)) + sqrt(2h) Z_k; return X_N.

    ``params`` fixes the constants used for the step-size check (defaults to
    the general mixture constants).
    """
    g = oracle.mixture
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    p = params or gmm_weak_convexity_params(g)
    check_step(grid.h, uniform_l(p))
    x = _resolve_init(g, grid, init, n, seed)
    h = grid.h
    for k in range(grid.N):
        z = streams.step_normals(seed, k, n, g.dim)[:, 0, :]
        means, var, logw = _marginal_args(g, grid.forward_time(k))
        x = _accel.em_step(x, means, var, logw, h, z, oracle.offset(seed, k, n))
        _check_finite(x, k)
    return SampleBatch(x, seed, tag)


@dataclass
class CoupledRun:
    """L2 distances (root mean square over trajectories) at every grid node.

    Pairs: ``fine_em`` = fine-grid backward proxy vs X^N, ``em_init`` =
    X^N vs X^inf, ``init_star`` = X^inf vs X^star.
    """

    t: np.ndarray
    dist_fine_em: np.ndarray
    dist_em_init: np.ndarray
    dist_init_star: np.ndarray
    se_fine_em: np.ndarray
    se_em_init: np.ndarray
    se_init_star: np.ndarray
    delta_pred: np.ndarray
    n_h: int
    seed: int
    init_distance: float
    init_distance_bound: float
    sq_em_init: np.ndarray = field(repr=False)

    def ratio_em_init(self, n_boot: int = 50, seed: int | None = None):
        """Per-step ratio dist_{k+1}/dist_k for the X^N / X^inf pair and its bootstrap s.e."""
        sq = self.sq_em_init
        num = np.sqrt(sq[:, 1:].mean(axis=0))
        den = np.sqrt(sq[:, :-1].mean(axis=0))
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = num / den
        rng = streams.substream(self.seed if seed is None else seed, streams.BOOTSTRAP)
        n = sq.shape[0]
        reps = np.empty((n_boot, sq.shape[1] - 1))
        for b in range(n_boot):
            idx = rng.integers(0, n, n)
            ms = sq[idx].mean(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                reps[b] = np.sqrt(ms[1:] / ms[:-1])
        return ratio, reps.std(axis=0, ddof=1)


def _l2_and_se(sq: np.ndarray):
    """RMS distance and its delta-method standard error from per-trajectory squared norms."""
    n = len(sq)
    m = sq.mean()
    rms = math.sqrt(m)
    se = sq.std(ddof=1) / math.sqrt(n) / (2.0 * rms) if rms > 0 and n > 1 else 0.0
    return rms, se


def run_coupled(
    g: GaussianMixture,
    grid: TimeGrid,
    n: int,
    seed: int,
    fine_factor: int = 16,
    eps: float = 0.0,
    mode: str = "fixed",
    params: ConvexityParams | None = None,
) -> CoupledRun:
    """Drive four processes with shared Brownian increments.

    (a) fine-grid EM proxy of the exact backward SDE, step h / fine_factor,
    started at (b)'s initial point; (b) X^N, exact score, started from the
    forward marginal at T; (c) X^inf, exact score, started from N(0, I);
    (d) X^star, perturbed score, started at (c)'s initial point. The (b)/(c)
    initial pair shares the mode draw and the Gaussian draw G:
    X^N_0 = e^{-T} mu_I + s_T G and X^inf_0 = G.
    """
    if fine_factor < 1 or int(fine_factor) != fine_factor:
        raise ConfigurationError("fine_factor must be a positive integer")
    p = params or gmm_weak_convexity_params(g)
    check_step(grid.h, uniform_l(p))
    d = g.dim
    oracle = ScoreOracle(g, eps, mode)

    mT = forward_marginal(g, grid.T)
    labels = streams.substream(seed, streams.INIT, 0).choice(g.n_modes, size=n, p=g.weights)
    G = streams.substream(seed, streams.INIT, 1).standard_normal((n, d))
    xb = mT.means[labels] + mT.scale * G
    xa = xb.copy()
    xc = G.copy()
    xd = G.copy()

    sq = np.empty((3, n, grid.N + 1))

    def record(k):
        sq[0, :, k] = ((xa - xb) ** 2).sum(axis=1)
        sq[1, :, k] = ((xb - xc) ** 2).sum(axis=1)
        sq[2, :, k] = ((xc - xd) ** 2).sum(axis=1)

    record(0)
    h = grid.h
    hf = h / fine_factor
    zero = np.zeros((1, d))
    for k in range(grid.N):
        zf = streams.step_normals(seed, k, n, d, fine_factor)
        z = zf.sum(axis=1) / math.sqrt(fine_factor)
        for j in range(fine_factor):
            means, var, logw = _marginal_args(g, grid.T - k * h - j * hf)
            xa = _accel.em_step(xa, means, var, logw, hf, zf[:, j, :], zero)
        means, var, logw = _marginal_args(g, grid.forward_time(k))
        xb = _accel.em_step(xb, means, var, logw, h, z, zero)
        xc = _accel.em_step(xc, means, var, logw, h, z, zero)
        xd = _accel.em_step(xd, means, var, logw, h, z, oracle.offset(seed, k, n))
        for arr in (xa, xb, xc, xd):
            _check_finite(arr, k)
        record(k + 1)

    stats = [[_l2_and_se(sq[i, :, k]) for k in range(grid.N + 1)] for i in range(3)]
    dist = [np.array([v[0] for v in row]) for row in stats]
    se = [np.array([v[1] for v in row]) for row in stats]
    return CoupledRun(
        t=grid.nodes,
        dist_fine_em=dist[0],
        dist_em_init=dist[1],
        dist_init_star=dist[2],
        se_fine_em=se[0],
        se_em_init=se[1],
        se_init_star=se[2],
        delta_pred=delta_sequence(grid, p),
        n_h=n_h(grid, p),
        seed=seed,
        init_distance=dist[1][0],
        init_distance_bound=math.exp(-grid.T) * (math.sqrt(gmm_m2(g)) + math.sqrt(d)),
        sq_em_init=sq[1],
    )
