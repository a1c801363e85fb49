"""Closed-form forward OU marginals of a mixture and the derived score fields.

Forward dynamics: dX = -X ds + sqrt(2) dB, so X_s = e^{-s} X_0 + sqrt(1 - e^{-2s}) G.
Time arguments here are always forward times ``s``.
"""

from __future__ import annotations

import math

import numpy as np

from . import streams
from .errors import NumericError
from .mixture import GaussianMixture, gmm_score


def _check_time(s: float) -> float:
    s = float(s)
    if not s >= 0:
        raise ValueError(f"forward time must be nonnegative, got {s}")
    return s


def forward_marginal(g: GaussianMixture, s: float) -> GaussianMixture:
    """Law of X_s when X_0 ~ g: same weights, means e^{-s} mu_i, scale^2 e^{-2s} s0^2 + 1 - e^{-2s}."""
    s = _check_time(s)
    if s == 0.0:
        return g
    decay = math.exp(-s)
    var = decay * decay * g.scale**2 - math.expm1(-2.0 * s)
    return GaussianMixture(g.weights, decay * g.means, math.sqrt(var), g.dim)


def score_forward(g: GaussianMixture, s: float, x):
    return gmm_score(forward_marginal(g, s), x)


def score_modified(g: GaussianMixture, s: float, x):
    """grad log(p_s / pi_inf)(x) = grad log p_s(x) + x."""
    return score_forward(g, s, x) + np.asarray(x, dtype=np.float64)


def backward_drift(g: GaussianMixture, s: float, x):
    """b_s(x) = -x + 2 grad log(p_s / pi_inf)(x)."""
    x = np.asarray(x, dtype=np.float64)
    return -x + 2.0 * score_modified(g, s, x)


def ou_transition_sample(x0, s: float, seed: int, n: int | None = None) -> np.ndarray:
    """Draw X_s given X_0 = x0. With ``n`` set, returns n independent draws from one x0."""
    s = _check_time(s)
    x0 = np.asarray(x0, dtype=np.float64)
    shape = x0.shape if n is None else (n,) + x0.shape
    g = streams.substream(seed, streams.OU_TRANSITION).standard_normal(shape)
    return math.exp(-s) * x0 + math.sqrt(-math.expm1(-2.0 * s)) * g


def fd_hessians(scorefield, s: float, points, eps: float | None = None) -> np.ndarray:
    """Symmetrized central-difference Jacobians of ``scorefield(s, .)`` at each row.

    ``scorefield`` must accept an (m, d) batch. The default step is
    1e-4 (1 + |x|) per point.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, d = pts.shape
    if eps is None:
        steps = 1e-4 * (1.0 + np.linalg.norm(pts, axis=1))
    else:
        if not eps > 0:
            raise ValueError("eps must be positive")
        steps = np.full(n, float(eps))
    shift = steps[:, None, None] * np.eye(d)[None, :, :]  # (n, d, d)
    stacked = np.concatenate([pts[:, None, :] + shift, pts[:, None, :] - shift], axis=1)
    vals = np.asarray(scorefield(s, stacked.reshape(-1, d)), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise NumericError("non-finite score evaluation in finite-difference Hessian")
    vals = vals.reshape(n, 2 * d, d)
    # jac[i, j, :] = d score / d x_j
    jac = (vals[:, :d, :] - vals[:, d:, :]) / (2.0 * steps[:, None, None])
    return 0.5 * (jac + np.swapaxes(jac, 1, 2))


def fd_hessian_opnorm(scorefield, s: float, x, eps: float | None = None) -> float:
    """Largest absolute eigenvalue of the symmetrized FD Jacobian at one point."""
    hess = fd_hessians(scorefield, s, np.asarray(x, dtype=np.float64).reshape(1, -1), eps)[0]
    return float(np.max(np.abs(np.linalg.eigvalsh(hess))))
