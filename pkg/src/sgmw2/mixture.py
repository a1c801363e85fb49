"""Isotropic Gaussian mixtures: density, score, sampling and convexity constants."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _accel, streams
from .errors import ConfigurationError


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture sum_i w_i N(mu_i, scale^2 I) on R^dim."""

    weights: np.ndarray
    means: np.ndarray
    scale: float
    dim: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        mu = np.asarray(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu.reshape(len(w), -1) if len(w) else mu
        if mu.ndim != 2 or mu.shape[0] != len(w):
            raise ConfigurationError("means must be a list of vectors, one per weight")
        if mu.shape[1] != int(self.dim):
            raise ConfigurationError(f"every mean must have length dim={self.dim}")
        if len(w) == 0 or np.any(w < 0) or np.any(w > 1):
            raise ConfigurationError("weights must be a nonempty list of reals in [0, 1]")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ConfigurationError("weights must sum to 1")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigurationError("scale must be positive")
        w.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def n_modes(self) -> int:
        return len(self.weights)

    def kernel_args(self):
        """(means, variance, log-weights) with zero-weight modes dropped."""
        keep = self.weights > 0
        return self.means[keep], self.scale**2, np.log(self.weights[keep])

    # -- construction helpers ------------------------------------------------

    @classmethod
    def standard_normal(cls, dim: int) -> "GaussianMixture":
        return cls(np.ones(1), np.zeros((1, dim)), 1.0, dim)

    @classmethod
    def symmetric(cls, mu, scale: float = 1.0) -> "GaussianMixture":
        """Equal-weight two-mode mixture with means +mu and -mu."""
        mu = np.asarray(mu, dtype=np.float64)
        return cls(np.array([0.5, 0.5]), np.stack([mu, -mu]), scale, mu.size)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "scale": self.scale,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMixture":
        try:
            return cls(
                np.asarray(data["weights"], dtype=np.float64),
                np.asarray(data["means"], dtype=np.float64),
                float(data["scale"]),
                int(data["dim"]),
            )
        except KeyError as exc:
            raise ConfigurationError(f"mixture config is missing key {exc}") from None

    @classmethod
    def load(cls, path) -> "GaussianMixture":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class ConvexityParams:
    """Weak-convexity constants (alpha, M) and one-sided Lipschitz constant L_U."""

    alpha: float
    big_m: float
    l_u: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        if self.big_m < 0 or self.l_u < 0:
            raise ConfigurationError("M and L_U must be nonnegative")


@dataclass
class SampleBatch:
    points: np.ndarray
    seed: int
    tag: str
    labels: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.points)):
            raise ValueError("sample batch contains non-finite rows")


def _as_rows(g: GaussianMixture, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = x.reshape(1, -1) if single else x
    if rows.ndim != 2 or rows.shape[1] != g.dim:
        raise ValueError(f"expected points of dimension {g.dim}, got shape {x.shape}")
    return rows, single


def gmm_log_density(g: GaussianMixture, x):
    """log p(x) via a max-shifted log-sum-exp; ``x`` is (d,) or (n, d)."""
    rows, single = _as_rows(g, x)
    out = _accel.mixture_logpdf(rows, *g.kernel_args())
    return float(out[0]) if single else out


def gmm_score(g: GaussianMixture, x):
    """grad log p(x) = sum_i w_i(x) (mu_i - x) / scale^2 with stable posteriors."""
    rows, single = _as_rows(g, x)
    out = _accel.mixture_score(rows, *g.kernel_args())
    return out[0] if single else out


def gmm_sample(g: GaussianMixture, n: int, seed: int) -> SampleBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = streams.substream(seed, streams.MIXTURE, 0).choice(g.n_modes, size=n, p=g.weights)
    noise = streams.substream(seed, streams.MIXTURE, 1).standard_normal((n, g.dim))
    pts = g.means[labels] + g.scale * noise
    return SampleBatch(pts, seed, "data", labels=labels)


def gmm_weak_convexity_params(g: GaussianMixture) -> ConvexityParams:
    """General mixture constants: alpha = 1/s^2, sqrt(M) = 2n sum|mu_i| / s^2, L_U = alpha + sqrt(M)."""
    s2 = g.scale**2
    alpha = 1.0 / s2
    sqrt_m = 2.0 * g.n_modes * float(np.linalg.norm(g.means, axis=1).sum()) / s2
    return ConvexityParams(alpha, sqrt_m**2, alpha + sqrt_m)


def gmm_lipschitz_proof_variant(g: GaussianMixture) -> float:
    """The alternative Lipschitz value alpha + M (as opposed to alpha + sqrt(M))."""
    p = gmm_weak_convexity_params(g)
    return p.alpha + p.big_m


def _half_separation(g: GaussianMixture) -> np.ndarray:
    if g.n_modes != 2 or abs(g.weights[0] - g.weights[1]) > 1e-12:
        raise ConfigurationError("two-mode constants need an equal-weight two-mode mixture")
    return 0.5 * (g.means[0] - g.means[1])


def two_mode_params(g: GaussianMixture, variant: str = "general") -> ConvexityParams:
    """Constants for an equal-weight two-mode mixture (any centre).

    ``variant="general"`` takes sqrt(M) = 4 sqrt(2) |mu| / s^2 with L_U = alpha + sqrt(M).
    ``variant="sharp"`` takes sqrt(M) = |mu| / s^2, which matches the pairwise
    profile 1/s^2 - 2|mu| tanh(|mu| r / 2s^2) / (s^2 r) exactly, and
    L_U = 1/s^2, the largest eigenvalue of the Hessian of -log p.
    """
    mu = float(np.linalg.norm(_half_separation(g)))
    s2 = g.scale**2
    alpha = 1.0 / s2
    if variant == "general":
        sqrt_m = 4.0 * math.sqrt(2.0) * mu / s2
        return ConvexityParams(alpha, sqrt_m**2, alpha + sqrt_m)
    if variant == "sharp":
        sqrt_m = mu / s2
        return ConvexityParams(alpha, sqrt_m**2, alpha)
    raise ConfigurationError(f"unknown variant {variant!r}")


def gmm_m2(g: GaussianMixture) -> float:
    """Second moment E|X|^2 = sum_i w_i (|mu_i|^2 + d s^2)."""
    sq = (g.means**2).sum(axis=1) + g.dim * g.scale**2
    return math.fsum(g.weights * sq)
