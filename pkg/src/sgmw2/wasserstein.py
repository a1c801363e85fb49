"""Empirical W2 between equal-size batches."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import streams

MATCHING_CAP = 2048


@dataclass(frozen=True)
class W2Estimate:
    value: float
    method: str
    n: int
    se: float = float("nan")
    nproj: int = 0
    seed: int | None = None

    def __float__(self) -> float:
        return self.value


def _pair(a, b, ndim):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if ndim == 2:
        a = a.reshape(len(a), -1)
        b = b.reshape(len(b), -1)
        if a.shape[1] != b.shape[1]:
            raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if len(a) != len(b) or len(a) == 0:
        raise ValueError(f"batches must be nonempty and of equal size, got {len(a)} and {len(b)}")
    return a, b


def w2_1d_exact(a, b) -> W2Estimate:
    a, b = _pair(np.ravel(a), np.ravel(b), 1)
    diff = np.sort(a) - np.sort(b)
    return W2Estimate(math.sqrt(np.mean(diff * diff)), "exact_1d", len(a))


def _directions(d: int, nproj: int, seed: int) -> np.ndarray:
    u = streams.substream(seed, streams.PROJECTIONS).standard_normal((nproj, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _sliced_sq(A, B, U):
    pa = np.sort(A @ U.T, axis=0)
    pb = np.sort(B @ U.T, axis=0)
    return float(np.mean((pa - pb) ** 2))


def w2_sliced(A, B, nproj: int = 256, seed: int = 0, n_boot: int = 0) -> W2Estimate:
    """sqrt of the mean over random unit directions of the 1-D squared W2.

    With ``n_boot > 0`` the standard error comes from resampling both
    batches with replacement (same directions).
    """
    if nproj < 1:
        raise ValueError("nproj must be >= 1")
    A, B = _pair(A, B, 2)
    U = _directions(A.shape[1], nproj, seed)
    value = math.sqrt(_sliced_sq(A, B, U))
    se = float("nan")
    if n_boot > 0:
        rng = streams.substream(seed, streams.BOOTSTRAP, 1)
        n = len(A)
        reps = [
            math.sqrt(_sliced_sq(A[rng.integers(0, n, n)], B[rng.integers(0, n, n)], U))
            for _ in range(n_boot)
        ]
        se = float(np.std(reps, ddof=1))
    return W2Estimate(value, "sliced", len(A), se, nproj, seed)


def _matching_sq(A, B) -> float:
    # centring both batches leaves the optimal assignment unchanged (the cross term sums to zero
    # over any perfect matching) and makes the solver much faster when the means differ
    ma, mb = A.mean(axis=0), B.mean(axis=0)
    cost = cdist(A - ma, B - mb, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean() + ((ma - mb) ** 2).sum())


def w2_exact_matching(A, B, n_boot: int = 0, seed: int = 0) -> W2Estimate:
    """Optimal assignment under squared Euclidean cost.

    With ``n_boot > 0`` the standard error comes from resampling the rows of
    both batches with replacement and re-solving the assignment each time.
    """
    A, B = _pair(A, B, 2)
    n = len(A)
    if n > MATCHING_CAP:
        raise ValueError(f"exact matching is capped at n={MATCHING_CAP}, got {n}")
    value = math.sqrt(max(_matching_sq(A, B), 0.0))
    se = float("nan")
    if n_boot > 0:
        rng = streams.substream(seed, streams.BOOTSTRAP, 2)
        reps = [
            math.sqrt(max(_matching_sq(A[rng.integers(0, n, n)], B[rng.integers(0, n, n)]), 0.0))
            for _ in range(n_boot)
        ]
        se = float(np.std(reps, ddof=1))
    return W2Estimate(value, "exact_matching", n, se, 0, seed)


def w2_gaussian_closed_form(m1, s1: float, m2, s2: float, d: int) -> float:
    """W2 between N(m1, s1^2 I) and N(m2, s2^2 I) on R^d."""
    if s1 < 0 or s2 < 0:
        raise ValueError("scales must be nonnegative")
    diff = np.asarray(m1, dtype=np.float64) - np.asarray(m2, dtype=np.float64)
    return math.sqrt(float(diff @ diff) + d * (s1 - s2) ** 2)
