"""Counter-keyed random substreams.

A stream is addressed by ``(seed, tag, *counters)`` and backed by a Philox
generator seeded from a :class:`numpy.random.SeedSequence` over that tuple.
Draws for step ``k`` are a block with one row per trajectory, so a
trajectory's noise depends only on ``(seed, tag, k, row)``: never on the
evaluation order or on the number of workers.
"""

from __future__ import annotations

import numpy as np

# stream tags
MIXTURE = 1
INIT = 2
STEP = 3
PERTURB = 4
OU_TRANSITION = 5
PAIRS = 6
PROJECTIONS = 7
BOOTSTRAP = 8
REFERENCE = 9


def substream(seed: int, tag: int, *counters: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    entropy = [int(seed), int(tag), *(int(c) for c in counters)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def step_normals(seed: int, k: int, n: int, d: int, fine: int = 1) -> np.ndarray:
    """Standard normals for coarse step ``k``: shape (n, fine, d)."""
    return substream(seed, STEP, k).standard_normal((n, fine, d))
