"""Deterministic counter-based random numbers for the hot kernels.

splitmix64 applied to a strided counter gives a platform-stable stream that
can be derived independently per (seed, node, walk) or per token position,
so parallel generation never depends on scheduling order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53_SCALE = 1.0 / float(1 << 53)


@njit(cache=True)
def mix64(z: np.uint64) -> np.uint64:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def stream_base(seed: np.uint64, a: np.uint64, b: np.uint64) -> np.uint64:
    """Derive an independent stream base from (seed, a, b)."""
    s = mix64(seed + GOLDEN)
    s = mix64(s ^ (a + GOLDEN))
    s = mix64(s ^ (b + GOLDEN))
    return s


@njit(cache=True)
def draw_u64(base: np.uint64, counter: np.uint64) -> np.uint64:
    return mix64(base + counter * GOLDEN)


@njit(cache=True)
def draw_unit(base: np.uint64, counter: np.uint64) -> float:
    """Uniform float64 in [0, 1) from the stream's counter-th draw."""
    return float(draw_u64(base, counter) >> np.uint64(11)) * _U53_SCALE
