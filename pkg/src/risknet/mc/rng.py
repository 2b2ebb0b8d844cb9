"""Counter-based SplitMix64 substreams: path i draws from its own sequence."""
from __future__ import annotations

import numpy as np

from ._jit import jit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
S30 = np.uint64(30)
S27 = np.uint64(27)
S31 = np.uint64(31)
S11 = np.uint64(11)
ONE = np.uint64(1)
INV53 = 1.0 / 9007199254740992.0


@jit
def mix64(z):
    z = (z ^ (z >> S30)) * MIX1
    z = (z ^ (z >> S27)) * MIX2
    return z ^ (z >> S31)


@jit
def stream_start(seed, path):
    return mix64(seed + (np.uint64(path) + ONE) * GOLDEN)


@jit
def next_uniform(state):
    """Advance the stream; returns (state, u) with u in the open interval (0, 1)."""
    state = state + GOLDEN
    z = mix64(state)
    u = (float(z >> S11) + 0.5) * INV53
    return state, u


@jit
def next_exponential(state, rate):
    state, u = next_uniform(state)
    return state, -np.log(u) / rate


def uniforms(seed: int, path: int, count: int) -> np.ndarray:
    """First ``count`` uniforms of one substream (testing helper)."""
    out = np.empty(count)
    with np.errstate(over="ignore"):
        s = stream_start(np.uint64(seed), path)
        for i in range(count):
            s, out[i] = next_uniform(np.uint64(s))
    return out
