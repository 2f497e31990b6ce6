"""Pinned pseudo-random generator shared by the Python and numba code paths.

The generator is xoshiro256** (Blackman & Vigna). A stream is keyed by
``(seed, run_index)``:

    key   = splitmix64_mix(seed mod 2**64) XOR (run_index mod 2**64)
    s[0..3] = four successive splitmix64 outputs starting from state ``key``

splitmix64 step:  state += 0x9E3779B97F4A7C15; z = state;
                  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
                  z = (z ^ (z >> 27)) * 0x94D049BB133111EB
                  return z ^ (z >> 31)
(``splitmix64_mix`` is the same finalizer applied to its argument without
the increment.)

Derived draws:

* ``uniform``  -> ``(next >> 11) * 2**-53``, in [0, 1)
* ``below(n)`` -> 0 when n <= 1 (no draw consumed); otherwise with
  ``b = bit_length(n - 1)`` repeat ``r = next >> (64 - b)`` until ``r < n``
* ``normal``   -> Box-Muller, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``

The primitives are numba-compiled functions over a ``uint64[4]`` state array
so that the compiled simulation kernels and the pure-Python reference code
consume exactly the same sequence.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG_53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


def splitmix64_mix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64_sequence(state: int, count: int) -> list[int]:
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        out.append(splitmix64_mix(state))
    return out


def seed_state(seed: int, run_index: int) -> np.ndarray:
    """Initial xoshiro256** state for ``(seed, run_index)``."""
    key = splitmix64_mix(seed & MASK64) ^ (run_index & MASK64)
    return np.array(splitmix64_sequence(key, 4), dtype=np.uint64)


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def uniform(s):
    return float(next_u64(s) >> np.uint64(11)) * _TWO_NEG_53


@njit(cache=True)
def below(s, n):
    if n <= 1:
        return 0
    bits = 0
    v = n - 1
    while v > 0:
        bits += 1
        v >>= 1
    shift = np.uint64(64 - bits)
    bound = np.uint64(n)
    while True:
        r = next_u64(s) >> shift
        if r < bound:
            return np.int64(r)


@njit(cache=True)
def normal(s):
    u1 = uniform(s)
    u2 = uniform(s)
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(_TWO_PI * u2)


class RngStream:
    """Single-owner random stream. Never share one between concurrent runs."""

    __slots__ = ("state", "seed", "run_index")

    def __init__(self, seed: int, run_index: int = 0):
        self.seed = seed
        self.run_index = run_index
        self.state = seed_state(seed, run_index)

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def uniform(self) -> float:
        return uniform(self.state)

    def below(self, n: int) -> int:
        return int(below(self.state, n))

    def normal(self) -> float:
        return normal(self.state)

    def uniforms(self, count: int) -> np.ndarray:
        return _fill_uniform(self.state, count)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, run_index={self.run_index})"


@njit(cache=True)
def _fill_uniform(s, count):
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        out[i] = uniform(s)
    return out


def rng_stream(seed: int, run_index: int = 0) -> RngStream:
    return RngStream(seed, run_index)
