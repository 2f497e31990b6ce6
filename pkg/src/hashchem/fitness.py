"""Canonical encoding, FNV-1a 64 hashing and the hash-to-fitness map.

``fitness(ms, m) = (fnv1a64(encode_canonical(ms)) mod m) / m`` where the
encoding is each element as a 4-byte little-endian unsigned integer in
ascending order.
"""

from __future__ import annotations

import struct

import numpy as np
from numba import njit

from .core import Multiset

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1

_U_OFFSET = np.uint64(FNV_OFFSET)
_U_PRIME = np.uint64(FNV_PRIME)


def encode_canonical(ms: Multiset) -> bytes:
    return struct.pack(f"<{len(ms.elements)}I", *ms.elements)


def hash64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def fitness_numerator(ms: Multiset, m: int) -> int:
    """``m * fitness``; an integer in ``[0, m - 1]``."""
    return hash64(encode_canonical(ms)) % m


def fitness(ms: Multiset, m: int) -> float:
    return fitness_numerator(ms, m) / m


class FitnessCache:
    """Per-run memo of fitness numerators keyed by canonical content."""

    def __init__(self, m: int):
        self.m = m
        self._table: dict[tuple[int, ...], int] = {}

    def numerator(self, ms: Multiset) -> int:
        key = ms.elements
        value = self._table.get(key)
        if value is None:
            value = self._table[key] = fitness_numerator(ms, self.m)
        return value

    def __call__(self, ms: Multiset) -> float:
        return self.numerator(ms) / self.m

    def __len__(self) -> int:
        return len(self._table)


@njit(cache=True)
def hash_elements(buf, start, length):
    """FNV-1a 64 over ``buf[start:start+length]`` encoded as little-endian u32."""
    h = _U_OFFSET
    for i in range(start, start + length):
        v = np.uint64(np.uint32(buf[i]))
        for _ in range(4):
            h ^= v & np.uint64(0xFF)
            h *= _U_PRIME
            v >>= np.uint64(8)
    return h


@njit(cache=True)
def numerator_elements(buf, start, length, m):
    return np.int64(hash_elements(buf, start, length) % np.uint64(m))
