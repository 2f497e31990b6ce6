"""Straight-line reference implementations used only by the tests.

These are deliberately written without numpy or numba so that they share no
code with the package under test.
"""

import math

M64 = (1 << 64) - 1


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & M64
    return x, mix64(x)


class Xoshiro:
    def __init__(self, seed, run_index=0):
        x = mix64(seed) ^ run_index
        self.s = []
        for _ in range(4):
            x, z = splitmix64(x)
            self.s.append(z)

    def next(self):
        s = self.s
        r = (((s[1] * 5) & M64) << 7 | ((s[1] * 5) & M64) >> 57) & M64
        r = (r * 9) & M64
        t = (s[1] << 17) & M64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = ((s[3] << 45) | (s[3] >> 19)) & M64
        return r

    def uniform(self):
        return (self.next() >> 11) * 2.0**-53

    def below(self, n):
        if n <= 1:
            return 0
        shift = 64 - (n - 1).bit_length()
        while True:
            v = self.next() >> shift
            if v < n:
                return v

    def normal(self):
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) % 2**64
    return h


def fitness_oracle(elements, m):
    data = b"".join(int(e).to_bytes(4, "little") for e in sorted(elements))
    return fnv1a64(data) % m / m


def fit_line(x, y):
    """Least squares for y = a x + b through the normal equations, summed with fsum."""
    n = len(x)
    sx = math.fsum(x)
    sy = math.fsum(y)
    mx, my = sx / n, sy / n
    sxx = math.fsum((xi - mx) ** 2 for xi in x)
    sxy = math.fsum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    a = sxy / sxx
    b = my - a * mx
    rss = math.fsum((yi - a * xi - b) ** 2 for xi, yi in zip(x, y))
    tss = math.fsum((yi - my) ** 2 for yi in y)
    return a, b, rss, tss
