"""splitmix64 generator shared by every seeded operation in the package.

splitmix64 is counter based: output ``i`` only depends on ``seed + (i + 1) * GAMMA``,
so blocks of outputs can be produced with vectorised numpy arithmetic and still
match the sequential definition bit for bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed (used for per-cloud / per-iteration streams)."""
    h = 0
    for p in parts:
        h = mix64(h ^ ((int(p) + GAMMA) & MASK64))
    return h


class SplitMix64:
    """Sequential splitmix64 with vectorised block draws."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def u64_array(self, n: int) -> np.ndarray:
        """Next ``n`` outputs, identical to ``n`` calls of :meth:`next_u64`."""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GAMMA)
            states = np.uint64(self.state) + steps
            out = _mix64_array(states)
        self.state = (self.state + n * GAMMA) & MASK64
        return out

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def below(self, bound: int) -> int:
        """Integer in [0, bound) by plain modulo reduction."""
        return self.next_u64() % bound

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller, consuming two uniforms per pair."""
        m = (n + 1) // 2
        u = self.uniform(2 * m)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:n]


def fisher_yates_prefix(count: int, n: int, seed: int) -> list[int]:
    """First ``n`` entries of a Fisher-Yates shuffle of ``range(count)``."""
    rng = SplitMix64(seed)
    idx = list(range(count))
    n = min(n, count)
    for i in range(n):
        j = i + rng.below(count - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:n]
