"""Portable deterministic random number generation.

Synthetic fixtures must reproduce bit-for-bit from a seed, independent of
numpy's generator lineup, so this module implements splitmix64 directly:
draw i consumes the mixed state ``seed + (i+1) * golden``. The integer
stream is exact; floating-point derivations use IEEE-754 doubles only.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_U53 = 1.0 / (1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2**64, matching the scalar definition
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based splitmix64 stream with bulk draws."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & _MASK)
        self._count = 0

    def next_raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words as a uint64 array."""
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            return _mix(self._seed + idx * np.uint64(_GOLDEN))

    def next_u64(self) -> int:
        return int(self.next_raw(1)[0])

    def uniforms(self, n: int) -> np.ndarray:
        """n uniform doubles in [0, 1) from the top 53 bits of each word."""
        return (self.next_raw(n) >> np.uint64(11)).astype(np.float64) * _U53

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via the multiply-shift reduction."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def gaussians(self, n: int, scale: float = 1.0) -> np.ndarray:
        """n standard normals (times scale) via Box-Muller, two uniforms each."""
        u = self.uniforms(2 * n)
        u1 = np.maximum(u[0::2], _U53)  # keep log() finite
        u2 = u[1::2]
        return scale * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
