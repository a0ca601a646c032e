"""Counter-based deterministic random numbers.

All stochastic code in this package draws from :class:`CounterRng`, a
SplitMix64 generator addressed by (seed, stream, counter). The i-th raw
word is ``mix64(state0 + (i+1) * GOLDEN)``, so any block of draws is a
pure function of the seed and the draw index. That keeps every
experiment bit-reproducible regardless of platform or numpy version
(only IEEE-754 arithmetic and libm transcendentals are involved).

Normals come from the Box-Muller transform on pairs of uniforms.
"""

from __future__ import annotations

import numpy as np

_MASK_INT = 0xFFFFFFFFFFFFFFFF
_GOLDEN_INT = 0x9E3779B97F4A7C15
_MIX1_INT = 0xBF58476D1CE4E5B9
_MIX2_INT = 0x94D049BB133111EB
_GOLDEN = np.uint64(_GOLDEN_INT)
_MIX1 = np.uint64(_MIX1_INT)
_MIX2 = np.uint64(_MIX2_INT)
_TWO53 = float(1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer. Operates elementwise on uint64 arrays (wrapping)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _mix64_int(z: int) -> int:
    z &= _MASK_INT
    z = ((z ^ (z >> 30)) * _MIX1_INT) & _MASK_INT
    z = ((z ^ (z >> 27)) * _MIX2_INT) & _MASK_INT
    return z ^ (z >> 31)


def mix_seed(seed: int, stream: int = 0) -> int:
    """Derive a sub-seed from (seed, stream); used to key independent streams."""
    s = (seed + _GOLDEN_INT) & _MASK_INT
    t = ((stream & _MASK_INT) * _MIX1_INT + _GOLDEN_INT) & _MASK_INT
    return _mix64_int(_mix64_int(s) ^ t)


class CounterRng:
    """Deterministic stream of uniforms, normals, ints, and bits.

    Two instances with the same (seed, stream) produce identical
    sequences when consumed through identical call patterns.
    """

    def __init__(self, seed: int, stream: int = 0):
        self._state0 = np.uint64(mix_seed(seed, stream))
        self._counter = 0

    def raw(self, n: int) -> np.ndarray:
        """Next n raw uint64 words."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64(self._state0 + idx * _GOLDEN)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1), 53-bit resolution."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) / _TWO53

    def normals(self, n: int) -> np.ndarray:
        """n standard normal doubles via Box-Muller."""
        m = (n + 1) // 2
        w = self.raw(2 * m)
        # u1 in (0, 1] so log() is finite
        u1 = ((w[:m] >> np.uint64(11)).astype(np.float64) + 1.0) / _TWO53
        u2 = (w[m:] >> np.uint64(11)).astype(np.float64) / _TWO53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n ints uniform on [0, bound). Modulo reduction; bias < 2**-50 for desk-scale bounds."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.raw(n) % np.uint64(bound)).astype(np.int64)

    def bits(self, n: int) -> np.ndarray:
        """n booleans, each True with probability 1/2."""
        return (self.raw(n) & np.uint64(1)).astype(bool)
