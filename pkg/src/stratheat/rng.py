"""Counter-based pseudo-random streams.

Every random draw in this package is a pure function of a 64-bit key and a
64-bit counter index, realised by the splitmix64 finalizer on
``key + (index + 1) * golden``.  Because a value depends only on its logical
index and never on generator state, chunking work across any number of
workers cannot change a stream, which is what the sampler's reproducibility
contract requires.

Normals are produced from consecutive uniform pairs by Box-Muller, which has
fixed consumption (two uniforms per two normals), so offsets into a stream
are computable in closed form.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0**-53
_U54 = 2.0**-54


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_key(*parts) -> int:
    """Fold strings/ints into a 64-bit stream key (stable across platforms)."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


def counter_uniforms(key: int, index: np.ndarray) -> np.ndarray:
    """Uniforms in the open interval (0, 1) at the given counter indices."""
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(key) + (idx + np.uint64(1)) * _GOLDEN
        bits = _finalize(state)
    return (bits >> np.uint64(11)).astype(np.float64) * _U53 + _U54


def counter_normals(key: int, index: np.ndarray) -> np.ndarray:
    """Standard normals at the given indices; last axis must be even.

    Index pair (2i, 2i+1) maps to one Box-Muller pair, so the value at a
    given index never depends on how many others are drawn alongside it.
    """
    idx = np.asarray(index, dtype=np.uint64)
    if idx.shape[-1] % 2 != 0:
        raise ValueError("last axis of the index array must be even")
    u = counter_uniforms(key, idx)
    u0, u1 = u[..., 0::2], u[..., 1::2]
    radius = np.sqrt(-2.0 * np.log(u0))
    angle = 2.0 * np.pi * u1
    out = np.empty_like(u)
    out[..., 0::2] = radius * np.cos(angle)
    out[..., 1::2] = radius * np.sin(angle)
    return out


class Stream:
    """Small sequential facade over the counter generator.

    Used for low-volume draws (polynomial coefficients, random directions)
    where an explicit index bookkeeping would be noise.
    """

    def __init__(self, *key_parts):
        self.key = derive_key(*key_parts)
        self.pos = 0

    def _take(self, count: int) -> np.ndarray:
        idx = np.arange(self.pos, self.pos + count, dtype=np.uint64)
        self.pos += count
        return idx

    def uniform(self, size: int | tuple = ()) -> np.ndarray | float:
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=int)) if shape else 1
        vals = counter_uniforms(self.key, self._take(count))
        return vals.reshape(shape) if shape else float(vals[0])

    def normal(self, size: int | tuple = ()) -> np.ndarray | float:
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=int)) if shape else 1
        n_pairs = (count + 1) // 2
        vals = counter_normals(self.key, self._take(2 * n_pairs).reshape(1, -1))
        vals = vals.ravel()[:count]
        return vals.reshape(shape) if shape else float(vals[0])

    def unit_disc(self, size: int | tuple = ()) -> np.ndarray | complex:
        """Uniform draws from the closed unit disc in the complex plane."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=int)) if shape else 1
        u = counter_uniforms(self.key, self._take(2 * count)).reshape(count, 2)
        vals = np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1])
        return vals.reshape(shape) if shape else complex(vals[0])

    def integers(self, low: int, high: int, size: int = 1) -> np.ndarray:
        """Integers in [low, high) by scaled uniforms (statistically fine here)."""
        u = self.uniform((size,))
        return (low + np.floor(u * (high - low))).astype(int)
