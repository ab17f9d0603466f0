"""Deterministic random streams shared by every stochastic operation.

All sampling in this package (corpus subsampling, clip placement,
permutation tests, bootstraps, synthesis) draws from a splitmix64
counter generator so that results are bit-identical across runs,
platforms, and re-implementations in other languages.

Generator definition
--------------------
State advances by the 64-bit golden-gamma constant; output ``i`` of a
stream seeded with ``s`` is ``mix64(s + (i+1) * 0x9E3779B97F4A7C15)``
where ``mix64`` is the splitmix64 finalizer:

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

(all arithmetic mod 2**64).  Derived quantities:

* uniform double in [0, 1):  ``(u64 >> 11) * 2**-53``
* permutation of n items:    indices argsorted by n uniforms (stable)
* index below n:             ``floor(uniform * n)``
* standard normal:           Box-Muller on consecutive uniform pairs

Substreams are derived, not split: ``derive(seed, *keys)`` hashes the
seed plus the UTF-8 key strings with FNV-1a (a 0x1F separator after
each key) and finalizes with ``mix64``, giving independent streams for
e.g. (seed, "clip", song_id) without any ordering coupling.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_TWO53_INV = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int (mod 2**64)."""
    z &= 0xFFFFFFFFFFFFFFFF
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def derive(seed: int, *keys: object) -> int:
    """Derive an independent substream seed from (seed, keys).

    Keys are stringified; each key is hashed FNV-1a byte-wise followed
    by a 0x1F separator so ("ab",) and ("a", "b") cannot collide.
    """
    h = _FNV_OFFSET
    for byte in int(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"):
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    for key in keys:
        for byte in str(key).encode("utf-8"):
            h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
        h = ((h ^ 0x1F) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return mix64(h)


class Stream:
    """Counter-based splitmix64 stream with vectorized draws."""

    def __init__(self, seed: int):
        self._seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._counter = 0

    def substream(self, *keys: object) -> "Stream":
        return Stream(derive(self._seed, *keys))

    def _raw(self, n: int) -> np.ndarray:
        start = self._counter + 1
        self._counter += n
        with np.errstate(over="ignore"):
            ctr = np.arange(start, start + n, dtype=np.uint64) * np.uint64(_GOLDEN)
            return _mix64_array(np.uint64(self._seed) + ctr)

    def next_u64(self) -> int:
        return int(self._raw(1)[0])

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * _TWO53_INV

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def normals(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller (pairs of uniforms)."""
        m = (n + 1) // 2
        u = self.uniforms(2 * m)
        r = np.sqrt(-2.0 * np.log1p(-u[:m]))
        theta = 2.0 * np.pi * u[m:]
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def below(self, n: int) -> int:
        """Integer uniform on [0, n)."""
        return int(self.uniform() * n)

    def indices(self, count: int, n: int) -> np.ndarray:
        """count integers uniform on [0, n), for bootstrap resampling."""
        return np.minimum((self.uniforms(count) * n).astype(np.int64), n - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of range(n) (argsort of uniforms)."""
        return np.argsort(self.uniforms(n), kind="stable")

    def choose(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), in ascending order."""
        if k > n:
            raise ValueError(f"cannot choose {k} from {n}")
        return np.sort(self.permutation(n)[:k])
