"""Counter-based random numbers (splitmix64 finaliser).

Nothing here keeps state: a uniform is a pure function of a 64-bit key and a
counter, which is what lets environments be lazy and unbounded and lets the
numba and plain-Python paths agree exactly.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAS_NUMBA, jit

GOLDEN = 0x9E3779B97F4A7C15
MASK = 0xFFFFFFFFFFFFFFFF
SITE_TAG = 0x5EED5173A1B2C3D4
STREAM_TAG = 0x2545F4914F6CDD1D
INV53 = 1.0 / 9007199254740992.0

if HAS_NUMBA:
    _G = np.uint64(GOLDEN)
    _C1 = np.uint64(0xBF58476D1CE4E5B9)
    _C2 = np.uint64(0x94D049BB133111EB)
    _S30 = np.uint64(30)
    _S27 = np.uint64(27)
    _S31 = np.uint64(31)
    _S11 = np.uint64(11)
    _SITE = np.uint64(SITE_TAG)
    _STREAM = np.uint64(STREAM_TAG)

    @jit
    def u64(c):
        return np.uint64(c)

    @jit
    def mix64(z):
        z = z + _G
        z = (z ^ (z >> _S30)) * _C1
        z = (z ^ (z >> _S27)) * _C2
        return z ^ (z >> _S31)

    @jit
    def to_unit(h):
        return float(h >> _S11) * INV53

    @jit
    def stream_uniform(key, n):
        # n-th output of the splitmix64 sequence seeded at key
        return to_unit(mix64(key + _G * np.uint64(n)))

    @jit
    def site_hash(seed, x):
        h = mix64(seed ^ _SITE)
        for i in range(x.shape[0]):
            h = mix64(h ^ np.uint64(x[i]))
        return h

    @jit
    def derive(seed, a):
        return mix64(mix64(seed ^ _STREAM) ^ np.uint64(a))

else:

    def u64(c):
        return int(c) & MASK

    def mix64(z):
        z = (int(z) + GOLDEN) & MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def to_unit(h):
        return (int(h) >> 11) * INV53

    def stream_uniform(key, n):
        return to_unit(mix64((int(key) + GOLDEN * int(n)) & MASK))

    def site_hash(seed, x):
        h = mix64(int(seed) ^ SITE_TAG)
        for i in range(x.shape[0]):
            h = mix64(h ^ (int(x[i]) & MASK))
        return h

    def derive(seed, a):
        return mix64(mix64(int(seed) ^ STREAM_TAG) ^ (int(a) & MASK))


def key(seed) -> "np.uint64 | int":
    """Normalise a user seed (any int, possibly negative) to a kernel key."""
    k = int(seed) & MASK
    return np.uint64(k) if HAS_NUMBA else k


def derive_key(seed, *labels) -> int:
    """Derive an independent 64-bit key from a seed and integer labels.

    Plain-Python helper used outside kernels (replicate streams and the like).
    """
    h = int(seed) & MASK
    for a in labels:
        h = _mix_py(_mix_py(h ^ STREAM_TAG) ^ (int(a) & MASK))
    return h


def _mix_py(z: int) -> int:
    z = (z + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def site_hash_many(seeds, xs) -> np.ndarray:
    """Vectorised :func:`site_hash` over broadcastable seeds and sites.

    ``seeds`` has shape ``(n,)`` (or scalar) and ``xs`` shape ``(n, d)`` or
    ``(d,)``.  Returns uint64 hashes of shape ``(n,)``.
    """
    seeds = np.asarray(seeds)
    if seeds.dtype != np.uint64:
        seeds = seeds.astype(np.int64).astype(np.uint64)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.int64)).astype(np.uint64)
    with np.errstate(over="ignore"):
        h = _mix_np(seeds ^ np.uint64(SITE_TAG))
        h = np.broadcast_to(h, np.broadcast_shapes(h.shape, xs.shape[:1])).copy()
        for i in range(xs.shape[1]):
            h = _mix_np(h ^ xs[:, i])
    return h


def unit_many(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * INV53
