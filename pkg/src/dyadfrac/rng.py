"""Counter-based random numbers keyed by (seed, scale, position).

Philox4x32-10 evaluated on whole numpy arrays of counters, so a draw for
``(seed, j, k)`` never depends on which other draws were made or in what
order.  Seeds for sub-tasks come from :func:`derive_seed`.
"""

import hashlib

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(c0, c1, c2, c3, key, rounds=10):
    """Philox4x32 block function on uint32-valued arrays.

    ``key`` is a pair of python ints.  Returns four uint64 arrays holding
    32-bit words.
    """
    x0 = np.asarray(c0, dtype=np.uint64) & _MASK32
    x1 = np.asarray(c1, dtype=np.uint64) & _MASK32
    x2 = np.asarray(c2, dtype=np.uint64) & _MASK32
    x3 = np.asarray(c3, dtype=np.uint64) & _MASK32
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for _ in range(rounds):
        p0 = _M0 * x0
        p1 = _M1 * x2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        x0, x1, x2, x3 = (
            hi1 ^ x1 ^ np.uint64(k0),
            lo1,
            hi0 ^ x3 ^ np.uint64(k1),
            lo0,
        )
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return x0, x1, x2, x3


def uniform(seed, j, k, stream=0):
    """Uniform doubles in [0, 1) for positions ``k`` at scale ``j``.

    53 bits are taken from two output words.  The result depends only on
    ``(seed, stream, j, k)`` elementwise.
    """
    k = np.asarray(k, dtype=np.uint64)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    key = (seed & 0xFFFFFFFF, seed >> 32)
    x0, x1, _, _ = philox4x32(k & _MASK32, k >> _SHIFT32, np.full_like(k, j), np.full_like(k, stream), key)
    bits = ((x0 << _SHIFT32) | x1) >> np.uint64(11)
    return bits.astype(np.float64) * (1.0 / 9007199254740992.0)


def derive_seed(seed, label):
    """64-bit child seed for a labelled sub-task of ``seed``."""
    h = hashlib.blake2b(f"{int(seed)}:{label}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")
