"""Seeded, stateless randomness shared by every sketch in the package.

All random choices are pure functions of a 64-bit master seed. A keyed
counter-mode mixer (``prf_word``) supplies raw words; hash and sign families
are degree ``k - 1`` polynomials over the prime field GF(PRIME) whose
coefficients are drawn from that mixer, so they are k-wise independent over
any ``k`` distinct inputs.

Polynomials are evaluated in float64. With ``PRIME < 2**25`` every product of
a coefficient and a power is below ``2**50`` and a sum of up to eight such
terms stays below ``2**53``, so BLAS matrix products are exact.
"""

from __future__ import annotations

import enum
import sys

import numpy as np

PRIME = 2**25 - 39
MAX_INDEPENDENCE = 8
MAX_SIGN_WIDTH = 24

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG_64 = 2.0**-64
# row b holds the signs (+1 for a 0 bit) of the 8 bits of byte b, low bit first
_SIGN_LUT = (1 - 2 * ((np.arange(256)[:, None] >> np.arange(8)) & 1)).astype(np.float64)


class Tag(enum.IntEnum):
    """Domain-separation tags for derived randomness."""

    DERIVE = 1
    COEFFICIENT = 2
    UNIFORM = 3
    CS_BUCKET = 4
    CS_SIGN = 5
    CS_BUCKET_SIDE2 = 6
    CS_SIGN_SIDE2 = 7
    AMS_W = 8
    AMS_Y = 9
    TRIAL = 10


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; callers silence overflow warnings
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _u64(x) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype != np.uint64:
        if np.issubdtype(a.dtype, np.signedinteger) and np.any(a < 0):
            raise ValueError("seeds and indices must be non-negative")
        a = a.astype(np.uint64)
    return a


def prf_word(seed, tag: int, index) -> np.ndarray:
    """Pseudorandom 64-bit word for ``(seed, tag, index)``; broadcasts over arrays."""
    s = _u64(seed)
    i = _u64(index)
    with np.errstate(over="ignore"):
        key = _mix(s ^ _mix(np.uint64(tag) * _GOLDEN + np.uint64(0x632BE59BD9B4E019)))
        return _mix(_mix(key + (i + np.uint64(1)) * _GOLDEN) ^ key)


def derive_seed(seed, *path) -> np.ndarray:
    """Child seed obtained by walking ``path`` (each component broadcastable)."""
    s = _u64(seed)
    for part in path:
        s = prf_word(s, Tag.DERIVE, part)
    return s


def _check_indices(i) -> np.ndarray:
    a = np.asarray(i, dtype=np.int64)
    if a.size and (a.min() < 1 or a.max() >= PRIME):
        raise ValueError(f"hash inputs must lie in [1, {PRIME - 1}]")
    return a


def _powers(i: np.ndarray, k: int) -> np.ndarray:
    """Stack ``i**t mod PRIME`` for t < k along a new last axis (float64)."""
    out = np.empty(i.shape + (k,), dtype=np.float64)
    cur = np.ones_like(i)
    for t in range(k):
        out[..., t] = cur
        cur = (cur * i) % PRIME
    return out


class _PolynomialFamily:
    """A batch of k-wise independent polynomial hashes ``[1, PRIME) -> [0, PRIME)``.

    ``seed`` may be an array; each element keys an independent polynomial and
    evaluation results carry ``seed``'s shape as leading axes.
    """

    def __init__(self, seed, independence: int = 4):
        if not 1 <= independence <= MAX_INDEPENDENCE:
            raise ValueError(f"independence must be in [1, {MAX_INDEPENDENCE}]")
        self.seed = _u64(seed)
        self.independence = independence
        words = prf_word(self.seed[..., None], Tag.COEFFICIENT, np.arange(independence))
        self._coef = (words % np.uint64(PRIME)).astype(np.float64)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.seed.shape

    def _reduce(self, v: np.ndarray) -> np.ndarray:
        return v.astype(np.int64) % PRIME

    def values(self, i) -> np.ndarray:
        """Evaluate every polynomial at every index: shape ``self.shape + i.shape``."""
        i = _check_indices(i)
        pw = _powers(i.reshape(-1), self.independence)
        v = self._coef.reshape(-1, self.independence) @ pw.T
        return self._reduce(v).reshape(self.shape + i.shape)

    def values_paired(self, i) -> np.ndarray:
        """Evaluate polynomial ``f`` at its own indices ``i[f, ...]``.

        ``i`` must have shape ``self.shape + (h,)``; the result has the same shape.
        """
        i = _check_indices(i)
        pw = _powers(i, self.independence)
        v = np.einsum("...t,...ht->...h", self._coef, pw)
        return self._reduce(v)


class HashFamily(_PolynomialFamily):
    """k-wise independent bucket hash onto ``buckets`` cells."""

    def __init__(self, seed, independence: int = 4, buckets: int = 1):
        if buckets < 1:
            raise ValueError("buckets must be positive")
        super().__init__(seed, independence)
        self.buckets = buckets

    def index(self, i) -> np.ndarray:
        """0-based bucket of every index under every polynomial."""
        return self.values(i) % self.buckets

    def index_paired(self, i) -> np.ndarray:
        return self.values_paired(i) % self.buckets


class SignFamily(_PolynomialFamily):
    """k-wise independent random signs.

    With ``width > 1`` each evaluation yields ``width`` sign functions at once,
    read from distinct bits of one field element. For ``k`` distinct inputs
    the field elements are independent and uniform, so the bits are too: the
    ``width`` functions are jointly k-wise independent.
    """

    def __init__(self, seed, independence: int = 4, width: int = 1):
        if not 1 <= width <= MAX_SIGN_WIDTH:
            raise ValueError(f"width must be in [1, {MAX_SIGN_WIDTH}]")
        super().__init__(seed, independence)
        self.width = width

    def _bits_to_signs(self, v: np.ndarray) -> np.ndarray:
        if self.width == 1:
            return _SIGN_LUT[v & 1, 0]
        if sys.byteorder != "little":
            bits = (v[..., None] >> np.arange(self.width)) & 1
            return (1 - 2 * bits).astype(np.float64)
        nbytes = -(-self.width // 8)
        low = np.ascontiguousarray(v).view(np.uint8).reshape(v.shape + (8,))[..., :nbytes]
        return _SIGN_LUT[low].reshape(v.shape + (nbytes * 8,))[..., : self.width]

    def signs(self, i) -> np.ndarray:
        """Shape ``self.shape + i.shape`` (plus a trailing ``width`` axis if width > 1)."""
        return self._bits_to_signs(self.values(i))

    def signs_paired(self, i) -> np.ndarray:
        return self._bits_to_signs(self.values_paired(i))


def hash_bucket(family: HashFamily, i):
    """1-based bucket of index ``i`` (scalar or array)."""
    out = family.index(i) + 1
    return out.item() if out.ndim == 0 else out


def sign(family: SignFamily, i):
    """Sign in {-1, +1} of index ``i`` (scalar or array); first bit when width > 1."""
    s = family.signs(i)
    if family.width > 1:
        s = s[..., 0]
    s = s.astype(np.int64)
    return s.item() if s.ndim == 0 else s


def uniform_key(seed, rep) -> np.ndarray:
    """Key of the uniform scalars of repetition ``rep`` under ``seed``."""
    return derive_seed(seed, Tag.UNIFORM, rep)


def uniform_from_key(key, i) -> np.ndarray:
    """Uniform scalars for every key (lane) and index: shape ``key.shape + i.shape``."""
    key = _u64(key)
    idx = np.asarray(i)
    words = prf_word(key.reshape(key.shape + (1,) * idx.ndim), Tag.UNIFORM, idx)
    return (words.astype(np.float64) + 1.0) * _TWO_NEG_64


def uniform_scale(seed, rep, i) -> np.ndarray:
    """Uniform scalar on the grid ``{1, 2, ..., 2**64} / 2**64``; never zero.

    ``seed`` and ``rep`` broadcast against each other (one value per lane);
    the result has shape ``broadcast(seed, rep).shape + i.shape``.
    """
    return uniform_from_key(uniform_key(seed, rep), i)


def uniform_scale_paired(seed, rep, i) -> np.ndarray:
    """Like ``uniform_scale`` but lane ``f`` is evaluated at its own ``i[f, ...]``."""
    key = uniform_key(seed, rep)
    words = prf_word(key[..., None], Tag.UNIFORM, np.asarray(i))
    return (words.astype(np.float64) + 1.0) * _TWO_NEG_64
