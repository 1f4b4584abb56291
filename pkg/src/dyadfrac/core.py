"""Fractal supports in [0, 1] and their dyadic covers.

A support is described symbolically by one of the :class:`FractalSpec`
variants.  :func:`build_cover` materialises the index set

    I_j = {k : [k 2^-j, (k+1) 2^-j) meets the support}

as a :class:`LevelCover`, a bit-packed set over ``{0, ..., 2^j - 1}``.

Digit-restricted sets are covered symbolically: a cell belongs to I_j when
its j-bit word is a prefix of the binary expansion of some admissible digit
sequence.  Points of the set sitting exactly on a cell boundary are thus
attributed through their admissible expansion, which keeps the identity
``#I_{mn} = (#S)^n`` exact.
"""

import functools
import math
import struct
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import DEFAULT_MAX_SCALE, check_scale
from .exceptions import DomainError, IFSBudgetWarning, InvalidParameterError

EXACT = "exact"
OUTER = "outer"


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """The half-open cell ``[k 2^-j, (k+1) 2^-j)``."""

    j: int
    k: int

    def __post_init__(self):
        if self.j < 0 or not 0 <= self.k < 2**self.j:
            raise DomainError(f"invalid dyadic interval (j={self.j}, k={self.k})")

    @property
    def left(self):
        return Fraction(self.k, 2**self.j)

    @property
    def right(self):
        return Fraction(self.k + 1, 2**self.j)

    def contains(self, other):
        """True when ``other`` is a (non-strict) dyadic descendant."""
        if other.j < self.j:
            return False
        return other.k >> (other.j - self.j) == self.k

    def disjoint(self, other):
        return not (self.contains(other) or other.contains(self))


class LevelCover:
    """Bit-indexed subset of ``{0, ..., 2^j - 1}`` at one dyadic scale.

    Bits are stored packed, little bit order within each byte.  Instances
    are immutable.
    """

    def __init__(self, j, bits, exactness=EXACT):
        if exactness not in (EXACT, OUTER):
            raise ValueError(f"exactness must be 'exact' or 'outer', got {exactness!r}")
        size = 2**j
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        if bits.size != (size + 7) // 8:
            raise ValueError(f"expected {(size + 7) // 8} bytes for scale {j}, got {bits.size}")
        if size % 8:
            # clear padding bits so equality and popcount ignore them
            bits = bits.copy()
            bits[-1] &= (1 << size % 8) - 1
        bits.flags.writeable = False
        self.j = int(j)
        self.bits = bits
        self.exactness = exactness

    @classmethod
    def from_mask(cls, mask, exactness=EXACT):
        mask = np.asarray(mask, dtype=bool)
        j = int(mask.size).bit_length() - 1
        if mask.ndim != 1 or mask.size != 2**j:
            raise ValueError("mask length must be a power of two")
        return cls(j, np.packbits(mask, bitorder="little"), exactness)

    @classmethod
    def from_indices(cls, j, indices, exactness=EXACT):
        mask = np.zeros(2**j, dtype=bool)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= 2**j):
            raise DomainError(f"index out of range for scale {j}")
        mask[idx] = True
        return cls.from_mask(mask, exactness)

    @classmethod
    def full(cls, j, exactness=EXACT):
        return cls.from_mask(np.ones(2**j, dtype=bool), exactness)

    @property
    def size(self):
        return 2**self.j

    @property
    def mask(self):
        return np.unpackbits(self.bits, count=self.size, bitorder="little").astype(bool)

    @property
    def indices(self):
        return np.flatnonzero(self.mask)

    @property
    def count(self):
        return int(np.bitwise_count(self.bits).sum())

    def __len__(self):
        return self.count

    def __contains__(self, k):
        k = int(k)
        if not 0 <= k < self.size:
            return False
        return bool((self.bits[k >> 3] >> (k & 7)) & 1)

    def __eq__(self, other):
        if not isinstance(other, LevelCover):
            return NotImplemented
        return self.j == other.j and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.j, self.bits.tobytes()))

    def __repr__(self):
        return f"LevelCover(j={self.j}, count={self.count}, exactness={self.exactness!r})"

    def project(self, j):
        """Parents at the coarser scale ``j`` of every member."""
        if j > self.j:
            raise ValueError(f"cannot project scale {self.j} to finer scale {j}")
        if j == self.j:
            return self
        mask = self.mask.reshape(2**j, -1).any(axis=1)
        return LevelCover.from_mask(mask, self.exactness)

    def children_counts(self, child):
        """Number of members of ``child`` below each cell of this scale.

        Returns an array of length ``2^j`` (zero outside this cover too, so
        callers usually index it with :attr:`indices`).
        """
        if child.j <= self.j:
            raise ValueError("child cover must be at a strictly finer scale")
        return child.mask.reshape(self.size, -1).sum(axis=1)

    def union(self, other):
        _check_same_scale(self, other)
        ex = EXACT if self.exactness == other.exactness == EXACT else OUTER
        return LevelCover(self.j, self.bits | other.bits, ex)

    def intersection(self, other):
        _check_same_scale(self, other)
        ex = EXACT if self.exactness == other.exactness == EXACT else OUTER
        return LevelCover(self.j, self.bits & other.bits, ex)

    def issubset(self, other):
        _check_same_scale(self, other)
        return not np.any(self.bits & ~other.bits)

    # -- export formats ------------------------------------------------------

    def runs(self):
        """(start, length) pairs of consecutive members."""
        padded = np.concatenate(([False], self.mask, [False])).astype(np.int8)
        edges = np.flatnonzero(np.diff(padded))
        starts, stops = edges[::2], edges[1::2]
        return list(zip(starts.tolist(), (stops - starts).tolist()))

    def to_rle(self):
        lines = [f"LEVELCOVER 1 j={self.j} exactness={self.exactness} count={self.count}"]
        lines += [f"{s} {n}" for s, n in self.runs()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_rle(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("LEVELCOVER 1 "):
            raise ValueError("not a LEVELCOVER v1 document")
        header = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
        j = int(header["j"])
        mask = np.zeros(2**j, dtype=bool)
        for ln in lines[1:]:
            s, n = (int(x) for x in ln.split())
            mask[s : s + n] = True
        cover = cls.from_mask(mask, header["exactness"])
        if cover.count != int(header["count"]):
            raise ValueError("run-length body disagrees with header count")
        return cover

    def to_bytes(self):
        """8-byte header (uint32 scale, uint32 count, little endian) + bits."""
        return struct.pack("<II", self.j, self.count) + self.bits.tobytes()

    @classmethod
    def from_bytes(cls, data, exactness=EXACT):
        j, count = struct.unpack("<II", data[:8])
        bits = np.frombuffer(data[8:], dtype=np.uint8)
        cover = cls(j, bits, exactness)
        if cover.count != count:
            raise ValueError("bit body disagrees with header count")
        return cover


def _check_same_scale(a, b):
    if a.j != b.j:
        raise ValueError(f"scale mismatch: {a.j} vs {b.j}")


# -- fractal specifications -------------------------------------------------


class FractalSpec:
    """Base class of the symbolic support descriptions."""

    #: dimension known in closed form, or None
    theoretical_dimension = None


@dataclass(frozen=True)
class FullInterval(FractalSpec):
    @property
    def theoretical_dimension(self):
        return 1.0


@dataclass(frozen=True)
class DigitRestricted(FractalSpec):
    """Points whose base-``2^m`` digits all lie in ``digits``.

    ``DigitRestricted(m, {0, 2^m - 1})`` is the symmetric Cantor set with
    ratio ``2^-m``.
    """

    m: int
    digits: tuple

    def __post_init__(self):
        if self.m < 1:
            raise InvalidParameterError(f"block size m must be >= 1, got {self.m}")
        digits = tuple(sorted(set(int(d) for d in self.digits)))
        if not digits:
            raise InvalidParameterError("digit set must be nonempty")
        if digits[0] < 0 or digits[-1] >= 2**self.m:
            raise InvalidParameterError(f"digits must lie in [0, {2**self.m - 1}]")
        object.__setattr__(self, "digits", digits)

    @property
    def theoretical_dimension(self):
        return math.log2(len(self.digits)) / self.m

    def digit_mask(self, bits=None):
        """Indicator over the ``bits``-bit prefixes of admissible digits."""
        bits = self.m if bits is None else bits
        out = np.zeros(2**bits, dtype=bool)
        out[[d >> (self.m - bits) for d in self.digits]] = True
        return out


@dataclass(frozen=True)
class FiniteUnion(FractalSpec):
    """Copies of component specs placed on pairwise disjoint dyadic carriers.

    Each component is rescaled affinely onto its carrier interval.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple((c if isinstance(c, DyadicInterval) else DyadicInterval(*c), s) for c, s in self.components)
        if not comps:
            raise InvalidParameterError("a union needs at least one component")
        for i, (a, _) in enumerate(comps):
            for b, _ in comps[i + 1 :]:
                if not a.disjoint(b):
                    raise InvalidParameterError(f"carriers {a} and {b} overlap")
        object.__setattr__(self, "components", comps)

    @property
    def theoretical_dimension(self):
        dims = [s.theoretical_dimension for _, s in self.components]
        return None if any(d is None for d in dims) else max(dims)


@dataclass(frozen=True)
class AffineIFS(FractalSpec):
    """Attractor of maps ``x -> r x + t`` with rational ``r``, ``t``.

    Every map must send [0, 1] into itself.  Covers are outer
    approximations.
    """

    maps: tuple
    max_iter: int = 64

    def __post_init__(self):
        maps = tuple((Fraction(r), Fraction(t)) for r, t in self.maps)
        if not maps:
            raise InvalidParameterError("an IFS needs at least one map")
        for r, t in maps:
            if not abs(r) < 1:
                raise InvalidParameterError(f"map ratio {r} is not contracting")
            if not (0 <= t <= 1 and 0 <= r + t <= 1):
                raise InvalidParameterError(f"map x -> {r}x + {t} does not send [0,1] into itself")
        object.__setattr__(self, "maps", maps)

    @property
    def theoretical_dimension(self):
        """Similarity dimension, an upper bound for the attractor."""
        ratios = [abs(float(r)) for r, _ in self.maps if r != 0]
        if not ratios:
            return 0.0
        lo, hi = 0.0, 1.0
        if sum(ratios) <= 1:
            # the attractor dimension is capped by 1 in the line anyway
            for _ in range(200):
                mid = (lo + hi) / 2
                if sum(r**mid for r in ratios) > 1:
                    lo = mid
                else:
                    hi = mid
            return hi
        return 1.0


@dataclass(frozen=True, eq=False)
class ExplicitCover(FractalSpec):
    """Covers supplied level by level.

    Coarser scales missing from ``levels`` are obtained by projecting the
    nearest finer supplied level.
    """

    levels: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = {}
        for j, cov in self.levels.items():
            if not isinstance(cov, LevelCover):
                cov = LevelCover.from_indices(int(j), cov)
            if cov.j != int(j):
                raise InvalidParameterError(f"level keyed {j} holds a cover of scale {cov.j}")
            levels[int(j)] = cov
        object.__setattr__(self, "levels", levels)


# -- cover construction -----------------------------------------------------


def build_cover(spec, j, max_scale=DEFAULT_MAX_SCALE):
    """Dyadic cover ``I_j`` of ``spec``.

    Exact for every variant except :class:`AffineIFS`, whose cover is a
    certified outer approximation.
    """
    j = check_scale(j, max_scale)
    return _cover(spec, j)


@functools.lru_cache(maxsize=512)
def _cover(spec, j):
    if isinstance(spec, FullInterval):
        return LevelCover.full(j)
    if isinstance(spec, DigitRestricted):
        return LevelCover.from_mask(_digit_mask(spec, j))
    if isinstance(spec, FiniteUnion):
        return _union_cover(spec, j)
    if isinstance(spec, AffineIFS):
        return _ifs_cover(spec, j)
    if isinstance(spec, ExplicitCover):
        return _explicit_cover(spec, j)
    raise TypeError(f"unsupported spec type {type(spec).__name__}")


def _digit_mask(spec, j):
    n, r = divmod(j, spec.m)
    full = spec.digit_mask()
    mask = np.ones(1, dtype=bool)
    for _ in range(n):
        mask = np.logical_and.outer(mask, full).ravel()
    if r:
        mask = np.logical_and.outer(mask, spec.digit_mask(r)).ravel()
    return mask


def _union_cover(spec, j):
    mask = np.zeros(2**j, dtype=bool)
    exact = True
    for carrier, comp in spec.components:
        if j <= carrier.j:
            mask[carrier.k >> (carrier.j - j)] = True
            continue
        sub = _cover(comp, j - carrier.j)
        exact &= sub.exactness == EXACT
        off = carrier.k << (j - carrier.j)
        mask[off : off + sub.size] |= sub.mask
    return LevelCover.from_mask(mask, EXACT if exact else OUTER)


# margin in cell units; float error at j <= 26 is below 1e-7 cells
_IFS_MARGIN = 1e-6


def _ifs_image(spec, j, mask):
    size = 2**j
    idx = np.flatnonzero(mask).astype(np.float64)
    diff = np.zeros(size + 1, dtype=np.int64)
    for r, t in spec.maps:
        rf, tf = float(r), float(t)
        a = rf * idx / size + tf
        b = rf * (idx + 1) / size + tf
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        first = np.clip(np.floor(lo * size - _IFS_MARGIN), 0, size - 1).astype(np.int64)
        last = np.clip(np.floor(hi * size + _IFS_MARGIN), 0, size - 1).astype(np.int64)
        np.add.at(diff, first, 1)
        np.add.at(diff, last + 1, -1)
    return np.cumsum(diff[:-1]) > 0


def _ifs_cover(spec, j):
    if j == 0:
        return LevelCover.full(0, OUTER)
    parent = _cover(spec, j - 1)
    current = np.repeat(parent.mask, 2)
    for _ in range(spec.max_iter):
        nxt = _ifs_image(spec, j, current) & current
        if np.array_equal(nxt, current):
            break
        current = nxt
    else:
        warnings.warn(
            f"IFS cover at scale {j} did not stabilise within {spec.max_iter} iterations",
            IFSBudgetWarning,
            stacklevel=3,
        )
    return LevelCover.from_mask(current, OUTER)


def _explicit_cover(spec, j):
    if j in spec.levels:
        return spec.levels[j]
    finer = [s for s in spec.levels if s > j]
    if not finer:
        raise DomainError(f"explicit cover has no level at or below scale {j}")
    return spec.levels[min(finer)].project(j)


def children_count(cover_parent, cover_child, k):
    """Members of ``cover_child`` lying inside parent cell ``k``."""
    if cover_child.j <= cover_parent.j:
        raise ValueError("child cover must be at a strictly finer scale")
    if k not in cover_parent:
        raise DomainError(f"k={k} is not in the parent cover at scale {cover_parent.j}")
    d = cover_child.j - cover_parent.j
    return int(cover_child.mask[k << d : (k + 1) << d].sum())


# -- serialisation ----------------------------------------------------------


def spec_to_dict(spec):
    if isinstance(spec, FullInterval):
        return {"type": "full"}
    if isinstance(spec, DigitRestricted):
        return {"type": "digits", "m": spec.m, "digits": list(spec.digits)}
    if isinstance(spec, FiniteUnion):
        return {
            "type": "union",
            "components": [{"carrier": [c.j, c.k], "spec": spec_to_dict(s)} for c, s in spec.components],
        }
    if isinstance(spec, AffineIFS):
        return {
            "type": "ifs",
            "maps": [[str(r), str(t)] for r, t in spec.maps],
            "max_iter": spec.max_iter,
        }
    if isinstance(spec, ExplicitCover):
        return {"type": "explicit", "levels": {str(j): c.to_rle() for j, c in sorted(spec.levels.items())}}
    raise TypeError(f"unsupported spec type {type(spec).__name__}")


_SPEC_KEYS = {
    "full": {"type"},
    "digits": {"type", "m", "digits"},
    "union": {"type", "components"},
    "ifs": {"type", "maps", "max_iter"},
    "explicit": {"type", "levels"},
}


def spec_from_dict(d):
    """Inverse of :func:`spec_to_dict`; unknown keys are rejected."""
    if not isinstance(d, dict) or "type" not in d:
        raise InvalidParameterError("spec must be a mapping with a 'type' key")
    kind = d["type"]
    if kind not in _SPEC_KEYS:
        raise InvalidParameterError(f"unknown spec type {kind!r}; expected one of {sorted(_SPEC_KEYS)}")
    extra = set(d) - _SPEC_KEYS[kind]
    if extra:
        raise InvalidParameterError(f"unknown key(s) for spec type {kind!r}: {sorted(extra)}")
    if kind == "full":
        return FullInterval()
    if kind == "digits":
        return DigitRestricted(int(d["m"]), tuple(d["digits"]))
    if kind == "union":
        comps = []
        for c in d["components"]:
            extra = set(c) - {"carrier", "spec"}
            if extra:
                raise InvalidParameterError(f"unknown key(s) in union component: {sorted(extra)}")
            comps.append((DyadicInterval(*c["carrier"]), spec_from_dict(c["spec"])))
        return FiniteUnion(tuple(comps))
    if kind == "ifs":
        maps = tuple((Fraction(str(r)), Fraction(str(t))) for r, t in d["maps"])
        return AffineIFS(maps, int(d.get("max_iter", 64)))
    levels = {int(j): LevelCover.from_rle(text) for j, text in d["levels"].items()}
    return ExplicitCover(levels)
