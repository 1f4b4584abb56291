"""Lacunary wavelet series supported on a fractal.

At every scale ``j`` each covered position ``k`` is switched on
independently with probability ``p_j = 2^{(eta - H) j}``; active positions
carry the coefficient ``2^{-alpha j}`` (no L2 normalisation).  Draws come
from the counter-based generator in :mod:`dyadfrac.rng`, so the active set
at ``(j, k)`` is a pure function of the seed.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import rng
from ._validation import DEFAULT_MAX_SCALE, check_real, check_scale, check_seed
from .core import build_cover, spec_from_dict, spec_to_dict
from .dimension import log2_regression
from .exceptions import InvalidParameterError, UndefinedDimensionError

SELECTION_STREAM = 0


@dataclass(frozen=True)
class LwsParams:
    alpha: float
    eta: float
    H: float
    j_max: int
    seed: int = 0

    def __post_init__(self):
        check_real(self.alpha, "alpha", low=0, low_inclusive=False)
        check_real(self.H, "H", low=0, high=1, low_inclusive=False)
        check_real(self.eta, "eta", low=0, low_inclusive=False)
        if not self.eta < self.H:
            raise InvalidParameterError(f"need eta < H, got eta={self.eta}, H={self.H}")
        check_scale(self.j_max, DEFAULT_MAX_SCALE, "j_max")
        check_seed(self.seed)

    def p(self, j):
        """Bernoulli parameter at scale ``j``."""
        e = (self.eta - self.H) * j
        return 0.0 if e < -1000 else 2.0**e

    def magnitude(self, j):
        return 2.0 ** (-self.alpha * j)


class LwsCoefficients:
    """Active positions ``A_j`` per scale, stored as sorted int64 arrays."""

    def __init__(self, params, active, spec=None):
        self.params = params
        self.spec = spec
        self.active = {int(j): np.asarray(a, dtype=np.int64) for j, a in active.items()}
        for j in range(params.j_max + 1):
            self.active.setdefault(j, np.empty(0, dtype=np.int64))

    @classmethod
    def full(cls, spec, params, max_scale=DEFAULT_MAX_SCALE):
        """Every covered position active (deterministic dense coefficients)."""
        return cls(params, {j: build_cover(spec, j, max_scale).indices for j in range(params.j_max + 1)}, spec)

    @property
    def scales(self):
        return range(self.params.j_max + 1)

    def count(self, j):
        return int(self.active[j].size)

    def counts(self):
        return np.array([self.count(j) for j in self.scales], dtype=np.int64)

    def dense(self, j):
        """Coefficient magnitudes at scale ``j`` as a length ``2^j`` array."""
        out = np.zeros(2**j)
        out[self.active[j]] = self.params.magnitude(j)
        return out

    def __eq__(self, other):
        if not isinstance(other, LwsCoefficients) or self.params != other.params:
            return NotImplemented if not isinstance(other, LwsCoefficients) else False
        return all(np.array_equal(self.active[j], other.active[j]) for j in self.scales)

    def union(self, other):
        if self.params != other.params:
            raise ValueError("cannot merge coefficients with different parameters")
        return LwsCoefficients(
            self.params, {j: np.union1d(self.active[j], other.active[j]) for j in self.scales}, self.spec
        )

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# lws {json.dumps(asdict(self.params), sort_keys=True)}\n")
        if self.spec is not None:
            try:
                buf.write(f"# spec {json.dumps(spec_to_dict(self.spec), sort_keys=True)}\n")
            except (TypeError, ValueError):
                pass
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "k"])
        for j in self.scales:
            w.writerows((j, int(k)) for k in self.active[j])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        params, spec, body = None, None, []
        for line in text.splitlines():
            if line.startswith("# lws "):
                params = LwsParams(**json.loads(line[6:]))
            elif line.startswith("# spec "):
                spec = spec_from_dict(json.loads(line[7:]))
            elif line and not line.startswith("#"):
                body.append(line)
        if params is None:
            raise ValueError("missing '# lws' header line")
        rows = list(csv.reader(body))
        if not rows or rows[0] != ["j", "k"]:
            raise ValueError("expected a 'j,k' column header")
        data = np.array(rows[1:], dtype=np.int64).reshape(-1, 2)
        active = {j: np.sort(data[data[:, 0] == j, 1]) for j in range(params.j_max + 1)}
        return cls(params, active, spec)


def _select(spec, params, j, max_scale):
    idx = build_cover(spec, j, max_scale).indices
    p = params.p(j)
    if p >= 1.0:
        return idx
    if p == 0.0 or idx.size == 0:
        return idx[:0]
    u = rng.uniform(params.seed, j, idx.astype(np.uint64), SELECTION_STREAM)
    return idx[u < p]


def synthesize(spec, params, max_scale=DEFAULT_MAX_SCALE, threads=1):
    """Draw the active sets ``A_0 .. A_{j_max}`` for ``spec``.

    The result does not depend on ``threads``.
    """
    check_scale(params.j_max, max_scale, "j_max")
    scales = range(params.j_max + 1)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            sel = list(ex.map(lambda j: _select(spec, params, j, max_scale), scales))
    else:
        sel = [_select(spec, params, j, max_scale) for j in scales]
    return LwsCoefficients(params, dict(zip(scales, sel)), spec)


@dataclass(frozen=True)
class RhoEstimate:
    slope: float
    window: tuple
    counts: tuple
    residual: float


def rho_hat(coeffs, min_scales=4):
    """Slope of ``log2 #A_j`` against ``j``.

    The regression uses the longest run of consecutive scales with nonempty
    ``A_j`` (the deepest run on ties).
    """
    counts = coeffs.counts()
    best, start = None, None
    for j, c in enumerate(list(counts) + [0]):
        if c > 0 and start is None:
            start = j
        elif c == 0 and start is not None:
            if best is None or j - start >= best[1] - best[0] + 1:
                best = (start, j - 1)
            start = None
    if best is None:
        raise UndefinedDimensionError("all coefficients are zero")
    lo, hi = best
    if hi - lo + 1 < min_scales:
        raise UndefinedDimensionError(f"need {min_scales} consecutive nonempty scales, longest run is {lo}..{hi}")
    js = np.arange(lo, hi + 1)
    slope, _, resid = log2_regression(js, np.log2(counts[lo : hi + 1]))
    return RhoEstimate(slope, (lo, hi), tuple(int(c) for c in counts), resid)


def render_haar(coeffs, grid_depth, max_scale=24):
    """Partial Haar sum sampled at the left endpoints ``n 2^{-grid_depth}``."""
    g = check_scale(grid_depth, max_scale, "grid_depth")
    if g < coeffs.params.j_max:
        raise InvalidParameterError(f"grid_depth {g} is below j_max {coeffs.params.j_max}")
    out = np.zeros(2**g)
    for j in coeffs.scales:
        act = coeffs.active[j]
        if act.size == 0:
            continue
        c = coeffs.params.magnitude(j)
        if g == j:
            out[act] += c
            continue
        halves = np.zeros(2 ** (j + 1))
        halves[2 * act] = c
        halves[2 * act + 1] = -c
        out += np.repeat(halves, 2 ** (g - j - 1))
    return out


def expected_count(spec, params, j, max_scale=DEFAULT_MAX_SCALE):
    """Mean and standard deviation of ``#A_j``."""
    n = build_cover(spec, j, max_scale).count
    p = params.p(j)
    return n * p, math.sqrt(n * p * (1 - p))
