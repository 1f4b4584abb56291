"""Wavelet leaders, pointwise regularity and spectrum estimators.

Leaders are computed from coefficient magnitudes truncated at ``j_max``:

    D_{j,k} = max(|c_{j,k}|, D_{j+1,2k}, D_{j+1,2k+1})     (sup inside the cell)
    d_{j,k} = max(D_{j,k-1}, D_{j,k}, D_{j,k+1})           (sup inside 3 cells)

Neighbour windows are clipped at the ends of [0, 1).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import DEFAULT_MAX_SCALE, check_real
from .core import LevelCover, build_cover
from .dimension import log2_regression
from .exceptions import DomainError, IncompatibleLadderError
from .quasicantor import extract_K

NEG_INF = -math.inf


@dataclass
class LeaderField:
    j_max: int
    leaders: list  # leaders[j] has length 2^j
    local_sup: list
    alpha: object = None  # coefficient decay, when known
    support: object = None  # per-scale boolean masks of the support cover

    def d(self, j, k=None):
        return self.leaders[j] if k is None else float(self.leaders[j][k])

    def along(self, j):
        """``d_j(x)`` for every cell ``x`` at resolution ``j_max``."""
        return np.repeat(self.leaders[j], 2 ** (self.j_max - j))


def _magnitudes(coeffs, j_max):
    """Dense |c_j| arrays, decay and support from LwsCoefficients or arrays."""
    if hasattr(coeffs, "dense"):
        top = coeffs.params.j_max if j_max is None else j_max
        if top > coeffs.params.j_max:
            raise DomainError(f"coefficients only synthesized to {coeffs.params.j_max}")
        support = None
        if coeffs.spec is not None:
            support = [build_cover(coeffs.spec, j, max(top, DEFAULT_MAX_SCALE)).mask for j in range(top + 1)]
        return [coeffs.dense(j) for j in range(top + 1)], coeffs.params.alpha, support
    arrs = [np.abs(np.asarray(a, dtype=np.float64)) for a in coeffs]
    top = len(arrs) - 1 if j_max is None else j_max
    for j, a in enumerate(arrs[: top + 1]):
        if a.shape != (2**j,):
            raise ValueError(f"scale {j} needs {2**j} coefficients, got shape {a.shape}")
    return arrs[: top + 1], None, None


def compute_leaders(coeffs, j_max=None):
    """Leader field of ``coeffs`` (LwsCoefficients or per-scale arrays)."""
    mags, alpha, support = _magnitudes(coeffs, j_max)
    top = len(mags) - 1
    D = [None] * (top + 1)
    D[top] = mags[top].copy()
    for j in range(top - 1, -1, -1):
        D[j] = np.maximum(mags[j], D[j + 1].reshape(-1, 2).max(axis=1))
    lead = []
    for Dj in D:
        d = Dj.copy()
        d[1:] = np.maximum(d[1:], Dj[:-1])
        d[:-1] = np.maximum(d[:-1], Dj[1:])
        lead.append(d)
    return LeaderField(top, lead, D, alpha, support)


@dataclass
class HolderField:
    h: np.ndarray
    j_min: int
    j_max: int
    h_cap: float
    all_zero: np.ndarray

    def to_cover(self, level):
        """Finest cells with ``h <= level``."""
        return LevelCover.from_mask(self.h <= level)


def estimate_holder(leaders, j_min=3, h_cap=10.0):
    """``min_{j_min <= j <= j_max} -log2 d_j(x) / j`` on the finest cells.

    Vanishing leaders contribute ``h_cap``; results are clipped to
    ``[0, h_cap]``.
    """
    if j_min < 2:
        raise DomainError(f"j_min must be >= 2, got {j_min}")
    if j_min > leaders.j_max:
        raise DomainError(f"j_min={j_min} exceeds j_max={leaders.j_max}")
    h = nonzero = None
    for j in range(j_min, leaders.j_max + 1):
        d = leaders.leaders[j]
        pos = d > 0
        with np.errstate(divide="ignore"):
            e = np.where(pos, -np.log2(np.where(pos, d, 1.0)) / j, h_cap)
        if h is None:
            h, nonzero = e, pos
        else:
            h = np.minimum(np.repeat(h, 2), e)
            nonzero = np.repeat(nonzero, 2) | pos
    h = np.clip(h, 0.0, h_cap)
    h[~nonzero] = h_cap
    return HolderField(h, j_min, leaders.j_max, float(h_cap), ~nonzero)


@dataclass
class SpectrumEstimate:
    h_grid: np.ndarray
    D_leq: np.ndarray
    method: str
    raw_slopes: np.ndarray
    windows: list
    residuals: np.ndarray
    counts: list = field(default_factory=list)

    def to_rows(self):
        return [
            {
                "h": float(h),
                "D_leq": float(d),
                "window_lo": w[0],
                "window_hi": w[1],
                "residual": float(r),
            }
            for h, d, w, r in zip(self.h_grid, self.D_leq, self.windows, self.residuals)
        ]


def _spectrum_level(leaders, h, gamma, j_min, alpha, window):
    hi = leaders.j_max
    if alpha is not None:
        hi = min(hi, int(math.floor(alpha * leaders.j_max / (h + gamma) + 1e-9)))
    lo = max(j_min, math.ceil((j_min + hi) / 2))
    source = leaders.local_sup if window == "cell" else leaders.leaders
    pts, raw_pts = [], []
    for j in range(lo, hi + 1):
        hit = source[j] >= 2.0 ** (-(h + gamma) * j)
        if leaders.support is not None:
            B = int(np.count_nonzero(leaders.support[j]))
            N = int(np.count_nonzero(hit & leaders.support[j]))
        else:
            B, N = 2**j, int(np.count_nonzero(hit))
        if N == 0:
            continue
        raw_pts.append((j, N))
        if N < B:
            pts.append((j, -B * math.log1p(-N / B)))
    use = pts if len(pts) >= 3 else raw_pts
    if len(use) < 2:
        return NEG_INF, (lo, hi), math.nan, raw_pts
    js, ms = zip(*use)
    slope, _, r = log2_regression(js, np.log2(ms))
    return slope, (js[0], js[-1]), r, raw_pts


def increasing_spectrum(leaders, h_grid, gamma=0.05, j_min=3, alpha=None, window="cell", h_cap=10.0):
    """Coarse-grained estimate of ``h -> dim{x : h(x) <= h}``.

    At scale ``j`` the cells whose sup reaches ``2^{-(h + gamma) j}`` are
    counted (``window="cell"`` uses the sup inside the cell, ``"3lambda"``
    the leader itself), restricted to the support cover when the leader
    field knows it.  Counts are unsaturated with the occupancy correction
    ``-B ln(1 - N / B)``, where ``B`` is the number of candidate cells,
    and regressed on ``j``.

    Scales: coefficients below ``j_max`` are missing, so when the decay
    ``alpha`` is known the window stops at ``floor(alpha j_max / (h + gamma))``;
    the regression uses the upper half of ``[j_min, that bound]``, where the
    geometric sums behind the counts are closest to their asymptotic form.
    Fully saturated scales are dropped; if fewer than three remain the raw
    counts are regressed instead, and a level with fewer than two nonzero
    counts gets ``-inf``.

    ``D_leq`` is the running maximum of the raw slopes over the sorted grid
    (the level sets are nested), clipped to at most 1.
    """
    if window not in ("cell", "3lambda"):
        raise ValueError(f"unknown window {window!r}")
    h_grid = np.sort(np.asarray(h_grid, dtype=np.float64))
    if h_grid.size == 0 or h_grid[0] <= 0 or h_grid[-1] >= h_cap:
        raise DomainError(f"h_grid must lie in (0, {h_cap})")
    check_real(gamma, "gamma", low=0)
    alpha = leaders.alpha if alpha is None else alpha
    levels = [_spectrum_level(leaders, h, gamma, j_min, alpha, window) for h in h_grid]
    raw = np.array([lv[0] for lv in levels])
    D = np.minimum(np.maximum.accumulate(raw), 1.0)
    return SpectrumEstimate(
        h_grid,
        D,
        "coarse-leader",
        raw,
        [lv[1] for lv in levels],
        np.array([lv[2] for lv in levels]),
        [lv[3] for lv in levels],
    )


def holder_level_spectrum(field, h_grid, j_min=3):
    """Box-count estimate on the level sets ``{h_hat <= h}`` of a HolderField."""
    h_grid = np.sort(np.asarray(h_grid, dtype=np.float64))
    raw, windows, resid, counts = [], [], [], []
    for h in h_grid:
        cov = field.to_cover(h)
        pts = [(j, cov.project(j).count) for j in range(j_min, field.j_max + 1)]
        pts = [(j, n) for j, n in pts if n > 0]
        counts.append(pts)
        if len(pts) < 3:
            raw.append(NEG_INF)
            windows.append((j_min, field.j_max))
            resid.append(math.nan)
            continue
        js, ns = zip(*pts)
        slope, _, r = log2_regression(js, np.log2(ns))
        raw.append(slope)
        windows.append((js[0], js[-1]))
        resid.append(r)
    raw = np.array(raw)
    D = np.minimum(np.maximum.accumulate(raw), 1.0)
    return SpectrumEstimate(h_grid, D, "level-set box-count", raw, windows, np.array(resid), counts)


@dataclass
class LimsupCoverEstimate:
    delta: float
    J1: int
    j_resolution: int
    marked: LevelCover
    profile: list
    dim_hat: float
    residual: float


def _mark_balls(mark, R, centers_num, j, radius):
    """Flag cells of ``2^-R`` meeting the open balls ``(k 2^-j - r, k 2^-j + r)``."""
    if centers_num.size == 0:
        return
    n = 2**R
    x = centers_num.astype(np.float64) * 2.0 ** (R - j)
    r = radius * n
    lo = np.clip(np.floor(x - r), 0, n - 1).astype(np.int64)
    # an open ball whose right end sits on a grid point does not reach that cell
    hi_edge = x + r
    hi = np.ceil(hi_edge).astype(np.int64) - 1
    hi = np.clip(hi, 0, n - 1)
    diff = np.zeros(n + 1, dtype=np.int64)
    np.add.at(diff, lo, 1)
    np.add.at(diff, hi + 1, -1)
    mark |= np.cumsum(diff[:-1]) > 0


def limsup_cover(coeffs, delta, J1, j_resolution=None):
    """Finite-depth picture of the limsup of contracted balls around actives.

    ``marked`` flags the resolution-``j_resolution`` cells met by some ball
    ``B(k 2^-j, 2^{-delta j})`` with ``J1 <= j <= j_max`` and ``k`` active.

    ``dim_hat`` comes from the per-layer profile: layer ``j`` is counted at
    its own ball resolution ``R_j = floor(delta j)``; dividing the number of
    hit cells by the cells one ball meets (``2 * 2^{R_j - delta j} + 1``)
    estimates the number of separated balls, whose log2 is regressed on
    ``delta j``.  Hit counts get the occupancy correction
    ``-2^R ln(1 - hits / 2^R)`` so overlapping balls are not undercounted.
    This is the covering-number exponent of the layers, which governs the
    dimension of the limsup set.
    """
    delta = check_real(delta, "delta", low=0, high=1, low_inclusive=False)
    j_max = coeffs.params.j_max
    if not 0 <= J1 < j_max:
        raise DomainError(f"need 0 <= J1 < j_max, got J1={J1}")
    res = j_max if j_resolution is None else j_resolution
    marked = np.zeros(2**res, dtype=bool)
    profile = []
    for j in range(J1, j_max + 1):
        act = coeffs.active[j]
        r = 2.0 ** (-delta * j)
        _mark_balls(marked, res, act, j, r)
        R = min(j, int(math.floor(delta * j + 1e-9)))
        layer = np.zeros(2**R, dtype=bool)
        _mark_balls(layer, R, act, j, r)
        hits = int(layer.sum())
        per_ball = 2.0 * 2.0 ** (R - delta * j) + 1.0
        # occupancy correction for overlapping balls
        cells = -(2**R) * math.log1p(-hits / 2**R) if hits < 2**R else math.nan
        profile.append({"j": j, "R": R, "active": int(act.size), "hits": hits, "balls": cells / per_ball})
    pts = [(delta * p["j"], math.log2(p["balls"])) for p in profile if p["hits"] and p["balls"] == p["balls"]]
    if len(pts) < 2:
        # saturated layers: fall back to uncorrected counts
        pts = [
            (delta * p["j"], math.log2(p["hits"] / (2.0 * 2.0 ** (p["R"] - delta * p["j"]) + 1.0)))
            for p in profile
            if p["hits"]
        ]
    if len(pts) < 2:
        dim, resid = NEG_INF, math.nan
    else:
        x, y = zip(*pts)
        dim, _, resid = log2_regression(x, y)
    return LimsupCoverEstimate(delta, J1, res, LevelCover.from_mask(marked), profile, dim, resid)


@dataclass
class BCAudit:
    n: int
    beta_n: float
    b_n: float
    ell: int
    rows: list
    violations: list

    def fraction(self, rungs=None, safe_only=True):
        rows = [r for r in self.rows if (not safe_only or r["truncation_safe"])]
        if rungs is not None:
            rows = [r for r in rows if r["rung"] in rungs]
        tot = sum(r["checked"] for r in rows)
        return sum(r["violations"] for r in rows) / tot if tot else math.nan

    def to_dict(self):
        return {
            "n": self.n,
            "beta_n": self.beta_n,
            "b_n": self.b_n,
            "ell": self.ell,
            "rungs": self.rows,
            "safe_fraction": self.fraction(),
            "violations": self.violations[:100],
        }


def bc_ladder_ratio(H, eta, n, ell):
    """``b_n`` with ``(1 + b_n)^ell = 1 + beta_n``, ``beta_n = (H + 1/n)/eta - 1``."""
    beta = (H + 1.0 / n) / eta - 1.0
    return beta, (1.0 + beta) ** (1.0 / ell) - 1.0


def audit_prop_BC(coeffs, qc, n, leaders=None, ell0=None, tol=1e-9):
    """Check ``sup_{l' in l} |c_l'| >= 2^{-(alpha/eta)(H + 1/n) j}`` on K.

    Every rung cell of the quasi-Cantor set is checked.  A rung is
    ``truncation_safe`` when the whole scale window the threshold allows,
    up to ``(H + 1/n) j / eta``, was synthesized; on other rungs a missing
    deep coefficient can fake a violation.
    """
    p = coeffs.params
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not math.isclose(qc.H, p.H, abs_tol=tol):
        raise IncompatibleLadderError(f"ladder H={qc.H} differs from coefficient H={p.H}")
    beta = (p.H + 1.0 / n) / p.eta - 1.0
    ell = None
    for cand in range(1, 64):
        if abs((1.0 + qc.b) ** cand - (1.0 + beta)) <= 1e-6 * (1.0 + beta):
            ell = cand
            break
    if ell is None:
        raise IncompatibleLadderError(f"b={qc.b} is not of the form (1+beta_n)^(1/l) - 1 with beta_n={beta:.6g}")
    if qc.rungs[-1] > p.j_max:
        raise IncompatibleLadderError(f"ladder reaches scale {qc.rungs[-1]} beyond j_max={p.j_max}")
    leaders = compute_leaders(coeffs) if leaders is None else leaders
    K = extract_K(qc, ell0)
    expo = (p.alpha / p.eta) * (p.H + 1.0 / n)
    rows, violations = [], []
    for i, cov in sorted(K.items()):
        j = qc.rungs[i]
        idx = cov.indices
        sup = leaders.local_sup[j][idx]
        bad = idx[sup < 2.0 ** (-expo * j)]
        rows.append(
            {
                "rung": i,
                "j": j,
                "checked": int(idx.size),
                "violations": int(bad.size),
                "fraction": bad.size / idx.size if idx.size else math.nan,
                "truncation_safe": (p.H + 1.0 / n) * j / p.eta <= p.j_max + 1e-9,
            }
        )
        violations.extend({"rung": i, "j": j, "k": int(k)} for k in bad)
    return BCAudit(n, beta, qc.b, ell, rows, violations)
