"""Box-dimension estimates from dyadic cover counts."""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import DEFAULT_MAX_SCALE, check_real, check_scale_window
from .core import build_cover
from .exceptions import UndefinedDimensionError


def log2_regression(x, y):
    """Least-squares line through ``(x, y)``.

    Returns ``(slope, intercept, max_abs_residual)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two points for a regression")
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    return slope, intercept, float(np.max(np.abs(resid)))


@dataclass(frozen=True)
class DimensionEstimate:
    H_hat: float
    j_range: tuple
    residual: float
    per_level_counts: list = field(default_factory=list)
    max_ratio: float = float("nan")
    raw_slope: float = float("nan")


def cover_counts(spec, scales, max_scale=DEFAULT_MAX_SCALE):
    return [(j, build_cover(spec, j, max_scale).count) for j in scales]


def estimate_box_dim(spec, j_min, j_max, step=1, max_scale=DEFAULT_MAX_SCALE):
    """Regression slope of ``log2 #I_j`` against ``j`` on ``j_min..j_max``.

    ``step`` restricts the scales to ``j_min, j_min + step, ...``; use the
    digit block size to regress on self-similar scales only.  The headline
    estimate is the slope clipped to [0, 1]; ``max_ratio`` is the
    finite-scale analogue of the limsup of ``log2 #I_j / j``.
    """
    j_min, j_max = check_scale_window(j_min, j_max, max_scale)
    scales = list(range(j_min, j_max + 1, step))
    if len(scales) < 2:
        raise ValueError(f"step {step} leaves fewer than two scales in [{j_min}, {j_max}]")
    counts = cover_counts(spec, scales, max_scale)
    if any(c == 0 for _, c in counts):
        raise UndefinedDimensionError("empty cover: dimension undefined")
    js = np.array(scales, dtype=np.float64)
    logs = np.log2([c for _, c in counts])
    slope, _, resid = log2_regression(js, logs)
    ratios = [math.log2(c) / j for j, c in counts if j > 0]
    return DimensionEstimate(
        H_hat=min(1.0, max(0.0, slope)),
        j_range=(j_min, j_max),
        residual=resid,
        per_level_counts=counts,
        max_ratio=max(ratios) if ratios else float("nan"),
        raw_slope=slope,
    )


@dataclass(frozen=True)
class CountBoundRow:
    j: int
    count: int
    log2count: float
    bound_low: float
    bound_high: float
    passed: bool


@dataclass(frozen=True)
class CountAudit:
    H: float
    eps: float
    rows: list
    first_passing_scale: object  # int or None

    @property
    def all_pass(self):
        return all(r.passed for r in self.rows)

    @property
    def failures(self):
        return [r.j for r in self.rows if not r.passed]

    def to_rows(self):
        return [
            {
                "j": r.j,
                "count": r.count,
                "log2count": r.log2count,
                "bound_low": r.bound_low,
                "bound_high": r.bound_high,
                "pass": r.passed,
            }
            for r in self.rows
        ]


def audit_count_bounds(spec, H, eps, j_range, max_scale=DEFAULT_MAX_SCALE):
    """Check ``2^{j(H-eps)} <= #I_j <= 2^{j(H+eps)}`` scale by scale.

    Bounds are reported in log2 units.  ``first_passing_scale`` is the
    smallest scale from which every later scale in range passes (None if the
    last scale fails).
    """
    eps = check_real(eps, "eps", low=0, low_inclusive=False)
    H = check_real(H, "H", low=0)
    rows = []
    for j, c in cover_counts(spec, j_range, max_scale):
        lc = math.log2(c) if c else -math.inf
        lo, hi = j * (H - eps), j * (H + eps)
        rows.append(CountBoundRow(j, c, lc, lo, hi, lo <= lc <= hi))
    first = None
    for r in reversed(rows):
        if not r.passed:
            break
        first = r.j
    return CountAudit(H, eps, rows, first)
