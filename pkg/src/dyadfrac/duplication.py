"""Slow / normal / fast duplication classes of covered dyadic intervals.

A covered interval at scale ``j`` is classified by how many covered
descendants it has at scale ``floor((1 + beta) j)`` compared with
``2^{j(beta H -+ 4 m eps)}``, where ``m = max(1, beta)``.  Ties with a
threshold are classified ND.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import DEFAULT_MAX_SCALE, check_real, check_scale
from .core import build_cover

SD, ND, FD = 0, 1, 2
CLASS_NAMES = ("SD", "ND", "FD")


@dataclass(frozen=True)
class DuplicationParams:
    beta: float
    eps: float
    H: float

    def __post_init__(self):
        check_real(self.beta, "beta", low=0, low_inclusive=False)
        check_real(self.eps, "eps", low=0, low_inclusive=False)
        check_real(self.H, "H", low=0, high=1)

    @property
    def m(self):
        return max(1.0, self.beta)

    def child_scale(self, j):
        # the small offset guards floor() against products like 1.1 * 10
        return int(math.floor((1 + self.beta) * j + 1e-9))


@dataclass(frozen=True)
class DuplicationReport:
    j: int
    j_child: int
    params: DuplicationParams
    indices: np.ndarray
    child_counts: np.ndarray
    classes: np.ndarray
    total_children: int

    @property
    def counts(self):
        """(#SD, #ND, #FD, #C_beta SD)."""
        sd = self.classes == SD
        return (
            int(sd.sum()),
            int((self.classes == ND).sum()),
            int((self.classes == FD).sum()),
            int(self.child_counts[sd].sum()),
        )

    def members(self, cls):
        return self.indices[self.classes == cls]

    def to_rows(self):
        return [
            {"j": self.j, "k": int(k), "child_count": int(c), "class": CLASS_NAMES[int(z)]}
            for k, c, z in zip(self.indices, self.child_counts, self.classes)
        ]


def thresholds(j, params):
    """log2 of the lower and upper ND thresholds at scale ``j``."""
    a = j * (params.beta * params.H - 4 * params.m * params.eps)
    b = j * (params.beta * params.H + 4 * params.m * params.eps)
    return a, b


def classify_counts(counts, log2_low, log2_high):
    counts = np.asarray(counts)
    with np.errstate(divide="ignore"):
        lc = np.log2(counts.astype(np.float64))
    out = np.full(counts.shape, ND, dtype=np.int8)
    out[lc < log2_low] = SD
    out[lc > log2_high] = FD
    return out


def classify(spec, j, params, max_scale=DEFAULT_MAX_SCALE):
    j = check_scale(j, max_scale)
    jc = params.child_scale(j)
    check_scale(jc, max_scale, "child scale")
    if jc <= j:
        raise ValueError(f"child scale {jc} must exceed parent scale {j}")
    parent = build_cover(spec, j, max_scale)
    child = build_cover(spec, jc, max_scale)
    idx = parent.indices
    counts = parent.children_counts(child)[idx]
    lo, hi = thresholds(j, params)
    return DuplicationReport(
        j=j,
        j_child=jc,
        params=params,
        indices=idx,
        child_counts=counts,
        classes=classify_counts(counts, lo, hi),
        total_children=child.count,
    )


@dataclass(frozen=True)
class CardAudit:
    nd_pass: bool
    fd_pass: bool
    sd_pass: bool
    nd_low_margin: float
    nd_high_margin: float
    fd_margin: float
    sd_margin: float

    @property
    def all_pass(self):
        return self.nd_pass and self.fd_pass and self.sd_pass

    def to_dict(self):
        return {
            "nd_pass": self.nd_pass,
            "fd_pass": self.fd_pass,
            "sd_pass": self.sd_pass,
            "nd_low_margin": self.nd_low_margin,
            "nd_high_margin": self.nd_high_margin,
            "fd_margin": self.fd_margin,
            "sd_margin": self.sd_margin,
        }


def _log2(n):
    return math.log2(n) if n > 0 else -math.inf


def audit_card_bounds(report, params=None):
    """Check the three cardinality bounds on a report; margins in log2 units.

    ND:  2^{j(H-2eps)} <= #ND <= 2^{j(H+eps)}
    FD:  #FD <= 2^{j(H-2eps)}
    SD:  #C_beta SD <= 2^{j(1+beta)(H-3 m eps)}

    A positive margin means the bound holds with room to spare.
    """
    p = report.params if params is None else params
    if p != report.params:
        raise ValueError("report was built with different parameters")
    j = report.j
    n_sd, n_nd, n_fd, n_csd = report.counts
    nd_low = _log2(n_nd) - j * (p.H - 2 * p.eps)
    nd_high = j * (p.H + p.eps) - _log2(n_nd)
    fd = j * (p.H - 2 * p.eps) - _log2(n_fd)
    sd = j * (1 + p.beta) * (p.H - 3 * p.m * p.eps) - _log2(n_csd)
    return CardAudit(
        nd_pass=nd_low >= 0 and nd_high >= 0,
        fd_pass=fd >= 0,
        sd_pass=sd >= 0,
        nd_low_margin=nd_low,
        nd_high_margin=nd_high,
        fd_margin=fd,
        sd_margin=sd,
    )
