"""Quasi-Cantor subsets selected along a geometric ladder of scales.

The ladder has integer rungs ``j_i = floor((1+b)^i J)``.  At every rung the
covered intervals with a normal duplication rate towards the next rung
form ``T_1``; deeper sets ``T_l`` keep the members of ``T_{l-1}`` having
enough descendants in ``T_{l-1}`` one rung down.  With integer rungs the
thresholds use the actual gap ``d_i = j_{i+1} - j_i``:

    ND band:        2^{d_i (H -+ 4 eps / b)}
    reproduction:   2^{d_i (H - 5 eps / b)}

which coincide with the continuous-scale thresholds when ``d_i = b j_i``.
The last rung only supplies children, so pruned sets exist on rungs
``0 .. L-1``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import DEFAULT_MAX_SCALE, check_real
from .core import LevelCover, build_cover
from .exceptions import DomainError, FlooringCollisionWarning, InvalidParameterError, LadderTooShortError


@dataclass(frozen=True)
class ScaleLadder:
    J: int
    b: float
    rungs: tuple
    collisions: bool = False

    @property
    def L(self):
        return len(self.rungs) - 1

    def gap(self, i):
        return self.rungs[i + 1] - self.rungs[i]

    def to_dict(self):
        return {"J": self.J, "b": self.b, "rungs": list(self.rungs), "collisions": self.collisions}


def build_ladder(J, b, max_scale=DEFAULT_MAX_SCALE):
    if J < 1:
        raise InvalidParameterError(f"J must be >= 1, got {J}")
    b = check_real(b, "b", low=0, high=1, low_inclusive=False, high_inclusive=False)
    raw = []
    i = 0
    while True:
        j = int(math.floor((1 + b) ** i * J + 1e-9))
        if j > max_scale:
            break
        raw.append(j)
        i += 1
    rungs = tuple(sorted(set(raw)))
    collisions = len(rungs) < len(raw)
    if len(rungs) < 3:
        raise LadderTooShortError(f"only {len(rungs)} rung(s) fit for J={J}, b={b}, max scale {max_scale}")
    if collisions:
        warnings.warn(
            f"ladder J={J}, b={b}: {len(raw) - len(rungs)} rung(s) collided after flooring",
            FlooringCollisionWarning,
            stacklevel=2,
        )
    return ScaleLadder(int(J), b, rungs, collisions)


@dataclass
class QuasiCantorLadder:
    ladder: ScaleLadder
    H: float
    eps: float
    covers: list
    T: list  # T[i][l-1] is T_l at rung i
    T_inf: list
    stabilized: list
    stabilization_depth: list
    mode: str = "recursive"
    ell0: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def b(self):
        return self.ladder.b

    @property
    def rungs(self):
        return self.ladder.rungs

    @property
    def n_pruned_rungs(self):
        return len(self.T_inf)

    @property
    def empty_rungs(self):
        return [i for i, t in enumerate(self.T_inf) if t.count == 0]

    def nd_band(self, i):
        d = self.ladder.gap(i)
        return d * (self.H - 4 * self.eps / self.b), d * (self.H + 4 * self.eps / self.b)

    def reproduction_exponent(self, i, i2=None):
        """log2 threshold for descendants from rung ``i`` to rung ``i2``."""
        i2 = i + 1 if i2 is None else i2
        return (self.rungs[i2] - self.rungs[i]) * (self.H - 5 * self.eps / self.b)

    def U(self, i, l):
        """Intervals removed at depth ``l`` on rung ``i`` (``T_{l-1} minus T_l``)."""
        if l < 2 or l > len(self.T[i]):
            raise DomainError(f"depth {l} not available on rung {i}")
        prev, cur = self.T[i][l - 2], self.T[i][l - 1]
        return LevelCover(prev.j, prev.bits & ~cur.bits)

    @classmethod
    def from_sets(cls, ladder, H, eps, sets):
        """Wrap hand-supplied surviving sets (one per pruned rung) for auditing."""
        sets = list(sets)
        if len(sets) != ladder.L:
            raise ValueError(f"need {ladder.L} rung sets, got {len(sets)}")
        return cls(
            ladder=ladder,
            H=H,
            eps=eps,
            covers=sets,
            T=[[s] for s in sets],
            T_inf=sets,
            stabilized=[False] * len(sets),
            stabilization_depth=[None] * len(sets),
            mode="supplied",
        )


def _log2_counts(parent_j, child_mask):
    counts = child_mask.reshape(2**parent_j, -1).sum(axis=1)
    with np.errstate(divide="ignore"):
        return np.log2(counts.astype(np.float64))


def prune(spec, ladder, H, eps, mode="recursive", max_scale=DEFAULT_MAX_SCALE):
    """Run the T_l pruning on every rung of ``ladder``.

    ``mode="recursive"`` builds ``T_l`` from ``T_{l-1}`` on the same and the
    next rung.  ``mode="fixed_point"`` reads the recursion as a
    self-consistency condition and solves it top-down; on a finite ladder
    both give the same deepest sets.
    """
    H = check_real(H, "H", low=0, high=1, low_inclusive=False)
    eps = check_real(eps, "eps", low=0, low_inclusive=False)
    b = ladder.b
    if not b * H - 5 * eps > 0:
        raise InvalidParameterError(f"need b*H - 5*eps > 0, got {b * H - 5 * eps:.4g}")
    if mode not in ("recursive", "fixed_point"):
        raise ValueError(f"unknown mode {mode!r}")
    rungs = ladder.rungs
    L = ladder.L
    covers = [build_cover(spec, j, max_scale) for j in rungs]
    masks = [c.mask for c in covers]
    qc = QuasiCantorLadder(ladder, H, eps, covers, [], [], [], [], mode)

    nd = []
    for i in range(L):
        lo, hi = qc.nd_band(i)
        lc = _log2_counts(rungs[i], masks[i + 1])
        nd.append(masks[i] & (lc >= lo) & (lc <= hi))
    thr = [qc.reproduction_exponent(i) for i in range(L)]

    if mode == "recursive":
        T = [[nd[i]] for i in range(L)]
        for depth in range(2, L + 1):
            for i in range(L - depth + 1):
                lc = _log2_counts(rungs[i], T[i + 1][depth - 2])
                T[i].append(T[i][depth - 2] & (lc >= thr[i]))
    else:
        F = [None] * L
        F[L - 1] = nd[L - 1]
        for i in range(L - 2, -1, -1):
            F[i] = nd[i] & (_log2_counts(rungs[i], F[i + 1]) >= thr[i])
        T = [[f] for f in F]

    for i in range(L):
        seq = T[i]
        qc.T.append([LevelCover.from_mask(m, covers[i].exactness) for m in seq])
        qc.T_inf.append(qc.T[i][-1])
        if mode == "recursive" and len(seq) >= 2 and np.array_equal(seq[-1], seq[-2]):
            depth = len(seq)
            while depth > 1 and np.array_equal(seq[depth - 2], seq[-1]):
                depth -= 1
            qc.stabilized.append(True)
            qc.stabilization_depth.append(depth)
        else:
            qc.stabilized.append(False)
            qc.stabilization_depth.append(None)
    qc.ell0 = default_ell0(qc)
    return qc


def _count_ok(qc, i, count):
    if count == 0:
        return False
    j = qc.rungs[i]
    lc = math.log2(count)
    return j * (qc.H - qc.eps) <= lc <= j * (qc.H + qc.eps)


def default_ell0(qc):
    """First rung from which every later pruned rung passes the count check.

    Falls back to the first rung with a nonempty surviving set when no
    suffix of the ladder passes (typical for small eps at desk scales).
    """
    ell0 = None
    for i in range(qc.n_pruned_rungs - 1, -1, -1):
        if not _count_ok(qc, i, qc.T_inf[i].count):
            break
        ell0 = i
    if ell0 is None:
        ell0 = next((i for i, t in enumerate(qc.T_inf) if t.count), 0)
    return ell0


def extract_K(qc, ell0=None):
    """Rung sets of the quasi-Cantor set: survivors with a surviving ancestry.

    Returns a dict ``rung index -> LevelCover`` for rungs ``ell0 .. L-1``.
    """
    ell0 = qc.ell0 if ell0 is None else ell0
    if not 0 <= ell0 < qc.n_pruned_rungs:
        raise DomainError(f"ell0={ell0} outside the pruned rungs 0..{qc.n_pruned_rungs - 1}")
    out = {ell0: qc.T_inf[ell0]}
    prev = qc.T_inf[ell0].mask
    for i in range(ell0 + 1, qc.n_pruned_rungs):
        d = qc.rungs[i] - qc.rungs[i - 1]
        cur = qc.T_inf[i].mask & np.repeat(prev, 2**d)
        out[i] = LevelCover.from_mask(cur, qc.T_inf[i].exactness)
        prev = cur
    return out


@dataclass
class QuasiCantorAudit:
    ell0: int
    rows: list
    reproduction: list
    violations: list

    @property
    def count_pass(self):
        return all(r["pass"] for r in self.rows)

    @property
    def reproduction_pass(self):
        return not self.violations

    @property
    def worst_count_margin(self):
        return min(min(r["low_margin"], r["high_margin"]) for r in self.rows)

    @property
    def worst_reproduction_margin(self):
        vals = [r["worst_margin"] for r in self.reproduction]
        return min(vals) if vals else math.inf

    def to_dict(self):
        return {
            "ell0": self.ell0,
            "count_pass": self.count_pass,
            "reproduction_pass": self.reproduction_pass,
            "worst_count_margin": self.worst_count_margin,
            "worst_reproduction_margin": self.worst_reproduction_margin,
            "rungs": self.rows,
            "reproduction": self.reproduction,
            "violations": self.violations[:100],
            "n_violations": len(self.violations),
        }


def audit_theorem1(qc, ell0=None, K=None):
    """Audit per-rung counts and descendant reproduction of the K rung sets.

    Counts:  2^{j(H-eps)} <= #K_i <= 2^{j(H+eps)}.
    Reproduction: each member of ``K_i`` has at least
    ``2^{(j_{i'} - j_i)(H - 5 eps/b)}`` descendants in ``K_{i'}`` for every
    later pruned rung ``i'``.  Margins are in log2 units.
    """
    ell0 = qc.ell0 if ell0 is None else ell0
    K = extract_K(qc, ell0) if K is None else K
    if all(K[i].count == 0 for i in K):
        raise DomainError("K is empty")
    rows = []
    for i, cov in sorted(K.items()):
        j = qc.rungs[i]
        lc = math.log2(cov.count) if cov.count else -math.inf
        low, high = lc - j * (qc.H - qc.eps), j * (qc.H + qc.eps) - lc
        rows.append(
            {
                "rung": i,
                "j": j,
                "count": cov.count,
                "t_inf_count": qc.T_inf[i].count,
                "stabilized": qc.stabilized[i],
                "low_margin": low,
                "high_margin": high,
                "pass": low >= 0 and high >= 0,
            }
        )
    repro, violations = [], []
    keys = sorted(K)
    for a, i in enumerate(keys):
        idx = K[i].indices
        if idx.size == 0:
            continue
        for i2 in keys[a + 1 :]:
            d = qc.rungs[i2] - qc.rungs[i]
            desc = K[i2].mask.reshape(2 ** qc.rungs[i], 2**d).sum(axis=1)[idx]
            with np.errstate(divide="ignore"):
                margin = np.log2(desc.astype(np.float64)) - qc.reproduction_exponent(i, i2)
            repro.append({"rung": i, "to_rung": i2, "worst_margin": float(margin.min())})
            for k, mg in zip(idx[margin < 0], margin[margin < 0]):
                violations.append({"rung": i, "to_rung": i2, "k": int(k), "margin": float(mg)})
    return QuasiCantorAudit(ell0, rows, repro, violations)
