"""Cantor-type generations carrying a uniformly split measure, and
mass-distribution certificates for Hausdorff-dimension lower bounds.

Generation ``N`` lives on the quasi-Cantor ladder.  With
``s = (1+b)^{q0}`` and ``1 + beta = (1+b)^ell``:

* ``g_N`` is the selection rung: each selected K interval there receives
  exactly one ball;
* balls are the dyadic cells at rung ``g_N + q0`` (side ``2^{-s j}``)
  containing an active centre at rung ``g_N + ell``;
* a parent ball of scale ``R`` receives ``ceil(2^{(j_{g_N} - R)(H - 6b)})``
  children, spread as evenly as capacity allows over the K intervals at
  every intermediate rung, leftmost first on ties.

All balls are dyadic cells, so balls of one generation are disjoint and
every dyadic interval meets at most one ball per generation at equal or
larger size.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import DEFAULT_MAX_SCALE, check_real
from .core import build_cover
from .exceptions import ConstructionError, DomainError, IncompatibleLadderError
from .quasicantor import extract_K


@dataclass
class Generation:
    scale: int
    indices: np.ndarray
    masses: list  # Fractions aligned with indices
    parents: np.ndarray = None  # position of the parent ball in the previous generation
    selection_rung: object = None
    target: object = None  # (ceil target, floor target) exponent info

    def total_mass(self):
        return sum(self.masses, Fraction(0))


@dataclass
class GenerationTree:
    generations: list
    params: dict = field(default_factory=dict)
    schedule: list = field(default_factory=list)
    shallow: bool = False
    diagnostics: list = field(default_factory=list)

    @property
    def deepest(self):
        return self.generations[-1]

    def to_dict(self):
        return {
            "params": self.params,
            "schedule": self.schedule,
            "shallow": self.shallow,
            "generations": [
                {
                    "scale": g.scale,
                    "indices": [int(k) for k in g.indices],
                    "masses": [f"{m.numerator}/{m.denominator}" for m in g.masses],
                    "parents": None if g.parents is None else [int(p) for p in g.parents],
                }
                for g in self.generations
            ],
            "diagnostics": self.diagnostics,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        gens = []
        for g in d["generations"]:
            gens.append(
                Generation(
                    g["scale"],
                    np.array(g["indices"], dtype=np.int64),
                    [Fraction(m) for m in g["masses"]],
                    None if g["parents"] is None else np.array(g["parents"], dtype=np.int64),
                )
            )
        return cls(gens, d.get("params", {}), d.get("schedule", []), d.get("shallow", False), d.get("diagnostics", []))

    def validate(self):
        """Check mass conservation, nesting and uniform splitting."""
        for n, g in enumerate(self.generations):
            if g.total_mass() != 1:
                raise AssertionError(f"generation {n} carries mass {g.total_mass()}")
            if np.any(np.diff(g.indices) <= 0):
                raise AssertionError(f"generation {n} balls are not distinct and sorted")
            if n == 0:
                continue
            prev = self.generations[n - 1]
            if g.scale < prev.scale:
                raise AssertionError(f"generation {n} is coarser than generation {n - 1}")
            anc = g.indices >> (g.scale - prev.scale)
            if not np.array_equal(anc, prev.indices[g.parents]):
                raise AssertionError(f"generation {n} balls escape their parents")
            counts = np.bincount(g.parents, minlength=prev.indices.size)
            for m, p in zip(g.masses, g.parents):
                if m * counts[p] != prev.masses[p]:
                    raise AssertionError(f"generation {n} mass split is not uniform")
        return True


def uniform_tree(spec, depth, max_scale=DEFAULT_MAX_SCALE):
    """Uniform splitting over the covered children at every scale ``1..depth``."""
    gens = [Generation(0, np.array([0], dtype=np.int64), [Fraction(1)])]
    for j in range(1, depth + 1):
        idx = build_cover(spec, j, max_scale).indices
        prev = gens[-1]
        pos = np.searchsorted(prev.indices, idx >> 1)
        keep = (pos < prev.indices.size) & (prev.indices[np.minimum(pos, prev.indices.size - 1)] == idx >> 1)
        idx, pos = idx[keep], pos[keep]
        counts = np.bincount(pos, minlength=prev.indices.size)
        masses = [prev.masses[p] / int(counts[p]) for p in pos]
        gens.append(Generation(j, idx, masses, pos))
    return GenerationTree(gens, {"kind": "uniform", "depth": depth})


def _water_fill(caps, total):
    """Split ``total`` over bins with capacities ``caps`` as evenly as possible.

    Remainders go to the leftmost bins that still have room.
    """
    caps = np.asarray(caps, dtype=np.int64)
    if total >= caps.sum():
        return caps.copy()
    lo, hi = 0, int(caps.max())
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if np.minimum(caps, mid).sum() <= total:
            lo = mid
        else:
            hi = mid - 1
    out = np.minimum(caps, lo)
    rest = total - int(out.sum())
    for i in np.flatnonzero(caps > lo)[:rest]:
        out[i] += 1
    return out


def _target(exponent):
    x = 2.0**exponent
    return math.ceil(x - 1e-9), math.floor(x + 1e-9)


class _Builder:
    def __init__(self, qc, coeffs, q0, ell, K):
        self.qc, self.coeffs, self.q0, self.ell, self.K = qc, coeffs, q0, ell, K
        self.rungs = qc.rungs

    def _k_ok(self, scale, cells):
        """Keep cells whose ancestor at the deepest K rung not below them lies in K."""
        keep = np.ones(cells.size, dtype=bool)
        for i, cov in self.K.items():
            j = self.rungs[i]
            if j <= scale:
                keep &= cov.mask[cells >> (scale - j)]
        return keep

    def eligible(self, g):
        """Selection intervals at rung ``g`` and the leftmost ball in each."""
        jc = self.rungs[g + self.ell]
        R = self.rungs[g + self.q0]
        jg = self.rungs[g]
        act = self.coeffs.active[jc]
        balls = np.unique(act >> (jc - R))
        balls = balls[self._k_ok(R, balls)]
        lam, first = np.unique(balls >> (R - jg), return_index=True)
        return lam, balls[first], R

    def spread(self, parent_scale, parent_k, g, lam, target_ceil, target_floor, node):
        """Choose selection intervals under one parent by water-filling."""
        jg = self.rungs[g]
        inside = lam[(lam >> (jg - parent_scale)) == parent_k] if parent_scale <= jg else lam[:0]
        if inside.size < target_floor:
            raise ConstructionError(
                f"node {node}: {inside.size} eligible intervals, need {target_floor}",
                node=node,
                shortfall=int(target_floor - inside.size),
            )
        levels = [self.rungs[i] for i in range(g) if self.rungs[i] > parent_scale] + [jg]
        return self._fill(inside, levels, 0, min(target_ceil, inside.size), jg)

    def _fill(self, cand, levels, depth, total, jg):
        if total == 0:
            return cand[:0]
        if levels[depth] == jg:
            return cand[:total]
        groups, start = np.unique(cand >> (jg - levels[depth]), return_index=True)
        bounds = list(start) + [cand.size]
        caps = np.diff(bounds)
        share = _water_fill(caps, total)
        parts = [
            self._fill(cand[bounds[a] : bounds[a + 1]], levels, depth + 1, int(share[a]), jg)
            for a in range(groups.size)
            if share[a]
        ]
        return np.concatenate(parts) if parts else cand[:0]


def _ladder_q0(b, s, tol=1e-6):
    q0 = round(math.log(s) / math.log1p(b)) if s > 1 else 0
    if abs((1 + b) ** q0 - s) > tol * s:
        raise IncompatibleLadderError(f"s={s} is not a power of 1+b={1 + b}")
    return q0


def build_generations(qc, coeffs, s, b_n=None, ell=None, n=None, p1=None, n_generations=None, ell0=None):
    """Build the nested generations and their uniformly split measure.

    ``ell`` (rungs per ``1 + beta_n`` step) is taken from ``n`` via
    ``1 + beta_n = (H + 1/n) / eta`` when not given, and defaults to
    ``max(q0, 1)`` otherwise.  ``p1`` is the rung of the first generation
    (default: the first rung of K).  The schedule takes the shallowest rungs
    satisfying ``(R_{N-1} - j_{g_{N-1}})(H - 6b) < j_{g_N} b 2^{-N}``; when no
    second rung satisfies it, one unscheduled second generation is built and
    the tree is flagged ``shallow``.
    """
    b = qc.b
    if b_n is not None and not math.isclose(b_n, b, rel_tol=1e-9):
        raise IncompatibleLadderError(f"ladder ratio {b} differs from b_n={b_n}")
    s = check_real(s, "s", low=1)
    q0 = _ladder_q0(b, s)
    H = qc.H
    if ell is None and n is not None:
        beta = (H + 1.0 / n) / coeffs.params.eta - 1.0
        ell = round(math.log1p(beta) / math.log1p(b))
        if abs((1 + b) ** ell - (1 + beta)) > 1e-6 * (1 + beta):
            raise IncompatibleLadderError(f"b={b} is not an integer root of 1+beta_n={1 + beta}")
    if ell is None:
        ell = max(q0, 1)
    if q0 > ell:
        raise DomainError(f"need q0 <= ell, got q0={q0}, ell={ell}")
    K = extract_K(qc, ell0)
    jm = coeffs.params.j_max
    L = qc.ladder.L

    def usable(g):
        return g in K and g + ell <= L and g + q0 <= L and qc.rungs[g + ell] <= jm

    first = min(K) if p1 is None else p1
    if not usable(first):
        raise ConstructionError(f"rung {first} cannot host a generation (ladder or j_max too short)", node=(1, first))
    bld = _Builder(qc, coeffs, q0, ell, K)
    slope = H - 6 * b
    gens = [Generation(0, np.array([0], dtype=np.int64), [Fraction(1)])]
    schedule, diags = [], []
    shallow = False
    g = first
    N = 1
    while True:
        prev = gens[-1]
        lam, balls, R = bld.eligible(g)
        jg = qc.rungs[g]
        sel_idx, parents, masses = [], [], []
        tc, tf = _target((jg - prev.scale) * slope)
        for pos, (pk, pm) in enumerate(zip(prev.indices, prev.masses)):
            chosen = bld.spread(prev.scale, int(pk), g, lam, tc, tf, node=(N, prev.scale, int(pk)))
            cells = balls[np.searchsorted(lam, chosen)]
            share = pm / len(chosen)
            sel_idx.extend(int(c) for c in cells)
            parents.extend([pos] * len(chosen))
            masses.extend([share] * len(chosen))
        order = np.argsort(sel_idx, kind="stable")
        gens.append(
            Generation(
                R,
                np.array(sel_idx, dtype=np.int64)[order],
                [masses[i] for i in order],
                np.array(parents, dtype=np.int64)[order],
                selection_rung=g,
                target=(tc, tf),
            )
        )
        schedule.append({"generation": N, "rung": g, "j": jg, "ball_scale": R, "target_ceil": tc, "target_floor": tf})
        diags.append({"generation": N, "eligible": int(lam.size), "selected": len(sel_idx)})
        if n_generations is not None and N >= n_generations:
            break
        nxt = None
        for cand in range(g + q0 + 1, L + 1):
            if usable(cand) and (R - jg) * slope < qc.rungs[cand] * b * 2.0 ** -(N + 1):
                nxt = cand
                break
        if nxt is None:
            if N == 1:
                nxt = next((c for c in range(g + q0 + 1, L + 1) if usable(c)), None)
                shallow = True
            if nxt is None:
                break
        g, N = nxt, N + 1
        if shallow and N > 2:
            break
    tree = GenerationTree(
        gens,
        {"H": H, "b_n": b, "s": s, "q0": q0, "ell": ell, "eps": qc.eps, "expected_t": (H - 7 * b) / (s * (1 + b))},
        schedule,
        shallow,
        diags,
    )
    return tree


@dataclass
class MdpCertificate:
    t_certified: float
    c: float
    depth: int
    tau_min: int
    worst_interval: tuple
    self_check: bool
    per_scale: list = field(default_factory=list)
    shallow: bool = False

    def to_dict(self):
        return {
            "t_certified": self.t_certified,
            "c": self.c,
            "depth": self.depth,
            "tau_min": self.tau_min,
            "worst_interval": list(self.worst_interval),
            "self_check": self.self_check,
            "shallow": self.shallow,
            "per_scale": self.per_scale,
        }


def _scale_masses(gen, tau):
    keys = gen.indices >> (gen.scale - tau)
    uniq, inv = np.unique(keys, return_inverse=True)
    w = np.bincount(inv, weights=[float(m) for m in gen.masses])
    return uniq, w


def _rescan(gen, t, c, tau_min, depth):
    """Independent exact re-check of ``mu(D) <= c |D|^t`` on every dyadic D."""
    log2c = math.log2(c)
    for tau in range(tau_min, depth + 1):
        sums = {}
        for k, m in zip(gen.indices, gen.masses):
            key = int(k) >> (gen.scale - tau)
            sums[key] = sums.get(key, Fraction(0)) + m
        for mu in sums.values():
            if math.log2(mu.numerator) - math.log2(mu.denominator) > log2c - tau * t + 1e-9:
                return False
    return True


def certify(tree, depth=None, c=1.0, tau_min=None):
    """Largest ``t`` with ``mu(D) <= c |D|^t`` for dyadic D of side ``2^-tau``.

    ``tau`` runs from ``tau_min`` (default: the first generation's selection
    scale, or 0 for a tree without a schedule) to ``depth`` (default and
    maximum: the deepest ball scale, where mu is known exactly).
    """
    gen = tree.deepest
    if not gen.masses or sum(gen.masses, Fraction(0)) == 0:
        raise DomainError("tree carries no mass")
    depth = gen.scale if depth is None else depth
    if depth > gen.scale:
        raise DomainError(f"depth {depth} exceeds the deepest ball scale {gen.scale}")
    if tau_min is None:
        tau_min = tree.schedule[0]["j"] if tree.schedule else 0
    tau_min = max(tau_min, 1)
    if tau_min > depth:
        raise DomainError(f"tau_min={tau_min} exceeds depth={depth}")
    c = check_real(c, "c", low=0, low_inclusive=False)
    best = (math.inf, None)
    per_scale = []
    for tau in range(tau_min, depth + 1):
        keys, mu = _scale_masses(gen, tau)
        ratio = (math.log2(c) - np.log2(mu)) / tau
        i = int(np.argmin(ratio))
        per_scale.append({"tau": tau, "t": float(ratio[i]), "max_mass": float(mu.max()), "n_intervals": int(keys.size)})
        if ratio[i] < best[0]:
            best = (float(ratio[i]), (tau, int(keys[i])))
    t = best[0]
    ok = _rescan(gen, t, c, tau_min, depth)
    return MdpCertificate(t, c, depth, tau_min, best[1], ok, per_scale, tree.shallow)
