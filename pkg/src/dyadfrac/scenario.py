"""Scenario files: parsing, plan execution and artifact writing.

A scenario is a YAML mapping::

    schema_version: 1
    name: cantor-half
    spec: {type: digits, m: 2, digits: [0, 3]}
    seed: 0
    plan:
      - op: dims
        params: {j_min: 2, j_max: 20, step: 2}
        expect: {H_hat: 0.5, tol: 1.0e-12}

Steps run in order and share state (the last coefficients, leaders,
quasi-Cantor ladder and generation tree).  Every step writes one artifact;
``summary.json`` collects step summaries and checks, ``manifest.json``
records hashes, versions and wall times.  Only the manifest carries
timestamps, so all other files are byte-reproducible for a fixed
(scenario, seed).
"""

import csv
import hashlib
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import __version__, rng
from ._validation import DEFAULT_MAX_SCALE
from .core import DyadicInterval, build_cover, spec_from_dict, spec_to_dict
from .dimension import audit_count_bounds, estimate_box_dim
from .duplication import DuplicationParams, audit_card_bounds, classify
from .exceptions import ConstructionError
from .leaders import audit_prop_BC, bc_ladder_ratio, compute_leaders, estimate_holder, increasing_spectrum, limsup_cover
from .lws import LwsParams, rho_hat, synthesize
from .mdp import build_generations, certify, uniform_tree
from .quasicantor import audit_theorem1, build_ladder, extract_K, prune

SCHEMA_VERSION = 1
TOP_KEYS = {"schema_version", "name", "description", "spec", "seed", "max_scale", "plan"}
STEP_KEYS = {"op", "params", "expect"}


class ScenarioError(Exception):
    """Malformed scenario, optionally located at a line and column (1-based)."""

    def __init__(self, message, line=None, column=None):
        loc = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(loc + message)
        self.line = line
        self.column = column


# -- YAML with source positions ---------------------------------------------


class _Marked(dict):
    """dict remembering where each key was written."""

    marks = None


def _construct(node):
    if isinstance(node, yaml.MappingNode):
        out = _Marked()
        out.marks = {}
        for k, v in node.value:
            key = _construct(k)
            out[key] = _construct(v)
            out.marks[key] = (k.start_mark.line + 1, k.start_mark.column + 1)
        out.marks[None] = (node.start_mark.line + 1, node.start_mark.column + 1)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v) for v in node.value]
    return yaml.SafeLoader(io.StringIO("")).construct_object(node, deep=True)


def load_yaml(text):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is None:
            raise ScenarioError(str(exc)) from None
        raise ScenarioError(getattr(exc, "problem", str(exc)), mark.line + 1, mark.column + 1) from None
    if node is None:
        raise ScenarioError("empty scenario file", 1, 1)
    return _construct(node)


def _mark(d, key=None):
    marks = getattr(d, "marks", None) or {}
    return marks.get(key, marks.get(None, (None, None)))


def _reject_unknown(d, allowed, where):
    for key in d:
        if key not in allowed:
            line, col = _mark(d, key)
            raise ScenarioError(f"unknown key {key!r} in {where}; allowed: {sorted(allowed)}", line, col)


# -- scenario model ---------------------------------------------------------


@dataclass
class Step:
    op: str
    params: dict
    expect: dict


@dataclass
class Scenario:
    name: str
    spec: object
    plan: list
    seed: int = 0
    max_scale: int = DEFAULT_MAX_SCALE
    description: str = ""
    raw: dict = field(default_factory=dict)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_plain(v) for v in x]
    return x


def scenario_from_dict(d):
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a mapping", *_mark(d))
    _reject_unknown(d, TOP_KEYS, "scenario")
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}", *_mark(d, "schema_version"))
    for key in ("spec", "plan"):
        if key not in d:
            raise ScenarioError(f"missing required key {key!r}", *_mark(d))
    try:
        spec = spec_from_dict(_plain(d["spec"]))
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError(f"invalid spec: {exc}", *_mark(d, "spec")) from None
    plan = []
    if not isinstance(d["plan"], list) or not d["plan"]:
        raise ScenarioError("plan must be a nonempty list", *_mark(d, "plan"))
    for i, st in enumerate(d["plan"]):
        if not isinstance(st, dict) or "op" not in st:
            raise ScenarioError(f"plan step {i} needs an 'op' key", *_mark(d, "plan"))
        _reject_unknown(st, STEP_KEYS, f"plan step {i}")
        op = st["op"]
        if op not in OPS:
            raise ScenarioError(f"unknown op {op!r}; available: {sorted(OPS)}", *_mark(st, "op"))
        params = st.get("params") or {}
        _reject_unknown(params, OPS[op][1], f"params of step {i} ({op})")
        expect = st.get("expect") or {}
        _reject_unknown(expect, OPS[op][2], f"expect of step {i} ({op})")
        plan.append(Step(op, _plain(params), _plain(expect)))
    return Scenario(
        name=str(d.get("name", "scenario")),
        spec=spec,
        plan=plan,
        seed=int(d.get("seed", 0)),
        max_scale=int(d.get("max_scale", DEFAULT_MAX_SCALE)),
        description=str(d.get("description", "")),
        raw=_plain(d),
    )


def load_scenario(path):
    text = Path(path).read_text()
    return scenario_from_dict(load_yaml(text))


# -- JSON / CSV encoding ----------------------------------------------------


def jsonable(x):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


def dumps(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def rows_to_csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: jsonable(v) for k, v in r.items()})
    return buf.getvalue()


# -- operations -------------------------------------------------------------


@dataclass
class StepResult:
    summary: dict
    rows: list = None  # tabular artifact
    payload: object = None  # JSON artifact when not tabular
    text: str = None  # verbatim artifact (e.g. sparse coefficient CSV)
    suffix: str = None
    checks: list = field(default_factory=list)


class Context:
    def __init__(self, scenario, seed, threads=1):
        self.scenario = scenario
        self.spec = scenario.spec
        self.seed = seed
        self.max_scale = scenario.max_scale
        self.threads = threads
        self.coeffs = None
        self.leaders = None
        self.qc = None
        self.tree = None

    def need(self, attr, op):
        val = getattr(self, attr)
        if val is None:
            raise ScenarioError(f"op {op!r} needs a previous step producing {attr}")
        return val


def _check(name, passed, **detail):
    return {"check": name, "pass": bool(passed), **detail}


def _scales(p, key="j"):
    v = p[key]
    return list(v) if isinstance(v, list) else [int(v)]


def op_cover(ctx, p, e):
    rows = []
    for j in _scales(p):
        cov = build_cover(ctx.spec, j, ctx.max_scale)
        rows.append({"j": j, "count": cov.count, "exactness": cov.exactness, "runs": len(cov.runs())})
    return StepResult({"levels": len(rows)}, rows=rows)


def op_dims(ctx, p, e):
    est = estimate_box_dim(ctx.spec, p["j_min"], p["j_max"], p.get("step", 1), ctx.max_scale)
    rows = [{"j": j, "count": c, "log2count": math.log2(c)} for j, c in est.per_level_counts]
    summ = {"H_hat": est.H_hat, "raw_slope": est.raw_slope, "residual": est.residual, "max_ratio": est.max_ratio}
    checks = []
    if "H_hat" in e:
        err = abs(est.H_hat - e["H_hat"])
        checks.append(_check("H_hat", err <= e.get("tol", 1e-9), error=err))
    return StepResult(summ, rows=rows, checks=checks)


def op_count_audit(ctx, p, e):
    a = audit_count_bounds(ctx.spec, p["H"], p["eps"], range(p["j_min"], p["j_max"] + 1), ctx.max_scale)
    checks = [_check("count_bounds", a.all_pass, failures=a.failures)] if e.get("pass") else []
    summary = {"all_pass": a.all_pass, "first_passing_scale": a.first_passing_scale}
    return StepResult(summary, rows=a.to_rows(), checks=checks)


def op_classify(ctx, p, e):
    params = DuplicationParams(p["beta"], p["eps"], p["H"])
    rows, ok = [], True
    for j in _scales(p):
        rep = classify(ctx.spec, j, params, ctx.max_scale)
        aud = audit_card_bounds(rep)
        n_sd, n_nd, n_fd, n_csd = rep.counts
        partition = n_sd + n_nd + n_fd == rep.indices.size
        ok &= aud.all_pass and partition
        row = {"j": j, "SD": n_sd, "ND": n_nd, "FD": n_fd, "C_SD": n_csd, "partition": partition}
        rows.append({**row, **aud.to_dict()})
    checks = [_check("card_bounds", ok)] if e.get("pass") else []
    return StepResult({"all_pass": bool(ok)}, rows=rows, checks=checks)


def _ladder_ratio(p, eta_default=None):
    if "b" in p:
        return p["b"], p.get("eps")
    eta = p.get("eta", eta_default)
    _, b = bc_ladder_ratio(p["H"], eta, p["n"], p["ell"])
    return b, p.get("eps", b * b)


def op_quasicantor(ctx, p, e):
    b, eps = _ladder_ratio(p)
    ladder = build_ladder(p["J"], b, p.get("max_scale", ctx.max_scale))
    qc = prune(ctx.spec, ladder, p["H"], eps, p.get("mode", "recursive"), ctx.max_scale)
    ctx.qc = qc
    K = extract_K(qc, p.get("ell0"))
    payload = {
        "ladder": ladder.to_dict(),
        "H": qc.H,
        "eps": qc.eps,
        "ell0": min(K),
        "rungs": [
            {
                "rung": i,
                "j": qc.rungs[i],
                "cover": qc.covers[i].count,
                "T_inf": qc.T_inf[i].count,
                "K": K[i].count if i in K else None,
                "stabilized": qc.stabilized[i],
                "stabilization_depth": qc.stabilization_depth[i],
            }
            for i in range(qc.n_pruned_rungs)
        ],
    }
    checks = []
    if any(K[i].count for i in K):
        audit = audit_theorem1(qc, min(K), K)
        payload["audit"] = audit.to_dict()
        if e.get("pass"):
            checks.append(_check("K_audit", audit.count_pass and audit.reproduction_pass))
    elif e.get("pass"):
        checks.append(_check("K_audit", False, reason="K is empty"))
    if "K_within" in e:
        carrier = DyadicInterval(*e["K_within"])
        inside = True
        for i, cov in K.items():
            if i == min(K) and e.get("skip_first", True):
                continue
            lo = carrier.k << (cov.j - carrier.j)
            hi = (carrier.k + 1) << (cov.j - carrier.j)
            idx = cov.indices
            inside &= bool(np.all((idx >= lo) & (idx < hi)))
        checks.append(_check("K_within", inside, carrier=list(e["K_within"])))
    summ = {
        "b": float(b),
        "ell0": min(K),
        "deepest_K_cells": K[max(K)].count,
        "rungs": list(qc.rungs),
        "T_inf": [t.count for t in qc.T_inf],
        "K": {i: K[i].count for i in K},
    }
    return StepResult(summ, payload=payload, checks=checks)


def op_lws(ctx, p, e):
    seed = rng.derive_seed(ctx.seed, p.get("label", "lws"))
    params = LwsParams(p["alpha"], p["eta"], p["H"], p["j_max"], seed)
    ctx.coeffs = synthesize(ctx.spec, params, ctx.max_scale, threads=ctx.threads)
    ctx.leaders = None
    counts = ctx.coeffs.counts()
    return StepResult(
        {"seed": seed, "total_active": int(counts.sum()), "counts": counts},
        text=ctx.coeffs.to_csv(),
        suffix="csv",
    )


def op_rho(ctx, p, e):
    r = rho_hat(ctx.need("coeffs", "rho"))
    checks = []
    if "value" in e:
        checks.append(_check("rho_hat", abs(r.slope - e["value"]) <= e.get("tol", 0.07), slope=r.slope))
    return StepResult({"slope": r.slope, "window": r.window, "residual": r.residual}, payload=r.__dict__, checks=checks)


def _leaders(ctx, op):
    if ctx.leaders is None:
        ctx.leaders = compute_leaders(ctx.need("coeffs", op))
    return ctx.leaders


def op_leaders(ctx, p, e):
    lf = _leaders(ctx, "leaders")
    rows = []
    for j in p.get("scales", [min(lf.j_max, 8)]):
        d = lf.leaders[j]
        rows.extend({"j": j, "k": k, "leader": float(v)} for k, v in enumerate(d))
    return StepResult({"j_max": lf.j_max}, rows=rows)


def op_holder(ctx, p, e):
    hf = estimate_holder(_leaders(ctx, "holder"), p.get("j_min", 3), p.get("h_cap", 10.0))
    edges = np.linspace(0, hf.h_cap, int(p.get("bins", 20)) + 1)
    hist, _ = np.histogram(hf.h, bins=edges)
    rows = [{"h_lo": float(a), "h_hi": float(b), "cells": int(c)} for a, b, c in zip(edges[:-1], edges[1:], hist)]
    return StepResult({"h_min": float(hf.h.min()), "zero_leader_cells": int(hf.all_zero.sum())}, rows=rows)


def op_spectrum(ctx, p, e):
    """Increasing spectrum; ``replicates > 1`` averages D_leq over fresh draws.

    Replicate 0 uses the current coefficients, replicate r >= 1 redraws them
    with the seed derived from the label ``spectrum/r``.
    """
    h_grid, gamma, j_min = p["h_grid"], p.get("gamma", 0.05), p.get("j_min", 3)
    window = p.get("window", "cell")
    sp = increasing_spectrum(_leaders(ctx, "spectrum"), h_grid, gamma, j_min, window=window)
    rows = sp.to_rows()
    reps = int(p.get("replicates", 1))
    D = sp.D_leq.copy()
    if reps > 1:
        base = ctx.coeffs.params
        for r in range(1, reps):
            params = replace(base, seed=rng.derive_seed(ctx.seed, f"spectrum/{r}"))
            lf = compute_leaders(synthesize(ctx.spec, params, ctx.max_scale, threads=ctx.threads))
            D += increasing_spectrum(lf, h_grid, gamma, j_min, window=window).D_leq
        D /= reps
        for row, d in zip(rows, D):
            row["D_leq_mean"] = float(d)
    checks = []
    if "slope" in e:
        err = float(np.max(np.abs(D - e["slope"] * sp.h_grid)))
        checks.append(_check("spectrum", err <= e.get("tol", 0.1), max_error=err, replicates=reps))
    return StepResult({"D_leq": D, "replicates": reps}, rows=rows, checks=checks)


def op_limsup(ctx, p, e):
    coeffs = ctx.need("coeffs", "limsup")
    deltas = p["delta"] if isinstance(p["delta"], list) else [p["delta"]]
    rows = []
    for d in deltas:
        est = limsup_cover(coeffs, d, p["J1"], p.get("j_resolution"))
        rows.append({"delta": d, "dim_hat": est.dim_hat, "target": coeffs.params.eta / d, "marked": est.marked.count})
    checks = []
    if "tol" in e:
        err = max(abs(r["dim_hat"] - r["target"]) for r in rows)
        checks.append(_check("limsup_dim", err <= e["tol"], max_error=err))
    return StepResult({"dim_hat": [r["dim_hat"] for r in rows]}, rows=rows, checks=checks)


def op_bc_audit(ctx, p, e):
    coeffs = ctx.need("coeffs", "bc_audit")
    a = audit_prop_BC(coeffs, ctx.need("qc", "bc_audit"), p["n"], _leaders(ctx, "bc_audit"), p.get("ell0"))
    checks = []
    if "max_fraction" in e:
        checks.append(_check("bc_fraction", a.fraction() <= e["max_fraction"], fraction=a.fraction()))
    return StepResult({"safe_fraction": a.fraction()}, payload=a.to_dict(), checks=checks)


def op_mdp(ctx, p, e):
    mode = p.get("mode", "construction")
    if mode == "uniform":
        tree = uniform_tree(ctx.spec, p["depth"], ctx.max_scale)
    else:
        qc = ctx.need("qc", "mdp")
        coeffs = ctx.need("coeffs", "mdp")
        s = p.get("s", (1 + qc.b) ** p.get("q0", 1))
        try:
            tree = build_generations(qc, coeffs, s, ell=p.get("ell"), n=p.get("n"), p1=p.get("p1"))
        except ConstructionError as exc:
            payload = {"constructed": False, "error": str(exc), "node": exc.node, "shortfall": exc.shortfall}
            checks = [_check("construction", False)] if e.get("construct") else []
            return StepResult({"constructed": False}, payload=payload, checks=checks)
    tree.validate()
    ctx.tree = tree
    cert = certify(tree, p.get("depth_check"), p.get("c", 1.0), p.get("tau_min"))
    payload = {"constructed": True, "tree": tree.to_dict(), "certificate": cert.to_dict()}
    checks = [_check("self_check", cert.self_check)]
    if "t_min" in e:
        t_min = e["t_min"]
        if t_min == "auto":
            t_min = tree.params["expected_t"] - e.get("slack", 0.05)
        checks.append(_check("t_certified", cert.t_certified >= t_min, t=cert.t_certified, t_min=t_min))
    if "t" in e:
        checks.append(_check("t_certified", abs(cert.t_certified - e["t"]) <= e.get("tol", 1e-9), t=cert.t_certified))
    return StepResult({"t_certified": cert.t_certified, "shallow": tree.shallow}, payload=payload, checks=checks)


def _keys(*names):
    return set(names)


OPS = {
    "cover": (op_cover, _keys("j"), _keys()),
    "dims": (op_dims, _keys("j_min", "j_max", "step"), _keys("H_hat", "tol")),
    "count_audit": (op_count_audit, _keys("H", "eps", "j_min", "j_max"), _keys("pass")),
    "classify": (op_classify, _keys("j", "beta", "eps", "H"), _keys("pass")),
    "quasicantor": (
        op_quasicantor,
        _keys("J", "b", "H", "eps", "mode", "ell0", "n", "eta", "ell", "max_scale"),
        _keys("pass", "K_within", "skip_first"),
    ),
    "lws": (op_lws, _keys("alpha", "eta", "H", "j_max", "label"), _keys()),
    "rho": (op_rho, _keys(), _keys("value", "tol")),
    "leaders": (op_leaders, _keys("scales"), _keys()),
    "holder": (op_holder, _keys("j_min", "h_cap", "bins"), _keys()),
    "spectrum": (op_spectrum, _keys("h_grid", "gamma", "j_min", "window", "replicates"), _keys("slope", "tol")),
    "limsup": (op_limsup, _keys("delta", "J1", "j_resolution"), _keys("tol")),
    "bc_audit": (op_bc_audit, _keys("n", "ell0"), _keys("max_fraction")),
    "mdp": (
        op_mdp,
        _keys("mode", "depth", "s", "q0", "ell", "n", "p1", "c", "tau_min", "depth_check"),
        _keys("t_min", "slack", "t", "tol", "construct"),
    ),
}


# -- running ----------------------------------------------------------------


@dataclass
class RunResult:
    status: int
    out_dir: Path
    summary: dict
    failed: list


def _sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(scenario, out_dir, seed=None, threads=1, fmt="csv"):
    """Execute ``scenario``; returns a RunResult with exit status 0 or 2."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = scenario.seed if seed is None else int(seed)
    ctx = Context(scenario, seed, threads)
    steps, artifacts, timings, failed = [], [], [], []
    for i, step in enumerate(scenario.plan):
        t0 = time.perf_counter()
        res = OPS[step.op][0](ctx, step.params, step.expect)
        timings.append({"step": i, "op": step.op, "seconds": time.perf_counter() - t0})
        stem = f"{i:02d}_{step.op}"
        if res.text is not None:
            name, body = f"{stem}.{res.suffix or 'txt'}", res.text
        elif res.rows is not None and fmt == "csv":
            name, body = f"{stem}.csv", rows_to_csv(res.rows)
        elif res.rows is not None:
            name, body = f"{stem}.json", dumps(res.rows)
        else:
            name, body = f"{stem}.json", dumps(res.payload)
        (out / name).write_text(body)
        artifacts.append(name)
        for c in res.checks:
            if not c["pass"]:
                failed.append({"step": i, "op": step.op, **c})
        steps.append({"step": i, "op": step.op, "params": step.params, "summary": res.summary, "checks": res.checks})
    summary = {
        "scenario": scenario.name,
        "seed": seed,
        "spec": spec_to_dict(scenario.spec),
        "steps": steps,
        "status": "audit-failure" if failed else "ok",
        "failed_checks": failed,
    }
    (out / "summary.json").write_text(dumps(summary))
    artifacts.append("summary.json")
    manifest = {
        "scenario": scenario.name,
        "seed": seed,
        "threads": threads,
        "format": fmt,
        "scenario_source": scenario.raw,
        "versions": {
            "dyadfrac": __version__,
            "numpy": np.__version__,
            "pyyaml": yaml.__version__,
            "python": platform.python_version(),
        },
        "artifacts": [{"file": a, "sha256": _sha256(out / a), "bytes": (out / a).stat().st_size} for a in artifacts],
        "wall_times": timings,
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return RunResult(2 if failed else 0, out, summary, failed)
