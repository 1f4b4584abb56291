"""Command-line front end.

Every analysis subcommand builds a one-off scenario and runs it through the
same runner as ``dyadfrac run``, so artifacts, ``summary.json`` and
``manifest.json`` look the same whichever way a run was started.

Exit status: 0 success, 1 error, 2 audit failure.
"""

import argparse
import copy
import sys
from pathlib import Path

import yaml

from . import __version__, presets
from .exceptions import ConstructionError
from .scenario import ScenarioError, load_yaml, run, scenario_from_dict

EXIT_OK, EXIT_ERROR, EXIT_AUDIT = 0, 1, 2


def parse_spec(text):
    """``full``, ``digits:M:d1,d2,...``, ``@path.yaml`` or an inline YAML mapping."""
    text = text.strip()
    if text == "full":
        return {"type": "full"}
    if text.startswith("digits:"):
        try:
            _, m, digits = text.split(":")
            return {"type": "digits", "m": int(m), "digits": [int(d) for d in digits.split(",")]}
        except ValueError:
            raise ScenarioError(f"bad digits spec {text!r}; expected digits:M:d1,d2,...") from None
    if text.startswith("@"):
        return _plain(load_yaml(Path(text[1:]).read_text()))
    return _plain(load_yaml(text))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_plain(v) for v in x]
    return x


def _scenario(name, args, plan):
    return {"schema_version": 1, "name": name, "spec": parse_spec(args.spec), "seed": args.seed or 0, "plan": plan}


def _jm(args, default):
    return default if args.j_max is None else args.j_max


def _lws_step(args, default_j_max=18):
    params = {"alpha": args.alpha, "eta": args.eta, "H": args.H, "j_max": _jm(args, default_j_max)}
    return {"op": "lws", "params": params}


# -- subcommand plans --------------------------------------------------------


def plan_cover(args):
    return _scenario("cover", args, [{"op": "cover", "params": {"j": args.j}}])


def plan_dims(args):
    step = {"op": "dims", "params": {"j_min": args.j_min, "j_max": _jm(args, 20), "step": args.step}}
    return _scenario("dims", args, [step])


def plan_classify(args):
    params = {"j": args.j, "beta": args.beta, "eps": args.eps, "H": args.H}
    return _scenario("classify", args, [{"op": "classify", "params": params}])


def _qc_params(args):
    p = {"J": args.J, "H": args.H, "mode": args.mode, "max_scale": _jm(args, 24)}
    if args.b is not None:
        p["b"] = args.b
        p["eps"] = args.eps
    else:
        p.update({"n": args.n, "eta": args.eta, "ell": args.ell})
        if args.eps is not None:
            p["eps"] = args.eps
    return p


def plan_quasicantor(args):
    if args.b is None and args.n is None:
        raise ScenarioError("give --b (with --eps) or --n/--eta/--ell")
    if args.b is not None and args.eps is None:
        raise ScenarioError("--b needs --eps")
    return _scenario("quasicantor", args, [{"op": "quasicantor", "params": _qc_params(args)}])


def plan_lws(args):
    return _scenario("lws", args, [_lws_step(args), {"op": "rho"}])


def plan_leaders(args):
    return _scenario("leaders", args, [_lws_step(args), {"op": "leaders", "params": {"scales": args.scales}}])


def plan_spectrum(args):
    params = {
        "h_grid": args.h_grid,
        "gamma": args.gamma,
        "j_min": args.j_min,
        "window": args.window,
        "replicates": args.replicates,
    }
    return _scenario("spectrum", args, [_lws_step(args), {"op": "spectrum", "params": params}])


def plan_limsup(args):
    params = {"delta": args.delta, "J1": args.J1}
    return _scenario("limsup", args, [_lws_step(args), {"op": "limsup", "params": params}])


def plan_mdp(args):
    if args.mode == "uniform":
        return _scenario("mdp", args, [{"op": "mdp", "params": {"mode": "uniform", "depth": args.depth}}])
    if args.n is None:
        raise ScenarioError("construction mode needs --n")
    jm = _jm(args, 21)
    qc = {"J": args.J, "H": args.H, "n": args.n, "eta": args.eta, "ell": args.ell, "max_scale": jm}
    lws = {"alpha": args.alpha, "eta": args.eta, "H": args.H, "j_max": jm}
    mdp = {"q0": args.q0, "n": args.n}
    plan = [
        {"op": "quasicantor", "params": qc},
        {"op": "lws", "params": lws},
        {"op": "mdp", "params": mdp, "expect": {"t_min": "auto", "slack": 0.05}},
    ]
    return _scenario("mdp", args, plan)


# -- run / list-presets ------------------------------------------------------


def apply_override(d, assignment):
    """Set a dotted path (``plan.1.params.eta=0.4``) inside a scenario mapping."""
    if "=" not in assignment:
        raise ScenarioError(f"override {assignment!r} is not KEY=VALUE")
    path, value = assignment.split("=", 1)
    keys = path.split(".")
    node = d
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[int(key)]
        else:
            node = node.setdefault(key, {})
    last = keys[-1]
    val = yaml.safe_load(value)
    if isinstance(node, list):
        node[int(last)] = val
    else:
        node[last] = val


def plan_run(args):
    target = args.scenario
    if Path(target).is_file():
        d = load_yaml(Path(target).read_text())
    elif target in presets.PRESETS:
        d = copy.deepcopy(presets.get_preset(target))
    else:
        avail = ", ".join(sorted(presets.PRESETS)) or "(none)"
        raise ScenarioError(f"{target!r} is neither a scenario file nor a preset; available presets: {avail}")
    if args.j_max is not None:
        for step in d.get("plan", []):
            if isinstance(step, dict) and "j_max" in (step.get("params") or {}):
                step["params"]["j_max"] = args.j_max
    for a in args.set or []:
        apply_override(d, a)
    return d


def cmd_list_presets(args):
    for name, desc in presets.list_presets():
        print(f"{name}\t{desc}")
    return EXIT_OK


PLANS = {
    "cover": plan_cover,
    "dims": plan_dims,
    "classify": plan_classify,
    "quasicantor": plan_quasicantor,
    "lws": plan_lws,
    "leaders": plan_leaders,
    "spectrum": plan_spectrum,
    "limsup": plan_limsup,
    "mdp": plan_mdp,
    "run": plan_run,
}


# -- parser ------------------------------------------------------------------


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="top-level seed (default: scenario seed or 0)")
    p.add_argument("--j-max", type=int, default=None, help="deepest scale")
    p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    p.add_argument("--out-dir", default="dyadfrac-out", help="artifact directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="format of tabular artifacts")


def _spec_arg(p):
    p.add_argument("--spec", default="full", help="full | digits:M:d1,d2,... | @file.yaml | inline YAML mapping")


def _lws_args(p, eta=0.5, H=1.0):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=eta)
    p.add_argument("--H", type=float, default=H)


def build_parser():
    parser = argparse.ArgumentParser(prog="dyadfrac", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dyadfrac {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cover", help="dyadic cover counts")
    _spec_arg(p)
    p.add_argument("--j", type=int, nargs="+", required=True)

    p = sub.add_parser("dims", help="box-dimension regression")
    _spec_arg(p)
    p.add_argument("--j-min", type=int, default=2)
    p.add_argument("--step", type=int, default=1)

    p = sub.add_parser("classify", help="duplication classes and cardinality audit")
    _spec_arg(p)
    p.add_argument("--j", type=int, nargs="+", required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--H", type=float, required=True)

    p = sub.add_parser("quasicantor", help="T_l pruning along a scale ladder, with audit")
    _spec_arg(p)
    p.add_argument("--J", type=int, default=8)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--mode", choices=("recursive", "fixed_point"), default="recursive")
    p.add_argument("--n", type=int, default=None, help="derive b from (H + 1/n)/eta with --eta and --ell")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--ell", type=int, default=None)

    p = sub.add_parser("lws", help="synthesize a lacunary wavelet series")
    _spec_arg(p)
    _lws_args(p)

    p = sub.add_parser("leaders", help="wavelet leaders of a synthesized series")
    _spec_arg(p)
    _lws_args(p)
    p.add_argument("--scales", type=int, nargs="+", default=[8])

    p = sub.add_parser("spectrum", help="increasing multifractal spectrum estimate")
    _spec_arg(p)
    _lws_args(p)
    p.add_argument("--h-grid", type=float, nargs="+", default=[1.0, 1.2, 1.4, 1.6, 1.8])
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--j-min", type=int, default=3)
    p.add_argument("--window", choices=("cell", "3lambda"), default="cell")
    p.add_argument("--replicates", type=int, default=1)

    p = sub.add_parser("limsup", help="dimension of the limsup of contracted balls")
    _spec_arg(p)
    _lws_args(p)
    p.add_argument("--delta", type=float, nargs="+", default=[0.6, 0.75, 0.9])
    p.add_argument("--J1", type=int, default=4)

    p = sub.add_parser("mdp", help="nested-generation measure and Holder certificate")
    _spec_arg(p)
    p.add_argument("--mode", choices=("uniform", "construction"), default="uniform")
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--J", type=int, default=10)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--H", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.8)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--ell", type=int, default=3)
    p.add_argument("--q0", type=int, default=1)

    p = sub.add_parser("run", help="run a scenario file or preset")
    p.add_argument("scenario", help="scenario YAML path or preset name")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override, e.g. plan.0.params.eta=0.4")

    sub.add_parser("list-presets", help="print preset names and descriptions")

    for name, sp in sub.choices.items():
        if name != "list-presets":
            _common(sp)
    return parser


def _report(res):
    for st in res.summary["steps"]:
        bits = []
        for k, v in st["summary"].items():
            if isinstance(v, float):
                bits.append(f"{k}={v:.6g}")
            elif isinstance(v, (int, bool, str)):
                bits.append(f"{k}={v}")
        print(f"[{st['step']:02d}] {st['op']}: " + " ".join(bits))
        for c in st["checks"]:
            print(f"     {'PASS' if c['pass'] else 'FAIL'} {c['check']}")
    print(f"artifacts in {res.out_dir}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list-presets":
        return cmd_list_presets(args)
    try:
        if args.threads < 1:
            raise ScenarioError("--threads must be >= 1")
        sc = scenario_from_dict(PLANS[args.command](args))
        res = run(sc, args.out_dir, seed=args.seed, threads=args.threads, fmt=args.format)
    except (ScenarioError, ValueError, KeyError, OSError, ConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _report(res)
    if res.failed:
        for f in res.failed:
            print(f"audit failure: step {f['step']} ({f['op']}) check {f['check']!r}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
