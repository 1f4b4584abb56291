"""Built-in scenarios, keyed by name.

``PRESETS`` is a plain dict so tests (or users) can swap the catalog.
Each entry maps a name to ``{"description": ..., "scenario": {...}}`` where
the scenario mapping has the same schema as a scenario file.
"""

_CANTOR = {"type": "digits", "m": 2, "digits": [0, 3]}

_UNION_KN = {
    "type": "union",
    "components": [
        # dimensions 1 - 1/n for n = 2, 3, 4
        {"carrier": [2, 0], "spec": {"type": "digits", "m": 2, "digits": [0, 3]}},
        {"carrier": [2, 1], "spec": {"type": "digits", "m": 3, "digits": [0, 1, 6, 7]}},
        {"carrier": [1, 1], "spec": {"type": "digits", "m": 4, "digits": [0, 1, 2, 3, 12, 13, 14, 15]}},
    ],
}


def _scenario(name, spec, plan, seed=0):
    return {"schema_version": 1, "name": name, "spec": spec, "seed": seed, "plan": plan}


PRESETS = {
    "jaffard-unit": {
        "description": "LWS on [0,1] (alpha=1, eta=0.5, j_max=18): spectrum should follow 0.5 h on [1, 1.8]",
        "scenario": _scenario(
            "jaffard-unit",
            {"type": "full"},
            [
                {"op": "lws", "params": {"alpha": 1.0, "eta": 0.5, "H": 1.0, "j_max": 18}},
                {"op": "rho", "expect": {"value": 0.5, "tol": 0.07}},
                {
                    "op": "spectrum",
                    "params": {"h_grid": [1.0, 1.2, 1.4, 1.6, 1.8], "replicates": 8},
                    "expect": {"slope": 0.5, "tol": 0.1},
                },
            ],
        ),
    },
    "cantor-half": {
        "description": (
            "Digit-restricted Cantor set {0,3} base 4: covers, box dimension 1/2, count and duplication audits"
        ),
        "scenario": _scenario(
            "cantor-half",
            _CANTOR,
            [
                {"op": "cover", "params": {"j": [2, 4, 8, 12, 16, 20]}},
                {"op": "dims", "params": {"j_min": 2, "j_max": 20, "step": 2}, "expect": {"H_hat": 0.5, "tol": 1e-12}},
                {
                    "op": "count_audit",
                    "params": {"H": 0.5, "eps": 0.3, "j_min": 4, "j_max": 20},
                    "expect": {"pass": True},
                },
                {
                    "op": "classify",
                    "params": {"j": [8, 9, 10, 11, 12], "beta": 1.0, "eps": 0.1, "H": 0.5},
                    "expect": {"pass": True},
                },
            ],
        ),
    },
    "union-kn": {
        "description": (
            "Union of components of dimension 1/2, 2/3, 3/4: K selects the densest, spectrum tracks eta h / alpha"
        ),
        "scenario": _scenario(
            "union-kn",
            _UNION_KN,
            [
                {"op": "dims", "params": {"j_min": 8, "j_max": 20}},
                {
                    "op": "quasicantor",
                    "params": {"J": 6, "b": 0.5, "H": 0.75, "eps": 0.03},
                    "expect": {"K_within": [1, 1]},
                },
                {"op": "lws", "params": {"alpha": 1.0, "eta": 0.5, "H": 0.75, "j_max": 20}},
                {
                    "op": "spectrum",
                    "params": {"h_grid": [1.0, 1.2, 1.4], "replicates": 8},
                    "expect": {"slope": 0.5, "tol": 0.12},
                },
            ],
        ),
    },
    "ifs-overlap-outer": {
        "description": "Overlapping IFS x/3, x/3 + 2/9, x/3 + 2/3: outer covers and box-dimension estimate",
        "scenario": _scenario(
            "ifs-overlap-outer",
            {"type": "ifs", "maps": [["1/3", "0"], ["1/3", "2/9"], ["1/3", "2/3"]]},
            [
                {"op": "cover", "params": {"j": [4, 6, 8, 10, 12, 14, 16]}},
                {"op": "dims", "params": {"j_min": 8, "j_max": 16}},
            ],
        ),
    },
    "quasicantor-audit": {
        "description": "T_l pruning on the Cantor set (J=8, b=0.5, eps=0.04) with the count and reproduction audit",
        "scenario": _scenario(
            "quasicantor-audit",
            _CANTOR,
            [
                {
                    "op": "quasicantor",
                    "params": {"J": 8, "b": 0.5, "H": 0.5, "eps": 0.04, "max_scale": 24},
                    "expect": {"pass": True},
                },
                {"op": "mdp", "params": {"mode": "uniform", "depth": 16}, "expect": {"t": 0.5, "tol": 1e-6}},
            ],
        ),
    },
    "mdp-certify": {
        "description": "Nested-generation measure on [0,1] (H=1, eta=0.8, n=10) with an exact Holder certificate",
        "scenario": _scenario(
            "mdp-certify",
            {"type": "full"},
            [
                {"op": "quasicantor", "params": {"J": 10, "H": 1.0, "n": 10, "eta": 0.8, "ell": 3, "max_scale": 21}},
                {"op": "lws", "params": {"alpha": 1.0, "eta": 0.8, "H": 1.0, "j_max": 21}},
                {"op": "mdp", "params": {"q0": 1, "n": 10}, "expect": {"t_min": "auto", "slack": 0.05}},
            ],
        ),
    },
}


def list_presets():
    """Sorted ``(name, description)`` pairs of the current catalog."""
    return sorted((name, entry["description"]) for name, entry in PRESETS.items())


def get_preset(name):
    if name not in PRESETS:
        avail = ", ".join(sorted(PRESETS)) or "(none)"
        raise KeyError(f"unknown preset {name!r}; available: {avail}")
    return PRESETS[name]["scenario"]
