import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dyadfrac.core import DigitRestricted, FullInterval
from dyadfrac.exceptions import ConstructionError, DomainError, IncompatibleLadderError, InvalidParameterError
from dyadfrac.leaders import bc_ladder_ratio
from dyadfrac.lws import LwsCoefficients, LwsParams, synthesize
from dyadfrac.mdp import Generation, GenerationTree, _water_fill, build_generations, certify, uniform_tree
from dyadfrac.quasicantor import build_ladder, prune

CANTOR = DigitRestricted(2, (0, 3))

# H = 1, eta = 0.8, n = 10, three rungs per 1 + beta_n step
_, B11 = bc_ladder_ratio(1.0, 0.8, 10, 3)


@pytest.fixture(scope="module")
def qc11():
    return prune(FullInterval(), build_ladder(10, B11, 21), 1.0, B11**2, max_scale=21)


class TestUniform:
    def test_full_tree(self):
        cert = certify(uniform_tree(FullInterval(), 14))
        assert cert.t_certified == pytest.approx(1.0, abs=1e-9) and cert.self_check

    def test_cantor(self):
        cert = certify(uniform_tree(CANTOR, 16))
        assert cert.t_certified == pytest.approx(0.5, abs=1e-6) and cert.self_check

    @pytest.mark.parametrize("m,digits", [(2, (0, 3)), (3, (0, 7)), (2, (0, 1, 3))])
    def test_matches_oracle(self, m, digits):
        tree = uniform_tree(DigitRestricted(m, digits), 8)
        g = tree.deepest
        ref = oracles.mdp_exponent(g.indices.tolist(), g.masses, 8, 1, 8)
        assert certify(tree, tau_min=1).t_certified == pytest.approx(ref, abs=1e-12)

    @given(st.sets(st.integers(0, 7), min_size=1), st.integers(4, 9))
    def test_random_digit_sets(self, digits, depth):
        tree = uniform_tree(DigitRestricted(3, tuple(digits)), depth)
        assert tree.validate()
        g = tree.deepest
        ref = oracles.mdp_exponent(g.indices.tolist(), g.masses, depth, 1, depth)
        cert = certify(tree, tau_min=1)
        assert cert.t_certified == pytest.approx(ref, abs=1e-12) and cert.self_check

    def test_json_roundtrip(self):
        tree = uniform_tree(CANTOR, 8)
        back = GenerationTree.from_dict(json.loads(tree.to_json()))
        assert back.to_json() == tree.to_json()
        assert back.validate()


class TestValidate:
    def _tree(self):
        return uniform_tree(CANTOR, 6)

    def test_mass_leak(self):
        tree = self._tree()
        tree.generations[-1].masses[0] /= 2
        with pytest.raises(AssertionError, match="mass"):
            tree.validate()

    def test_escape(self):
        tree = self._tree()
        g = tree.generations[-1]
        g.indices = g.indices.copy()
        g.indices[0] += 2  # next parent cell over
        with pytest.raises(AssertionError):
            tree.validate()

    def test_nonuniform_split(self):
        tree = GenerationTree(
            [
                Generation(0, np.array([0]), [Fraction(1)]),
                Generation(1, np.array([0, 1]), [Fraction(1, 3), Fraction(2, 3)], np.array([0, 0])),
            ]
        )
        with pytest.raises(AssertionError, match="uniform"):
            tree.validate()


class TestWaterFill:
    @pytest.mark.parametrize(
        "caps,total,expect",
        [
            ([3, 3, 3], 7, [3, 2, 2]),
            ([1, 5, 5], 7, [1, 3, 3]),
            ([2, 2], 3, [2, 1]),
            ([2, 2], 9, [2, 2]),
            ([4, 1, 4], 0, [0, 0, 0]),
        ],
    )
    def test_examples(self, caps, total, expect):
        assert _water_fill(caps, total).tolist() == expect

    @given(st.lists(st.integers(0, 20), min_size=1, max_size=10), st.integers(0, 200))
    def test_properties(self, caps, total):
        out = _water_fill(caps, total)
        caps = np.array(caps)
        assert np.all(out <= caps) and out.sum() == min(total, caps.sum())
        # even: no bin sits more than one above any bin that still has room
        free = out[out < caps]
        if free.size:
            assert out.max() <= free.min() + 1


class TestConstruction:
    def test_certificate_bound(self, qc11):
        c = synthesize(FullInterval(), LwsParams(1.0, 0.8, 1.0, 21, seed=0))
        tree = build_generations(qc11, c, 1 + B11, n=10)
        assert tree.validate() and tree.params["q0"] == 1 and tree.params["ell"] == 3
        cert = certify(tree)
        assert cert.self_check
        assert cert.t_certified >= tree.params["expected_t"] - 0.05

    def test_all_active_s_one(self, qc11):
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.0, 0.8, 1.0, 21))
        tree = build_generations(qc11, c, 1.0, n=10)
        assert tree.params["q0"] == 0 and tree.validate()
        cert = certify(tree)
        assert cert.self_check and cert.t_certified >= tree.params["expected_t"] - 0.05

    def test_all_active_cantor(self):
        _, b = bc_ladder_ratio(0.5, 0.25, 4, 2)
        qc = prune(CANTOR, build_ladder(4, b, 20), 0.5, 0.04, max_scale=20)
        c = LwsCoefficients.full(CANTOR, LwsParams(1.0, 0.25, 0.5, 20))
        tree = build_generations(qc, c, 1.0, ell=2)
        assert tree.validate() and certify(tree).self_check

    def test_shortfall(self, qc11):
        empty = LwsCoefficients(LwsParams(1.0, 0.8, 1.0, 21), {}, FullInterval())
        with pytest.raises(ConstructionError) as info:
            build_generations(qc11, empty, 1 + B11, n=10)
        # first generation at rung j = 10 asks for floor(2^{10 (1 - 6b)}) intervals
        assert info.value.node == (1, 0, 0)
        assert info.value.shortfall == math.floor(2 ** (10 * (1 - 6 * B11)))

    def test_incompatible(self, qc11):
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.0, 0.8, 1.0, 21))
        with pytest.raises(IncompatibleLadderError):
            build_generations(qc11, c, 1.3, n=10)
        with pytest.raises(IncompatibleLadderError):
            build_generations(qc11, c, 1 + B11, n=7)
        with pytest.raises(IncompatibleLadderError):
            build_generations(qc11, c, 1 + B11, b_n=0.2)
        with pytest.raises(DomainError):
            build_generations(qc11, c, (1 + B11) ** 2, ell=1)

    def test_success_rate(self, qc11):
        """Over 16 seeds the construction should rarely fall short, and every
        certificate it produces must clear the bound and self-check."""
        ok = 0
        for s in range(16):
            c = synthesize(FullInterval(), LwsParams(1.0, 0.8, 1.0, 21, seed=s))
            try:
                tree = build_generations(qc11, c, 1 + B11, n=10)
            except ConstructionError:
                continue
            cert = certify(tree)
            assert cert.self_check
            assert cert.t_certified >= tree.params["expected_t"] - 0.05
            ok += 1
        assert ok >= 14


class TestCertify:
    def test_zero_mass(self):
        tree = GenerationTree([Generation(3, np.array([1]), [Fraction(0)])])
        with pytest.raises(DomainError):
            certify(tree)

    def test_depth_checks(self):
        tree = uniform_tree(CANTOR, 6)
        with pytest.raises(DomainError):
            certify(tree, depth=7)
        with pytest.raises(DomainError):
            certify(tree, depth=4, tau_min=5)
        with pytest.raises(InvalidParameterError):
            certify(tree, c=0.0)

    def test_larger_c_raises_t(self):
        tree = uniform_tree(CANTOR, 10)
        assert certify(tree, c=4.0).t_certified > certify(tree).t_certified

    def test_dict(self):
        d = certify(uniform_tree(CANTOR, 8)).to_dict()
        assert set(d) >= {"t_certified", "self_check", "worst_interval", "per_scale"}
        assert len(d["per_scale"]) == 8
