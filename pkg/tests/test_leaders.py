import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dyadfrac.core import DigitRestricted, FullInterval
from dyadfrac.exceptions import DomainError, IncompatibleLadderError
from dyadfrac.leaders import (
    audit_prop_BC,
    bc_ladder_ratio,
    compute_leaders,
    estimate_holder,
    holder_level_spectrum,
    increasing_spectrum,
    limsup_cover,
)
from dyadfrac.lws import LwsCoefficients, LwsParams, synthesize
from dyadfrac.quasicantor import build_ladder, prune

CANTOR = DigitRestricted(2, (0, 3))


def random_dense(seed, top, density=0.1):
    rng = np.random.default_rng(seed)
    return [rng.random(2**j) * (rng.random(2**j) < density) for j in range(top + 1)]


class TestLeaders:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force(self, seed):
        dense = random_dense(seed, 12)
        lf = compute_leaders(dense)
        ref = oracles.leaders(dense)
        for j in range(13):
            assert np.array_equal(lf.leaders[j], ref[j])

    def test_lws_input_matches_brute_force(self):
        c = synthesize(FullInterval(), LwsParams(1.0, 0.5, 1.0, 10, seed=4))
        lf = compute_leaders(c)
        ref = oracles.leaders([c.dense(j) for j in range(11)])
        assert all(np.array_equal(a, b) for a, b in zip(lf.leaders, ref))
        assert lf.alpha == 1.0 and lf.support is not None

    def test_single_coefficient(self):
        dense = [np.zeros(2**j) for j in range(7)]
        dense[4][5] = 0.25
        lf = compute_leaders(dense)
        for j in range(7):
            for k in range(2**j):
                inside = j <= 4 and (k - 1) * 2 ** (4 - j) <= 5 < (k + 2) * 2 ** (4 - j)
                assert lf.d(j, k) == (0.25 if inside else 0.0)

    def test_all_zero(self):
        lf = compute_leaders([np.zeros(2**j) for j in range(8)])
        assert all(not d.any() for d in lf.leaders)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            compute_leaders([np.zeros(1), np.zeros(3)])

    def test_truncation_beyond_synthesis(self):
        c = synthesize(FullInterval(), LwsParams(1.0, 0.5, 1.0, 8))
        with pytest.raises(DomainError):
            compute_leaders(c, j_max=9)

    @given(st.integers(0, 2**32 - 1), st.integers(0, 8), st.data())
    def test_monotone_in_data(self, seed, j, data):
        dense = random_dense(seed, 8, 0.3)
        k = data.draw(st.integers(0, 2**j - 1))
        bumped = [d.copy() for d in dense]
        bumped[j][k] += data.draw(st.floats(0.01, 2.0))
        a, b = compute_leaders(dense), compute_leaders(bumped)
        assert all(np.all(y >= x) for x, y in zip(a.leaders, b.leaders))

    @given(st.integers(0, 2**32 - 1))
    def test_nested_monotonicity(self, seed):
        lf = compute_leaders(random_dense(seed, 8, 0.3))
        for j in range(8):
            assert np.all(lf.local_sup[j] >= lf.local_sup[j + 1].reshape(-1, 2).max(axis=1))
            assert np.all(lf.leaders[j] >= lf.local_sup[j])


class TestHolder:
    def test_dense_geometric(self):
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.5, 0.5, 1.0, 12))
        hf = estimate_holder(compute_leaders(c), 3)
        assert np.allclose(hf.h, 1.5, atol=1e-12) and not hf.all_zero.any()

    def test_all_zero_is_capped(self):
        hf = estimate_holder(compute_leaders([np.zeros(2**j) for j in range(9)]), 3, h_cap=7.0)
        assert np.all(hf.h == 7.0) and hf.all_zero.all()

    def test_chain_matches_oracle(self):
        top, alpha, x = 10, 1.0, 300
        dense = [np.zeros(2**j) for j in range(top + 1)]
        for j in range(top + 1):
            dense[j][x >> (top - j)] = 2.0 ** (-alpha * j)
        hf = estimate_holder(compute_leaders(dense), 3)
        ref = oracles.leaders(dense)
        expect = np.full(2**top, np.inf)
        for j in range(3, top + 1):
            with np.errstate(divide="ignore"):
                e = np.where(ref[j] > 0, -np.log2(np.where(ref[j] > 0, ref[j], 1)) / j, 10.0)
            expect = np.minimum(expect, np.repeat(e, 2 ** (top - j)))
        assert np.allclose(hf.h, expect)
        assert hf.h[x] == pytest.approx(alpha)
        assert hf.h.max() > alpha

    def test_j_min_validated(self):
        lf = compute_leaders([np.zeros(2**j) for j in range(6)])
        with pytest.raises(DomainError):
            estimate_holder(lf, 1)
        with pytest.raises(DomainError):
            estimate_holder(lf, 7)

    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 20.0))
    def test_scale_covariance(self, seed, c):
        dense = random_dense(seed, 9, 0.3)
        a = estimate_holder(compute_leaders(dense), 3).h
        b = estimate_holder(compute_leaders([c * d for d in dense]), 3).h
        assert np.all(np.abs(a - b) <= abs(math.log2(c)) / 3 + 1e-12)


class TestSpectrum:
    def test_dense_all_or_nothing(self):
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.0, 0.5, 1.0, 14))
        sp = increasing_spectrum(compute_leaders(c), [0.5, 0.8, 1.0, 1.3], gamma=0.05)
        assert sp.D_leq[0] == -math.inf and sp.D_leq[1] == -math.inf
        assert sp.D_leq[2] == pytest.approx(1.0) and sp.D_leq[3] == pytest.approx(1.0)

    def test_unit_interval_at_h1(self):
        vals = []
        for s in range(8):
            c = synthesize(FullInterval(), LwsParams(1.0, 0.5, 1.0, 18, seed=s))
            vals.append(increasing_spectrum(compute_leaders(c), [1.0]).D_leq[0])
        assert 0.4 <= np.mean(vals) <= 0.6

    def test_rows(self):
        c = synthesize(FullInterval(), LwsParams(1.0, 0.5, 1.0, 12, seed=1))
        rows = increasing_spectrum(compute_leaders(c), [1.0, 1.5]).to_rows()
        assert list(rows[0]) == ["h", "D_leq", "window_lo", "window_hi", "residual"]

    def test_grid_validated(self):
        lf = compute_leaders(random_dense(0, 6))
        with pytest.raises(DomainError):
            increasing_spectrum(lf, [0.0, 1.0])
        with pytest.raises(DomainError):
            increasing_spectrum(lf, [1.0, 12.0])
        with pytest.raises(ValueError):
            increasing_spectrum(lf, [1.0], window="ball")

    @given(
        st.integers(0, 2**16),
        st.lists(st.floats(0.3, 3.0), min_size=1, max_size=6),
        st.sampled_from(["cell", "3lambda"]),
    )
    def test_nondecreasing_and_bounded(self, seed, grid, window):
        c = synthesize(CANTOR, LwsParams(1.0, 0.25, 0.5, 14, seed=seed))
        sp = increasing_spectrum(compute_leaders(c), grid, window=window)
        assert np.all(sp.D_leq[1:] >= sp.D_leq[:-1])
        assert np.all(sp.D_leq <= 1.0)

    def test_level_set_method(self):
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.0, 0.5, 1.0, 12))
        hf = estimate_holder(compute_leaders(c), 3)
        sp = holder_level_spectrum(hf, [0.5, 1.0, 2.0])
        assert sp.D_leq[0] == -math.inf
        assert sp.D_leq[1] == pytest.approx(1.0) and sp.D_leq[2] == pytest.approx(1.0)


class TestLimsup:
    def test_dense_delta_one(self):
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.0, 0.5, 1.0, 12))
        est = limsup_cover(c, 1.0, 4)
        assert est.dim_hat == pytest.approx(1.0)
        assert est.marked.count == 2**12

    def test_no_actives_is_sentinel(self):
        c = LwsCoefficients(LwsParams(1.0, 0.5, 1.0, 12), {2: [1]})
        est = limsup_cover(c, 0.8, 4)
        assert est.dim_hat == -math.inf and est.marked.count == 0

    def test_eta_over_delta(self):
        vals = []
        for s in range(8):
            c = synthesize(FullInterval(), LwsParams(1.0, 0.5, 1.0, 20, seed=s))
            vals.append(limsup_cover(c, 0.75, 4).dim_hat)
        assert abs(np.mean(vals) - 0.5 / 0.75) <= 0.1

    def test_validation(self):
        c = LwsCoefficients(LwsParams(1.0, 0.5, 1.0, 8), {})
        with pytest.raises(DomainError):
            limsup_cover(c, 0.5, 8)
        with pytest.raises(ValueError):
            limsup_cover(c, 1.5, 2)

    @given(st.integers(0, 2**16), st.floats(0.3, 1.0), st.floats(0.3, 1.0), st.integers(0, 8))
    def test_inclusions(self, seed, d1, d2, J1):
        c = synthesize(FullInterval(), LwsParams(1.0, 0.5, 1.0, 12, seed=seed))
        lo, hi = sorted((d1, d2))
        # larger balls for smaller delta; later tails are subsets
        assert limsup_cover(c, hi, J1).marked.issubset(limsup_cover(c, lo, J1).marked)
        assert limsup_cover(c, lo, J1 + 2).marked.issubset(limsup_cover(c, lo, J1).marked)


class TestBCAudit:
    H, ETA, N, ELL = 1.0, 0.5, 4, 2

    def _ladder(self, top):
        _, b = bc_ladder_ratio(self.H, self.ETA, self.N, self.ELL)
        return prune(FullInterval(), build_ladder(4, b, top), self.H, 0.05, max_scale=top)

    def test_ladder_ratio(self):
        beta, b = bc_ladder_ratio(1.0, 0.5, 4, 2)
        assert beta == 1.5 and (1 + b) ** 2 == pytest.approx(2.5)

    def test_dense_has_no_violations(self):
        qc = self._ladder(16)
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.0, self.ETA, self.H, 16))
        a = audit_prop_BC(c, qc, self.N)
        assert a.violations == [] and a.ell == self.ELL
        assert sum(r["checked"] for r in a.rows) > 0

    def test_forced_zero_subtree_flagged(self):
        qc = self._ladder(16)
        dense = LwsCoefficients.full(FullInterval(), LwsParams(1.0, self.ETA, self.H, 16))
        j0, k0 = qc.rungs[1], 5
        active = {}
        for j in dense.scales:
            act = dense.active[j]
            if j >= j0:
                act = act[(act >> (j - j0)) != k0]
            active[j] = act
        c = LwsCoefficients(dense.params, active, dense.spec)
        a = audit_prop_BC(c, qc, self.N)
        flagged = {(v["j"], v["k"]) for v in a.violations}
        expected = {
            (j, k) for j in qc.rungs[1 : qc.n_pruned_rungs] for k in range(k0 << (j - j0), (k0 + 1) << (j - j0))
        }
        assert flagged == expected

    def test_incompatible(self):
        c = LwsCoefficients.full(FullInterval(), LwsParams(1.0, self.ETA, self.H, 16))
        qc = prune(FullInterval(), build_ladder(4, 0.5, 16), 1.0, 0.05, max_scale=16)
        with pytest.raises(IncompatibleLadderError):
            audit_prop_BC(c, qc, self.N)
        with pytest.raises(IncompatibleLadderError):
            audit_prop_BC(c, self._ladder(26), self.N)
        _, b = bc_ladder_ratio(self.H, self.ETA, self.N, self.ELL)
        qc_half = prune(CANTOR, build_ladder(4, b, 16), 0.5, 0.04, max_scale=16)
        with pytest.raises(IncompatibleLadderError):
            audit_prop_BC(c, qc_half, self.N)
