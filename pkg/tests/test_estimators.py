import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import oracles
from dyadfrac import (
    BoxDimensionEstimator,
    HolderCertifier,
    LacunaryWaveletSeries,
    QuasiCantorSelector,
    WaveletLeaderSpectrum,
)
from dyadfrac.core import DigitRestricted, FullInterval
from dyadfrac.mdp import uniform_tree

CANTOR = DigitRestricted(2, (0, 3))


@pytest.mark.parametrize(
    "est",
    [
        BoxDimensionEstimator(j_min=4, j_max=16, step=2),
        QuasiCantorSelector(J=8, b=0.5, H=0.5, eps=0.04),
        LacunaryWaveletSeries(eta=0.4, j_max=12, seed=7),
        WaveletLeaderSpectrum(h_grid=(1.0, 1.5)),
        HolderCertifier(c=2.0),
    ],
)
def test_params_and_clone(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    key = next(iter(params))
    est.set_params(**{key: params[key]})


def test_box_dimension():
    est = BoxDimensionEstimator(j_min=2, j_max=20, step=2).fit(CANTOR)
    assert est.dimension_ == pytest.approx(0.5, abs=1e-12)
    assert est.counts_[10] == len(oracles.digit_cover(2, (0, 3), 10))


def test_quasicantor_selector():
    sel = QuasiCantorSelector(J=8, b=0.5, H=0.5, eps=0.04).fit(CANTOR)
    assert sel.audit_.count_pass and sel.audit_.reproduction_pass
    # 1/5 = 0.0303..._4 and 4/5 = 0.3030..._4 are in the set; 1/2 and 0.999 pick up digit 2
    x = [0.0, 0.2, 0.8, 0.5, 0.999, 1.0, -0.1]
    assert sel.predict(x).tolist() == [1, 1, 1, 0, 0, 0, 0]


def test_selector_not_fitted():
    with pytest.raises(NotFittedError):
        QuasiCantorSelector().predict([0.1])


def test_lws_and_spectrum():
    lws = LacunaryWaveletSeries(eta=0.5, j_max=14, seed=2).fit(FullInterval())
    assert 0.3 <= lws.rho_ <= 0.7
    signal = lws.transform()
    assert signal.shape == (2**14,)
    again = LacunaryWaveletSeries(eta=0.5, j_max=14, seed=2, threads=3).fit(FullInterval())
    assert np.array_equal(again.transform(), signal)

    sp = WaveletLeaderSpectrum(h_grid=(1.0, 1.4, 1.8)).fit(lws.coefficients_)
    assert sp.D_leq_.shape == (3,) and np.all(sp.D_leq_[1:] >= sp.D_leq_[:-1])
    h = sp.transform()
    assert h.shape == (2**14,) and h.min() >= 1.0 - 1e-12


def test_holder_certifier():
    assert HolderCertifier().fit(uniform_tree(CANTOR, 12)).t_ == pytest.approx(0.5, abs=1e-6)
