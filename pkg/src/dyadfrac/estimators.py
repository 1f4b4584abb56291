"""scikit-learn style wrappers around the functional API.

``fit`` takes the object being analysed (a fractal spec, coefficients or a
generation tree) in place of a data matrix, so the classes support
``get_params`` / ``set_params`` / ``clone`` and fitted attributes end in an
underscore.  They are thin: all the work lives in the functional modules.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DEFAULT_MAX_SCALE
from .dimension import estimate_box_dim
from .leaders import compute_leaders, estimate_holder, increasing_spectrum
from .lws import LwsParams, render_haar, rho_hat, synthesize
from .mdp import certify
from .quasicantor import audit_theorem1, build_ladder, extract_K, prune


class BoxDimensionEstimator(BaseEstimator):
    """Box dimension of a fractal spec from cover counts on ``j_min..j_max``."""

    def __init__(self, j_min=2, j_max=20, step=1, max_scale=DEFAULT_MAX_SCALE):
        self.j_min = j_min
        self.j_max = j_max
        self.step = step
        self.max_scale = max_scale

    def fit(self, spec, y=None):
        est = estimate_box_dim(spec, self.j_min, self.j_max, self.step, self.max_scale)
        self.dimension_ = est.H_hat
        self.raw_slope_ = est.raw_slope
        self.residual_ = est.residual
        self.counts_ = dict(est.per_level_counts)
        return self


class QuasiCantorSelector(BaseEstimator):
    """Quasi-Cantor subset of a spec; ``predict`` tells whether points lie in it."""

    def __init__(self, J=8, b=0.5, H=0.5, eps=0.04, mode="recursive", ell0=None, max_scale=24):
        self.J = J
        self.b = b
        self.H = H
        self.eps = eps
        self.mode = mode
        self.ell0 = ell0
        self.max_scale = max_scale

    def fit(self, spec, y=None):
        self.ladder_ = build_ladder(self.J, self.b, self.max_scale)
        self.qc_ = prune(spec, self.ladder_, self.H, self.eps, self.mode, self.max_scale)
        self.K_ = extract_K(self.qc_, self.ell0)
        self.audit_ = audit_theorem1(self.qc_, min(self.K_), self.K_)
        return self

    def predict(self, x):
        """1 where ``x`` falls in a deepest-rung cell of K, else 0."""
        check_is_fitted(self, "K_")
        deepest = self.K_[max(self.K_)]
        x = np.asarray(x, dtype=np.float64)
        k = np.clip(np.floor(x * 2**deepest.j).astype(np.int64), 0, 2**deepest.j - 1)
        inside = (x >= 0) & (x < 1)
        return (deepest.mask[k] & inside).astype(np.int8)


class LacunaryWaveletSeries(BaseEstimator):
    """Random lacunary wavelet series supported on a spec."""

    def __init__(self, alpha=1.0, eta=0.5, H=1.0, j_max=18, seed=0, threads=1, max_scale=DEFAULT_MAX_SCALE):
        self.alpha = alpha
        self.eta = eta
        self.H = H
        self.j_max = j_max
        self.seed = seed
        self.threads = threads
        self.max_scale = max_scale

    def fit(self, spec, y=None):
        params = LwsParams(self.alpha, self.eta, self.H, self.j_max, self.seed)
        self.coefficients_ = synthesize(spec, params, self.max_scale, self.threads)
        self.rho_ = rho_hat(self.coefficients_).slope
        return self

    def transform(self, grid_depth=None):
        """Partial Haar sum on the dyadic grid of depth ``grid_depth``."""
        check_is_fitted(self, "coefficients_")
        depth = self.j_max if grid_depth is None else grid_depth
        return render_haar(self.coefficients_, depth)


class WaveletLeaderSpectrum(BaseEstimator):
    """Increasing spectrum ``h -> D_leq(h)`` estimated from wavelet leaders."""

    def __init__(self, h_grid=(1.0, 1.2, 1.4, 1.6, 1.8), gamma=0.05, j_min=3, window="cell", h_cap=10.0):
        self.h_grid = h_grid
        self.gamma = gamma
        self.j_min = j_min
        self.window = window
        self.h_cap = h_cap

    def fit(self, coeffs, y=None):
        self.leaders_ = compute_leaders(coeffs)
        est = increasing_spectrum(
            self.leaders_, list(self.h_grid), self.gamma, self.j_min, window=self.window, h_cap=self.h_cap
        )
        self.spectrum_ = est
        self.D_leq_ = est.D_leq
        return self

    def transform(self, coeffs=None):
        """Holder exponents on the finest cells (of ``coeffs`` if given)."""
        if coeffs is not None:
            self.fit(coeffs)
        check_is_fitted(self, "leaders_")
        return estimate_holder(self.leaders_, self.j_min, self.h_cap).h


class HolderCertifier(BaseEstimator):
    """Largest exponent ``t`` with ``mu(D) <= c |D|^t`` on dyadic D."""

    def __init__(self, c=1.0, depth=None, tau_min=None):
        self.c = c
        self.depth = depth
        self.tau_min = tau_min

    def fit(self, tree, y=None):
        self.certificate_ = certify(tree, self.depth, self.c, self.tau_min)
        self.t_ = self.certificate_.t_certified
        return self
