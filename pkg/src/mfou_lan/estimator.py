"""scikit-learn style wrapper around the score pipeline.

Rows of ``X`` are independent paths observed at ``n = X.shape[1]`` equally
spaced times. ``fit`` builds the covariance and score matrices for that n;
``transform`` maps each path to its normalized score vector.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_mesh, check_paths, check_positive
from .likelihood import build_model, regime_scores
from .model import HurstRegime, ModelParams, SamplingScheme, scheme_from_kappa
from .simulate import SimConfig, sample_cholesky
from .spectral import FractionalSumConfig
from .toeplitz import BuildConfig


class MixedFOUScores(TransformerMixin, BaseEstimator):
    """Central sequence of the mixed fractional OU model at a fixed parameter.

    Parameters
    ----------
    sigma, hurst, alpha : float
        Parameter at which scores are evaluated.
    kappa : float or None
        Mesh exponent, delta = n ** -kappa. Ignored when ``delta`` is set.
    delta : float or None
        Explicit mesh.
    k_max : int
        Number of aliasing terms summed before the tail correction.
    tail_correction : bool
    quad_tol : float
        Relative tolerance of the autocovariance quadrature.

    Attributes
    ----------
    params_ : ModelParams
    scheme_ : SamplingScheme
    regime_ : HurstRegime
    model_ : ScoreModel
    fisher_ : ndarray of shape (3, 3)
        Exact finite-n covariance of the transformed scores (H > 3/4), or the
        normalized (sigma, H) trace block padded with the alpha entry otherwise.
    n_features_in_ : int
    """

    def __init__(self, sigma=1.0, hurst=0.8, alpha=1.0, kappa=0.5, delta=None,
                 k_max=2000, tail_correction=True, quad_tol=1e-12):
        self.sigma = sigma
        self.hurst = hurst
        self.alpha = alpha
        self.kappa = kappa
        self.delta = delta
        self.k_max = k_max
        self.tail_correction = tail_correction
        self.quad_tol = quad_tol

    def _build_config(self) -> BuildConfig:
        check_positive("quad_tol", self.quad_tol)
        return BuildConfig(sum_cfg=FractionalSumConfig(int(self.k_max), bool(self.tail_correction)),
                           quad_tol=float(self.quad_tol))

    def _scheme(self, n: int) -> SamplingScheme:
        kappa, delta = check_mesh(n, None if self.delta is not None else self.kappa, self.delta)
        return scheme_from_kappa(n, kappa) if kappa is not None else SamplingScheme(n, delta)

    def fit(self, X, y=None):
        X = check_paths(X)
        n = X.shape[1]
        self.params_ = ModelParams(self.sigma, self.hurst, self.alpha)
        self.scheme_ = self._scheme(n)
        self.regime_ = self.params_.regime
        project = self.regime_ is HurstRegime.SUPERCRITICAL
        self.model_ = build_model(self.params_, self.scheme_, self._build_config(), project=project)
        if project:
            self.fisher_ = self.model_.fisher()
        else:
            s = regime_scores(X[:1], self.params_, self.scheme_, model=self.model_)
            info = np.zeros((3, 3))
            info[:2, :2] = s.block
            info[2, 2] = s.alpha_entry
            self.fisher_ = info
        self.n_features_in_ = n
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_paths(X, self.n_features_in_)
        if self.regime_ is HurstRegime.SUPERCRITICAL:
            return self.model_.central_sequence(X).xi
        return regime_scores(X, self.params_, self.scheme_, model=self.model_).vector

    def raw_scores(self, X):
        """Unnormalized (S_sigma, S_H, S_alpha) per path."""
        check_is_fitted(self, "model_")
        return self.model_.raw_scores(check_paths(X, self.n_features_in_))

    def score_samples(self, X):
        """Exact Gaussian log-likelihood of each path."""
        check_is_fitted(self, "model_")
        return self.model_.loglik(check_paths(X, self.n_features_in_))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=0):
        """Exact paths drawn at the fitted parameter."""
        check_is_fitted(self, "model_")
        if isinstance(random_state, np.random.Generator) or random_state is None:
            random_state = int(np.random.default_rng(random_state).integers(0, 2 ** 63))
        cfg = SimConfig("cholesky", int(random_state))
        return sample_cholesky(self.model_.chol, cfg.seed, reps=int(n_samples))
