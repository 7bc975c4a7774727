"""scikit-learn compatible wrappers around the private mechanisms.

These estimators let the mechanisms slot into sklearn pipelines: ``fit``
consumes a raw data matrix (rows are individuals, clipped to unit norm),
builds the Gram matrix, and runs the selected mechanism; ``transform``
projects data onto the recovered components.

Only ``private_covariance_`` / ``projector_`` and quantities derived from
them are privatized outputs.  The fitted diagnostics (``metrics_``) compare
against the non-private truncation and are for experimentation, not release.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .hermitian import eigh
from .mechanism import (
    DataMatrix,
    PrivacyParams,
    complex_gaussian_mechanism,
    covariance_from_rows,
    privacy_time,
    real_gaussian_mechanism,
    subspace_mechanism,
)
from .randmat import RngStream


def _resolve_params(epsilon, delta, noise_time) -> PrivacyParams:
    if noise_time is not None:
        return PrivacyParams.with_noise_time(noise_time)
    return privacy_time(epsilon, delta)


class PrivateLowRankCovariance(TransformerMixin, BaseEstimator):
    """Rank-k covariance approximation under (epsilon, delta) privacy.

    Parameters
    ----------
    n_components : target rank k.
    epsilon, delta : privacy budget; ignored when noise_time is given.
    noise_time : direct noise-time override (testing hook, not private).
    mechanism : "complex" (default) or "real" Gaussian noise.
    clip : rescale rows with norm > 1 down to the unit sphere.
    random_state : seed for the noise stream.
    """

    def __init__(
        self,
        n_components: int = 1,
        epsilon: float = 1.0,
        delta: float = 1e-5,
        noise_time: float | None = None,
        mechanism: str = "complex",
        clip: bool = True,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.epsilon = epsilon
        self.delta = delta
        self.noise_time = noise_time
        self.mechanism = mechanism
        self.clip = clip
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        data = DataMatrix.from_rows(X, clip=self.clip)
        m = covariance_from_rows(data)
        params = _resolve_params(self.epsilon, self.delta, self.noise_time)
        rng = RngStream(self.random_state, 0)
        if self.mechanism == "complex":
            result = complex_gaussian_mechanism(m, self.n_components, params, rng)
        elif self.mechanism == "real":
            result = real_gaussian_mechanism(m, self.n_components, params, rng)
        else:
            raise ValueError(f"mechanism must be 'complex' or 'real', got {self.mechanism!r}")
        self.n_features_in_ = X.shape[1]
        self.covariance_ = m.real_part()
        self.private_covariance_ = np.array(result.Y)
        self.noise_time_ = params.T
        self.metrics_ = result.metrics
        self.gap_assumption_ = result.gap_assumption_holds
        dec = eigh(self.private_covariance_)
        k = self.n_components
        self.eigenvalues_ = dec.values[:k].copy()
        self.components_ = dec.vectors[:, :k].real.T.copy()
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return X @ self.components_.T

    def get_covariance(self):
        check_is_fitted(self, "private_covariance_")
        return self.private_covariance_.copy()


class PrivateSubspaceProjector(TransformerMixin, BaseEstimator):
    """Private rank-k principal subspace recovery.

    ``fit`` stores the rank-k projector onto the top eigenvectors of the
    noised Gram matrix; ``transform`` projects rows onto the subspace basis.
    """

    def __init__(
        self,
        n_components: int = 1,
        epsilon: float = 1.0,
        delta: float = 1e-5,
        noise_time: float | None = None,
        ensemble: str = "gue",
        clip: bool = True,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.epsilon = epsilon
        self.delta = delta
        self.noise_time = noise_time
        self.ensemble = ensemble
        self.clip = clip
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        m = covariance_from_rows(DataMatrix.from_rows(X, clip=self.clip))
        params = _resolve_params(self.epsilon, self.delta, self.noise_time)
        rng = RngStream(self.random_state, 0)
        projector = subspace_mechanism(m, self.n_components, params, self.ensemble, rng)
        self.n_features_in_ = X.shape[1]
        self.noise_time_ = params.T
        self.projector_ = projector.entries.copy()
        # components span the best real subspace of the (possibly complex)
        # projector: eigenvectors of its real part, which is symmetric
        real_proj = (self.projector_.real + self.projector_.real.T) / 2.0
        dec = eigh(real_proj)
        self.components_ = dec.vectors[:, : self.n_components].real.T.copy()
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return X @ self.components_.T
