"""scikit-learn style wrappers.

Only two pieces of the library have a natural fit/predict shape:
fitting the mild constant of a map from sample points, and assigning points
to the charts of a uniform subdivision.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .charts import subdivision_factor
from .mildness import MildParams, fitted_A_star, verify_certificate


class MildnessEstimator(BaseEstimator):
    """Fit the smallest A with |f^(nu)| <= B A^|nu| |nu|!^(1+C) on sample points.

    ``jet_fn`` maps an (n, m) array of points to a batched Jet of the function.
    After ``fit``, ``predict`` tells per point whether the certificate holds
    with the declared ``A`` (or the fitted one if none was declared).
    """

    def __init__(self, jet_fn=None, order=4, B=1.0, C=0.0, A=None):
        self.jet_fn = jet_fn
        self.order = order
        self.B = B
        self.C = C
        self.A = A

    def _validate(self, X):
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if np.any(X <= 0) or np.any(X >= 1):
            raise ValueError("sample points must lie in the open unit cube")
        if self.jet_fn is None:
            raise ValueError("jet_fn is required")
        if self.order < 0 or self.B <= 0 or self.C < 0:
            raise ValueError("need order >= 0, B > 0, C >= 0")
        return X

    def _ratios(self, X, A):
        jet = self.jet_fn(X, self.order)
        absd = np.abs(jet.derivatives())
        degs = jet.degrees()
        lf = np.array([math.lgamma(d + 1) for d in degs]) * (1 + self.C)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            bound = np.exp(math.log(self.B) + degs * math.log(A) + lf)
            return absd / bound

    def fit(self, X, y=None):
        X = self._validate(X)
        jet = self.jet_fn(X, self.order)
        self.A_star_ = fitted_A_star(np.abs(jet.derivatives()), jet.degrees(), self.B, self.C)
        A = self.A if self.A is not None else max(self.A_star_, 1e-300)
        rep = verify_certificate(jet, MildParams(A, self.B, self.C, self.order), X, self.order)
        self.report_ = rep
        self.worst_ratio_ = rep.worst_ratio
        self.passed_ = rep.passed
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "A_star_")
        X = self._validate(X)
        A = self.A if self.A is not None else max(self.A_star_, 1e-300)
        return np.all(self._ratios(X, A) <= 1 + 1e-9, axis=-1)

    def score(self, X, y=None):
        return float(np.mean(self.predict(X)))


class ChartCover(TransformerMixin, BaseEstimator):
    """Uniform N^m subdivision of (0,1)^m with N from the mild constant.

    ``predict`` returns the row-major chart index of each point, ``transform``
    its local coordinates in that chart's unit cube.
    """

    def __init__(self, A=1.0, r=1, norm_mode="crnorm"):
        self.A = A
        self.r = r
        self.norm_mode = norm_mode

    def fit(self, X=None, y=None):
        self.N_ = subdivision_factor(self.A, self.r, self.norm_mode)
        if X is not None:
            X = check_array(X, dtype=float)
            self.n_features_in_ = X.shape[1]
        self.m_ = getattr(self, "n_features_in_", None)
        return self

    def _cells(self, X):
        check_is_fitted(self, "N_")
        X = check_array(X, dtype=float)
        if self.m_ is not None and X.shape[1] != self.m_:
            raise ValueError(f"expected {self.m_} features, got {X.shape[1]}")
        if np.any(X < 0) or np.any(X > 1):
            raise ValueError("points must lie in the closed unit cube")
        # points on a shared face go to the upper cube, except at x = 1
        return X, np.minimum(np.floor(X * self.N_), self.N_ - 1).astype(int)

    def predict(self, X):
        X, k = self._cells(X)
        return np.ravel_multi_index(k.T, (self.N_,) * X.shape[1])

    def transform(self, X):
        X, k = self._cells(X)
        return X * self.N_ - k

    @property
    def n_charts_(self) -> int:
        check_is_fitted(self, "N_")
        return self.N_ ** (self.m_ or 1)
