"""scikit-learn compatible wrappers around the solvers and the dictionary analyzer.

The design matrix ``X`` is the dictionary (``d`` samples by ``n`` atoms) and
``y`` the signal, as in :class:`sklearn.linear_model.OrthogonalMatchingPursuit`.
After ``fit`` the coefficients live in ``coef_`` and the full iteration
trace in ``trace_``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import dictionary as dct
from .pursuit import FwConfig, PursuitConfig, fw_solve, mp_solve, omp_solve


def _as_dictionary(X, normalize: bool) -> dct.Dictionary:
    return dct.new_dictionary(X, normalize=normalize)


class _PursuitRegressor(RegressorMixin, BaseEstimator):
    def _validate(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        return _as_dictionary(X, self.normalize), y

    def _finish(self, trace):
        self.trace_ = trace
        self.coef_ = trace.final_x
        self.n_iter_ = trace.n_iter
        self.n_features_in_ = trace.final_x.size
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_


class FrankWolfeRegressor(_PursuitRegressor):
    """Frank-Wolfe for least squares on the l1 ball of radius ``beta``.

    Parameters
    ----------
    beta : float
        Radius of the l1 ball.
    max_iter : int
        Iteration budget.
    tol : float or None
        Absolute residual norm at which to stop; None means ``1e-10 ||y||``.
    normalize : bool
        Rescale the columns of ``X`` to unit norm instead of rejecting them.
    """

    def __init__(self, beta=1.0, max_iter=1000, tol=None, normalize=False):
        self.beta = beta
        self.max_iter = max_iter
        self.tol = tol
        self.normalize = normalize

    def fit(self, X, y):
        D, y = self._validate(X, y)
        cfg = FwConfig(beta=self.beta, max_iters=self.max_iter, residual_tol=self.tol)
        return self._finish(fw_solve(D, y, cfg))


class MatchingPursuitRegressor(_PursuitRegressor):
    def __init__(self, max_iter=1000, tol=None, normalize=False):
        self.max_iter = max_iter
        self.tol = tol
        self.normalize = normalize

    def fit(self, X, y):
        D, y = self._validate(X, y)
        cfg = PursuitConfig(max_iters=self.max_iter, residual_tol=self.tol)
        return self._finish(mp_solve(D, y, cfg))


class OMPRegressor(_PursuitRegressor):
    def __init__(self, max_iter=1000, tol=None, normalize=False):
        self.max_iter = max_iter
        self.tol = tol
        self.normalize = normalize

    def fit(self, X, y):
        D, y = self._validate(X, y)
        cfg = PursuitConfig(max_iters=self.max_iter, residual_tol=self.tol)
        return self._finish(omp_solve(D, y, cfg))


class DictionaryAnalyzer(TransformerMixin, BaseEstimator):
    """Fit computes coherence, Babel function and ``m*`` of the columns of ``X``.

    ``transform`` returns the absolute correlations ``|X_fit^T v|`` of each
    row vector ``v`` of its input with the fitted atoms, the quantity every
    pursuit step maximizes.
    """

    def __init__(self, m_max=None, normalize=False):
        self.m_max = m_max
        self.normalize = normalize

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.dictionary_ = _as_dictionary(X, self.normalize)
        self.metrics_ = dct.analyze(self.dictionary_, self.m_max)
        self.coherence_ = self.metrics_.coherence
        self.babel_ = self.metrics_.babel
        self.m_star_ = self.metrics_.m_star
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "dictionary_")
        V = check_array(X, dtype=np.float64)
        if V.shape[1] != self.dictionary_.d:
            raise ValueError(f"expected vectors of length {self.dictionary_.d}")
        return np.abs(V @ self.dictionary_.data)

    def erc(self, support):
        check_is_fitted(self, "dictionary_")
        return dct.erc(self.dictionary_, support)
