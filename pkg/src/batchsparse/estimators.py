"""Scikit-learn style front door for the batch recovery schemes.

``BatchSparseRecovery`` treats the input matrix as m column signals of
dimension n, runs the selected scheme against it through the measurement
layer, and exposes the sparse approximation plus the measurement bill as
fitted attributes.  ``transform`` re-runs recovery on whatever matrix it is
given (it is a denoising transform, not a learned mapping), so the estimator
composes with pipelines and grid search via the usual get_params/set_params
machinery.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .batch import batch_recover_const, batch_recover_eps
from .measurement import MeasurementOracle
from .primitives import RecoveryConfig


class BatchSparseRecovery(BaseEstimator, TransformerMixin):
    """Recover a km-sparse approximation of a matrix of column signals.

    Parameters
    ----------
    k : int
        Average per-column sparsity budget; the constant-factor scheme's
        output has at most k * m nonzeros.
    algorithm : {"const", "eps"}
        Constant-factor halving scheme, or the two-extra-rounds refinement
        that drives the error toward the optimum.
    eps : float
        Target accuracy of the refinement stage (ignored by "const").
    mode : {"idealized", "sketch"}
        Idealized recovery pays the closed-form measurement cost; sketch
        routes real count-sketch measurements.
    seed : int
        Drives all randomness; identical seeds replay identical runs.
    """

    def __init__(self, k: int = 1, algorithm: str = "const", eps: float = 0.25,
                 mode: str = "idealized", seed: int = 0):
        self.k = k
        self.algorithm = algorithm
        self.eps = eps
        self.mode = mode
        self.seed = seed

    def _run(self, X):
        X = check_array(X, dtype=np.float64)
        if self.algorithm not in ("const", "eps"):
            raise ValueError(f"algorithm must be 'const' or 'eps', got {self.algorithm!r}")
        oracle = MeasurementOracle(X)
        cfg = RecoveryConfig(mode=self.mode, seed=self.seed)
        if self.algorithm == "const":
            estimate, report = batch_recover_const(oracle, self.k, cfg)
        else:
            estimate, report = batch_recover_eps(oracle, self.k, self.eps, cfg)
        return X, estimate, report

    def fit(self, X, y=None):
        X, estimate, report = self._run(X)
        self.n_features_in_ = X.shape[1]
        self.sparse_estimate_ = estimate
        self.estimate_ = estimate.to_dense()
        self.report_ = report
        self.measurements_ = report.ledger["total"]
        self.rounds_ = report.rounds
        return self

    def transform(self, X):
        check_is_fitted(self, "estimate_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("column count differs from fit")
        _, estimate, _ = self._run(X)
        return estimate.to_dense()

    def fit_transform(self, X, y=None):
        self.fit(X, y)
        return self.estimate_.copy()
