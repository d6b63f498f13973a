"""Linear discriminant base learner with closed-form incremental updates."""

from __future__ import annotations

import numpy as np
from scipy import linalg
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .core import N_CHANNELS, N_CLASSES
from .validation import check_feature_indices, check_frames, check_labels


class FitError(ValueError):
    """Training data cannot support an LDA fit."""


class RejectedSampleError(ValueError):
    """An incremental update sample was non-finite; the learner is unchanged."""


def shrink_covariance(cov: np.ndarray, shrinkage: float, reg: float) -> np.ndarray:
    """``(1 - shrinkage) * cov + shrinkage * diag(cov) + reg * I``."""
    d = cov.shape[0]
    out = (1.0 - shrinkage) * cov + shrinkage * np.diag(np.diag(cov)) + reg * np.eye(d)
    return 0.5 * (out + out.T)


class IncrementalLDA(ClassifierMixin, BaseEstimator):
    """Three-class LDA on a fixed view of the 11-channel frame.

    The learner keeps the sufficient statistics needed to fold in new
    labeled samples one at a time (:meth:`update`) without revisiting past
    data. ``covariance_`` is the raw shared covariance that the recurrence
    evolves; predictions use its shrunk version, refactorized lazily after
    updates.

    Parameters
    ----------
    features : array-like of int, optional
        Channel indices this learner sees, strictly increasing. Defaults to
        all 11 channels.
    shrinkage : float
        Weight pulling the covariance toward its diagonal.
    reg : float
        Ridge added to the covariance diagonal.
    priors : {"frequency", "uniform"}
        Class priors from running class counts, or fixed at 1/3.
    """

    def __init__(self, features=None, shrinkage=0.05, reg=1e-6, priors="frequency"):
        self.features = features
        self.shrinkage = shrinkage
        self.reg = reg
        self.priors = priors

    def fit(self, X, y):
        X = check_frames(X)
        y = check_labels(y, X.shape[0])
        if self.priors not in ("frequency", "uniform"):
            raise ValueError(f"unknown priors {self.priors!r}")
        if not 0.0 <= self.shrinkage <= 1.0:
            raise ValueError("shrinkage must lie in [0, 1]")
        idx = check_feature_indices(
            range(N_CHANNELS) if self.features is None else self.features
        )
        Z = X[:, idx]
        d = idx.size
        counts = np.bincount(y, minlength=N_CLASSES)
        missing = [k for k in range(N_CLASSES) if counts[k] == 0]
        if missing:
            raise FitError(f"missing class {missing}")
        if np.any(counts < 2):
            raise FitError(f"need at least 2 samples per class, got counts {counts.tolist()}")
        if Z.shape[0] < d + 1:
            raise FitError(f"need at least {d + 1} samples for {d} features")

        means = np.stack([Z[y == k].mean(axis=0) for k in range(N_CLASSES)])
        centered = Z - means[y]
        # maximum-likelihood pooled covariance (divide by N), the quantity
        # the incremental recurrence propagates
        cov = centered.T @ centered / Z.shape[0]

        self.classes_ = np.arange(N_CLASSES)
        self.features_ = idx
        self.n_features_in_ = N_CHANNELS
        self.means_ = means
        self.covariance_ = 0.5 * (cov + cov.T)
        self.class_counts_ = counts.astype(np.int64)
        self.n_samples_seen_ = int(counts.sum())
        self.n_rejected_ = 0
        self.refresh()
        return self

    @property
    def log_priors_(self) -> np.ndarray:
        check_is_fitted(self, "class_counts_")
        if self.priors == "uniform":
            return np.full(N_CLASSES, -np.log(N_CLASSES))
        return np.log(self.class_counts_ / self.n_samples_seen_)

    def refresh(self):
        """Refactorize the shrunk covariance and rebuild the discriminants."""
        reg_cov = shrink_covariance(self.covariance_, self.shrinkage, self.reg)
        try:
            factor = linalg.cho_factor(reg_cov, lower=True)
        except linalg.LinAlgError as exc:
            raise FitError(f"degenerate covariance: {exc}") from None
        # coef_[k] = Sigma^-1 mu_k
        coef = linalg.cho_solve(factor, self.means_.T).T
        self.coef_ = coef
        self.intercept_ = -0.5 * np.einsum("kd,kd->k", coef, self.means_) + self.log_priors_
        self._stale = False
        return self

    def _ensure_fresh(self):
        check_is_fitted(self, "coef_")
        if self._stale:
            self.refresh()

    def decision_function(self, X):
        self._ensure_fresh()
        X = check_frames(X, allow_1d=True)
        return X[:, self.features_] @ self.coef_.T + self.intercept_

    def predict_proba(self, X):
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def update(self, z, label):
        """Fold one projected, standardized sample into the class statistics.

        ``z`` lives in this learner's feature space (length ``len(features_)``).
        The precision is refreshed lazily on the next prediction.
        """
        check_is_fitted(self, "means_")
        z = np.asarray(z, dtype=float).ravel()
        if z.shape != (self.features_.size,):
            raise ValueError(f"sample has {z.size} features, learner expects {self.features_.size}")
        if not np.all(np.isfinite(z)):
            self.n_rejected_ += 1
            raise RejectedSampleError("non-finite update sample")
        k = int(label)
        if not 0 <= k < N_CLASSES:
            raise ValueError(f"label {label!r} is not an intent")
        n_k = self.class_counts_[k]
        n = self.n_samples_seen_
        mu = self.means_[k]
        dev = z - mu
        self.covariance_ = n / (n + 1) * self.covariance_ + (
            1.0 / (n + 1) * n_k / (n_k + 1)
        ) * np.outer(dev, dev)
        self.means_[k] = (n_k * mu + z) / (n_k + 1)
        self.class_counts_[k] = n_k + 1
        self.n_samples_seen_ = n + 1
        self._stale = True
        return self

    def partial_fit(self, X, y):
        """Sequentially :meth:`update` with full 11-channel rows, then refresh."""
        X = check_frames(X, allow_1d=True)
        y = check_labels(np.atleast_1d(y), X.shape[0])
        for row, label in zip(X[:, self.features_], y):
            self.update(row, label)
        return self.refresh()
