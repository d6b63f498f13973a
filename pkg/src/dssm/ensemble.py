"""Random-subspace ensemble of LDA learners with filtered, entropy-gated output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from .core import FILTER_WINDOW, N_CHANNELS, N_CLASSES, MedianFilter
from .lda import FitError, IncrementalLDA
from .validation import check_feature_indices, check_frames, check_labels

GATE_THRESHOLD = 0.6
_LOG3 = np.log(N_CLASSES)


def entropy(p) -> np.ndarray | float:
    """Base-3 entropy ``-sum(p * log3(p))`` over the last axis, with 0 log 0 = 0.

    Defined for any components in [0, 1], normalized or not.
    """
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    e = terms.sum(axis=-1) / _LOG3
    return float(e) if e.ndim == 0 else e


def aggregate(filtered, entropies=None, rule="mean", threshold=GATE_THRESHOLD,
              denominator="count"):
    """Combine per-learner triples into one ensemble triple.

    ``rule="mean"`` averages every learner. ``rule="gated"`` averages only
    learners with entropy below ``threshold``, dividing by the number of
    qualifying learners (``denominator="count"``) or by the ensemble size
    (``"eta"``); when nobody qualifies, it falls back to the plain mean.

    Works on a single frame ``(eta, 3)`` or a batch ``(n, eta, 3)``.
    Returns ``(aggregate, fallback)``.
    """
    filtered = np.asarray(filtered, dtype=float)
    single = filtered.ndim == 2
    F = filtered[None] if single else filtered
    plain = F.mean(axis=1)
    if rule == "mean":
        agg, fallback = plain, np.zeros(F.shape[0], dtype=bool)
    elif rule == "gated":
        E = entropy(F) if entropies is None else np.asarray(entropies, dtype=float).reshape(F.shape[:2])
        keep = E < threshold
        count = keep.sum(axis=1)
        fallback = count == 0
        total = np.einsum("nl,nlc->nc", keep.astype(float), F)
        if denominator == "count":
            denom = np.maximum(count, 1)
        elif denominator == "eta":
            denom = np.full(F.shape[0], F.shape[1])
        else:
            raise ValueError(f"unknown denominator {denominator!r}")
        agg = np.where(fallback[:, None], plain, total / denom[:, None])
    else:
        raise ValueError(f"unknown aggregation rule {rule!r}")
    if single:
        return agg[0], bool(fallback[0])
    return agg, fallback


@dataclass
class EnsembleOutput:
    """One frame of ensemble output.

    ``raw`` and ``filtered`` are (eta, 3); ``entropies`` is (eta,) and is
    computed on the filtered triples. ``fallback`` reports that the entropy
    gate admitted nobody and every learner was averaged.
    """

    raw: np.ndarray
    filtered: np.ndarray
    entropies: np.ndarray
    aggregate: np.ndarray
    fallback: bool = False


class RandomSubspaceLDA(ClassifierMixin, BaseEstimator):
    """Ensemble of :class:`IncrementalLDA` learners over random channel views.

    With ``features`` given, every learner sees that fixed view (and the
    ensemble defaults to a single learner), which gives the EMG-only
    baselines. Otherwise the ensemble size is drawn uniformly from
    ``[min_learners, max_learners]`` and each view has a uniform size in
    ``[min_features, 11]`` with channels drawn without replacement.

    Frame-by-frame use goes through :meth:`step`, which median-filters each
    learner's output over the trailing ``window`` seconds before
    aggregating. :meth:`predict_proba` aggregates unfiltered outputs row by
    row, for use as an ordinary classifier.
    """

    def __init__(self, n_learners=None, features=None, min_learners=5, max_learners=10,
                 min_features=3, aggregation="mean", gate_threshold=GATE_THRESHOLD,
                 gate_denominator="count", window=FILTER_WINDOW, shrinkage=0.05, reg=1e-6,
                 priors="frequency", random_state=None):
        self.n_learners = n_learners
        self.features = features
        self.min_learners = min_learners
        self.max_learners = max_learners
        self.min_features = min_features
        self.aggregation = aggregation
        self.gate_threshold = gate_threshold
        self.gate_denominator = gate_denominator
        self.window = window
        self.shrinkage = shrinkage
        self.reg = reg
        self.priors = priors
        self.random_state = random_state

    def _draw_subsets(self, rng):
        if self.features is not None:
            view = check_feature_indices(self.features)
            eta = 1 if self.n_learners is None else int(self.n_learners)
            return [view.copy() for _ in range(eta)]
        if not 1 <= self.min_learners <= self.max_learners:
            raise ValueError("need 1 <= min_learners <= max_learners")
        if not 1 <= self.min_features <= N_CHANNELS:
            raise ValueError(f"min_features must lie in [1, {N_CHANNELS}]")
        if self.n_learners is None:
            eta = int(rng.randint(self.min_learners, self.max_learners + 1))
        else:
            eta = int(self.n_learners)
        subsets = []
        for _ in range(eta):
            size = int(rng.randint(self.min_features, N_CHANNELS + 1))
            subsets.append(np.sort(rng.choice(N_CHANNELS, size=size, replace=False)))
        return subsets

    def fit(self, X, y):
        X = check_frames(X)
        y = check_labels(y, X.shape[0])
        if self.n_learners is not None and int(self.n_learners) < 1:
            raise ValueError("n_learners must be at least 1")
        rng = check_random_state(self.random_state)
        subsets = self._draw_subsets(rng)
        learners = []
        for i, idx in enumerate(subsets):
            lda = IncrementalLDA(features=idx, shrinkage=self.shrinkage, reg=self.reg,
                                 priors=self.priors)
            try:
                learners.append(lda.fit(X, y))
            except FitError as exc:
                raise FitError(f"learner {i}: {exc}") from exc
        self.classes_ = np.arange(N_CLASSES)
        self.n_features_in_ = N_CHANNELS
        self.learners_ = learners
        self.feature_subsets_ = [lda.features_ for lda in learners]
        self.n_learners_ = len(learners)
        self.reset()
        return self

    def reset(self):
        """Clear the per-learner filters (call at session boundaries)."""
        self._filter = MedianFilter(self.window)
        return self

    def stacked_coefficients(self):
        """Discriminant weights embedded in the full 11-channel space.

        Returns ``W`` of shape (eta, 3, 11) and ``b`` of shape (eta, 3) so that
        learner ``i`` scores a standardized frame ``x`` as ``W[i] @ x + b[i]``.
        """
        check_is_fitted(self, "learners_")
        W = np.zeros((self.n_learners_, N_CLASSES, N_CHANNELS))
        b = np.zeros((self.n_learners_, N_CLASSES))
        for i, lda in enumerate(self.learners_):
            lda._ensure_fresh()
            W[i][:, lda.features_] = lda.coef_
            b[i] = lda.intercept_
        return W, b

    def raw_proba(self, X) -> np.ndarray:
        """Unfiltered per-learner probabilities, shape (n, eta, 3)."""
        X = check_frames(X, allow_1d=True)
        W, b = self.stacked_coefficients()
        scores = np.einsum("lkc,nc->nlk", W, X) + b
        return softmax(scores, axis=2)

    def predict_proba(self, X):
        agg, _ = aggregate(self.raw_proba(X), rule=self.aggregation,
                           threshold=self.gate_threshold, denominator=self.gate_denominator)
        return agg

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def step(self, x, t: float) -> EnsembleOutput:
        """Process one standardized frame at time ``t``."""
        check_is_fitted(self, "learners_")
        raw = self.raw_proba(np.asarray(x, dtype=float).reshape(1, -1))[0]
        filtered = self._filter.push(raw, t)
        ent = entropy(filtered)
        agg, fallback = aggregate(filtered, ent, rule=self.aggregation,
                                  threshold=self.gate_threshold,
                                  denominator=self.gate_denominator)
        return EnsembleOutput(raw, filtered, ent, agg, fallback)
