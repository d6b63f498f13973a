"""Disagreement-based oracle: confident learners pseudo-label for unconfident ones."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import Intent
from .lda import RejectedSampleError


@dataclass(frozen=True)
class OracleConfig:
    """Oracle thresholds.

    ``correction_threshold`` is the entropy gate for the ensemble output
    (learners at or above it are left out of the average).
    """

    confident_threshold: float = 0.2
    unconfident_threshold: float = 0.8
    correction_threshold: float = 0.6
    batch_size: int = 200

    def __post_init__(self):
        if not 0.0 <= self.confident_threshold < self.unconfident_threshold <= 1.0:
            raise ValueError("need 0 <= confident_threshold < unconfident_threshold <= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not self.correction_threshold > 0:
            raise ValueError("correction_threshold must be positive")

    @classmethod
    def inert(cls, batch_size: int = 200) -> "OracleConfig":
        """Thresholds under which no learner is ever confident, unconfident or gated out.

        Entropy of a filtered triple can slightly exceed 1, so the correction
        gate is disabled outright rather than set to 1.
        """
        return cls(0.0, 1.0, math.inf, batch_size)


class ObserveResult(NamedTuple):
    buffered_count: int
    update_triggered: bool
    label: Intent | None = None


class UpdateResult(NamedTuple):
    applied: int
    rejected: int
    per_learner: tuple[int, ...]


def agreed_label(filtered, entropies, confident_threshold, unconfident_threshold):
    """Return ``(label, unconfident_indices)`` for one frame, label None when no teaching happens.

    Teaching needs at least one confident learner, all confident learners
    sharing one argmax, and at least one unconfident learner.
    """
    ent = np.asarray(entropies, dtype=float)
    confident = np.flatnonzero(ent < confident_threshold)
    unconfident = np.flatnonzero(ent > unconfident_threshold)
    if confident.size == 0 or unconfident.size == 0:
        return None, unconfident
    # np.argmax returns the first maximum: ties resolve relax < open < close
    votes = np.argmax(np.asarray(filtered)[confident], axis=1)
    if np.any(votes != votes[0]):
        return None, unconfident
    return Intent(int(votes[0])), unconfident


class DisagreementOracle:
    """Per-learner pseudo-label buffers and the batch update trigger.

    Parameters
    ----------
    feature_subsets : list of index arrays
        The views of the ensemble the oracle is bound to.
    config : OracleConfig
    event_log : callable, optional
        Receives one dict per ``buffer``, ``trigger`` and ``update`` event.
    """

    def __init__(self, feature_subsets, config: OracleConfig | None = None,
                 event_log: Callable[[dict], None] | None = None):
        self.feature_subsets = [np.asarray(s, dtype=np.int64) for s in feature_subsets]
        self.config = config or OracleConfig()
        self.event_log = event_log
        self.buffers: list[list[tuple[np.ndarray, Intent]]] = [[] for _ in self.feature_subsets]
        self.total_buffered = 0
        self.n_updates = 0

    def _emit(self, **event):
        if self.event_log is not None:
            self.event_log(event)

    def observe(self, out, x, t: float | None = None) -> ObserveResult:
        """Buffer ``x`` for every unconfident learner when the confident ones agree."""
        cfg = self.config
        label, unconfident = agreed_label(out.filtered, out.entropies,
                                          cfg.confident_threshold, cfg.unconfident_threshold)
        if label is None:
            return ObserveResult(0, False)
        x = np.asarray(x, dtype=float)
        for i in unconfident:
            # copy: later changes to x must not leak into the buffer
            self.buffers[i].append((x[self.feature_subsets[i]].copy(), label))
        n = int(unconfident.size)
        self.total_buffered += n
        self._emit(event="buffer", t=t, label=label.name.lower(),
                   learners=[int(i) for i in unconfident])
        triggered = self.total_buffered >= cfg.batch_size
        if triggered:
            self._emit(event="trigger", t=t, total_buffered=self.total_buffered)
        return ObserveResult(n, triggered, label)

    def apply_update(self, model, t: float | None = None) -> UpdateResult:
        """Fold every buffered sample into its learner, in buffer order, then clear."""
        applied = rejected = 0
        per_learner = []
        for lda, buf in zip(model.learners_, self.buffers):
            done = 0
            for z, label in buf:
                try:
                    lda.update(z, label)
                    done += 1
                except RejectedSampleError:
                    rejected += 1
            if buf:
                lda.refresh()
            per_learner.append(done)
            applied += done
        self.clear()
        self.n_updates += 1
        self._emit(event="update", t=t, applied=applied, rejected=rejected,
                   per_learner=per_learner)
        return UpdateResult(applied, rejected, tuple(per_learner))

    def clear(self):
        for buf in self.buffers:
            buf.clear()
        self.total_buffered = 0
