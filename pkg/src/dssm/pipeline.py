"""End-to-end intent decoder: standardize, ensemble, oracle, controller."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .controller import IntentController, ThresholdConfig, decide_sequence
from .core import EMG_CHANNELS, FILTER_WINDOW, Standardizer, median_filter_batch
from .ensemble import EnsembleOutput, RandomSubspaceLDA, aggregate, entropy
from .oracle import DisagreementOracle, OracleConfig
from .synth import Protocol
from .validation import check_frames

# frames scored per vectorized chunk while waiting for the next oracle trigger
_LOOKAHEAD = 1024


class Method(str, Enum):
    SE_FULL = "se-full"
    SE_PARTIAL = "se-partial"
    SM_PARTIAL = "sm-partial"
    DSSM_PARTIAL = "dssm-partial"

    @property
    def train_protocol(self) -> Protocol:
        return Protocol.COMPLETE if self is Method.SE_FULL else Protocol.ABBREVIATED

    @property
    def emg_only(self) -> bool:
        return self in (Method.SE_FULL, Method.SE_PARTIAL)

    @property
    def adaptive(self) -> bool:
        return self is Method.DSSM_PARTIAL


@dataclass
class ReplayTrace:
    """Per-frame outputs of one session replay."""

    t: np.ndarray
    aggregate: np.ndarray
    entropies: np.ndarray
    fallback: np.ndarray
    intents: np.ndarray
    commands: np.ndarray
    n_buffered: int = 0
    n_buffer_events: int = 0
    n_triggers: int = 0
    n_rejected: int = 0


class IntentDecoder(ClassifierMixin, BaseEstimator):
    """The four comparison methods behind one estimator.

    ``fit`` learns the standardizer and the ensemble from labeled raw
    frames. ``replay`` streams a session through the filters, the oracle
    (adaptive method only) and the controller, working on a copy so the
    fitted model itself never drifts between sessions.

    Parameters
    ----------
    method : str
        One of ``se-full``, ``se-partial``, ``sm-partial``, ``dssm-partial``.
    confident_threshold, unconfident_threshold, correction_threshold, batch_size
        Oracle settings (used by ``dssm-partial`` only).
    gate_denominator : {"count", "eta"}
        Divisor of the entropy-gated average.
    thresholds : tuple of 3 floats
        Controller thresholds for relax, open, close.
    """

    def __init__(self, method="dssm-partial", n_learners=None, confident_threshold=0.2,
                 unconfident_threshold=0.8, correction_threshold=0.6, batch_size=200,
                 gate_denominator="count", thresholds=(0.5, 0.5, 0.5), window=FILTER_WINDOW,
                 shrinkage=0.05, reg=1e-6, priors="frequency", random_state=0):
        self.method = method
        self.n_learners = n_learners
        self.confident_threshold = confident_threshold
        self.unconfident_threshold = unconfident_threshold
        self.correction_threshold = correction_threshold
        self.batch_size = batch_size
        self.gate_denominator = gate_denominator
        self.thresholds = thresholds
        self.window = window
        self.shrinkage = shrinkage
        self.reg = reg
        self.priors = priors
        self.random_state = random_state

    @property
    def method_(self) -> Method:
        return Method(self.method)

    def oracle_config(self) -> OracleConfig:
        return OracleConfig(self.confident_threshold, self.unconfident_threshold,
                            self.correction_threshold, self.batch_size)

    def threshold_config(self) -> ThresholdConfig:
        return ThresholdConfig(*self.thresholds)

    def _make_ensemble(self) -> RandomSubspaceLDA:
        m = self.method_
        common = dict(window=self.window, shrinkage=self.shrinkage, reg=self.reg,
                      priors=self.priors, random_state=self.random_state,
                      gate_denominator=self.gate_denominator)
        if m.emg_only:
            return RandomSubspaceLDA(n_learners=1, features=EMG_CHANNELS, **common)
        if m.adaptive:
            return RandomSubspaceLDA(n_learners=self.n_learners, aggregation="gated",
                                     gate_threshold=self.correction_threshold, **common)
        return RandomSubspaceLDA(n_learners=self.n_learners, aggregation="mean", **common)

    def fit(self, X, y):
        self.oracle_config()
        self.threshold_config()
        X = check_frames(X)
        self.standardizer_ = Standardizer().fit(X)
        self.ensemble_ = self._make_ensemble().fit(self.standardizer_.transform(X), y)
        self.classes_ = self.ensemble_.classes_
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "ensemble_")
        return self.ensemble_.predict_proba(self.standardizer_.transform(X))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def replay(self, X, t, event_log=None) -> ReplayTrace:
        """Stream one session of raw frames; exact, vectorized between oracle updates."""
        check_is_fitted(self, "ensemble_")
        Z = self.standardizer_.transform(X)
        t = np.asarray(t, dtype=float)
        if len(t) != len(Z):
            raise ValueError("timestamps and frames differ in length")
        if np.any(np.diff(t) < 0):
            raise ValueError("timestamps must be non-decreasing")
        model = copy.deepcopy(self.ensemble_).reset()
        if not self.method_.adaptive:
            F = median_filter_batch(model.raw_proba(Z), t, self.window)
            E = entropy(F)
            agg, fb = aggregate(F, E, rule=model.aggregation, threshold=model.gate_threshold,
                                denominator=model.gate_denominator)
            intents, commands = decide_sequence(agg, self.threshold_config())
            return ReplayTrace(t, agg, E, fb, intents, commands)
        return self._replay_adaptive(model, Z, t, event_log)

    def _replay_adaptive(self, model, Z, t, event_log):
        cfg = self.oracle_config()
        oracle = DisagreementOracle(model.feature_subsets_, cfg, event_log)
        n, eta = len(Z), model.n_learners_
        P_all = np.empty((n, eta, 3))
        F_all = np.empty((n, eta, 3))
        E_all = np.empty((n, eta))
        hist = int(np.ceil(self.window * 1000))  # generous bound on frames inside a window
        pos = n_buffered = n_events = n_triggers = n_rejected = 0
        while pos < n:
            end = min(n, pos + _LOOKAHEAD)
            P = model.raw_proba(Z[pos:end])
            lo = max(0, pos - hist)
            F = median_filter_batch(P, t[pos:end], self.window,
                                    history=(P_all[lo:pos], t[lo:pos]))
            E = entropy(F)
            conf = E < cfg.confident_threshold
            unconf = E > cfg.unconfident_threshold
            votes = np.argmax(F, axis=2)
            vmin = np.where(conf, votes, 3).min(axis=1)
            vmax = np.where(conf, votes, -1).max(axis=1)
            teach = conf.any(axis=1) & unconf.any(axis=1) & (vmin == vmax)
            counts = np.where(teach, unconf.sum(axis=1), 0)
            cum = oracle.total_buffered + np.cumsum(counts)
            hits = np.flatnonzero(cum >= cfg.batch_size)
            stop = hits[0] + 1 if hits.size else len(P)
            for j in np.flatnonzero(teach[:stop]):
                res = oracle.observe(EnsembleOutput(P[j], F[j], E[j], F[j]), Z[pos + j], t[pos + j])
                n_buffered += res.buffered_count
                n_events += 1
            P_all[pos:pos + stop] = P[:stop]
            F_all[pos:pos + stop] = F[:stop]
            E_all[pos:pos + stop] = E[:stop]
            if hits.size:
                n_triggers += 1
                n_rejected += oracle.apply_update(model, t[pos + stop - 1]).rejected
            pos += stop
        agg, fb = aggregate(F_all, E_all, rule="gated", threshold=cfg.correction_threshold,
                            denominator=model.gate_denominator)
        intents, commands = decide_sequence(agg, self.threshold_config())
        self.last_model_ = model
        return ReplayTrace(t, agg, E_all, fb, intents, commands, n_buffered, n_events,
                           n_triggers, n_rejected)

    def replay_stepwise(self, X, t, event_log=None) -> ReplayTrace:
        """Frame-by-frame reference replay: step, observe, update, decide."""
        check_is_fitted(self, "ensemble_")
        Z = self.standardizer_.transform(X)
        model = copy.deepcopy(self.ensemble_).reset()
        adaptive = self.method_.adaptive
        oracle = (DisagreementOracle(model.feature_subsets_, self.oracle_config(), event_log)
                  if adaptive else None)
        ctrl = IntentController(self.threshold_config())
        aggs, ents, fbs, intents, commands = [], [], [], [], []
        n_buffered = n_events = n_triggers = n_rejected = 0
        for z, ti in zip(Z, t):
            out = model.step(z, ti)
            if adaptive:
                res = oracle.observe(out, z, ti)
                n_buffered += res.buffered_count
                n_events += res.buffered_count > 0
                if res.update_triggered:
                    n_triggers += 1
                    n_rejected += oracle.apply_update(model, ti).rejected
            intent, command = ctrl.decide(np.clip(out.aggregate, 0.0, 1.0))
            aggs.append(out.aggregate)
            ents.append(out.entropies)
            fbs.append(out.fallback)
            intents.append(int(intent))
            commands.append(int(command))
        if adaptive:
            self.last_model_ = model
        return ReplayTrace(np.asarray(t, dtype=float), np.array(aggs), np.array(ents),
                           np.array(fbs), np.array(intents), np.array(commands),
                           n_buffered, n_events, n_triggers, n_rejected)
