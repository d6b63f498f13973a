"""Offline comparison of the four methods on synthetic benchmarks."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .controller import ThresholdConfig, decide_sequence, truth_commands
from .pipeline import IntentDecoder, Method, ReplayTrace
from .stats import wilcoxon_rank_sum_one_sided
from .synth import BenchmarkSet, ScenarioSpec, make_benchmark

ALL_METHODS = tuple(Method)
REPORT_FORMAT = "dssm-report"
REPORT_VERSION = 1


class MethodError(RuntimeError):
    """Training or replay failed for one method."""


def motor_accuracy(predicted, truth_labels) -> float:
    """Fraction of frames whose motor command matches the ground-truth command."""
    predicted = np.asarray(predicted)
    truth_labels = np.asarray(truth_labels)
    if predicted.shape != truth_labels.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth_labels.shape}")
    if predicted.size == 0:
        raise ValueError("empty sequence")
    return float(np.mean(predicted == truth_commands(truth_labels)))


def train_decoder(method, bench: BenchmarkSet, seed: int, **params) -> IntentDecoder:
    method = Method(method)
    train = bench.train_complete if method is Method.SE_FULL else bench.train_abbrev
    try:
        return IntentDecoder(method=method.value, random_state=seed, **params).fit(
            train.X, train.labels)
    except Exception as exc:
        raise MethodError(f"{method.value}: {exc}") from exc


def replay_method(method, bench: BenchmarkSet, seed: int, **params) -> list[ReplayTrace]:
    """Train one method and replay every test session; model state resets per session."""
    decoder = train_decoder(method, bench, seed, **params)
    return [decoder.replay(s.X, s.t) for s in bench.tests]


def run_method(method, bench: BenchmarkSet, seed: int, thresholds=None, **params) -> list[float]:
    """Per-session motor-command accuracies of one method."""
    if thresholds is not None:
        params["thresholds"] = tuple(ThresholdConfig(*thresholds).as_array())
    traces = replay_method(method, bench, seed, **params)
    return [motor_accuracy(tr.commands, s.labels) for tr, s in zip(traces, bench.tests)]


def threshold_grid(values=(0.4, 0.5, 0.6, 0.7)) -> list[tuple[float, float, float]]:
    return [tuple(float(v) for v in combo) for combo in itertools.product(values, repeat=3)]


@dataclass
class EvalReport:
    """Accuracies per (method, seed, session), summaries and p-values against DSSM."""

    config: dict
    seeds: list
    accuracies: dict
    thresholds: dict = field(default_factory=dict)

    def pooled(self, method) -> np.ndarray:
        per_seed = self.accuracies[Method(method).value]
        return np.array([a for seed in self.seeds for a in per_seed[str(seed)]])

    @property
    def methods(self) -> list:
        """Evaluated methods in canonical order, independent of serialization order."""
        return [m.value for m in ALL_METHODS if m.value in self.accuracies]

    def summary(self) -> dict:
        out = {}
        for m in self.accuracies:
            acc = self.pooled(m)
            out[m] = {"mean": float(acc.mean()), "sd": float(acc.std(ddof=1)) if acc.size > 1 else 0.0}
        return out

    def p_values(self) -> dict:
        ref = Method.DSSM_PARTIAL.value
        if ref not in self.accuracies:
            return {}
        a = self.pooled(ref)
        return {m: wilcoxon_rank_sum_one_sided(a, self.pooled(m))
                for m in self.accuracies if m != ref}

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "config": self.config,
            "seeds": list(self.seeds),
            "accuracies": self.accuracies,
            "thresholds": self.thresholds,
            "summary": self.summary(),
            "p_values": self.p_values(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError(f"not a {REPORT_FORMAT} document")
        if doc.get("version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version {doc.get('version')!r}")
        return cls(doc["config"], doc["seeds"], doc["accuracies"], doc.get("thresholds", {}))

    def render_table(self) -> str:
        """Plain-text table: methods by replicate, mean ± sd in percent, p-values."""
        summary, pvals = self.summary(), self.p_values()
        head = ["Method"] + [f"seed {s}" for s in self.seeds] + ["Average", "p vs DSSM"]
        rows = []
        for m in self.methods:
            cells = [m]
            for s in self.seeds:
                acc = np.array(self.accuracies[m][str(s)]) * 100
                sd = acc.std(ddof=1) if acc.size > 1 else 0.0
                cells.append(f"{acc.mean():.1f} ± {sd:.1f}")
            cells.append(f"{summary[m]['mean'] * 100:.1f}")
            cells.append(f"{pvals[m]:.1e}" if m in pvals else "---")
            rows.append(cells)
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
        fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
        lines = [fmt(head), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows]
        if self.thresholds:
            lines.append("")
            for m in (m for m in self.methods if m in self.thresholds):
                th = self.thresholds[m]
                lines.append(f"{m}: thresholds relax/open/close = {th}")
        return "\n".join(lines) + "\n"


def _evaluate_seed(job):
    seed, methods, params, grid, drift, base = job
    bench = make_benchmark(seed, drift=drift, base=base)
    truth = [s.labels for s in bench.tests]
    out = {}
    for m in methods:
        traces = replay_method(m, bench, seed, **params)
        per_grid = []
        for th in grid:
            cfg = ThresholdConfig(*th)
            per_grid.append([motor_accuracy(decide_sequence(tr.aggregate, cfg)[1], y)
                             for tr, y in zip(traces, truth)])
        out[Method(m).value] = per_grid
    return seed, out


def compare(seeds, methods=ALL_METHODS, params: dict | None = None, grid=None, drift=True,
            base: ScenarioSpec | None = None, workers: int = 1) -> EvalReport:
    """Run every method on one benchmark per seed and pool the session accuracies.

    With a threshold ``grid``, each method reports the grid point with the
    best mean accuracy over all replicates.
    """
    params = dict(params or {})
    default = tuple(float(v) for v in params.pop("thresholds", (0.5, 0.5, 0.5)))
    grid = [default] if grid is None else [tuple(float(v) for v in g) for g in grid]
    methods = [Method(m).value for m in methods]
    seeds = sorted(int(s) for s in seeds)
    jobs = [(s, methods, params, grid, drift, base) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_evaluate_seed, jobs))
    else:
        results = dict(map(_evaluate_seed, jobs))

    accuracies, chosen = {}, {}
    for m in methods:
        means = [np.mean([a for s in seeds for a in results[s][m][g]]) for g in range(len(grid))]
        best = int(np.argmax(means))
        accuracies[m] = {str(s): [float(a) for a in results[s][m][best]] for s in seeds}
        if len(grid) > 1:
            chosen[m] = list(grid[best])
    config = {
        "methods": methods,
        "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(params.items())},
        "thresholds": list(default),
        "grid": [list(g) for g in grid] if len(grid) > 1 else None,
        "drift": drift,
        "scenario": "custom" if base is not None else "default",
    }
    return EvalReport(config, seeds, accuracies, chosen)
