"""Streaming intent inference with a disagreement-based semi-supervised LDA ensemble."""

from .controller import IntentController, ThresholdConfig, decide_sequence, truth_commands
from .core import (
    CHANNEL_NAMES,
    Condition,
    Intent,
    MedianFilter,
    MotorCommand,
    ProbTriple,
    RejectedFrameError,
    SensorFrame,
    Standardizer,
    median_filter_batch,
)
from .ensemble import EnsembleOutput, RandomSubspaceLDA, aggregate, entropy
from .eval import EvalReport, compare, motor_accuracy, run_method
from .lda import FitError, IncrementalLDA, RejectedSampleError
from .oracle import DisagreementOracle, OracleConfig
from .pipeline import IntentDecoder, Method, ReplayTrace
from .stats import wilcoxon_rank_sum_one_sided
from .synth import DriftEvent, ScenarioSpec, SessionRecord, generate, make_benchmark

__version__ = "0.1.0"

__all__ = [
    "CHANNEL_NAMES", "Condition", "DisagreementOracle", "DriftEvent", "EnsembleOutput",
    "EvalReport", "FitError", "IncrementalLDA", "IntentController", "IntentDecoder", "Intent",
    "MedianFilter", "Method", "MotorCommand", "OracleConfig", "ProbTriple", "RandomSubspaceLDA",
    "RejectedFrameError", "RejectedSampleError", "ReplayTrace", "ScenarioSpec", "SensorFrame",
    "SessionRecord", "Standardizer", "ThresholdConfig", "aggregate", "compare",
    "decide_sequence", "entropy", "generate", "make_benchmark", "median_filter_batch",
    "motor_accuracy", "run_method", "truth_commands", "wilcoxon_rank_sum_one_sided",
]
