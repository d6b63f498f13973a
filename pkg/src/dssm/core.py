"""Domain types, standardization and the sliding median filter."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_frames

N_EMG = 8
N_CHANNELS = 11
N_CLASSES = 3
SAMPLE_RATE = 100.0
EMG_CHANNELS = tuple(range(N_EMG))
MECHANICAL_CHANNELS = (8, 9, 10)
CHANNEL_NAMES = tuple(f"emg{i + 1}" for i in range(N_EMG)) + (
    "motor_pos",
    "d_joint",
    "d_pressure",
)

SD_FLOOR = 1e-6
FILTER_WINDOW = 0.25
# timestamps closer than this to the window edge count as on the edge
_TIME_TOL = 1e-9


class Intent(IntEnum):
    """Hand intent. Integer order doubles as the argmax tie-break order."""

    RELAX = 0
    OPEN = 1
    CLOSE = 2


class MotorCommand(IntEnum):
    RETRACT = 0
    EXTEND = 1


class Condition(IntEnum):
    """Data-collection condition, numbered as in the collection protocol."""

    ARM_ON_TABLE_MOTOR_OFF = 1
    ARM_OFF_TABLE_MOTOR_OFF = 2
    ARM_OFF_TABLE_MOTOR_ON = 3

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def from_slug(cls, text: str) -> "Condition":
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"unknown condition {text!r}") from None


class ProbTriple(NamedTuple):
    p_relax: float
    p_open: float
    p_close: float


class RejectedFrameError(ValueError):
    """A frame carried a non-finite channel value."""


@dataclass(frozen=True)
class SensorFrame:
    """One 100 Hz sample of the multimodal sensing suite."""

    t: float
    emg: tuple[float, ...]
    motor_pos: float
    d_joint: float
    d_pressure: float

    def __post_init__(self):
        if len(self.emg) != N_EMG:
            raise ValueError(f"expected {N_EMG} EMG channels, got {len(self.emg)}")
        if not np.all(np.isfinite(self.as_array())) or not np.isfinite(self.t):
            raise RejectedFrameError(f"non-finite value in frame at t={self.t}")

    def as_array(self) -> np.ndarray:
        return np.array([*self.emg, self.motor_pos, self.d_joint, self.d_pressure], dtype=float)

    @classmethod
    def from_array(cls, t: float, values) -> "SensorFrame":
        v = [float(x) for x in values]
        if len(v) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} channels, got {len(v)}")
        return cls(float(t), tuple(v[:N_EMG]), v[8], v[9], v[10])


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-channel z-scoring with a floor on the standard deviation.

    Uses population moments. Fit once on the labeled training set; the
    statistics stay frozen while the classifier adapts.
    """

    def __init__(self, sd_floor: float = SD_FLOOR):
        self.sd_floor = sd_floor

    def fit(self, X, y=None):
        X = check_frames(X)
        self.mean_ = X.mean(axis=0)
        self.scale_ = np.maximum(X.std(axis=0), self.sd_floor)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=float)
        if not np.all(np.isfinite(X)):
            raise RejectedFrameError("non-finite channel value")
        X = check_frames(X, allow_1d=True)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, Z):
        check_is_fitted(self, "mean_")
        return np.asarray(Z, dtype=float) * self.scale_ + self.mean_


def standardize(frame, standardizer: Standardizer) -> np.ndarray:
    """Standardize one frame (a SensorFrame or an 11-vector)."""
    raw = frame.as_array() if isinstance(frame, SensorFrame) else np.asarray(frame, dtype=float)
    return standardizer.transform(raw.reshape(1, -1))[0]


class MedianFilter:
    """Causal component-wise median over a trailing time window.

    The window keeps samples with ``T - window < t <= T``: 25 samples at
    100 Hz. Even counts take the mean of the two middle values. Works on
    arrays of any fixed shape, so one filter can smooth every learner of an
    ensemble at once.
    """

    def __init__(self, window: float = FILTER_WINDOW):
        if window <= 0:
            raise ValueError("window must be positive")
        self.window = window
        self._times: deque[float] = deque()
        self._values: deque[np.ndarray] = deque()

    def __len__(self):
        return len(self._times)

    def reset(self):
        self._times.clear()
        self._values.clear()

    def push(self, p, t: float) -> np.ndarray:
        if self._times and t < self._times[-1]:
            raise ValueError(f"timestamps must be non-decreasing ({t} < {self._times[-1]})")
        self._times.append(float(t))
        self._values.append(np.array(p, dtype=float))
        cutoff = t - self.window + _TIME_TOL
        while self._times[0] <= cutoff:
            self._times.popleft()
            self._values.popleft()
        return np.median(np.stack(self._values), axis=0)


def window_starts(t: np.ndarray, window: float = FILTER_WINDOW) -> np.ndarray:
    """Index of the oldest sample inside each frame's trailing window."""
    t = np.asarray(t, dtype=float)
    return np.searchsorted(t, t - window + _TIME_TOL, side="right")


def median_filter_batch(P: np.ndarray, t: np.ndarray, window: float = FILTER_WINDOW,
                        history: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Apply :class:`MedianFilter` to a whole stream at once.

    ``P`` has shape ``(n, ...)``; ``history`` optionally supplies earlier
    ``(P_prev, t_prev)`` samples that may still fall inside the window of the
    first frames. Output equals pushing every row through a fresh filter
    primed with the history.
    """
    P = np.asarray(P, dtype=float)
    t = np.asarray(t, dtype=float)
    n_hist = 0
    if history is not None and len(history[1]):
        P = np.concatenate([history[0], P])
        t = np.concatenate([history[1], t])
        n_hist = len(history[1])
    if np.any(np.diff(t) < 0):
        raise ValueError("timestamps must be non-decreasing")
    starts = window_starts(t, window)[n_hist:]
    stops = np.arange(n_hist, len(t)) + 1
    out = np.empty((len(stops),) + P.shape[1:])
    if not len(stops):
        return out
    lengths = stops - starts
    width = int(lengths.max())
    full = lengths == width
    if np.any(full) and width <= len(t):
        windows = np.lib.stride_tricks.sliding_window_view(P, width, axis=0)
        # windows[j] covers rows j .. j + width - 1, window axis last
        idx = starts[full]
        out[full] = np.median(windows[idx], axis=-1)
    for j in np.flatnonzero(~full):
        out[j] = np.median(P[starts[j]:stops[j]], axis=0)
    return out
