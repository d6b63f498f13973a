"""Threshold-and-hold intent decisions and the intent to motor-command mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_CLASSES, Intent, MotorCommand
from .validation import check_triple


@dataclass(frozen=True)
class ThresholdConfig:
    relax: float = 0.5
    open: float = 0.5
    close: float = 0.5

    def __post_init__(self):
        for v in self.as_array():
            if not 0.0 <= v <= 1.0:
                raise ValueError("thresholds must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.relax, self.open, self.close], dtype=float)


def command_for(intent: Intent, last_command: MotorCommand) -> MotorCommand:
    if intent == Intent.OPEN:
        return MotorCommand.RETRACT
    if intent == Intent.CLOSE:
        return MotorCommand.EXTEND
    return last_command


class IntentController:
    """Holds the last intent and command between frames.

    An intent is accepted only when its probability strictly exceeds its
    threshold; otherwise the previous intent is kept. Relax keeps sending
    the previous command. The device starts relaxed with the tendon extended.
    """

    def __init__(self, thresholds: ThresholdConfig | None = None,
                 initial_intent: Intent = Intent.RELAX,
                 initial_command: MotorCommand = MotorCommand.EXTEND):
        self.thresholds = thresholds or ThresholdConfig()
        self.initial_intent = Intent(initial_intent)
        self.initial_command = MotorCommand(initial_command)
        self.reset()

    def reset(self):
        self.last_intent = self.initial_intent
        self.last_command = self.initial_command

    def decide(self, agg) -> tuple[Intent, MotorCommand]:
        p = check_triple(agg, "agg")
        best = int(np.argmax(p))
        if p[best] > self.thresholds.as_array()[best]:
            self.last_intent = Intent(best)
        self.last_command = command_for(self.last_intent, self.last_command)
        return self.last_intent, self.last_command


def _forward_fill(values: np.ndarray, valid: np.ndarray, initial: int) -> np.ndarray:
    idx = np.where(valid, np.arange(values.size), -1)
    np.maximum.accumulate(idx, out=idx)
    return np.where(idx >= 0, values[np.maximum(idx, 0)], initial)


def decide_sequence(probs, thresholds: ThresholdConfig | None = None,
                    initial_intent: Intent = Intent.RELAX,
                    initial_command: MotorCommand = MotorCommand.EXTEND):
    """Vectorized :meth:`IntentController.decide` over a whole stream.

    Returns integer arrays ``(intents, commands)``.
    """
    P = np.asarray(probs, dtype=float).reshape(-1, N_CLASSES)
    L = (thresholds or ThresholdConfig()).as_array()
    best = np.argmax(P, axis=1)
    accepted = P[np.arange(len(P)), best] > L[best]
    intents = _forward_fill(best, accepted, int(initial_intent))
    acts = intents != Intent.RELAX
    cmd = np.where(intents == Intent.OPEN, MotorCommand.RETRACT, MotorCommand.EXTEND)
    commands = _forward_fill(cmd, acts, int(initial_command))
    return intents.astype(np.int64), commands.astype(np.int64)


def truth_commands(labels, initial_command: MotorCommand = MotorCommand.EXTEND) -> np.ndarray:
    """Motor commands implied by ground-truth intents, via the same controller on one-hot input."""
    labels = np.asarray(labels, dtype=np.int64)
    one_hot = np.eye(N_CLASSES)[labels]
    _, commands = decide_sequence(one_hot, ThresholdConfig(), Intent.RELAX, initial_command)
    return commands
