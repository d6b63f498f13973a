"""Synthetic multimodal sessions with labeled protocol phases and injected drift.

Frames are drawn from class-conditional Gaussians (the generative family
LDA assumes) with AR(1) noise, plus per-condition offsets, a device-state
model for motor-on conditions, and drift offsets expressed in channel
standard-deviation units.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .core import (
    EMG_CHANNELS,
    N_CHANNELS,
    N_CLASSES,
    SAMPLE_RATE,
    Condition,
    Intent,
    SensorFrame,
)

MOTOR_POS, D_JOINT, D_PRESSURE = 8, 9, 10
ALL_CONDITIONS = (
    Condition.ARM_ON_TABLE_MOTOR_OFF,
    Condition.ARM_OFF_TABLE_MOTOR_OFF,
    Condition.ARM_OFF_TABLE_MOTOR_ON,
)
PHASES = (Intent.RELAX, Intent.OPEN, Intent.RELAX, Intent.CLOSE)


class GenerationError(ValueError):
    pass


class Protocol(str, Enum):
    COMPLETE = "complete"
    ABBREVIATED = "abbreviated"


class DriftKind(str, Enum):
    ABRUPT_SHIFT = "abrupt_shift"
    GRADUAL_RAMP = "gradual_ramp"


class DeviceState(str, Enum):
    EXTENDED = "extended"
    RETRACTING = "retracting"
    RETRACTED = "retracted"
    EXTENDING = "extending"


@dataclass(frozen=True)
class DriftEvent:
    """Mean offset switched on at ``start`` (abrupt) or ramped in over ``duration``.

    ``magnitude`` holds one offset per affected channel, in units of that
    channel's reference standard deviation.
    """

    kind: DriftKind
    start: float
    duration: float
    affected_channels: tuple[int, ...]
    magnitude: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", DriftKind(self.kind))
        object.__setattr__(self, "affected_channels", tuple(int(c) for c in self.affected_channels))
        mags = np.broadcast_to(np.asarray(self.magnitude, dtype=float),
                               (len(self.affected_channels),))
        object.__setattr__(self, "magnitude", tuple(float(m) for m in mags))
        if not self.affected_channels:
            raise GenerationError("drift must affect at least one channel")
        if len(set(self.affected_channels)) != len(self.affected_channels):
            raise GenerationError("duplicate drift channel")
        if min(self.affected_channels) < 0 or max(self.affected_channels) >= N_CHANNELS:
            raise GenerationError("drift channel out of range")
        if self.start < 0 or self.duration < 0:
            raise GenerationError("drift start and duration must be non-negative")
        if self.kind is DriftKind.ABRUPT_SHIFT and self.duration != 0:
            raise GenerationError("abrupt shifts have zero duration")
        if self.kind is DriftKind.GRADUAL_RAMP and self.duration <= 0:
            raise GenerationError("gradual ramps need a positive duration")

    def weight(self, t: np.ndarray) -> np.ndarray:
        """Fraction of the full offset active at each time."""
        if self.kind is DriftKind.ABRUPT_SHIFT:
            return (t >= self.start).astype(float)
        return np.clip((t - self.start) / self.duration, 0.0, 1.0)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "start": self.start,
            "duration": self.duration,
            "affected_channels": list(self.affected_channels),
            "magnitude": list(self.magnitude),
        }


def default_class_means() -> np.ndarray:
    # EMG 1-4 extensors, 5-8 flexors; mechanical channels from voluntary motion
    means = np.zeros((N_CLASSES, N_CHANNELS))
    ext = [1.4, 1.1, 0.9, 0.7]
    flex = [1.4, 1.1, 0.9, 0.7]
    means[Intent.OPEN, 0:4] = ext
    means[Intent.OPEN, 4:8] = [0.3, 0.2, 0.3, 0.1]
    means[Intent.CLOSE, 4:8] = flex
    means[Intent.CLOSE, 0:4] = [0.3, 0.2, 0.3, 0.1]
    means[Intent.OPEN, D_JOINT] = 1.0
    means[Intent.CLOSE, D_JOINT] = -1.0
    means[Intent.OPEN, D_PRESSURE] = -0.6
    means[Intent.CLOSE, D_PRESSURE] = 1.0
    return means


def default_class_sds() -> np.ndarray:
    return np.ones((N_CLASSES, N_CHANNELS))


def default_condition_offsets() -> dict:
    on_table = np.zeros(N_CHANNELS)
    on_table[list(EMG_CHANNELS)] = [-0.4, -0.3, -0.4, -0.2, 0.2, 0.1, 0.2, 0.1]
    return {
        Condition.ARM_ON_TABLE_MOTOR_OFF: on_table,
        Condition.ARM_OFF_TABLE_MOTOR_OFF: np.zeros(N_CHANNELS),
        Condition.ARM_OFF_TABLE_MOTOR_ON: np.zeros(N_CHANNELS),
    }


def default_device_offsets() -> dict:
    """Offsets (sd units) per device state; motor position ramps during motion."""
    moving_open = np.zeros(N_CHANNELS)
    moving_open[D_JOINT] = 2.0
    moving_open[D_PRESSURE] = -1.0
    moving_close = np.zeros(N_CHANNELS)
    moving_close[D_JOINT] = -2.0
    moving_close[D_PRESSURE] = 2.0
    return {
        DeviceState.EXTENDED: np.zeros(N_CHANNELS),
        DeviceState.RETRACTING: moving_open,
        DeviceState.RETRACTED: np.zeros(N_CHANNELS),
        DeviceState.EXTENDING: moving_close,
    }


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to generate one session deterministically."""

    seed: int = 0
    class_means: np.ndarray = field(default_factory=default_class_means)
    class_sds: np.ndarray = field(default_factory=default_class_sds)
    conditions: tuple = ALL_CONDITIONS
    reps_per_condition: int = 4
    phase_duration: float = 3.0
    motor_delay: float = 1.0
    motor_travel: float = 1.0
    retracted_position: float = 3.0
    condition_offsets: dict = field(default_factory=default_condition_offsets)
    device_offsets: dict = field(default_factory=default_device_offsets)
    noise_ar: float = 0.0
    drift: tuple = ()
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "class_means", np.asarray(self.class_means, dtype=float))
        object.__setattr__(self, "class_sds", np.asarray(self.class_sds, dtype=float))
        object.__setattr__(self, "conditions", tuple(Condition(c) for c in self.conditions))
        object.__setattr__(self, "drift", tuple(
            d if isinstance(d, DriftEvent) else DriftEvent(**d) for d in self.drift))

    @property
    def protocol(self) -> Protocol:
        if self.conditions == (Condition.ARM_OFF_TABLE_MOTOR_ON,):
            return Protocol.ABBREVIATED
        return Protocol.COMPLETE

    @property
    def reference_sd(self) -> np.ndarray:
        return self.class_sds.mean(axis=0)

    @property
    def duration(self) -> float:
        return len(self.conditions) * self.reps_per_condition * len(PHASES) * self.phase_duration

    def validate(self):
        if self.class_means.shape != (N_CLASSES, N_CHANNELS):
            raise GenerationError(f"class_means must be {N_CLASSES}x{N_CHANNELS}")
        if self.class_sds.shape != (N_CLASSES, N_CHANNELS) or np.any(self.class_sds <= 0):
            raise GenerationError(f"class_sds must be {N_CLASSES}x{N_CHANNELS} and positive")
        if not np.all(np.isfinite(self.class_means)) or not np.all(np.isfinite(self.class_sds)):
            raise GenerationError("class parameters must be finite")
        if not self.conditions:
            raise GenerationError("at least one condition is required")
        if self.reps_per_condition < 1:
            raise GenerationError("reps_per_condition must be positive")
        if self.sample_rate <= 0 or self.phase_duration * self.sample_rate < 1:
            raise GenerationError("phase must span at least one frame")
        if self.motor_delay < 0 or self.motor_travel <= 0:
            raise GenerationError("motor timing must be non-negative with positive travel")
        if self.motor_delay + self.motor_travel > self.phase_duration:
            raise GenerationError("tendon motion must finish within its phase")
        if not 0.0 <= self.noise_ar < 1.0:
            raise GenerationError("noise_ar must lie in [0, 1)")
        return self


@dataclass
class SessionRecord:
    """A labeled stream of raw frames, stored column-wise.

    ``X`` is (n, 11) raw channel values, ``labels`` holds :class:`Intent`
    codes and ``conditions`` :class:`Condition` codes per frame.
    """

    t: np.ndarray
    X: np.ndarray
    labels: np.ndarray
    conditions: np.ndarray
    protocol: Protocol
    sample_rate: float = SAMPLE_RATE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.protocol = Protocol(self.protocol)
        n = len(self.t)
        if not (self.X.shape == (n, N_CHANNELS) and len(self.labels) == n
                and len(self.conditions) == n):
            raise ValueError("frames, labels and condition tags must have equal length")

    def __len__(self):
        return len(self.t)

    def frames(self):
        for t, row in zip(self.t, self.X):
            yield SensorFrame.from_array(t, row)

    def equals(self, other: "SessionRecord") -> bool:
        return (
            self.protocol == other.protocol
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.conditions, other.conditions)
        )


def protocol_timeline(spec: ScenarioSpec):
    """Labels, condition tags, device states and motor travel fraction per frame.

    Purely a function of the protocol timing; never of the seed.
    """
    per_phase = int(round(spec.phase_duration * spec.sample_rate))
    tau = np.arange(per_phase) / spec.sample_rate
    start_move = spec.motor_delay
    end_move = spec.motor_delay + spec.motor_travel
    moving = (tau >= start_move) & (tau < end_move)
    frac_moving = np.clip((tau - start_move) / spec.motor_travel, 0.0, 1.0)

    labels, conds, states, position = [], [], [], []
    for cond in spec.conditions:
        motor_on = cond is Condition.ARM_OFF_TABLE_MOTOR_ON
        retracted = False
        for _ in range(spec.reps_per_condition):
            for intent in PHASES:
                labels.append(np.full(per_phase, int(intent)))
                conds.append(np.full(per_phase, int(cond)))
                if not motor_on:
                    states.append(np.full(per_phase, DeviceState.EXTENDED.value, dtype=object))
                    position.append(np.zeros(per_phase))
                    continue
                if intent is Intent.OPEN and not retracted:
                    st = np.where(tau < start_move, DeviceState.EXTENDED.value,
                                  np.where(moving, DeviceState.RETRACTING.value,
                                           DeviceState.RETRACTED.value))
                    states.append(st.astype(object))
                    position.append(frac_moving.copy())
                    retracted = True
                elif intent is Intent.CLOSE and retracted:
                    st = np.where(tau < start_move, DeviceState.RETRACTED.value,
                                  np.where(moving, DeviceState.EXTENDING.value,
                                           DeviceState.EXTENDED.value))
                    states.append(st.astype(object))
                    position.append(1.0 - frac_moving)
                    retracted = False
                else:
                    rest = DeviceState.RETRACTED if retracted else DeviceState.EXTENDED
                    states.append(np.full(per_phase, rest.value, dtype=object))
                    position.append(np.full(per_phase, 1.0 if retracted else 0.0))
    return (np.concatenate(labels), np.concatenate(conds), np.concatenate(states),
            np.concatenate(position))


def drift_offsets(spec: ScenarioSpec, t: np.ndarray) -> np.ndarray:
    out = np.zeros((len(t), N_CHANNELS))
    ref = spec.reference_sd
    for ev in spec.drift:
        w = ev.weight(t)
        for ch, mag in zip(ev.affected_channels, ev.magnitude):
            out[:, ch] += w * mag * ref[ch]
    return out


def generate(spec: ScenarioSpec) -> SessionRecord:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    labels, conds, states, position = protocol_timeline(spec)
    n = len(labels)
    t = np.arange(n) / spec.sample_rate
    ref = spec.reference_sd

    mean = spec.class_means[labels].copy()
    for cond, offset in spec.condition_offsets.items():
        mask = conds == int(Condition(cond))
        mean[mask] += np.asarray(offset, dtype=float) * ref
    motor_on = conds == int(Condition.ARM_OFF_TABLE_MOTOR_ON)
    for state, offset in spec.device_offsets.items():
        mask = motor_on & (states == DeviceState(state).value)
        mean[mask] += np.asarray(offset, dtype=float) * ref
    mean[:, MOTOR_POS] += position * spec.retracted_position * ref[MOTOR_POS]
    mean += drift_offsets(spec, t)

    white = rng.standard_normal((n, N_CHANNELS))
    a = spec.noise_ar
    if a > 0:
        noise = np.empty_like(white)
        noise[0] = white[0]
        innov = np.sqrt(1.0 - a * a)
        for i in range(1, n):
            noise[i] = a * noise[i - 1] + innov * white[i]
    else:
        noise = white
    X = mean + spec.class_sds[labels] * noise
    return SessionRecord(
        t=t,
        X=X,
        labels=labels.astype(np.int64),
        conditions=conds.astype(np.int64),
        protocol=spec.protocol,
        sample_rate=spec.sample_rate,
        meta={"seed": spec.seed, "drift": [d.to_dict() for d in spec.drift]},
    )


@dataclass
class BenchmarkSet:
    train_complete: SessionRecord
    train_abbrev: SessionRecord
    tests: list
    seed: int
    specs: dict = field(default_factory=dict)


def benchmark_drift(rng: np.random.Generator, duration: float, abrupt_sd: float = 3.0,
                    ramp_sd: float = 2.0, n_abrupt: int = 3, n_ramp: int = 2):
    """EMG-only drift: an abrupt pose-change shift at mid-session and a fatigue ramp."""
    channels = rng.permutation(list(EMG_CHANNELS))
    abrupt_ch = tuple(sorted(int(c) for c in channels[:n_abrupt]))
    ramp_ch = tuple(sorted(int(c) for c in channels[n_abrupt:n_abrupt + n_ramp]))
    signs_a = rng.choice([-1.0, 1.0], size=n_abrupt)
    signs_r = rng.choice([-1.0, 1.0], size=n_ramp)
    return (
        DriftEvent(DriftKind.ABRUPT_SHIFT, 0.5 * duration, 0.0, abrupt_ch,
                   tuple(abrupt_sd * signs_a)),
        DriftEvent(DriftKind.GRADUAL_RAMP, 0.1 * duration, 0.6 * duration, ramp_ch,
                   tuple(ramp_sd * signs_r)),
    )


def make_benchmark(seed: int, drift: bool = True, base: ScenarioSpec | None = None,
                   n_tests: int = 3, abrupt_sd: float = 3.0, ramp_sd: float = 2.0) -> BenchmarkSet:
    """One complete and one abbreviated training session plus drifted complete test sessions."""
    base = base or ScenarioSpec()
    seeds = np.random.SeedSequence(seed).spawn(2 + n_tests)
    draw = lambda s: int(s.generate_state(1)[0])
    complete = replace(base, seed=draw(seeds[0]), conditions=ALL_CONDITIONS, drift=())
    abbrev = replace(base, seed=draw(seeds[1]), conditions=(Condition.ARM_OFF_TABLE_MOTOR_ON,),
                     drift=())
    tests = []
    specs = {"train_complete": complete, "train_abbrev": abbrev}
    for j in range(n_tests):
        s = seeds[2 + j]
        rng = np.random.default_rng(s.spawn(1)[0])
        events = benchmark_drift(rng, base.duration, abrupt_sd, ramp_sd) if drift else ()
        spec = replace(base, seed=draw(s), conditions=ALL_CONDITIONS, drift=events)
        specs[f"test{j}"] = spec
        tests.append(generate(spec))
    return BenchmarkSet(generate(complete), generate(abbrev), tests, seed, specs)
