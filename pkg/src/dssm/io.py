"""Session, model and scenario files, plus the oracle event log.

Session files are comma-separated text with a ``#``-prefixed header; model
files and reports are JSON. Every file names its format and version, and
readers refuse versions they do not know.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import yaml

from .core import CHANNEL_NAMES, N_CHANNELS, Condition, Intent
from .ensemble import RandomSubspaceLDA
from .lda import IncrementalLDA
from .core import Standardizer
from .synth import DeviceState, DriftEvent, Protocol, ScenarioSpec, SessionRecord

SESSION_FORMAT = "dssm-session"
SESSION_VERSION = 1
MODEL_FORMAT = "dssm-model"
MODEL_VERSION = 1

_LABEL_NAMES = [i.name.lower() for i in Intent]


class FormatError(ValueError):
    """A file does not follow its declared format."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedVersionError(FormatError):
    pass


def _segments(conditions: np.ndarray) -> list[dict]:
    segs = []
    if not len(conditions):
        return segs
    edges = np.flatnonzero(np.diff(conditions)) + 1
    starts = np.concatenate([[0], edges])
    stops = np.concatenate([edges, [len(conditions)]])
    for a, b in zip(starts, stops):
        segs.append({"condition": Condition(int(conditions[a])).slug, "start": int(a),
                     "stop": int(b)})
    return segs


def write_session(record: SessionRecord, path) -> None:
    path = Path(path)
    lines = [
        f"# format: {SESSION_FORMAT}",
        f"# version: {SESSION_VERSION}",
        f"# sample_rate: {record.sample_rate!r}",
        f"# protocol: {record.protocol.value}",
        f"# channels: {','.join(CHANNEL_NAMES)}",
        f"# segments: {json.dumps(_segments(record.conditions))}",
        f"# meta: {json.dumps(record.meta, sort_keys=True)}",
        ",".join(["t", *CHANNEL_NAMES, "label", "condition"]),
    ]
    for t, row, label, cond in zip(record.t, record.X, record.labels, record.conditions):
        values = ",".join(repr(float(v)) for v in row)
        lines.append(f"{float(t)!r},{values},{_LABEL_NAMES[label]},{Condition(int(cond)).slug}")
    path.write_text("\n".join(lines) + "\n")


def read_session(path) -> SessionRecord:
    header: dict[str, str] = {}
    t, X, labels, conds = [], [], [], []
    expected_cols = None
    row = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition(":")
                if not sep:
                    raise FormatError(f"malformed header line {line!r}", lineno)
                header[key.strip()] = value.strip()
                continue
            if expected_cols is None:
                _check_session_header(header, lineno)
                cols = line.split(",")
                if len(cols) - 3 != N_CHANNELS:
                    raise FormatError(
                        f"channel-count mismatch: header names {len(cols) - 3} channels, "
                        f"expected {N_CHANNELS}", lineno)
                expected_cols = len(cols)
                continue
            row += 1
            fields = line.split(",")
            if len(fields) != expected_cols:
                raise FormatError(
                    f"row {row}: channel-count mismatch, {len(fields) - 3} channels "
                    f"(expected {N_CHANNELS})", lineno)
            try:
                ti = float(fields[0])
                values = [float(v) for v in fields[1:1 + N_CHANNELS]]
            except ValueError as exc:
                raise FormatError(f"row {row}: {exc}", lineno) from None
            if t and not ti > t[-1]:
                raise FormatError(f"row {row}: non-monotone timestamp {ti!r} after {t[-1]!r}",
                                  lineno)
            try:
                labels.append(_LABEL_NAMES.index(fields[-2]))
                conds.append(int(Condition.from_slug(fields[-1])))
            except ValueError as exc:
                raise FormatError(f"row {row}: {exc}", lineno) from None
            t.append(ti)
            X.append(values)
    if expected_cols is None:
        _check_session_header(header, None)
        raise FormatError("missing column header")
    try:
        meta = json.loads(header.get("meta", "{}"))
        protocol = Protocol(header["protocol"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad header: {exc}") from None
    return SessionRecord(
        t=np.array(t, dtype=float),
        X=np.array(X, dtype=float).reshape(-1, N_CHANNELS),
        labels=np.array(labels, dtype=np.int64),
        conditions=np.array(conds, dtype=np.int64),
        protocol=protocol,
        sample_rate=float(header["sample_rate"]),
        meta=meta,
    )


def _check_session_header(header, lineno):
    if header.get("format") != SESSION_FORMAT:
        raise FormatError(f"not a {SESSION_FORMAT} file", lineno)
    if header.get("version") != str(SESSION_VERSION):
        raise UnsupportedVersionError(f"unsupported session version {header.get('version')!r}",
                                      lineno)
    for key in ("sample_rate", "protocol", "channels"):
        if key not in header:
            raise FormatError(f"header is missing {key!r}", lineno)
    if len(header["channels"].split(",")) != N_CHANNELS:
        raise FormatError(f"channel-count mismatch in header: expected {N_CHANNELS}", lineno)


# models ---------------------------------------------------------------------

def model_to_dict(decoder) -> dict:
    ens = decoder.ensemble_
    learners = []
    for lda in ens.learners_:
        learners.append({
            "features": lda.features_.tolist(),
            "means": lda.means_.tolist(),
            "covariance": lda.covariance_.tolist(),
            "class_counts": lda.class_counts_.tolist(),
            "n_samples_seen": int(lda.n_samples_seen_),
        })
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": _jsonable(decoder.get_params()),
        "standardizer": {
            "mean": decoder.standardizer_.mean_.tolist(),
            "scale": decoder.standardizer_.scale_.tolist(),
            "sd_floor": decoder.standardizer_.sd_floor,
        },
        "ensemble": {"params": _jsonable(ens.get_params()), "learners": learners},
    }


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, tuple):
            v = list(v)
        elif isinstance(v, np.integer):
            v = int(v)
        out[k] = v
    return out


def dumps_model(decoder) -> str:
    return json.dumps(model_to_dict(decoder), indent=1, sort_keys=True) + "\n"


def write_model(decoder, path) -> None:
    Path(path).write_text(dumps_model(decoder))


def loads_model(text: str):
    from .pipeline import IntentDecoder

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not valid JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise UnsupportedVersionError(f"unsupported model version {doc.get('version')!r}")
    try:
        params = dict(doc["params"])
        params["thresholds"] = tuple(params["thresholds"])
        decoder = IntentDecoder(**params)
        std = Standardizer(sd_floor=doc["standardizer"]["sd_floor"])
        std.mean_ = np.array(doc["standardizer"]["mean"], dtype=float)
        std.scale_ = np.array(doc["standardizer"]["scale"], dtype=float)
        std.n_features_in_ = N_CHANNELS
        ens_params = dict(doc["ensemble"]["params"])
        ens = RandomSubspaceLDA(**ens_params)
        learners = []
        for entry in doc["ensemble"]["learners"]:
            lda = IncrementalLDA(features=entry["features"], shrinkage=ens.shrinkage, reg=ens.reg,
                                 priors=ens.priors)
            lda.classes_ = np.arange(3)
            lda.n_features_in_ = N_CHANNELS
            lda.features_ = np.array(entry["features"], dtype=np.int64)
            lda.means_ = np.array(entry["means"], dtype=float)
            lda.covariance_ = np.array(entry["covariance"], dtype=float)
            lda.class_counts_ = np.array(entry["class_counts"], dtype=np.int64)
            lda.n_samples_seen_ = int(entry["n_samples_seen"])
            lda.n_rejected_ = 0
            lda.refresh()
            learners.append(lda)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"incomplete or invalid model: {exc}") from None
    if std.mean_.shape != (N_CHANNELS,) or std.scale_.shape != (N_CHANNELS,) or not learners:
        raise FormatError("incomplete or invalid model: bad shapes")
    ens.classes_ = np.arange(3)
    ens.n_features_in_ = N_CHANNELS
    ens.learners_ = learners
    ens.feature_subsets_ = [lda.features_ for lda in learners]
    ens.n_learners_ = len(learners)
    ens.reset()
    decoder.standardizer_ = std
    decoder.ensemble_ = ens
    decoder.classes_ = ens.classes_
    decoder.n_features_in_ = N_CHANNELS
    return decoder


def read_model(path):
    return loads_model(Path(path).read_text())


# oracle events --------------------------------------------------------------

def append_oracle_event(fh, event: dict) -> None:
    """Write one self-describing event record as a JSON line."""
    fh.write(json.dumps(_jsonable(event), sort_keys=True) + "\n")


class EventLog:
    """Callable sink for oracle events, appending JSON lines to ``path``."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "a")
        self.count = 0

    def __call__(self, event: dict):
        append_oracle_event(self._fh, event)
        self.count += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_events(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# scenarios ------------------------------------------------------------------

def scenario_from_dict(doc: dict) -> ScenarioSpec:
    doc = dict(doc or {})
    kwargs = {}
    for key in ("seed", "reps_per_condition"):
        if key in doc:
            kwargs[key] = int(doc.pop(key))
    for key in ("phase_duration", "motor_delay", "motor_travel", "retracted_position",
                "noise_ar", "sample_rate"):
        if key in doc:
            kwargs[key] = float(doc.pop(key))
    for key in ("class_means", "class_sds"):
        if key in doc:
            kwargs[key] = np.array(doc.pop(key), dtype=float)
    if "conditions" in doc:
        kwargs["conditions"] = tuple(Condition.from_slug(c) for c in doc.pop("conditions"))
    if "condition_offsets" in doc:
        kwargs["condition_offsets"] = {Condition.from_slug(k): np.array(v, dtype=float)
                                       for k, v in doc.pop("condition_offsets").items()}
    if "device_offsets" in doc:
        kwargs["device_offsets"] = {DeviceState(k): np.array(v, dtype=float)
                                    for k, v in doc.pop("device_offsets").items()}
    if "drift" in doc:
        kwargs["drift"] = tuple(DriftEvent(**ev) for ev in doc.pop("drift"))
    if doc:
        raise FormatError(f"unknown scenario keys: {sorted(doc)}")
    return ScenarioSpec(**kwargs).validate()


def read_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise FormatError(f"scenario file is not valid YAML: {exc}") from None
    if doc is not None and not isinstance(doc, dict):
        raise FormatError("scenario file must hold a mapping")
    return scenario_from_dict(doc)


def default_output_root() -> Path:
    return Path(os.environ.get("DSSM_OUTPUT_ROOT", "dssm-out"))
