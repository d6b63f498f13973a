"""Command-line interface: generate, train, replay, compare, report.

Exit codes: 0 on success, 2 for usage errors (bad flags, missing files,
invalid configuration), 1 for failures while running.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import Condition
from .eval import ALL_METHODS, EvalReport, compare, motor_accuracy, threshold_grid
from .io import (
    EventLog,
    FormatError,
    default_output_root,
    read_model,
    read_scenario,
    read_session,
    write_model,
    write_session,
)
from .lda import FitError
from .pipeline import IntentDecoder, Method
from .synth import make_benchmark

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _probability(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


def _add_decoder_flags(p, with_method=True):
    if with_method:
        p.add_argument("--method", choices=[m.value for m in Method], default="dssm-partial")
    g = p.add_argument_group("thresholds")
    g.add_argument("--l-relax", type=_probability, help="controller threshold for relax")
    g.add_argument("--l-open", type=_probability, help="controller threshold for open")
    g.add_argument("--l-close", type=_probability, help="controller threshold for close")
    g.add_argument("--confident", type=_probability, help="oracle confident entropy bound")
    g.add_argument("--unconfident", type=_probability, help="oracle unconfident entropy bound")
    g.add_argument("--correction", type=float, help="entropy gate of the ensemble output")
    g.add_argument("--batch-size", type=_positive_int, help="buffered samples per update")
    g.add_argument("--gate-denominator", choices=["count", "eta"])


def _decoder_overrides(args) -> dict:
    out = {}
    for flag, key in [("confident", "confident_threshold"),
                      ("unconfident", "unconfident_threshold"),
                      ("correction", "correction_threshold"), ("batch_size", "batch_size"),
                      ("gate_denominator", "gate_denominator")]:
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _thresholds(args, base=(0.5, 0.5, 0.5)):
    th = list(base)
    for i, flag in enumerate(("l_relax", "l_open", "l_close")):
        value = getattr(args, flag, None)
        if value is not None:
            th[i] = value
    return tuple(float(v) for v in th)


def _out_dir(args, name) -> Path:
    out = Path(args.out) if args.out else default_output_root() / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    return path


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _base_scenario(args):
    if args.scenario is None:
        return None
    try:
        return read_scenario(_require_file(args.scenario))
    except (FormatError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid scenario {args.scenario}: {exc}") from None


# subcommands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    base = _base_scenario(args)
    bench = make_benchmark(args.seed, drift=not args.no_drift, base=base)
    out = _out_dir(args, "generate")
    sessions = {"train_complete": bench.train_complete, "train_abbrev": bench.train_abbrev}
    sessions.update({f"test{j}": s for j, s in enumerate(bench.tests)})
    for name, record in sessions.items():
        write_session(record, out / f"{name}.csv")
    _write_json(out / "config.json", {
        "command": "generate", "seed": args.seed, "drift": not args.no_drift,
        "scenario": args.scenario, "sessions": sorted(sessions),
        "specs": {k: _spec_summary(v) for k, v in bench.specs.items()},
    })
    print(f"wrote {len(sessions)} sessions to {out}")
    return EXIT_OK


def _spec_summary(spec) -> dict:
    return {
        "seed": spec.seed,
        "protocol": spec.protocol.value,
        "conditions": [Condition(c).slug for c in spec.conditions],
        "reps_per_condition": spec.reps_per_condition,
        "phase_duration": spec.phase_duration,
        "noise_ar": spec.noise_ar,
        "drift": [ev.to_dict() for ev in spec.drift],
    }


def cmd_train(args) -> int:
    record = read_session(_require_file(args.session))
    method = Method(args.method)
    if record.protocol is not method.train_protocol:
        raise UsageError(
            f"protocol mismatch: {method.value} trains on {method.train_protocol.value}-protocol "
            f"sessions, {args.session} is {record.protocol.value}")
    params = dict(method=method.value, random_state=args.seed, thresholds=_thresholds(args),
                  **_decoder_overrides(args))
    try:
        decoder = IntentDecoder(**params)
        decoder.oracle_config()
        decoder.threshold_config()
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    decoder.fit(record.X, record.labels)
    path = Path(args.out) if args.out else default_output_root() / "train" / "model.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_model(decoder, path)
    print(f"trained {method.value} on {len(record.t)} frames, "
          f"{decoder.ensemble_.n_learners_} learners; model written to {path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    decoder = read_model(_require_file(args.model))
    record = read_session(_require_file(args.session))
    overrides = _decoder_overrides(args)
    overrides["thresholds"] = _thresholds(args, decoder.thresholds)
    try:
        decoder.set_params(**overrides)
        decoder.oracle_config()
        decoder.threshold_config()
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    out = _out_dir(args, "replay")
    events_path = out / "events.jsonl"
    events_path.write_text("")
    with EventLog(events_path) as log:
        trace = decoder.replay(record.X, record.t, event_log=log)
        n_events = log.count
    _write_trace(out / "trace.csv", trace)
    accuracy = motor_accuracy(trace.commands, record.labels)
    _write_json(out / "summary.json", {
        "command": "replay", "model": str(args.model), "session": str(args.session),
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in decoder.get_params().items()},
        "accuracy": accuracy, "frames": len(record.t), "buffered": trace.n_buffered,
        "updates": trace.n_triggers, "rejected": trace.n_rejected, "events": n_events,
    })
    print(f"motor-command accuracy {accuracy * 100:.2f}% over {len(record.t)} frames, "
          f"{trace.n_triggers} oracle updates")
    return EXIT_OK


def _write_trace(path: Path, trace) -> None:
    eta = trace.entropies.shape[1]
    head = ["t", "intent", "command", "p_relax", "p_open", "p_close", "fallback"]
    head += [f"entropy{i}" for i in range(eta)]
    cols = np.column_stack([trace.t, trace.intents, trace.commands, trace.aggregate,
                            trace.fallback, trace.entropies])
    with open(path, "w") as fh:
        fh.write(",".join(head) + "\n")
        for row in cols:
            fh.write(",".join([repr(float(row[0])), str(int(row[1])), str(int(row[2]))]
                              + [repr(float(v)) for v in row[3:6]] + [str(int(row[6]))]
                              + [repr(float(v)) for v in row[7:]]) + "\n")


def cmd_compare(args) -> int:
    base = _base_scenario(args)
    seeds = list(range(args.seed, args.seed + args.replicates))
    params = dict(_decoder_overrides(args), thresholds=_thresholds(args))
    try:
        IntentDecoder(**params).oracle_config()
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    grid = threshold_grid(args.grid) if args.grid else None
    started = time.perf_counter()
    report = compare(seeds, methods=args.methods, params=params, grid=grid,
                     drift=not args.no_drift, base=base, workers=args.workers)
    report.config["scenario_path"] = args.scenario
    out = _out_dir(args, "compare")
    (out / "report.json").write_text(report.to_json())
    (out / "report.txt").write_text(report.render_table())
    sys.stdout.write(report.render_table())
    print(f"{len(seeds)} replicates in {time.perf_counter() - started:.1f} s; "
          f"report written to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = EvalReport.from_dict(json.loads(_require_file(args.report).read_text()))
    except (json.JSONDecodeError, ValueError, KeyError) as exc:
        raise UsageError(f"invalid report {args.report}: {exc}") from None
    table = report.render_table()
    if args.out:
        Path(args.out).write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dssm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic benchmark as session files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", help="YAML file overriding the base scenario")
    p.add_argument("--no-drift", action="store_true", help="drift-free test sessions")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit one method on a session file")
    p.add_argument("session")
    p.add_argument("--seed", type=int, default=0, help="seed for the feature-subset draw")
    p.add_argument("--out", help="model file path")
    _add_decoder_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("replay", help="stream a session through a trained model")
    p.add_argument("model")
    p.add_argument("session")
    p.add_argument("--out", help="output directory")
    _add_decoder_flags(p, with_method=False)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("compare", help="evaluate every method over seeded replicates")
    p.add_argument("--seed", type=int, default=0, help="first replicate seed")
    p.add_argument("--replicates", type=_positive_int, default=10)
    p.add_argument("--methods", nargs="+", choices=[m.value for m in Method],
                   default=[m.value for m in ALL_METHODS])
    p.add_argument("--scenario", help="YAML file overriding the base scenario")
    p.add_argument("--no-drift", action="store_true")
    p.add_argument("--grid", nargs="+", type=_probability, metavar="L",
                   help="sweep controller thresholds over these values, best per method")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", help="output directory")
    _add_decoder_flags(p, with_method=False)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="print the table of a saved comparison")
    p.add_argument("report")
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dssm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, FitError, ValueError, OSError) as exc:
        print(f"dssm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
