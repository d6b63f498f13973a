import json

import numpy as np
import pytest

from dssm.core import Condition
from dssm.io import (
    EventLog,
    FormatError,
    UnsupportedVersionError,
    dumps_model,
    loads_model,
    read_events,
    read_model,
    read_scenario,
    read_session,
    scenario_from_dict,
    write_model,
    write_session,
)
from dssm.pipeline import IntentDecoder
from dssm.synth import DriftKind, Protocol, generate, ScenarioSpec


@pytest.fixture(scope="module")
def small_record():
    return generate(ScenarioSpec(seed=9, reps_per_condition=1, phase_duration=2.5))


@pytest.fixture(scope="module")
def decoder(bench0):
    return IntentDecoder(method="dssm-partial", random_state=4).fit(
        bench0.train_abbrev.X, bench0.train_abbrev.labels)


def rewrite(path, fn):
    lines = path.read_text().splitlines()
    path.write_text("\n".join(fn(lines)) + "\n")


def data_start(lines):
    return next(i for i, l in enumerate(lines) if l.startswith("t,")) + 1


class TestSession:
    def test_round_trip(self, bench0, tmp_path):
        rec = bench0.tests[0]
        write_session(rec, tmp_path / "s.csv")
        back = read_session(tmp_path / "s.csv")
        assert back.equals(rec)
        assert back.meta == json.loads(json.dumps(rec.meta))

    def test_header_is_self_describing(self, small_record, tmp_path):
        write_session(small_record, tmp_path / "s.csv")
        head = (tmp_path / "s.csv").read_text().splitlines()[:8]
        assert head[0] == "# format: dssm-session" and head[1] == "# version: 1"
        assert any(l.startswith("# segments:") for l in head)
        assert head[-1].startswith("t,emg1,")

    def test_abbreviated_protocol_kept(self, tmp_path):
        rec = generate(ScenarioSpec(conditions=(Condition.ARM_OFF_TABLE_MOTOR_ON,),
                                    reps_per_condition=1, phase_duration=2.5))
        write_session(rec, tmp_path / "a.csv")
        assert read_session(tmp_path / "a.csv").protocol is Protocol.ABBREVIATED

    def test_ten_channel_row_names_row(self, small_record, tmp_path):
        p = tmp_path / "s.csv"
        write_session(small_record, p)

        def drop_channel(lines):
            i = data_start(lines) + 4  # row 5
            fields = lines[i].split(",")
            lines[i] = ",".join(fields[:3] + fields[4:])
            return lines

        rewrite(p, drop_channel)
        with pytest.raises(FormatError, match="row 5: channel-count mismatch"):
            read_session(p)

    def test_ten_channel_header(self, small_record, tmp_path):
        p = tmp_path / "s.csv"
        write_session(small_record, p)
        rewrite(p, lambda ls: [l.replace(",emg8", "") if l.startswith("t,") else l for l in ls])
        with pytest.raises(FormatError, match="channel-count"):
            read_session(p)

    def test_non_monotone_row_7(self, small_record, tmp_path):
        p = tmp_path / "s.csv"
        write_session(small_record, p)

        def swap(lines):
            i = data_start(lines) + 6  # row 7
            fields = lines[i].split(",")
            fields[0] = "0.0"
            lines[i] = ",".join(fields)
            return lines

        rewrite(p, swap)
        with pytest.raises(FormatError, match="row 7: non-monotone"):
            read_session(p)

    def test_unknown_version(self, small_record, tmp_path):
        p = tmp_path / "s.csv"
        write_session(small_record, p)
        rewrite(p, lambda ls: ["# version: 99" if l == "# version: 1" else l for l in ls])
        with pytest.raises(UnsupportedVersionError):
            read_session(p)

    def test_not_a_session(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(FormatError):
            read_session(p)

    def test_bad_label(self, small_record, tmp_path):
        p = tmp_path / "s.csv"
        write_session(small_record, p)

        def relabel(lines):
            i = data_start(lines)
            lines[i] = lines[i].rsplit(",", 2)[0] + ",grab," + lines[i].rsplit(",", 1)[1]
            return lines

        rewrite(p, relabel)
        with pytest.raises(FormatError, match="row 1"):
            read_session(p)


class TestModel:
    def test_predictions_preserved(self, decoder, tmp_path, rng):
        write_model(decoder, tmp_path / "m.json")
        back = read_model(tmp_path / "m.json")
        X = rng.normal(0, 2, size=(100, 11))
        assert np.abs(back.predict_proba(X) - decoder.predict_proba(X)).max() <= 1e-15
        assert back.get_params() == decoder.get_params()

    def test_dump_is_stable(self, decoder):
        assert dumps_model(loads_model(dumps_model(decoder))) == dumps_model(decoder)

    def test_replay_after_load_matches(self, decoder, bench0):
        back = loads_model(dumps_model(decoder))
        rec = bench0.tests[0]
        np.testing.assert_array_equal(back.replay(rec.X[:3000], rec.t[:3000]).commands,
                                      decoder.replay(rec.X[:3000], rec.t[:3000]).commands)

    def test_truncated(self, decoder):
        text = dumps_model(decoder)
        with pytest.raises(FormatError):
            loads_model(text[: len(text) // 2])

    def test_missing_section(self, decoder):
        doc = json.loads(dumps_model(decoder))
        del doc["ensemble"]["learners"][0]["covariance"]
        with pytest.raises(FormatError, match="incomplete"):
            loads_model(json.dumps(doc))

    def test_version(self, decoder):
        doc = json.loads(dumps_model(decoder))
        doc["version"] = 2
        with pytest.raises(UnsupportedVersionError):
            loads_model(json.dumps(doc))
        doc["format"] = "other"
        with pytest.raises(FormatError):
            loads_model(json.dumps(doc))


class TestEvents:
    def test_line_count_matches_event_counts(self, bench0, tmp_path):
        dec = IntentDecoder(method="dssm-partial", random_state=2, batch_size=40).fit(
            bench0.train_abbrev.X, bench0.train_abbrev.labels)
        rec = bench0.tests[0]
        p = tmp_path / "events.jsonl"
        with EventLog(p) as log:
            trace = dec.replay(rec.X[:3000], rec.t[:3000], event_log=log)
        events = read_events(p)
        kinds = [e["event"] for e in events]
        assert trace.n_triggers > 0
        assert len(p.read_text().splitlines()) == (
            trace.n_buffer_events + 2 * trace.n_triggers)
        assert kinds.count("buffer") == trace.n_buffer_events
        assert kinds.count("trigger") == kinds.count("update") == trace.n_triggers
        assert sum(len(e["learners"]) for e in events if e["event"] == "buffer") == trace.n_buffered


class TestScenario:
    def test_yaml(self, tmp_path):
        p = tmp_path / "s.yaml"
        p.write_text(
            "seed: 3\n"
            "reps_per_condition: 3\n"
            "phase_duration: 2.5\n"
            "noise_ar: 0.5\n"
            "conditions: [arm_off_table_motor_on]\n"
            "drift:\n"
            "  - {kind: abrupt_shift, start: 10, duration: 0, affected_channels: [0, 2],"
            " magnitude: [3, -3]}\n")
        spec = read_scenario(p)
        assert spec.seed == 3 and spec.reps_per_condition == 3 and spec.noise_ar == 0.5
        assert spec.protocol is Protocol.ABBREVIATED
        assert spec.drift[0].kind is DriftKind.ABRUPT_SHIFT
        assert spec.drift[0].magnitude == (3.0, -3.0)

    def test_empty_is_default(self, tmp_path):
        p = tmp_path / "s.yaml"
        p.write_text("")
        assert read_scenario(p).duration == ScenarioSpec().duration

    def test_unknown_key(self):
        with pytest.raises(FormatError, match="unknown scenario keys"):
            scenario_from_dict({"sede": 1})

    def test_not_a_mapping(self, tmp_path):
        p = tmp_path / "s.yaml"
        p.write_text("- 1\n- 2\n")
        with pytest.raises(FormatError):
            read_scenario(p)
