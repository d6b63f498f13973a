import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dssm.controller import truth_commands
from dssm.core import Intent, MotorCommand
from dssm.eval import EvalReport, compare, motor_accuracy, replay_method, run_method, threshold_grid
from dssm.oracle import OracleConfig
from dssm.synth import ScenarioSpec, default_class_means, make_benchmark

R, O, C = Intent.RELAX, Intent.OPEN, Intent.CLOSE
RET, EXT = MotorCommand.RETRACT, MotorCommand.EXTEND

label_lists = st.lists(st.sampled_from([0, 1, 2]), min_size=1, max_size=30)


def inert_params():
    cfg = OracleConfig.inert()
    return dict(confident_threshold=cfg.confident_threshold,
                unconfident_threshold=cfg.unconfident_threshold,
                correction_threshold=cfg.correction_threshold)


class TestMotorAccuracy:
    def test_perfect(self):
        labels = [R, O, O, R, C, C, R]
        assert motor_accuracy(truth_commands(labels), labels) == 1.0

    def test_complement(self):
        labels = [R, O, O, R, C, C, R]
        assert motor_accuracy(1 - truth_commands(labels), labels) == 0.0

    def test_hand_trace(self):
        assert truth_commands([O, R, C]).tolist() == [RET, RET, EXT]
        assert motor_accuracy([RET, EXT, EXT], [O, R, C]) == pytest.approx(2 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            motor_accuracy([0, 1], [0, 1, 2])

    def test_empty(self):
        with pytest.raises(ValueError):
            motor_accuracy([], [])

    @given(label_lists, label_lists, st.integers(0, 2**31 - 1))
    def test_concatenation_is_length_weighted(self, a, b, seed):
        # parts start with an active intent so the controller state does not carry over
        a, b = [1] + a, [2] + b
        rng = np.random.default_rng(seed)
        pa, pb = rng.integers(0, 2, len(a)), rng.integers(0, 2, len(b))
        whole = motor_accuracy(np.concatenate([pa, pb]), a + b)
        parts = (motor_accuracy(pa, a) * len(a) + motor_accuracy(pb, b) * len(b)) / (len(a) + len(b))
        assert whole == pytest.approx(parts, abs=1e-15)


class TestRunMethod:
    def test_deterministic(self, bench0):
        assert run_method("dssm-partial", bench0, 0) == run_method("dssm-partial", bench0, 0)

    def test_supervised_replay_has_no_state_leak(self, bench0):
        a = replay_method("sm-partial", bench0, 0)
        b = replay_method("sm-partial", bench0, 0)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.commands, y.commands)

    def test_inert_oracle_equals_sm(self, bench0):
        ds = run_method("dssm-partial", bench0, 5, **inert_params())
        sm = run_method("sm-partial", bench0, 5)
        np.testing.assert_allclose(ds, sm, rtol=0, atol=1e-12)

    def test_thresholds_override(self, bench0):
        strict = run_method("se-partial", bench0, 0, thresholds=(0.99, 0.99, 0.99))
        default = run_method("se-partial", bench0, 0)
        assert strict != default

    def test_drift_free_gap_is_small(self, clean_bench):
        ds = np.mean(run_method("dssm-partial", clean_bench, 1))
        sm = np.mean(run_method("sm-partial", clean_bench, 1))
        assert abs(ds - sm) <= 0.01

    def test_easy_drift_free_benchmark(self):
        base = ScenarioSpec(class_means=4 * default_class_means())
        bench = make_benchmark(0, drift=False, base=base)
        for m in ("se-full", "se-partial", "sm-partial", "dssm-partial"):
            assert min(run_method(m, bench, 0)) >= 0.95, m

    @pytest.mark.slow
    def test_dssm_beats_sm_under_emg_drift(self):
        ds, sm = [], []
        for seed in range(3):
            bench = make_benchmark(seed)
            ds += run_method("dssm-partial", bench, seed)
            sm += run_method("sm-partial", bench, seed)
        assert np.mean(ds) > np.mean(sm)


@pytest.fixture(scope="module")
def report():
    return compare([1, 0], methods=["sm-partial", "dssm-partial", "se-partial"])


class TestCompare:
    def test_structure(self, report):
        assert report.seeds == [0, 1]
        assert set(report.accuracies) == {"sm-partial", "dssm-partial", "se-partial"}
        assert all(len(v) == 3 for v in report.accuracies["sm-partial"].values())
        assert report.pooled("sm-partial").shape == (6,)

    def test_p_values(self, report):
        p = report.p_values()
        assert set(p) == {"sm-partial", "se-partial"}
        assert all(0 < v <= 1 for v in p.values())

    def test_json_round_trip(self, report):
        doc = json.loads(report.to_json())
        assert doc["format"] == "dssm-report" and doc["version"] == 1
        assert EvalReport.from_dict(doc).to_json() == report.to_json()

    def test_config_is_recorded(self, report):
        assert report.config["thresholds"] == [0.5, 0.5, 0.5]
        assert report.config["methods"] == ["sm-partial", "dssm-partial", "se-partial"]

    def test_byte_identical_and_order_independent(self, report):
        again = compare([0, 1], methods=["sm-partial", "dssm-partial", "se-partial"], workers=2)
        assert again.to_json() == report.to_json()

    def test_table(self, report):
        table = report.render_table()
        assert "dssm-partial" in table and "p vs DSSM" in table
        assert len(table.splitlines()) == 5

    def test_grid_picks_best(self):
        grid = [(0.5, 0.5, 0.5), (0.9, 0.9, 0.9), (0.3, 0.3, 0.3)]
        swept = compare([0], methods=["se-partial"], grid=grid)
        plain = compare([0], methods=["se-partial"])
        assert swept.summary()["se-partial"]["mean"] >= plain.summary()["se-partial"]["mean"]
        assert swept.thresholds["se-partial"] in [list(g) for g in grid]

    def test_threshold_grid(self):
        g = threshold_grid((0.4, 0.6))
        assert len(g) == 8 and (0.4, 0.6, 0.4) in g

    def test_bad_report(self):
        with pytest.raises(ValueError):
            EvalReport.from_dict({"format": "x"})
