import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dssm.core import EMG_CHANNELS, MedianFilter
from dssm.ensemble import RandomSubspaceLDA, aggregate, entropy
from dssm.lda import FitError, IncrementalLDA

from .conftest import gaussian_classes

unit = st.floats(0.0, 1.0)
triples = st.tuples(unit, unit, unit)


def entropy_oracle(p):
    return -sum(x * math.log(x, 3) for x in p if x > 0)


class TestEntropy:
    def test_uniform(self):
        assert entropy([1 / 3] * 3) == pytest.approx(1.0, abs=1e-12)

    def test_one_hot(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_hand_value(self):
        # -(0.8 log3 0.8 + 2 * 0.1 log3 0.1)
        assert entropy([0.8, 0.1, 0.1]) == pytest.approx(0.5816718657, abs=1e-9)

    def test_batch_shape(self):
        assert entropy(np.full((4, 5, 3), 1 / 3)).shape == (4, 5)

    @given(triples)
    def test_matches_direct_evaluation(self, p):
        assert entropy(p) == pytest.approx(entropy_oracle(p), abs=1e-12)

    @given(triples, st.permutations([0, 1, 2]))
    def test_permutation_invariant(self, p, perm):
        assert entropy(np.array(p)[perm]) == pytest.approx(entropy(p), abs=1e-15)

    @given(st.tuples(st.floats(0.001, 1), st.floats(0.001, 1), st.floats(0.001, 1)))
    def test_uniform_is_maximum_of_normalized(self, w):
        p = np.array(w) / sum(w)
        assert entropy(p) <= 1.0 + 1e-12


class TestAggregate:
    def test_identical_learners(self):
        F = np.tile([0.2, 0.5, 0.3], (4, 1))
        for rule in ("mean", "gated"):
            agg, _ = aggregate(F, rule=rule)
            np.testing.assert_allclose(agg, [0.2, 0.5, 0.3], atol=1e-15)

    def test_gate_keeps_low_entropy_learner_only(self):
        F = np.array([[0.9, 0.05, 0.05], [0.3, 0.3, 0.4]])
        agg, fb = aggregate(F, [0.1, 0.9], rule="gated")
        np.testing.assert_array_equal(agg, F[0])
        assert not fb

    def test_all_excluded_falls_back_to_mean(self):
        F = np.full((3, 3), 1 / 3)
        F[0] = [0.34, 0.33, 0.33]
        agg, fb = aggregate(F, entropy(F), rule="gated")
        assert fb
        np.testing.assert_allclose(agg, F.mean(axis=0))

    def test_gate_is_strict(self):
        F = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        agg, _ = aggregate(F, [0.6, 0.59], rule="gated")
        np.testing.assert_array_equal(agg, F[1])

    def test_eta_denominator(self):
        F = np.array([[0.9, 0.05, 0.05], [0.3, 0.3, 0.4], [0.8, 0.1, 0.1]])
        agg, _ = aggregate(F, [0.1, 0.9, 0.2], rule="gated", denominator="eta")
        np.testing.assert_allclose(agg, (F[0] + F[2]) / 3)

    def test_mean_recovered_when_all_pass_gate(self, rng):
        F = rng.dirichlet([200, 1, 1], size=(50, 6))
        E = entropy(F)
        assert np.all(E < 0.6)
        g, _ = aggregate(F, E, rule="gated")
        m, _ = aggregate(F, rule="mean")
        np.testing.assert_allclose(g, m, atol=1e-15)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            aggregate(np.ones((2, 3)) / 3, rule="median")
        with pytest.raises(ValueError):
            aggregate(np.ones((2, 3)) / 3, [0.1, 0.1], rule="gated", denominator="n")

    @given(st.lists(triples, min_size=1, max_size=10), st.sampled_from(["mean", "gated"]))
    def test_within_contributor_range(self, rows, rule):
        F = np.array(rows)
        E = entropy(F)
        agg, fb = aggregate(F, E, rule=rule)
        used = F if rule == "mean" or fb else F[E < 0.6]
        assert np.all(agg >= used.min(axis=0) - 1e-12)
        assert np.all(agg <= used.max(axis=0) + 1e-12)


@pytest.fixture
def train(rng):
    return gaussian_classes(rng, rng.normal(0, 2, (3, 11)), n_per_class=80)


class TestRandomSubspaceLDA:
    def test_deterministic_under_seed(self, train):
        a = RandomSubspaceLDA(random_state=7).fit(*train)
        b = RandomSubspaceLDA(random_state=7).fit(*train)
        assert a.n_learners_ == b.n_learners_
        for la, lb in zip(a.learners_, b.learners_):
            np.testing.assert_array_equal(la.features_, lb.features_)
            np.testing.assert_array_equal(la.coef_, lb.coef_)

    def test_forced_size(self, train):
        assert RandomSubspaceLDA(n_learners=5, random_state=0).fit(*train).n_learners_ == 5

    def test_size_and_view_laws(self, train):
        sizes, views = [], []
        for seed in range(200):
            ens = RandomSubspaceLDA(random_state=seed)._draw_subsets(np.random.RandomState(seed))
            sizes.append(len(ens))
            views += [len(v) for v in ens]
            for v in ens:
                assert np.all(np.diff(v) > 0)
        assert set(sizes) == set(range(5, 11))
        assert set(views) == set(range(3, 12))

    def test_single_full_view_is_plain_lda(self, train):
        X, y = train
        X = X.copy()
        X[:, 8:] = 0.0
        ens = RandomSubspaceLDA(n_learners=1, features=list(range(11)), random_state=0).fit(X, y)
        solo = IncrementalLDA().fit(X, y)
        np.testing.assert_allclose(ens.predict_proba(X), solo.predict_proba(X), atol=1e-15)

    def test_fixed_emg_view(self, train):
        ens = RandomSubspaceLDA(features=EMG_CHANNELS).fit(*train)
        assert ens.n_learners_ == 1
        assert ens.learners_[0].features_.tolist() == list(EMG_CHANNELS)

    def test_step_with_one_learner_is_filtered_learner_output(self, train, rng):
        X, y = train
        ens = RandomSubspaceLDA(n_learners=1, features=[0, 3, 9]).fit(X, y)
        f = MedianFilter()
        for j, x in enumerate(rng.normal(size=(40, 11))):
            out = ens.step(x, j / 100)
            expected = f.push(ens.learners_[0].predict_proba(x)[0], j / 100)
            np.testing.assert_allclose(out.aggregate, expected, atol=1e-15)
            np.testing.assert_array_equal(out.filtered[0], out.aggregate)

    def test_raw_proba_matches_learners(self, train):
        X, y = train
        ens = RandomSubspaceLDA(random_state=3).fit(X, y)
        P = ens.raw_proba(X[:10])
        for i, lda in enumerate(ens.learners_):
            np.testing.assert_allclose(P[:, i], lda.predict_proba(X[:10]), atol=1e-14)

    def test_reset_clears_filters(self, train, rng):
        ens = RandomSubspaceLDA(random_state=1).fit(*train)
        x = rng.normal(size=11)
        first = ens.step(x, 0.0)
        ens.step(rng.normal(size=11), 0.01)
        ens.reset()
        again = ens.step(x, 0.0)
        np.testing.assert_array_equal(first.filtered, again.filtered)

    def test_fit_error_names_learner(self, rng):
        X, y = gaussian_classes(rng, [[0], [1], [2]], n_per_class=1)
        with pytest.raises(FitError, match="learner 0"):
            RandomSubspaceLDA(random_state=0).fit(X, y)

    def test_get_params_round_trip(self):
        ens = RandomSubspaceLDA(n_learners=6, aggregation="gated", random_state=4)
        clone = RandomSubspaceLDA(**ens.get_params())
        assert clone.get_params() == ens.get_params()
