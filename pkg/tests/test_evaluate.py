import math
import random

import numpy as np
import pytest

from railmc.core import CountTensor, StateSpace
from railmc.evaluate import (
    actual_jump,
    actual_trend,
    f1_class,
    jump_score,
    marginal_predictor,
    naive_predictor,
    rwmse,
    score_batch,
    total_score,
    trend_score,
)
from railmc.forecast import MetricConfig


class TestF1:
    def test_perfect(self):
        assert f1_class(10, 0, 0) == 1.0

    def test_zero_true_positives(self):
        assert f1_class(0, 5, 3) == 0.0
        assert f1_class(0, 0, 0) == 0.0

    def test_hand_case(self):
        # precision 3/4, recall 3/5 -> F1 = 2 * .75 * .6 / 1.35 = 2/3
        assert f1_class(3, 1, 2) == pytest.approx(2 / 3, abs=1e-12)

    def test_negative_tallies_rejected(self):
        with pytest.raises(ValueError):
            f1_class(-1, 0, 0)


class TestActualLabels:
    def test_trend_exact_comparison(self):
        assert actual_trend(3, 4) == "increase"
        assert actual_trend(3, 2) == "decrease"
        assert actual_trend(3, 3) == "equal"

    def test_jump_threshold(self):
        assert actual_jump(0, 2) is True
        assert actual_jump(0, -2) is True
        assert actual_jump(0, 1) is False
        assert actual_jump(5, 4) is False


class TestTrendScore:
    def test_all_correct(self):
        labels = ["increase", "decrease", "equal", "increase"]
        f_tr, per_f1, _ = trend_score(labels, labels)
        assert f_tr == 1.0
        assert per_f1 == {"increase": 1.0, "decrease": 1.0, "equal": 1.0}

    def test_matches_confusion_matrix_oracle(self):
        rng = random.Random(42)
        classes = ["increase", "decrease", "equal"]
        predicted = [rng.choice(classes) for _ in range(200)]
        actual = [rng.choice(classes) for _ in range(200)]
        f_tr, per_f1, tallies = trend_score(predicted, actual)
        # independent oracle: explicit 3x3 confusion matrix
        conf = {(p, a): 0 for p in classes for a in classes}
        for p, a in zip(predicted, actual):
            conf[(p, a)] += 1
        expect = {}
        for cls in classes:
            tp = conf[(cls, cls)]
            fp = sum(conf[(cls, a)] for a in classes if a != cls)
            fn = sum(conf[(p, cls)] for p in classes if p != cls)
            expect[cls] = (
                0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)
            )
            assert tallies[cls]["tp"] == tp
            assert tallies[cls]["fp"] == fp
            assert tallies[cls]["fn"] == fn
        for cls in classes:
            assert per_f1[cls] == pytest.approx(expect[cls], abs=1e-12)
        assert f_tr == pytest.approx(sum(expect.values()) / 3, abs=1e-12)

    def test_permutation_invariance(self):
        rng = random.Random(7)
        classes = ["increase", "decrease", "equal"]
        pairs = [(rng.choice(classes), rng.choice(classes)) for _ in range(50)]
        shuffled = pairs[:]
        rng.shuffle(shuffled)
        a = trend_score([p for p, _ in pairs], [a for _, a in pairs])[0]
        b = trend_score([p for p, _ in shuffled], [a for _, a in shuffled])[0]
        assert a == b

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            trend_score(["equal"], [])


class TestJumpScore:
    def test_hand_case(self):
        predicted = [True, True, False, False]
        actual = [True, False, True, False]
        f_jp, tallies = jump_score(predicted, actual)
        assert tallies == {"tp": 1, "fp": 1, "fn": 1, "tn": 1}
        assert f_jp == pytest.approx(0.5)


class TestRwmse:
    def test_hand_value(self):
        # one small-delay error of 1 (weight 0.2) and one large-delay error of
        # 2 (weight 0.8): sqrt(0.2 * 1 + 0.8 * 2) = sqrt(1.8)
        value = rwmse([1.0, 7.0], [0, 5])
        assert value == pytest.approx(math.sqrt(1.8), abs=1e-12)
        assert value == pytest.approx(1.3416, abs=1e-4)

    def test_weight_mass_is_one(self):
        rng = np.random.default_rng(3)
        actual = [int(d) for d in rng.integers(-10, 11, size=100)]
        small = sum(1 for d in actual if abs(d) <= 1)
        large = len(actual) - small
        assert small and large
        w1, w2 = 0.2 / small, 0.8 / large
        assert small * w1 + large * w2 == pytest.approx(1.0, abs=1e-12)

    def test_single_class_renormalizes(self):
        # all actual delays small: surviving class carries full unit mass
        assert rwmse([1.0, 0.0], [0, 1]) == pytest.approx(math.sqrt(0.5 * 1 + 0.5 * 1))
        assert rwmse([6.0, 6.0], [5, 7]) == pytest.approx(math.sqrt(0.5 * 1 + 0.5 * 1))

    def test_squared_form(self):
        assert rwmse([2.0, 8.0], [0, 5], form="squared") == pytest.approx(
            math.sqrt(0.2 * 4 + 0.8 * 9)
        )

    def test_zero_error(self):
        assert rwmse([0.0, 5.0], [0, 5]) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            rwmse([], [])
        with pytest.raises(ValueError):
            rwmse([1.0], [0], form="bogus")


class TestTotalScore:
    def test_published_score_arithmetic(self):
        assert total_score(0.56716, 0.57231, 2.88631) == pytest.approx(5.64684, abs=1e-5)
        assert total_score(0.48485, 0.56947, 3.04482) == pytest.approx(4.65101, abs=1e-4)

    def test_weights(self):
        assert total_score(1.0, 1.0, 0.0) == 15.0
        assert total_score(0.0, 0.0, 2.5) == -2.5


class TestBaselinePredictors:
    def test_naive(self):
        space = StateSpace(15)
        pred = naive_predictor(7, space)
        assert pred.trend == "equal"
        assert pred.jump is False
        assert pred.minutes == 7.0
        assert pred.distribution.probs[space.index(7)] == 1.0

    def test_marginal(self):
        space = StateSpace(15)
        counts = CountTensor(5, n1={0: 3, 5: 1}, n2={}, n3={})
        pred = marginal_predictor(counts, 0, space, MetricConfig(minutes_metric="mean"))
        assert pred.minutes == pytest.approx(5 / 4)
        assert pred.trend == "equal"  # median stays at 0
        assert pred.jump is False  # mass off the +-1 window is 0.25 < 0.5

    def test_marginal_requires_observations(self):
        with pytest.raises(ValueError):
            marginal_predictor(CountTensor(5, {}, {}, {}), 0, StateSpace(15))


class TestScoreBatch:
    def test_naive_batch(self):
        space = StateSpace(15)
        currents = [0, 0, 2, 5]
        actuals = [0, 3, 2, 4]
        preds = [naive_predictor(d, space) for d in currents]
        report = score_batch(preds, actuals)
        # actual trends: equal, increase, equal, decrease; naive says equal
        assert report.f_eq == pytest.approx(2 * 2 / (2 * 2 + 2 + 0))
        assert report.f_in == 0.0 and report.f_de == 0.0
        assert report.f_tr == pytest.approx(report.f_eq / 3)
        # actual jumps: F, T, F, F; naive says no jump -> F_JP = 0
        assert report.f_jp == 0.0
        assert report.score == pytest.approx(
            total_score(report.f_jp, report.f_tr, report.rwmse)
        )
        assert report.eval_count == 4
        d = report.to_dict()
        assert d["total_score"] == report.score
        assert d["rwmse_form"] == "printed"

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            score_batch([], [])
