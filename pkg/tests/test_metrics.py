import math
import random

import pytest

from sceneqa.balancer import content_key
from sceneqa.metrics import (
    most_likely_baseline,
    normalize_answer,
    score,
    steps_regression,
)

from test_balancer import binary_category, open_category, rec


def perfect(records):
    return {r.qid: r.answer for r in records}


class TestMostLikely:
    def test_equalized_binary_is_half(self):
        records = binary_category(5, 5)
        baseline = most_likely_baseline(records)
        assert list(baseline.values()) == [0.5]

    def test_open_three_to_one(self):
        records = open_category({"a": 3, "b": 1})
        baseline = most_likely_baseline(records)
        assert list(baseline.values()) == [0.75]

    def test_empty_corpus_empty_report(self):
        assert most_likely_baseline([]) == {}

    def test_choose_category_below_half(self):
        # the category-wide most likely answer is only offered in some questions
        records = []
        for i in range(4):
            records.append(
                rec(f"c{i}", "bed", template_id="objWhatChoose", structure="choose",
                    bindings={"relationship": "lying on", "object": "bed", "object2": "sofa"})
            )
        for i in range(3):
            records.append(
                rec(f"d{i}", "floor", template_id="objWhatChoose", structure="choose",
                    bindings={"relationship": "lying on", "object": "bed", "object2": "sofa"})
            )
        baseline = most_likely_baseline(records)
        assert list(baseline.values()) == [pytest.approx(4 / 7)]


class TestScore:
    def test_all_correct(self):
        records = binary_category(4, 4) + open_category({"a": 3, "b": 2})
        report = score(records, perfect(records))
        assert report.overall["all"].accuracy == 1.0
        assert report.overall["binary"].count == 8
        assert report.overall["open"].count == 5
        assert (
            report.overall["binary"].count + report.overall["open"].count
            == report.overall["all"].count
        )

    def test_engineered_sixty_percent(self):
        # flip a known 40% of each category's answers
        records = open_category({f"a{i}": 10 for i in range(4)}, prefix="x")
        predictions = {}
        for i, record in enumerate(records):
            predictions[record.qid] = record.answer if i % 5 < 3 else "wrong"
        report = score(records, predictions)
        assert report.overall["all"].accuracy == pytest.approx(0.6)

    def test_precision_na_when_all_directs_wrong(self):
        direct = rec("d1", "yes")
        indirect = rec("i1", "yes")
        indirect.direct_counterpart = "d1"
        indirect.indirect_kind = "object"
        predictions = {"d1": "no", "i1": "yes"}
        report = score([direct, indirect], predictions)
        assert report.indirect["object"]["precision"] is None
        assert report.indirect["object"]["recall"] == 1.0

    def test_precision_over_correct_directs(self):
        direct = rec("d1", "yes")
        indirect = rec("i1", "yes")
        indirect.direct_counterpart = "d1"
        indirect.indirect_kind = "object"
        report = score([direct, indirect], {"d1": "yes", "i1": "yes"})
        assert report.indirect["object"]["precision"] == 1.0

    def test_order_invariance(self):
        records = binary_category(6, 6)
        predictions = perfect(records)
        forward = score(records, dict(predictions))
        backward = score(records, dict(reversed(list(predictions.items()))))
        assert forward.to_json() == backward.to_json()

    def test_overall_is_weighted_structure_mean(self):
        records = binary_category(4, 4) + open_category({"a": 6, "b": 2})
        rng = random.Random(0)
        predictions = {
            r.qid: (r.answer if rng.random() < 0.7 else "nope") for r in records
        }
        report = score(records, predictions)
        total = sum(
            cells["all"].count for cells in report.structure.values() if cells["all"].count
        )
        weighted = sum(
            cells["all"].accuracy * cells["all"].count
            for cells in report.structure.values()
            if cells["all"].count
        )
        assert report.overall["all"].accuracy == pytest.approx(weighted / total)

    def test_missing_predictions_count_as_wrong(self):
        records = binary_category(2, 2)
        report = score(records, {records[0].qid: records[0].answer})
        assert report.overall["all"].accuracy == pytest.approx(0.25)
        assert report.missing_predictions == 3

    def test_normalization_merges_raw_names(self, ontology):
        record = open_category({"food": 1})[0]
        record.answer = "food"
        report = score([record], {record.qid: " Sandwich "}, ontology)
        assert report.overall["all"].accuracy == 1.0


class TestRegression:
    def test_two_point_slope(self):
        records = []
        for i in range(10):
            records.append(rec(f"s1-{i}", "yes", steps=1))
            records.append(rec(f"s5-{i}", "yes", steps=5))
        predictions = {}
        for i in range(10):
            predictions[f"s1-{i}"] = "yes" if i < 9 else "no"
            predictions[f"s5-{i}"] = "yes" if i < 5 else "no"
        result = steps_regression(records, predictions)
        assert result["slope"] == pytest.approx(-0.1)
        assert result["intercept"] == pytest.approx(1.0)

    def test_uniform_accuracy_zero_slope(self):
        records = []
        for steps in (1, 3, 5):
            for i in range(4):
                records.append(rec(f"u{steps}-{i}", "yes", steps=steps))
        predictions = {r.qid: ("yes" if int(r.qid.split("-")[1]) < 2 else "no") for r in records}
        result = steps_regression(records, predictions)
        assert result["slope"] == pytest.approx(0.0)
        assert result["r_squared"] == pytest.approx(0.0)

    def test_linear_decay_recovered_exactly(self):
        # accuracy(steps) = 0.95 - 0.08 * steps with 100 questions per step
        records = []
        predictions = {}
        for steps in (1, 2, 3, 5, 7):
            target = 0.95 - 0.08 * steps
            correct = round(target * 100)
            for i in range(100):
                qid = f"lin{steps}-{i}"
                records.append(rec(qid, "yes", steps=steps))
                predictions[qid] = "yes" if i < correct else "no"
        result = steps_regression(records, predictions)
        assert abs(result["slope"] - (-0.08)) < 1e-9
        assert abs(result["intercept"] - 0.95) < 1e-9
        assert result["r_squared"] == pytest.approx(1.0)

    def test_single_step_value_undefined(self):
        records = [rec(f"q{i}", "yes", steps=2) for i in range(5)]
        result = steps_regression(records, perfect(records))
        assert result["slope"] is None

    def test_weighted_vs_unweighted_flag(self):
        records = []
        predictions = {}
        # unbalanced counts so weighting matters
        for steps, count, acc in ((1, 90, 0.9), (5, 10, 0.1)):
            correct = round(acc * count)
            for i in range(count):
                qid = f"w{steps}-{i}"
                records.append(rec(qid, "yes", steps=steps))
                predictions[qid] = "yes" if i < correct else "no"
        weighted = steps_regression(records, predictions, weighted=True)
        unweighted = steps_regression(records, predictions, weighted=False)
        assert weighted["slope"] == pytest.approx(unweighted["slope"])
        assert weighted["weighted"] and not unweighted["weighted"]


class TestNormalization:
    def test_lowercase_trim(self):
        assert normalize_answer("  Yes ") == "yes"

    def test_merge_map(self, ontology):
        assert normalize_answer("SANDWICH", ontology) == "food"
