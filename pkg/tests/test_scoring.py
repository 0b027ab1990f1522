from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialeval.corpus import Dataset, Label, PredictionEntry, SubsetTag, make_fixture
from dialeval.metrics import (
    ALL_METRICS,
    COMPOSABLE_METRICS,
    MetricId,
)
from dialeval.scoring import (
    InstanceScores,
    UndefinedCorrelationError,
    build_leaderboard,
    build_report,
    competition_ranks,
    compose_end_to_end,
    load_report,
    metric_correlation_matrix,
    per_subset_report,
    report_from_dict,
    report_to_dict,
    save_report,
    score_instances,
    score_submission,
    spearman_rho,
)

from .oracles import spearman_closed_form

M = MetricId.MRR5


def inst(iid, gold, pred, value=None):
    values = {m: value for m in COMPOSABLE_METRICS} if value is not None else {}
    return InstanceScores(instance_id=iid, gold_target=gold, pred_target=pred, values=values)


def labels_as_predictions(dataset: Dataset) -> list[PredictionEntry]:
    return [
        PredictionEntry(target=lb.target, knowledge=lb.knowledge, response=lb.response)
        for lb in dataset.labels
    ]


class TestScoreInstances:
    def test_perfect_predictions_hit_identity_values(self, tiny_dataset):
        scores = score_instances(tiny_dataset, labels_as_predictions(tiny_dataset))
        for s, label in zip(scores, tiny_dataset.labels):
            assert s.gold_target == s.pred_target == label.target
            if not label.target:
                assert s.values == {}
                continue
            from dialeval.metrics import tokenize

            length = len(tokenize(label.response))
            for metric in COMPOSABLE_METRICS:
                if metric is MetricId.METEOR:
                    assert s.values[metric] == 1 - 0.5 / length**3
                else:
                    assert s.values[metric] == 1.0

    def test_false_negative_has_no_values(self, tiny_dataset):
        preds = labels_as_predictions(tiny_dataset)
        preds[0] = PredictionEntry(target=False)
        scores = score_instances(tiny_dataset, preds)
        assert scores[0].gold_target and not scores[0].pred_target
        assert scores[0].values == {}

    def test_hand_built_fixture_values(self, tiny_dataset):
        # instance 0: gold ref at rank 2 of two refs, response differs
        gold0 = tiny_dataset.labels[0].knowledge[0]
        other = tiny_dataset.labels[1].knowledge[0]
        preds = labels_as_predictions(tiny_dataset)
        preds[0] = PredictionEntry(
            target=True, knowledge=(other, gold0), response="Free parking on site."
        )
        scores = score_instances(tiny_dataset, preds)
        assert scores[0].values[MetricId.MRR5] == 0.5
        assert scores[0].values[MetricId.RECALL1] == 0.0
        assert scores[0].values[MetricId.RECALL5] == 1.0
        # candidate ["free","parking","on","site","."] (all 5 unigrams match)
        # vs 9-token reference: BLEU-1 = 1.0 * brevity penalty exp(1 - 9/5)
        import math

        assert scores[0].values[MetricId.BLEU1] == pytest.approx(
            math.exp(1 - 9 / 5), abs=1e-12
        )

    def test_misaligned_predictions_rejected(self, tiny_dataset):
        with pytest.raises(ValueError):
            score_instances(tiny_dataset, [PredictionEntry(target=False)])


class TestCompose:
    def test_perfect_detection_reduces_to_mean(self):
        scores = [inst("a", True, True, 1.0), inst("b", True, True, 0.5)]
        composed = compose_end_to_end(scores, M)
        assert composed.precision == composed.recall == composed.f == 0.75

    def test_tp_fn_fp_hand_case(self):
        scores = [
            inst("tp", True, True, 0.8),
            inst("fn", True, False),
            inst("fp", False, True),
        ]
        composed = compose_end_to_end(scores, M)
        assert composed.precision == pytest.approx(0.4)
        assert composed.recall == pytest.approx(0.4)
        assert composed.f == pytest.approx(0.4)

    def test_zero_predicted_positives(self):
        scores = [inst("a", True, False), inst("b", False, False)]
        composed = compose_end_to_end(scores, M)
        assert (composed.precision, composed.recall, composed.f) == (0.0, 0.0, 0.0)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_oracle_detection_exact_mean(self, values):
        scores = [inst(f"i{k}", True, True, v) for k, v in enumerate(values)]
        composed = compose_end_to_end(scores, M)
        mean = sum(v for v in values) / len(values)
        assert composed.precision == mean
        assert composed.recall == mean
        assert composed.f == mean

    def test_adding_fp_decreases_precision_only(self):
        base = [inst("a", True, True, 0.9), inst("b", True, True, 0.4)]
        with_fp = base + [inst("c", False, True)]
        c0, c1 = compose_end_to_end(base, M), compose_end_to_end(with_fp, M)
        assert c1.precision < c0.precision
        assert c1.recall == c0.recall

    def test_adding_fn_decreases_recall_only(self):
        base = [inst("a", True, True, 0.9)]
        with_fn = base + [inst("b", True, False)]
        c0, c1 = compose_end_to_end(base, M), compose_end_to_end(with_fn, M)
        assert c1.recall < c0.recall
        assert c1.precision == c0.precision

    def test_order_independence(self):
        scores = [
            inst("a", True, True, 0.25),
            inst("b", False, True),
            inst("c", True, False),
            inst("d", True, True, 0.75),
        ]
        shuffled = scores[::-1]
        assert compose_end_to_end(scores, M) == compose_end_to_end(shuffled, M)


class TestLeaderboard:
    def make_report(self, sid, value):
        from dialeval.scoring import ComposedScore, ScoreReport

        return ScoreReport(
            submission_id=sid,
            detection=(value, value, value),
            metrics={m: ComposedScore(value, value, value) for m in COMPOSABLE_METRICS},
        )

    def test_single_entry_overall_one(self):
        board = build_leaderboard([self.make_report("only", 0.5)])
        assert board.entries[0].overall == 1.0

    def test_dominant_entry(self):
        board = build_leaderboard(
            [self.make_report("worse", 0.2), self.make_report("better", 0.9)]
        )
        assert board.entries[0].submission_id == "better"
        assert board.entries[0].overall == 1.0
        assert board.entries[1].overall == 0.5

    def test_rank_122_case(self):
        ranks = [1, 2, 2]
        overall = sum(1 / r for r in ranks) / 3
        assert overall == 2 / 3
        assert competition_ranks([0.9, 0.5, 0.5]) == [1, 2, 2]

    def test_competition_ranks_with_ties(self):
        assert competition_ranks([0.3, 0.9, 0.9, 0.1]) == [3, 1, 1, 4]

    def test_permutation_invariance(self):
        rng = random.Random(5)
        reports = [self.make_report(f"s{i}", rng.random()) for i in range(6)]
        board = build_leaderboard(reports)
        for _ in range(10):
            shuffled = reports[:]
            rng.shuffle(shuffled)
            other = build_leaderboard(shuffled)
            assert [e.submission_id for e in other.entries] == [
                e.submission_id for e in board.entries
            ]
            assert [e.overall for e in other.entries] == [e.overall for e in board.entries]

    def test_overall_bounds(self):
        rng = random.Random(11)
        reports = [self.make_report(f"s{i}", rng.random()) for i in range(8)]
        board = build_leaderboard(reports)
        for entry in board.entries:
            assert 1 / len(reports) <= entry.overall <= 1.0
        top = board.entries[0]
        if all(rk == 1 for rk in top.ranks.values()):
            assert top.overall == 1.0


class TestSpearman:
    def test_identical(self):
        assert spearman_rho([1, 2, 3], [10, 20, 30]) == 1.0

    def test_reversed(self):
        assert spearman_rho([1, 2, 3], [3, 2, 1]) == -1.0

    def test_n4_case(self):
        assert spearman_rho([1, 2, 3, 4], [1, 3, 2, 4]) == 0.8

    def test_degenerate_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman_rho([1, 1, 1], [1, 2, 3])
        with pytest.raises(UndefinedCorrelationError):
            spearman_rho([1, 2, 3], [5, 5, 5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            spearman_rho([1, 2], [1, 2, 3])

    def test_closed_form_on_permutations(self):
        import itertools

        for n in range(2, 7):
            base = list(range(n))
            for perm in itertools.permutations(base):
                rho = spearman_rho(base, list(perm))
                assert rho == pytest.approx(spearman_closed_form(base, list(perm)), abs=1e-12)

    def test_ties_use_average_ranks(self):
        # ranks of [1, 2, 2, 3] are [1, 2.5, 2.5, 4]
        rho = spearman_rho([1, 2, 2, 3], [1, 2, 2, 3])
        assert rho == pytest.approx(1.0)


class TestPerSubset:
    def test_single_subset_equals_global(self, tiny_dataset):
        scores = score_instances(tiny_dataset, labels_as_predictions(tiny_dataset))
        tags = [SubsetTag.MULTIWOZ] * len(scores)
        subsets = per_subset_report(scores, tags, submission_id="sub")
        mw = next(s for s in subsets if s.tag is SubsetTag.MULTIWOZ)
        global_report = build_report("sub", scores)
        assert mw.report.detection == global_report.detection
        assert mw.report.metrics == global_report.metrics
        assert not mw.empty

    def test_two_subsets_match_hand_composition(self):
        scores = [inst("a", True, True, 1.0), inst("b", True, True, 0.5)]
        tags = [SubsetTag.MULTIWOZ, SubsetTag.SF_WRITTEN]
        subsets = {s.tag: s for s in per_subset_report(scores, tags)}
        assert subsets[SubsetTag.MULTIWOZ].report.metrics[M].f == 1.0
        assert subsets[SubsetTag.SF_WRITTEN].report.metrics[M].f == 0.5

    def test_empty_subset_zeroed_and_flagged(self):
        scores = [inst("a", True, True, 1.0)]
        subsets = {s.tag: s for s in per_subset_report(scores, [SubsetTag.MULTIWOZ])}
        spoken = subsets[SubsetTag.SF_SPOKEN]
        assert spoken.empty
        assert spoken.n_instances == 0
        assert spoken.report.detection == (0.0, 0.0, 0.0)
        assert all(c.f == 0.0 for c in spoken.report.metrics.values())

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError, match="unknown subset tag"):
            per_subset_report([inst("a", True, True, 1.0)], ["Nonsense"])


class TestReportIO:
    def test_roundtrip(self, tiny_dataset, tmp_path):
        report = score_submission(
            tiny_dataset, labels_as_predictions(tiny_dataset), "sub-1"
        )
        path = tmp_path / "report.json"
        save_report(report, path)
        loaded = load_report(path)
        assert loaded == report

    def test_schema_keys(self, tiny_dataset):
        report = score_submission(
            tiny_dataset, labels_as_predictions(tiny_dataset), "sub-1"
        )
        data = report_to_dict(report)
        assert set(data) == {"submission_id", "detection", "metrics", "overall"}
        assert set(data["detection"]) == {"p", "r", "f"}
        assert set(data["metrics"]) == {m.value for m in COMPOSABLE_METRICS}
        for triple in data["metrics"].values():
            assert set(triple) == {"s_p", "s_r", "s_f"}
        assert data["overall"] is None

    def test_malformed_report_rejected(self):
        with pytest.raises(ValueError, match="malformed report"):
            report_from_dict({"submission_id": "x"})


class TestCorrelationMatrix:
    def test_matrix_diagonal_and_symmetry(self):
        rng = random.Random(3)
        reports = []
        for i in range(5):
            scores = [
                inst(f"i{k}", True, True, rng.random()) for k in range(10)
            ]
            reports.append(build_report(f"s{i}", scores))
        matrix = metric_correlation_matrix(reports, COMPOSABLE_METRICS)
        for a in COMPOSABLE_METRICS:
            assert matrix[a][a] == pytest.approx(1.0)
            for b in COMPOSABLE_METRICS:
                if matrix[a][b] is not None:
                    assert matrix[a][b] == pytest.approx(matrix[b][a], abs=1e-12)

    def test_constant_metric_is_none(self):
        from dialeval.scoring import ComposedScore, ScoreReport

        reports = [
            ScoreReport(
                submission_id=f"s{i}",
                detection=(0.5, 0.5, 0.5),
                metrics={
                    m: ComposedScore(0.5, 0.5, 0.5 if m is not M else 0.1 * (i + 1))
                    for m in COMPOSABLE_METRICS
                },
            )
            for i in range(3)
        ]
        matrix = metric_correlation_matrix(reports, [M, MetricId.BLEU1])
        assert matrix[M][MetricId.BLEU1] is None
        assert matrix[M][M] == pytest.approx(1.0)
