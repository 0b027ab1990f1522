"""Submission scoring and ranking.

Turns aligned (dataset, predictions) pairs into per-instance metric
values, composes them into detection-weighted end-to-end scores,
aggregates multiple submissions into a mean-reciprocal-rank leaderboard,
and computes rank correlations between metrics.

Report files follow a fixed schema so external tools can consume them:
``{submission_id, detection: {p, r, f}, metrics: {metric_id: {s_p, s_r,
s_f}}, overall}`` with ``overall`` null until a leaderboard assigns it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

from .corpus import Dataset, PredictionEntry, SubsetTag
from .metrics import (
    ALL_METRICS,
    COMPOSABLE_METRICS,
    DETECTION_METRICS,
    GENERATION_METRICS,
    SELECTION_METRICS,
    DetectionCounts,
    MetricId,
    detection_prf,
    f_measure,
    generation_metric,
    selection_metric,
    tokenize,
)


@dataclass(frozen=True)
class InstanceScores:
    """Detection outcome plus per-metric values for one instance.

    ``values`` is populated only when gold and predicted targets are both
    true; false negatives and false positives carry no metric mass.
    """

    instance_id: str
    gold_target: bool
    pred_target: bool
    values: Mapping[Hashable, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.values and not (self.gold_target and self.pred_target):
            raise ValueError(
                f"{self.instance_id}: metric values require gold and predicted "
                "targets to both be true"
            )


@dataclass(frozen=True)
class ComposedScore:
    """Detection-weighted end-to-end score triple for one metric."""

    precision: float
    recall: float
    f: float

    def to_dict(self) -> dict[str, float]:
        return {"s_p": self.precision, "s_r": self.recall, "s_f": self.f}


@dataclass(frozen=True)
class ScoreReport:
    submission_id: str
    detection: tuple[float, float, float]
    metrics: Mapping[MetricId, ComposedScore]
    overall: float | None = None

    def value_for(self, metric: MetricId) -> float:
        """The scalar used for ranking: raw detection P/R/F, composed
        F for selection and generation metrics."""
        if metric is MetricId.DETECTION_P:
            return self.detection[0]
        if metric is MetricId.DETECTION_R:
            return self.detection[1]
        if metric is MetricId.DETECTION_F:
            return self.detection[2]
        return self.metrics[metric].f


def score_instances(
    dataset: Dataset, predictions: Sequence[PredictionEntry]
) -> list[InstanceScores]:
    """Score every instance of a submission against the ground truth.

    For true positives all 11 selection/generation metric values are
    computed: selection from the ranked refs against the gold set,
    generation from the tokenized response against the gold response.
    """
    if len(predictions) != len(dataset.contexts):
        raise ValueError(
            f"{len(predictions)} predictions for {len(dataset.contexts)} instances"
        )
    out = []
    for ctx, label, pred in zip(dataset.contexts, dataset.labels, predictions):
        values: dict[Hashable, float] = {}
        if label.target and pred.target:
            relevant = frozenset(label.knowledge)
            for metric in SELECTION_METRICS:
                values[metric] = selection_metric(metric, pred.knowledge, relevant)
            cand = tokenize(pred.response or "")
            ref = tokenize(label.response or "")
            for metric in GENERATION_METRICS:
                values[metric] = generation_metric(metric, cand, ref)
        out.append(
            InstanceScores(
                instance_id=ctx.instance_id,
                gold_target=label.target,
                pred_target=pred.target,
                values=values,
            )
        )
    return out


def detection_counts(scores: Iterable[InstanceScores]) -> DetectionCounts:
    tp = fp = fn = tn = 0
    for s in scores:
        if s.gold_target and s.pred_target:
            tp += 1
        elif s.pred_target:
            fp += 1
        elif s.gold_target:
            fn += 1
        else:
            tn += 1
    return DetectionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def compose_end_to_end(
    scores: Sequence[InstanceScores], metric: Hashable
) -> ComposedScore:
    """Compose per-instance values into the detection-weighted triple.

    The numerator sums the metric value over true positives in instance
    order; the precision side normalizes by predicted positives, the
    recall side by gold positives, and the F side is their harmonic mean.
    All 0/0 cases are 0.
    """
    numerator = sum(
        s.values[metric] for s in scores if s.gold_target and s.pred_target
    )
    pred_positives = sum(1 for s in scores if s.pred_target)
    gold_positives = sum(1 for s in scores if s.gold_target)
    s_p = numerator / pred_positives if pred_positives else 0.0
    s_r = numerator / gold_positives if gold_positives else 0.0
    return ComposedScore(precision=s_p, recall=s_r, f=f_measure(s_p, s_r))


def build_report(
    submission_id: str, scores: Sequence[InstanceScores]
) -> ScoreReport:
    """Full report for one submission: detection P/R/F plus all composed metrics."""
    p, r, f = detection_prf(detection_counts(scores))
    composed = {m: compose_end_to_end(scores, m) for m in COMPOSABLE_METRICS}
    return ScoreReport(submission_id=submission_id, detection=(p, r, f), metrics=composed)


def score_submission(
    dataset: Dataset, predictions: Sequence[PredictionEntry], submission_id: str
) -> ScoreReport:
    return build_report(submission_id, score_instances(dataset, predictions))


# ---------------------------------------------------------------------------
# Per-subset breakdown


@dataclass(frozen=True)
class SubsetScores:
    tag: SubsetTag
    n_instances: int
    empty: bool
    report: ScoreReport


def per_subset_report(
    scores: Sequence[InstanceScores],
    tags: Sequence[SubsetTag | str],
    submission_id: str = "submission",
    subsets: Sequence[SubsetTag] | None = None,
) -> list[SubsetScores]:
    """Detection-weighted composition applied independently per subset.

    ``tags`` assigns each instance to a subset, parallel to ``scores``.
    Requested subsets with no instances come back zeroed with the empty
    flag set.  Unknown tags raise ValueError.
    """
    if len(tags) != len(scores):
        raise ValueError(f"{len(tags)} tags for {len(scores)} instances")
    try:
        parsed = [SubsetTag(t) for t in tags]
    except ValueError as e:
        raise ValueError(f"unknown subset tag: {e}") from None
    wanted = list(subsets) if subsets is not None else list(SubsetTag)
    out = []
    for tag in wanted:
        members = [s for s, t in zip(scores, parsed) if t is tag]
        out.append(
            SubsetScores(
                tag=tag,
                n_instances=len(members),
                empty=not members,
                report=build_report(f"{submission_id}[{tag.value}]", members),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Leaderboard


@dataclass(frozen=True)
class LeaderboardEntry:
    submission_id: str
    values: Mapping[MetricId, float]
    ranks: Mapping[MetricId, int]
    overall: float


@dataclass(frozen=True)
class Leaderboard:
    metric_set: tuple[MetricId, ...]
    entries: tuple[LeaderboardEntry, ...]  # sorted by overall, descending


def competition_ranks(values: Sequence[float]) -> list[int]:
    """Competition ranking, higher value is better; ties share the best rank."""
    return [1 + sum(1 for other in values if other > v) for v in values]


def build_leaderboard(
    reports: Sequence[ScoreReport],
    metric_set: Sequence[MetricId] | None = None,
) -> Leaderboard:
    """Rank submissions by mean reciprocal rank across the metric set.

    Detection metrics rank on raw P/R/F; selection and generation metrics
    rank on their composed F.  Entries sort by overall score descending,
    ties broken by submission id for a stable order.
    """
    if not reports:
        raise ValueError("leaderboard needs at least one report")
    metrics = tuple(metric_set) if metric_set else ALL_METRICS
    if not metrics:
        raise ValueError("metric set must be nonempty")
    per_metric_ranks: dict[MetricId, list[int]] = {}
    for metric in metrics:
        per_metric_ranks[metric] = competition_ranks(
            [rep.value_for(metric) for rep in reports]
        )
    entries = []
    for i, rep in enumerate(reports):
        ranks = {m: per_metric_ranks[m][i] for m in metrics}
        overall = sum(1.0 / rk for rk in ranks.values()) / len(metrics)
        entries.append(
            LeaderboardEntry(
                submission_id=rep.submission_id,
                values={m: rep.value_for(m) for m in metrics},
                ranks=ranks,
                overall=overall,
            )
        )
    entries.sort(key=lambda e: (-e.overall, e.submission_id))
    return Leaderboard(metric_set=metrics, entries=tuple(entries))


# ---------------------------------------------------------------------------
# Rank correlation


class UndefinedCorrelationError(ValueError):
    """Raised when either input is constant, leaving the correlation undefined."""


def _average_ranks(xs: Sequence[float]) -> list[float]:
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # 1-based average rank over the tied run
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_rho(ranking_a: Sequence[float], ranking_b: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    n = len(ranking_a)
    if n != len(ranking_b):
        raise ValueError("inputs must have equal length")
    if n < 2:
        raise ValueError("need at least two observations")
    if len(set(ranking_a)) == 1 or len(set(ranking_b)) == 1:
        raise UndefinedCorrelationError("constant input has no defined rank correlation")
    ra = _average_ranks(ranking_a)
    rb = _average_ranks(ranking_b)
    mean = (n + 1) / 2
    da = [x - mean for x in ra]
    db = [x - mean for x in rb]
    cov = math.fsum(x * y for x, y in zip(da, db))
    va = math.fsum(x * x for x in da)
    vb = math.fsum(y * y for y in db)
    return cov / math.sqrt(va * vb)


def metric_correlation_matrix(
    reports: Sequence[ScoreReport],
    metric_set: Sequence[MetricId] | None = None,
) -> dict[MetricId, dict[MetricId, float | None]]:
    """Pairwise Spearman correlations of metric values across submissions.

    Metrics that are constant across the submissions produce undefined
    correlations, reported as None.
    """
    if len(reports) < 2:
        raise ValueError("correlation needs at least two reports")
    metrics = tuple(metric_set) if metric_set else ALL_METRICS
    columns = {m: [rep.value_for(m) for rep in reports] for m in metrics}
    matrix: dict[MetricId, dict[MetricId, float | None]] = {}
    for a in metrics:
        matrix[a] = {}
        for b in metrics:
            try:
                matrix[a][b] = spearman_rho(columns[a], columns[b])
            except UndefinedCorrelationError:
                matrix[a][b] = None
    return matrix


# ---------------------------------------------------------------------------
# Report files


def report_to_dict(report: ScoreReport) -> dict:
    return {
        "submission_id": report.submission_id,
        "detection": {
            "p": report.detection[0],
            "r": report.detection[1],
            "f": report.detection[2],
        },
        "metrics": {
            m.value: report.metrics[m].to_dict()
            for m in COMPOSABLE_METRICS
            if m in report.metrics
        },
        "overall": report.overall,
    }


def report_from_dict(data: Mapping) -> ScoreReport:
    try:
        detection = (
            float(data["detection"]["p"]),
            float(data["detection"]["r"]),
            float(data["detection"]["f"]),
        )
        metrics = {
            MetricId(mid): ComposedScore(
                precision=float(v["s_p"]), recall=float(v["s_r"]), f=float(v["s_f"])
            )
            for mid, v in data["metrics"].items()
        }
        overall = data.get("overall")
        return ScoreReport(
            submission_id=str(data["submission_id"]),
            detection=detection,
            metrics=metrics,
            overall=None if overall is None else float(overall),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"malformed report: {e}") from e


def save_report(report: ScoreReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_report(path: str | Path) -> ScoreReport:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def leaderboard_to_dict(board: Leaderboard) -> dict:
    return {
        "metric_set": [m.value for m in board.metric_set],
        "entries": [
            {
                "submission_id": e.submission_id,
                "overall": e.overall,
                "values": {m.value: e.values[m] for m in board.metric_set},
                "ranks": {m.value: e.ranks[m] for m in board.metric_set},
            }
            for e in board.entries
        ],
    }
