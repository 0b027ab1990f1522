"""Per-instance and per-set metric computations.

Detection precision/recall/F, ranked-selection MRR@5 and Recall@k, and
the sentence-level generation metrics (BLEU-1..4, METEOR, ROUGE-1/2/L),
plus the shared tokenizer.  Everything here is a deterministic pure
function with values in [0, 1]; all 0/0 cases are defined as 0.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import AbstractSet, Hashable, Sequence

from . import _kernels

TokenSeq = Sequence[str]

# Numerator floor for zero n-gram matches; keeps higher BLEU orders off
# hard zeros for short references.
BLEU_EPSILON = 1e-9

ROUGE_BETA = 1.2

# Chunk-penalty parameters: Fmean = 10PR/(R+9P), penalty = 0.5*(chunks/m)^3.
METEOR_GAMMA = 0.5
METEOR_BETA = 3

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal alphanumeric runs; every other
    non-whitespace character becomes its own single-character token."""
    return _TOKEN_RE.findall(text.lower())


class MetricId(str, enum.Enum):
    """The 14 objective metrics: 3 detection, 3 selection, 8 generation."""

    DETECTION_P = "detection_p"
    DETECTION_R = "detection_r"
    DETECTION_F = "detection_f"
    MRR5 = "mrr@5"
    RECALL1 = "recall@1"
    RECALL5 = "recall@5"
    BLEU1 = "bleu-1"
    BLEU2 = "bleu-2"
    BLEU3 = "bleu-3"
    BLEU4 = "bleu-4"
    METEOR = "meteor"
    ROUGE1 = "rouge-1"
    ROUGE2 = "rouge-2"
    ROUGEL = "rouge-l"

    def __str__(self) -> str:  # report keys and CLI output
        return self.value


DETECTION_METRICS = (MetricId.DETECTION_P, MetricId.DETECTION_R, MetricId.DETECTION_F)
SELECTION_METRICS = (MetricId.MRR5, MetricId.RECALL1, MetricId.RECALL5)
GENERATION_METRICS = (
    MetricId.BLEU1,
    MetricId.BLEU2,
    MetricId.BLEU3,
    MetricId.BLEU4,
    MetricId.METEOR,
    MetricId.ROUGE1,
    MetricId.ROUGE2,
    MetricId.ROUGEL,
)
# The 11 metrics that go through detection-weighted composition.
COMPOSABLE_METRICS = SELECTION_METRICS + GENERATION_METRICS
ALL_METRICS = DETECTION_METRICS + COMPOSABLE_METRICS


@dataclass(frozen=True)
class DetectionCounts:
    """Binary confusion counts over a scored instance set."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def f_measure(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0.

    Equal inputs return exactly that value, keeping downstream
    exact-equality invariants free of rounding noise.
    """
    if precision == recall:
        return precision
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def detection_prf(counts: DetectionCounts) -> tuple[float, float, float]:
    """(precision, recall, F) from confusion counts, 0/0 defined as 0."""
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return p, r, f_measure(p, r)


def selection_mrr_at_5(
    ranked: Sequence[Hashable], relevant: AbstractSet[Hashable]
) -> float:
    """Reciprocal rank of the first relevant item within the top 5; 0 if none."""
    if not relevant:
        raise ValueError("relevant set must be nonempty")
    for rank, item in enumerate(ranked[:5], start=1):
        if item in relevant:
            return 1.0 / rank
    return 0.0


def selection_recall_at_k(
    ranked: Sequence[Hashable], relevant: AbstractSet[Hashable], k: int
) -> float:
    """Fraction of the relevant set found in the top k."""
    if not relevant:
        raise ValueError("relevant set must be nonempty")
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = len(set(ranked[:k]) & set(relevant))
    return hits / len(relevant)


def _encode_pair(a: TokenSeq, b: TokenSeq) -> tuple[list[int], list[int]]:
    """Intern both token sequences into a shared id space for the kernels."""
    ids: dict[str, int] = {}
    ea = [ids.setdefault(t, len(ids)) for t in a]
    eb = [ids.setdefault(t, len(ids)) for t in b]
    return ea, eb


def bleu_n(candidate: TokenSeq, reference: TokenSeq, n: int) -> float:
    """Sentence-level BLEU-n.

    Geometric mean of clipped m-gram precisions for m = 1..n, with zero
    numerators floored at BLEU_EPSILON (an order with no candidate
    m-grams contributes the bare epsilon).  Multiplied by the brevity
    penalty exp(1 - |ref|/|cand|) when the candidate is shorter than the
    reference.  An empty candidate scores 0.
    """
    if not 1 <= n <= 4:
        raise ValueError("BLEU order must be in 1..4")
    if not candidate:
        return 0.0
    cand_ids, ref_ids = _encode_pair(candidate, reference)
    log_sum = 0.0
    for order in range(1, n + 1):
        clipped, cand_total, _ = _kernels.ngram_overlap(cand_ids, ref_ids, order)
        if cand_total <= 0:
            p = BLEU_EPSILON
        elif clipped == 0:
            p = BLEU_EPSILON / cand_total
        else:
            p = clipped / cand_total
        log_sum += math.log(p)
    score = math.exp(log_sum / n)
    if len(candidate) < len(reference):
        score *= math.exp(1.0 - len(reference) / len(candidate))
    return score


def meteor(candidate: TokenSeq, reference: TokenSeq) -> float:
    """Exact-match unigram metric with a fragmentation penalty.

    The alignment maximizes matches, then minimizes chunks among the
    maximum alignments.  With m matches over c chunks:
    P = m/|cand|, R = m/|ref|, Fmean = 10PR/(R+9P),
    penalty = 0.5*(c/m)^3, score = Fmean*(1-penalty).  Score 0 when m=0.
    """
    if not candidate or not reference:
        return 0.0
    cand_ids, ref_ids = _encode_pair(candidate, reference)
    matches, chunks = _kernels.meteor_stats(cand_ids, ref_ids)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    penalty = METEOR_GAMMA * (chunks**METEOR_BETA) / (matches**METEOR_BETA)
    return fmean * (1.0 - penalty)


def _rouge_f(clipped: float, cand_total: int, ref_total: int) -> float:
    if clipped == 0 or cand_total == 0 or ref_total == 0:
        return 0.0
    p = clipped / cand_total
    r = clipped / ref_total
    beta2 = ROUGE_BETA * ROUGE_BETA
    return (1 + beta2) * p * r / (r + beta2 * p)


def rouge_n(candidate: TokenSeq, reference: TokenSeq, n: int) -> float:
    """Recall-weighted F-score of clipped n-gram overlap (n = 1 or 2)."""
    if n not in (1, 2):
        raise ValueError("ROUGE-n order must be 1 or 2")
    cand_ids, ref_ids = _encode_pair(candidate, reference)
    clipped, cand_total, ref_total = _kernels.ngram_overlap(cand_ids, ref_ids, n)
    return _rouge_f(clipped, cand_total, ref_total)


def rouge_l(candidate: TokenSeq, reference: TokenSeq) -> float:
    """Recall-weighted F-score of the longest common subsequence."""
    cand_ids, ref_ids = _encode_pair(candidate, reference)
    lcs = _kernels.lcs_length(cand_ids, ref_ids)
    return _rouge_f(lcs, len(candidate), len(reference))


def generation_metric(metric: MetricId, candidate: TokenSeq, reference: TokenSeq) -> float:
    """Dispatch a generation MetricId onto tokenized candidate/reference."""
    if metric is MetricId.METEOR:
        return meteor(candidate, reference)
    if metric is MetricId.ROUGEL:
        return rouge_l(candidate, reference)
    kind, _, order = metric.value.partition("-")
    if kind == "bleu":
        return bleu_n(candidate, reference, int(order))
    if kind == "rouge":
        return rouge_n(candidate, reference, int(order))
    raise ValueError(f"{metric} is not a generation metric")


def selection_metric(
    metric: MetricId, ranked: Sequence[Hashable], relevant: AbstractSet[Hashable]
) -> float:
    """Dispatch a selection MetricId onto a ranked list and relevant set."""
    if metric is MetricId.MRR5:
        return selection_mrr_at_5(ranked, relevant)
    if metric is MetricId.RECALL1:
        return selection_recall_at_k(ranked, relevant, 1)
    if metric is MetricId.RECALL5:
        return selection_recall_at_k(ranked, relevant, 5)
    raise ValueError(f"{metric} is not a selection metric")
