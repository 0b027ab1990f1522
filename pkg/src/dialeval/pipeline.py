"""Reference three-stage pipeline and training-data export.

A runnable lexical implementation of the knowledge branch (detection,
selection, generation) behind pluggable stage interfaces, so the harness
can score its own baseline, oracle stages, or externally produced
prediction files interchangeably.  Also exports ranked-selection
training pairs with uniform negative sampling.

Stages are pure given (context, knowledge base, config); the TF-IDF
index is built once per stage set and shared read-only, so instances
may be processed concurrently.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .corpus import (
    Dataset,
    DialogueContext,
    KnowledgeBase,
    KnowledgeSnippet,
    Label,
    PredictionEntry,
    SnippetRef,
)
from .metrics import tokenize

TURN_SEPARATOR = "|"


@dataclass(frozen=True)
class HarnessConfig:
    """Knobs shared by the pipeline stages.

    window: trailing turns used as the dialogue context.
    truncation_budget: max context tokens, most recent kept.
    detection_threshold: cosine similarity needed to trigger the branch.
    top_k: ranked refs emitted by the selector (scoring caps at 5).
    negatives_per_positive: negatives sampled per positive training pair.
    """

    window: int = 5
    truncation_budget: int = 128
    detection_threshold: float = 0.3
    top_k: int = 5
    negatives_per_positive: int = 4

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.truncation_budget < 1:
            raise ValueError("truncation_budget must be >= 1")
        if not 0.0 <= self.detection_threshold <= 1.0:
            raise ValueError("detection_threshold must lie in [0, 1]")
        if not 1 <= self.top_k <= 5:
            raise ValueError("top_k must lie in 1..5 for scoring compatibility")
        if self.negatives_per_positive < 0:
            raise ValueError("negatives_per_positive must be >= 0")


class Detector(Protocol):
    def __call__(self, ctx: DialogueContext, kb: KnowledgeBase) -> bool: ...


class Selector(Protocol):
    def __call__(self, ctx: DialogueContext, kb: KnowledgeBase) -> list[SnippetRef]: ...


class Generator(Protocol):
    def __call__(
        self, ctx: DialogueContext, selected: Sequence[KnowledgeSnippet]
    ) -> str: ...


@dataclass(frozen=True)
class StageInterfaces:
    detector: Detector
    selector: Selector
    generator: Generator


class PipelineError(Exception):
    """A stage failed; carries the offending instance id."""

    def __init__(self, instance_id: str, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed on instance {instance_id}: {cause}")
        self.instance_id = instance_id
        self.stage = stage


# ---------------------------------------------------------------------------
# TF-IDF over the snippet collection


class TfidfIndex:
    """Sparse TF-IDF index over (ref, token-list) documents.

    Log-scaled term frequency, smoothed inverse document frequency over
    the snippet collection, cosine scoring via inverted postings.  The
    index is immutable once built and independent of document insertion
    order.
    """

    def __init__(self, docs: Iterable[tuple[SnippetRef, Sequence[str]]]):
        doc_terms: dict[SnippetRef, dict[str, int]] = {}
        for ref, tokens in docs:
            counts: dict[str, int] = {}
            for t in tokens:
                counts[t] = counts.get(t, 0) + 1
            doc_terms[ref] = counts
        self._n_docs = len(doc_terms)
        df: dict[str, int] = {}
        for counts in doc_terms.values():
            for term in counts:
                df[term] = df.get(term, 0) + 1
        self._idf = {
            term: math.log((1 + self._n_docs) / (1 + n)) + 1.0 for term, n in df.items()
        }
        self._default_idf = math.log(1 + self._n_docs) + 1.0  # unseen terms
        # normalized weights as postings: term -> [(ref, weight)]
        self._postings: dict[str, list[tuple[SnippetRef, float]]] = {}
        self._refs = sorted(doc_terms)
        for ref in self._refs:
            counts = doc_terms[ref]
            weights = {
                term: (1.0 + math.log(c)) * self._idf[term] for term, c in counts.items()
            }
            norm = math.sqrt(math.fsum(w * w for w in weights.values()))
            if norm == 0.0:
                continue
            for term, w in sorted(weights.items()):
                self._postings.setdefault(term, []).append((ref, w / norm))

    def _query_weights(self, tokens: Sequence[str]) -> dict[str, float]:
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        return {
            term: (1.0 + math.log(c)) * self._idf.get(term, self._default_idf)
            for term, c in counts.items()
        }

    def best_score(self, tokens: Sequence[str]) -> float:
        """Highest cosine similarity between the query and any document."""
        ranked = self.rank(tokens, limit=1)
        return ranked[0][1] if ranked else 0.0

    def rank(
        self, tokens: Sequence[str], limit: int | None = None
    ) -> list[tuple[SnippetRef, float]]:
        """Documents by descending cosine; ties break on the ref triple."""
        weights = self._query_weights(tokens)
        qnorm = math.sqrt(math.fsum(w * w for w in weights.values()))
        scores: dict[SnippetRef, float] = {}
        if qnorm > 0.0:
            for term, qw in weights.items():
                for ref, dw in self._postings.get(term, ()):
                    scores[ref] = scores.get(ref, 0.0) + qw * dw
        ranked = sorted(
            ((ref, scores.get(ref, 0.0) / qnorm if qnorm else 0.0) for ref in self._refs),
            key=lambda item: (-item[1], item[0]),
        )
        return ranked[:limit] if limit is not None else ranked


def _title_index(kb: KnowledgeBase) -> TfidfIndex:
    return TfidfIndex((s.ref, tokenize(s.title)) for s in kb)


def _title_body_index(kb: KnowledgeBase) -> TfidfIndex:
    return TfidfIndex((s.ref, tokenize(s.title + " " + s.body)) for s in kb)


def context_window_text(ctx: DialogueContext, cfg: HarnessConfig) -> str:
    """The last ``window`` turns joined with the turn separator token."""
    turns = ctx.turns[-cfg.window :]
    return f" {TURN_SEPARATOR} ".join(t.text for t in turns)


def _context_tokens(ctx: DialogueContext, cfg: HarnessConfig) -> list[str]:
    tokens = tokenize(context_window_text(ctx, cfg))
    return tokens[-cfg.truncation_budget :]


def lexical_detect(
    ctx: DialogueContext,
    kb: KnowledgeBase,
    cfg: HarnessConfig,
    index: TfidfIndex | None = None,
) -> bool:
    """True when the final user turn is lexically close to any snippet title."""
    index = index if index is not None else _title_index(kb)
    query = tokenize(ctx.final_user_turn.text)
    return index.best_score(query) >= cfg.detection_threshold


def tfidf_select(
    ctx: DialogueContext,
    kb: KnowledgeBase,
    cfg: HarnessConfig,
    index: TfidfIndex | None = None,
) -> list[SnippetRef]:
    """Snippets ranked by cosine between the context window and title+body."""
    index = index if index is not None else _title_body_index(kb)
    ranked = index.rank(_context_tokens(ctx, cfg), limit=cfg.top_k)
    return [ref for ref, _ in ranked]


def extractive_generate(
    ctx: DialogueContext, selected: Sequence[KnowledgeSnippet]
) -> str:
    """The top-ranked snippet's body, sentence-cased, as the response."""
    if not selected:
        raise ValueError("extractive generation requires a nonempty selection")
    body = selected[0].body
    return body[:1].upper() + body[1:]


def lexical_stages(kb: KnowledgeBase, cfg: HarnessConfig) -> StageInterfaces:
    """The reference stage set, sharing indexes built once over ``kb``."""
    title_index = _title_index(kb)
    title_body_index = _title_body_index(kb)

    def detector(ctx: DialogueContext, _kb: KnowledgeBase) -> bool:
        return lexical_detect(ctx, _kb, cfg, index=title_index)

    def selector(ctx: DialogueContext, _kb: KnowledgeBase) -> list[SnippetRef]:
        return tfidf_select(ctx, _kb, cfg, index=title_body_index)

    return StageInterfaces(
        detector=detector, selector=selector, generator=extractive_generate
    )


def oracle_stages(dataset: Dataset) -> StageInterfaces:
    """Stages that read the gold label; used for harness closure tests."""
    by_id: dict[str, Label] = {
        ctx.instance_id: label for ctx, label in zip(dataset.contexts, dataset.labels)
    }

    def detector(ctx: DialogueContext, _kb: KnowledgeBase) -> bool:
        return by_id[ctx.instance_id].target

    def selector(ctx: DialogueContext, _kb: KnowledgeBase) -> list[SnippetRef]:
        return list(by_id[ctx.instance_id].knowledge[:5])

    def generator(ctx: DialogueContext, selected: Sequence[KnowledgeSnippet]) -> str:
        response = by_id[ctx.instance_id].response
        assert response is not None
        return response

    return StageInterfaces(detector=detector, selector=selector, generator=generator)


def random_selector_stages(
    kb: KnowledgeBase, cfg: HarnessConfig, seed: int
) -> StageInterfaces:
    """Lexical detector and generator around a seeded random-ranking selector."""
    base = lexical_stages(kb, cfg)
    refs = sorted(s.ref for s in kb)
    rng = random.Random(seed)

    def selector(ctx: DialogueContext, _kb: KnowledgeBase) -> list[SnippetRef]:
        return rng.sample(refs, min(cfg.top_k, len(refs)))

    return StageInterfaces(
        detector=base.detector, selector=selector, generator=base.generator
    )


def run_pipeline(
    dataset: Dataset, stages: StageInterfaces, cfg: HarnessConfig
) -> list[PredictionEntry]:
    """Run the three stages over every instance, yielding aligned predictions."""
    entries = []
    for ctx in dataset.contexts:
        try:
            if not stages.detector(ctx, dataset.kb):
                entries.append(PredictionEntry(target=False))
                continue
        except Exception as e:  # noqa: BLE001 - annotate with instance context
            raise PipelineError(ctx.instance_id, "detection", e) from e
        try:
            refs = stages.selector(ctx, dataset.kb)[: cfg.top_k]
        except Exception as e:  # noqa: BLE001
            raise PipelineError(ctx.instance_id, "selection", e) from e
        try:
            snippets = [dataset.kb.get(r) for r in refs]
            response = stages.generator(ctx, snippets)
        except Exception as e:  # noqa: BLE001
            raise PipelineError(ctx.instance_id, "generation", e) from e
        entries.append(
            PredictionEntry(target=True, knowledge=tuple(refs), response=response)
        )
    return entries


# ---------------------------------------------------------------------------
# Selection training data


class PairLabel(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class TrainingPair:
    context_text: str
    ref: SnippetRef
    label: PairLabel


def export_training_pairs(
    dataset: Dataset, cfg: HarnessConfig, rng_seed: int
) -> list[TrainingPair]:
    """Selection training pairs with uniform negative sampling.

    Every gold knowledge-seeking turn yields one positive pair per gold
    ref plus ``negatives_per_positive`` negatives drawn uniformly without
    replacement from the knowledge base minus the instance's gold set.
    Deterministic for a given seed.
    """
    rng = random.Random(rng_seed)
    all_refs = dataset.kb.sorted_refs()
    pairs = []
    for ctx, label in zip(dataset.contexts, dataset.labels):
        if not label.target:
            continue
        gold = set(label.knowledge)
        eligible = [r for r in all_refs if r not in gold]
        if len(eligible) < cfg.negatives_per_positive:
            raise ValueError(
                f"{ctx.instance_id}: knowledge base leaves {len(eligible)} eligible "
                f"negatives, need {cfg.negatives_per_positive}"
            )
        text = context_window_text(ctx, cfg)
        for ref in label.knowledge:
            pairs.append(TrainingPair(context_text=text, ref=ref, label=PairLabel.POSITIVE))
            for neg in rng.sample(eligible, cfg.negatives_per_positive):
                pairs.append(
                    TrainingPair(context_text=text, ref=neg, label=PairLabel.NEGATIVE)
                )
    return pairs


def save_training_pairs(pairs: Iterable[TrainingPair], path: str | Path) -> None:
    """One JSON object per line: {"context", "ref", "label"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(
                json.dumps(
                    {
                        "context": pair.context_text,
                        "ref": pair.ref.to_dict(),
                        "label": pair.label.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
