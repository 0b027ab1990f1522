"""Benchmark data model and file I/O.

Loads and validates the four file kinds the harness consumes (dialogue
logs, ground-truth labels, the hierarchical knowledge base, and
submission prediction files), addresses snippets as domain/entity/doc
triples, and generates small deterministic synthetic fixtures.

File schemas (all UTF-8 JSON):

* logs: array of dialogues; each dialogue is an array of
  ``{"speaker": "U"|"S", "text": str}`` objects in turn order.  Each
  dialogue is one instance whose final turn is the user turn under
  consideration.
* labels: array parallel to logs of
  ``{"target": bool, "knowledge": [{"domain", "entity_id", "doc_id"}],
  "response": str}`` where knowledge/response are present only when
  target is true.
* knowledge: ``{domain: {entity_id: {"name": str|null,
  "docs": {doc_id: {"title": str, "body": str}}}}}``.  The entity id
  ``"*"`` holds domain-wide snippets.
* predictions: same schema as labels; knowledge arrays are rank-ordered,
  best first, at most five kept.

Loaded objects are immutable and safely shareable across threads.
"""

from __future__ import annotations

import enum
import json
import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

MAX_RANKED_REFS = 5

DOMAIN_WIDE_ENTITY = "*"


class CorpusError(Exception):
    """Base class for data loading and validation failures."""


class DataFormatError(CorpusError):
    """A file failed to parse or an entry violates the schema."""


class AlignmentError(CorpusError):
    """Parallel files disagree on length."""


class DanglingRefError(CorpusError):
    """A snippet reference does not resolve against the knowledge base."""


class Speaker(str, enum.Enum):
    USER = "U"
    SYSTEM = "S"


class SubsetTag(str, enum.Enum):
    MULTIWOZ = "MultiWOZ"
    SF_WRITTEN = "SF-written"
    SF_SPOKEN = "SF-spoken"


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.speaker, Speaker):
            object.__setattr__(self, "speaker", Speaker(self.speaker))
        if not self.text.strip():
            raise DataFormatError("turn text must be nonempty")


@dataclass(frozen=True)
class DialogueContext:
    """One instance: the turns up to and including the user turn to process."""

    instance_id: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise DataFormatError(f"{self.instance_id}: dialogue has no turns")
        if self.turns[-1].speaker is not Speaker.USER:
            raise DataFormatError(
                f"{self.instance_id}: final turn must be a user turn"
            )

    @property
    def final_user_turn(self) -> Turn:
        return self.turns[-1]


@dataclass(frozen=True, order=True)
class SnippetRef:
    domain: str
    entity_id: str
    doc_id: str

    def __post_init__(self) -> None:
        for name in ("domain", "entity_id", "doc_id"):
            if not getattr(self, name):
                raise DataFormatError(f"snippet ref field {name} must be nonempty")

    def __str__(self) -> str:
        return f"{self.domain}/{self.entity_id}/{self.doc_id}"

    def to_dict(self) -> dict[str, str]:
        return {"domain": self.domain, "entity_id": self.entity_id, "doc_id": self.doc_id}


@dataclass(frozen=True)
class KnowledgeSnippet:
    ref: SnippetRef
    title: str
    body: str
    entity_name: str | None = None

    def __post_init__(self) -> None:
        if not self.title:
            raise DataFormatError(f"{self.ref}: snippet title must be nonempty")
        if not self.body:
            raise DataFormatError(f"{self.ref}: snippet body must be nonempty")


class KnowledgeBase:
    """Immutable snippet collection indexed by ref, domain, and entity."""

    def __init__(self, snippets: Iterable[KnowledgeSnippet]):
        self._by_ref: dict[SnippetRef, KnowledgeSnippet] = {}
        for snippet in snippets:
            if snippet.ref in self._by_ref:
                raise DataFormatError(f"duplicate snippet ref {snippet.ref}")
            self._by_ref[snippet.ref] = snippet
        if not self._by_ref:
            raise DataFormatError("knowledge base must hold at least one snippet")

    def __len__(self) -> int:
        return len(self._by_ref)

    def __contains__(self, ref: SnippetRef) -> bool:
        return ref in self._by_ref

    def __iter__(self) -> Iterator[KnowledgeSnippet]:
        return iter(self._by_ref.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return self._by_ref == other._by_ref

    def get(self, ref: SnippetRef) -> KnowledgeSnippet:
        try:
            return self._by_ref[ref]
        except KeyError:
            raise DanglingRefError(f"unresolvable snippet ref {ref}") from None

    def sorted_refs(self) -> list[SnippetRef]:
        return sorted(self._by_ref)

    def domains(self) -> list[str]:
        return sorted({ref.domain for ref in self._by_ref})

    def by_domain(self, domain: str) -> list[KnowledgeSnippet]:
        return [self._by_ref[r] for r in self.sorted_refs() if r.domain == domain]

    def by_entity(self, domain: str, entity_id: str) -> list[KnowledgeSnippet]:
        return [
            self._by_ref[r]
            for r in self.sorted_refs()
            if r.domain == domain and r.entity_id == entity_id
        ]


def _check_label_shape(
    target: bool,
    knowledge: tuple[SnippetRef, ...],
    response: str | None,
    where: str,
) -> None:
    if target:
        if not knowledge:
            raise DataFormatError(f"{where}: target is true but knowledge is empty")
        if not response:
            raise DataFormatError(f"{where}: target is true but response is missing")
    else:
        if knowledge:
            raise DataFormatError(f"{where}: target is false but knowledge is present")
        if response is not None:
            raise DataFormatError(f"{where}: target is false but response is present")


@dataclass(frozen=True)
class Label:
    """Ground truth for one instance."""

    target: bool
    knowledge: tuple[SnippetRef, ...] = ()
    response: str | None = None

    def __post_init__(self) -> None:
        _check_label_shape(self.target, self.knowledge, self.response, "label")


@dataclass(frozen=True)
class PredictionEntry:
    """One system output: detection flag, ranked refs (best first), response."""

    target: bool
    knowledge: tuple[SnippetRef, ...] = ()
    response: str | None = None

    def __post_init__(self) -> None:
        _check_label_shape(self.target, self.knowledge, self.response, "prediction")
        if len(self.knowledge) > MAX_RANKED_REFS:
            raise DataFormatError(
                f"prediction holds {len(self.knowledge)} refs; at most "
                f"{MAX_RANKED_REFS} allowed (truncate before constructing)"
            )
        if len(set(self.knowledge)) != len(self.knowledge):
            raise DataFormatError("prediction knowledge list has duplicate refs")


@dataclass(frozen=True)
class Dataset:
    contexts: tuple[DialogueContext, ...]
    labels: tuple[Label, ...]
    kb: KnowledgeBase
    subset_tag: SubsetTag | None = None

    def __post_init__(self) -> None:
        if len(self.contexts) != len(self.labels):
            raise AlignmentError(
                f"{len(self.contexts)} contexts but {len(self.labels)} labels"
            )
        for i, label in enumerate(self.labels):
            for ref in label.knowledge:
                if ref not in self.kb:
                    raise DanglingRefError(
                        f"labels[{i}]: unresolvable snippet ref {ref}"
                    )

    def __len__(self) -> int:
        return len(self.contexts)


# ---------------------------------------------------------------------------
# Parsing


def _read_json(path: Path):
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataFormatError(f"{path}: {e}") from e
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise DataFormatError(
            f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        ) from e


def _parse_ref(obj, where: str) -> SnippetRef:
    if not isinstance(obj, Mapping):
        raise DataFormatError(f"{where}: knowledge ref must be an object")
    try:
        return SnippetRef(
            domain=str(obj["domain"]),
            entity_id=str(obj["entity_id"]),
            doc_id=str(obj["doc_id"]),
        )
    except KeyError as e:
        raise DataFormatError(f"{where}: knowledge ref missing field {e.args[0]}") from None


def _parse_label_like(obj, where: str) -> tuple[bool, tuple[SnippetRef, ...], str | None]:
    if not isinstance(obj, Mapping):
        raise DataFormatError(f"{where}: entry must be an object")
    if "target" not in obj or not isinstance(obj["target"], bool):
        raise DataFormatError(f"{where}: missing or non-boolean 'target'")
    target = obj["target"]
    refs_raw = obj.get("knowledge")
    refs: tuple[SnippetRef, ...] = ()
    if refs_raw is not None:
        if not isinstance(refs_raw, list):
            raise DataFormatError(f"{where}: 'knowledge' must be an array")
        refs = tuple(
            _parse_ref(r, f"{where}.knowledge[{k}]") for k, r in enumerate(refs_raw)
        )
    response = obj.get("response")
    if response is not None and not isinstance(response, str):
        raise DataFormatError(f"{where}: 'response' must be a string")
    return target, refs, response


def _parse_contexts(data, path: Path) -> tuple[DialogueContext, ...]:
    if not isinstance(data, list):
        raise DataFormatError(f"{path}: logs file must hold an array of dialogues")
    contexts = []
    for i, dialogue in enumerate(data):
        if not isinstance(dialogue, list) or not dialogue:
            raise DataFormatError(f"{path}: logs[{i}] must be a nonempty array of turns")
        turns = []
        for j, t in enumerate(dialogue):
            where = f"{path}: logs[{i}][{j}]"
            if not isinstance(t, Mapping):
                raise DataFormatError(f"{where}: turn must be an object")
            speaker = t.get("speaker")
            if speaker not in (Speaker.USER.value, Speaker.SYSTEM.value):
                raise DataFormatError(f"{where}: speaker must be 'U' or 'S'")
            text = t.get("text")
            if not isinstance(text, str) or not text.strip():
                raise DataFormatError(f"{where}: text must be a nonempty string")
            turns.append(Turn(Speaker(speaker), text))
        try:
            contexts.append(
                DialogueContext(
                    instance_id=f"d{i}-t{len(turns) - 1}", turns=tuple(turns)
                )
            )
        except DataFormatError as e:
            raise DataFormatError(f"{path}: logs[{i}]: {e}") from None
    return tuple(contexts)


def load_knowledge(path: str | Path) -> KnowledgeBase:
    """Load the hierarchical knowledge file into a KnowledgeBase."""
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, Mapping):
        raise DataFormatError(f"{path}: knowledge file must hold an object of domains")
    snippets = []
    for domain, entities in data.items():
        if not isinstance(entities, Mapping):
            raise DataFormatError(f"{path}: knowledge[{domain}] must be an object")
        for entity_id, entity in entities.items():
            where = f"{path}: knowledge[{domain}][{entity_id}]"
            if not isinstance(entity, Mapping) or "docs" not in entity:
                raise DataFormatError(f"{where}: entity must be an object with 'docs'")
            name = entity.get("name")
            if name is not None and not isinstance(name, str):
                raise DataFormatError(f"{where}: 'name' must be a string or null")
            docs = entity["docs"]
            if not isinstance(docs, Mapping):
                raise DataFormatError(f"{where}: 'docs' must be an object")
            for doc_id, doc in docs.items():
                dwhere = f"{where}.docs[{doc_id}]"
                if not isinstance(doc, Mapping):
                    raise DataFormatError(f"{dwhere}: doc must be an object")
                title = doc.get("title")
                body = doc.get("body")
                if not isinstance(title, str) or not isinstance(body, str):
                    raise DataFormatError(f"{dwhere}: 'title' and 'body' must be strings")
                try:
                    snippets.append(
                        KnowledgeSnippet(
                            ref=SnippetRef(str(domain), str(entity_id), str(doc_id)),
                            title=title,
                            body=body,
                            entity_name=name,
                        )
                    )
                except DataFormatError as e:
                    raise DataFormatError(f"{dwhere}: {e}") from None
    return KnowledgeBase(snippets)


def load_dataset(
    logs_path: str | Path,
    labels_path: str | Path,
    knowledge_path: str | Path,
    subset_tag: SubsetTag | None = None,
) -> Dataset:
    """Load and cross-validate the three dataset files.

    Raises DataFormatError on parse/schema problems, AlignmentError when
    logs and labels disagree on length, and DanglingRefError when a label
    references a snippet absent from the knowledge base.
    """
    logs_path, labels_path = Path(logs_path), Path(labels_path)
    contexts = _parse_contexts(_read_json(logs_path), logs_path)
    labels_data = _read_json(labels_path)
    if not isinstance(labels_data, list):
        raise DataFormatError(f"{labels_path}: labels file must hold an array")
    if len(labels_data) != len(contexts):
        raise AlignmentError(
            f"{labels_path}: {len(labels_data)} labels for {len(contexts)} dialogues"
        )
    labels = []
    for i, obj in enumerate(labels_data):
        where = f"{labels_path}: labels[{i}]"
        target, refs, response = _parse_label_like(obj, where)
        try:
            labels.append(Label(target=target, knowledge=refs, response=response))
        except DataFormatError as e:
            raise DataFormatError(f"{where}: {e}") from None
    kb = load_knowledge(knowledge_path)
    return Dataset(
        contexts=contexts, labels=tuple(labels), kb=kb, subset_tag=subset_tag
    )


def load_predictions(path: str | Path, dataset: Dataset) -> list[PredictionEntry]:
    """Load a predictions file and validate it against a loaded dataset.

    Entries align index-for-index with ``dataset.contexts``.  Ranked
    knowledge lists longer than five are truncated to the top five with a
    warning; every kept ref must resolve in ``dataset.kb``.
    """
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, list):
        raise DataFormatError(f"{path}: predictions file must hold an array")
    if len(data) != len(dataset.contexts):
        raise AlignmentError(
            f"{path}: {len(data)} predictions for {len(dataset.contexts)} instances"
        )
    entries = []
    for i, obj in enumerate(data):
        where = f"{path}: predictions[{i}]"
        target, refs, response = _parse_label_like(obj, where)
        if len(refs) > MAX_RANKED_REFS:
            warnings.warn(
                f"{where}: {len(refs)} ranked refs; keeping the top {MAX_RANKED_REFS}",
                stacklevel=2,
            )
            refs = refs[:MAX_RANKED_REFS]
        for ref in refs:
            if ref not in dataset.kb:
                raise DanglingRefError(f"{where}: unresolvable snippet ref {ref}")
        try:
            entries.append(PredictionEntry(target=target, knowledge=refs, response=response))
        except DataFormatError as e:
            raise DataFormatError(f"{where}: {e}") from None
    return entries


# ---------------------------------------------------------------------------
# Serialization


def _label_like_to_dict(target: bool, knowledge, response) -> dict:
    if not target:
        return {"target": False}
    return {
        "target": True,
        "knowledge": [ref.to_dict() for ref in knowledge],
        "response": response,
    }


def dataset_to_json_objects(dataset: Dataset) -> tuple[list, list, dict]:
    """(logs, labels, knowledge) JSON-ready structures, deterministic order."""
    logs = [
        [{"speaker": t.speaker.value, "text": t.text} for t in ctx.turns]
        for ctx in dataset.contexts
    ]
    labels = [
        _label_like_to_dict(lb.target, lb.knowledge, lb.response) for lb in dataset.labels
    ]
    knowledge: dict = {}
    for snippet in sorted(dataset.kb, key=lambda s: s.ref):
        dom = knowledge.setdefault(snippet.ref.domain, {})
        ent = dom.setdefault(
            snippet.ref.entity_id, {"name": snippet.entity_name, "docs": {}}
        )
        ent["docs"][snippet.ref.doc_id] = {"title": snippet.title, "body": snippet.body}
    return logs, labels, knowledge


def save_dataset(
    dataset: Dataset,
    logs_path: str | Path,
    labels_path: str | Path,
    knowledge_path: str | Path,
) -> None:
    """Write the three dataset files; identical datasets produce identical bytes."""
    logs, labels, knowledge = dataset_to_json_objects(dataset)
    for path, payload in (
        (logs_path, logs),
        (labels_path, labels),
        (knowledge_path, knowledge),
    ):
        Path(path).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )


def save_predictions(entries: Iterable[PredictionEntry], path: str | Path) -> None:
    payload = [
        _label_like_to_dict(e.target, e.knowledge, e.response) for e in entries
    ]
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Synthetic fixtures

_FIXTURE_DOMAINS = ("hotel", "restaurant", "train", "taxi", "attraction")

_FIXTURE_ENTITIES = {
    "hotel": ("acorn guest house", "alexander b and b", "harbour inn"),
    "restaurant": ("golden wok", "riverside bistro", "casa mia"),
    "train": (),
    "taxi": (),
    "attraction": ("city museum", "old botanic garden"),
}

_TOPIC_HEADS = (
    "parking", "pets", "cancellation", "wifi", "breakfast", "smoking",
    "luggage", "checkout", "payment", "wheelchair", "laundry", "shuttle",
    "balcony", "cots", "vegan", "gluten", "terrace", "reservation",
    "membership", "lockers",
)

_TOPIC_MODS = (
    "policy", "fee", "hours", "access", "options", "availability",
    "deposit", "limit", "service", "arrangements", "discount", "rules",
    "area", "assistance", "menu", "storage", "package", "upgrade",
    "voucher", "schedule",
)

_CHAT_OPENERS = (
    ("U", "i need a place to stay in the north side"),
    ("U", "looking for somewhere to eat tonight"),
    ("U", "can you plan my trip for tomorrow"),
    ("U", "hi, i want to organise an outing"),
)

_CHAT_SYSTEM = (
    ("S", "sure, i can help with that. any preferences on price range?"),
    ("S", "certainly. which part of town would you like?"),
    ("S", "of course. how many people should i book for?"),
    ("S", "happy to help. do you have a date in mind?"),
)

_API_FINAL_TURNS = (
    "please book it for 3 people on friday evening",
    "yes, reserve two rooms for saturday night",
    "can you give me their phone number and postcode",
    "book me a table for 4 at 18:30",
    "i would like to leave after 09:15, please arrange that",
    "find me something cheap in the centre instead",
)

_SEEK_TEMPLATES = (
    "by the way, what is the {head} {mod} there?",
    "one more thing, what is their {head} {mod}?",
    "before i book, what is the {head} {mod}?",
    "quick question: what is the {head} {mod}?",
)


def _fixture_snippets(rng: random.Random, n_snippets: int) -> list[KnowledgeSnippet]:
    combos = [(h, m) for h in _TOPIC_HEADS for m in _TOPIC_MODS]
    if n_snippets > len(combos):
        raise ValueError(f"fixture supports at most {len(combos)} snippets")
    rng.shuffle(combos)
    snippets = []
    doc_counters: dict[tuple[str, str], int] = {}
    for head, mod in combos[:n_snippets]:
        domain = rng.choice(_FIXTURE_DOMAINS)
        entities = _FIXTURE_ENTITIES[domain]
        if entities and rng.random() < 0.7:
            entity_id = str(entities.index(rng.choice(entities)) + 1)
            entity_name = entities[int(entity_id) - 1]
        else:
            entity_id = DOMAIN_WIDE_ENTITY
            entity_name = None
        key = (domain, entity_id)
        doc_counters[key] = doc_counters.get(key, 0) + 1
        place = entity_name or f"the {domain} service"
        title = f"What is the {head} {mod} at {place}?"
        body = (
            f"The {head} {mod} at {place} is available to all guests; "
            f"please contact the front desk for {head} {mod} details."
        )
        snippets.append(
            KnowledgeSnippet(
                ref=SnippetRef(domain, entity_id, str(doc_counters[key])),
                title=title,
                body=body,
                entity_name=entity_name,
            )
        )
    return snippets


def make_fixture(seed: int, n_dialogues: int, n_snippets: int) -> Dataset:
    """Deterministic synthetic dataset for tests and demos.

    Roughly half of the final user turns are knowledge-seeking; each
    knowledge-seeking label quotes its snippet body as the response, so
    lexical stages have measurable headroom on the fixture.
    """
    if n_dialogues < 1:
        raise ValueError("n_dialogues must be >= 1")
    if n_snippets < 2:
        raise ValueError("n_snippets must be >= 2")
    rng = random.Random(seed)
    snippets = _fixture_snippets(rng, n_snippets)
    kb = KnowledgeBase(snippets)
    contexts = []
    labels = []
    for i in range(n_dialogues):
        turns: list[Turn] = []
        opener = rng.choice(_CHAT_OPENERS)
        turns.append(Turn(Speaker(opener[0]), opener[1]))
        for _ in range(rng.randint(1, 2)):
            reply = rng.choice(_CHAT_SYSTEM)
            turns.append(Turn(Speaker(reply[0]), reply[1]))
            follow = rng.choice(_API_FINAL_TURNS)
            turns.append(Turn(Speaker.USER, follow))
        seeking = rng.random() < 0.5
        if seeking:
            snippet = snippets[rng.randrange(len(snippets))]
            head, mod = snippet.title.split(" ")[3], snippet.title.split(" ")[4]
            question = rng.choice(_SEEK_TEMPLATES).format(head=head, mod=mod)
            turns.append(Turn(Speaker.SYSTEM, "anything else i can do for you?"))
            turns.append(Turn(Speaker.USER, question))
            label = Label(target=True, knowledge=(snippet.ref,), response=snippet.body)
        else:
            turns.append(Turn(Speaker.SYSTEM, "anything else i can do for you?"))
            turns.append(Turn(Speaker.USER, rng.choice(_API_FINAL_TURNS)))
            label = Label(target=False)
        contexts.append(
            DialogueContext(instance_id=f"d{i}-t{len(turns) - 1}", turns=tuple(turns))
        )
        labels.append(label)
    return Dataset(contexts=tuple(contexts), labels=tuple(labels), kb=kb)
