from __future__ import annotations

import pytest

from dialeval.corpus import (
    Dataset,
    DialogueContext,
    KnowledgeBase,
    KnowledgeSnippet,
    Label,
    SnippetRef,
    Speaker,
    Turn,
)


def ref(domain="hotel", entity="1", doc="1") -> SnippetRef:
    return SnippetRef(domain=domain, entity_id=entity, doc_id=doc)


def snippet(domain="hotel", entity="1", doc="1", title="Can I park there?",
            body="Parking is free for guests.") -> KnowledgeSnippet:
    return KnowledgeSnippet(ref=ref(domain, entity, doc), title=title, body=body)


def user_turn(text: str) -> Turn:
    return Turn(Speaker.USER, text)


def system_turn(text: str) -> Turn:
    return Turn(Speaker.SYSTEM, text)


def context(instance_id: str, *texts: str) -> DialogueContext:
    """Build a context from alternating S/U turn texts, ending on a user turn."""
    turns = []
    for i, text in enumerate(texts):
        speaker = Speaker.USER if (len(texts) - 1 - i) % 2 == 0 else Speaker.SYSTEM
        turns.append(Turn(speaker, text))
    return DialogueContext(instance_id=instance_id, turns=tuple(turns))


@pytest.fixture
def tiny_kb() -> KnowledgeBase:
    return KnowledgeBase(
        [
            snippet("hotel", "1", "1", "Can I park at the inn?",
                    "Free parking is available on site for guests."),
            snippet("hotel", "1", "2", "Are pets allowed at the inn?",
                    "Pets are welcome for a small nightly fee."),
            snippet("hotel", "*", "1", "What is the cancellation policy?",
                    "Bookings can be cancelled up to 24 hours in advance."),
            snippet("train", "*", "1", "Can I bring a bicycle on the train?",
                    "Bicycles travel free outside peak hours."),
        ]
    )


@pytest.fixture
def tiny_dataset(tiny_kb) -> Dataset:
    contexts = (
        context("d0-t2", "i need a hotel", "sure, the inn has rooms", "can i park at the inn?"),
        context("d1-t2", "book the inn please", "done! anything else?", "are pets allowed at the inn?"),
        context("d2-t0", "book me a taxi to the station at nine"),
        context("d3-t0", "what is the cancellation policy?"),
    )
    labels = (
        Label(target=True, knowledge=(ref("hotel", "1", "1"),),
              response="Free parking is available on site for guests."),
        Label(target=True, knowledge=(ref("hotel", "1", "2"),),
              response="Pets are welcome for a small nightly fee."),
        Label(target=False),
        Label(target=True, knowledge=(ref("hotel", "*", "1"),),
              response="Bookings can be cancelled up to 24 hours in advance."),
    )
    return Dataset(contexts=contexts, labels=labels, kb=tiny_kb)
