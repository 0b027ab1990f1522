"""Campaign state, assignment leasing, and rating aggregation.

The service keeps campaign state in memory and persists every accepted
rating as one JSON line in an append-only store file, fsynced before the
submission is acknowledged, so a process restart replays to exactly the
acknowledged set.  Assignment issuance and rating persistence are
serialized under one lock; concurrent workers are the normal case.
"""

from __future__ import annotations

import enum
import itertools
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from ..corpus import Dataset, PredictionEntry
from ..scoring import InstanceScores, compose_end_to_end

RATERS_PER_INSTANCE = 3
DEFAULT_LEASE_SECONDS = 30 * 60

_WORKER_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


class HumanEvalError(Exception):
    pass


class UnknownCampaignError(HumanEvalError):
    pass


class UnknownAssignmentError(HumanEvalError):
    pass


class LeaseExpiredError(HumanEvalError):
    pass


class DuplicateRatingError(HumanEvalError):
    pass


class InvalidRatingError(HumanEvalError):
    pass


class IncompleteRatingsError(HumanEvalError):
    def __init__(self, missing: Sequence[str]):
        super().__init__(f"instances missing ratings: {', '.join(sorted(missing))}")
        self.missing = tuple(sorted(missing))


class TaskKind(str, enum.Enum):
    APPROPRIATENESS = "appropriateness"
    ACCURACY = "accuracy"
    PAIRWISE = "pairwise"


RATING_TASKS = (TaskKind.APPROPRIATENESS, TaskKind.ACCURACY)


@dataclass(frozen=True)
class RatingRecord:
    assignment_id: str
    campaign_id: str
    instance_id: str
    submissions: tuple[str, ...]
    task: TaskKind
    worker_id: str
    score: int | None
    choice: str | None
    submitted_at: str

    def to_dict(self) -> dict:
        data = {
            "assignment_id": self.assignment_id,
            "campaign_id": self.campaign_id,
            "instance_id": self.instance_id,
            "submission_ids": list(self.submissions),
            "task": self.task.value,
            "worker_id": self.worker_id,
            "submitted_at": self.submitted_at,
        }
        if self.task is TaskKind.PAIRWISE:
            data["choice"] = self.choice
        else:
            data["score"] = self.score
        return data

    @staticmethod
    def from_dict(data: Mapping) -> "RatingRecord":
        return RatingRecord(
            assignment_id=str(data["assignment_id"]),
            campaign_id=str(data["campaign_id"]),
            instance_id=str(data["instance_id"]),
            submissions=tuple(data["submission_ids"]),
            task=TaskKind(data["task"]),
            worker_id=str(data["worker_id"]),
            score=data.get("score"),
            choice=data.get("choice"),
            submitted_at=str(data["submitted_at"]),
        )


@dataclass(frozen=True)
class Campaign:
    """One evaluation round over a dataset and a set of submissions.

    Rating tasks cover every instance where the gold label is
    knowledge-seeking and the submission predicted it (responses exist
    only there); pairwise slots require both paired submissions to have
    responded.  False positives are not shown to raters: the
    detection-weighted composition zeroes their contribution either way.
    """

    campaign_id: str
    dataset: Dataset
    submissions: Mapping[str, Sequence[PredictionEntry]]
    tasks: tuple[TaskKind, ...] = RATING_TASKS
    pairs: tuple[tuple[str, str], ...] | None = None
    raters_per_instance: int = RATERS_PER_INSTANCE

    def __post_init__(self) -> None:
        if self.raters_per_instance != RATERS_PER_INSTANCE:
            raise ValueError("raters_per_instance is fixed at 3")
        if not self.submissions:
            raise ValueError("campaign needs at least one submission")
        for sid, preds in self.submissions.items():
            if len(preds) != len(self.dataset.contexts):
                raise ValueError(f"submission {sid} does not align with the dataset")
        if TaskKind.PAIRWISE in self.tasks and self.pairs is None:
            ids = sorted(self.submissions)
            object.__setattr__(
                self, "pairs", tuple(itertools.combinations(ids, 2))
            )
        if self.pairs:
            for a, b in self.pairs:
                if a not in self.submissions or b not in self.submissions:
                    raise ValueError(f"pair ({a}, {b}) references unknown submissions")
                if a == b:
                    raise ValueError("a pairwise pair needs two distinct submissions")


@dataclass
class _Slot:
    """One assignment unit: (instance, submission(s), task) needing 3 ratings."""

    instance_id: str
    instance_index: int
    submissions: tuple[str, ...]
    task: TaskKind
    ratings: dict[str, RatingRecord] = field(default_factory=dict)
    issued_workers: set[str] = field(default_factory=set)
    lease: tuple[str, str, float] | None = None  # (worker, assignment_id, expires_at)

    @property
    def complete(self) -> bool:
        return len(self.ratings) >= RATERS_PER_INSTANCE


@dataclass(frozen=True)
class Assignment:
    assignment_id: str
    campaign_id: str
    task: TaskKind
    instance_id: str
    submissions: tuple[str, ...]
    worker_id: str
    expires_at: float
    payload: dict


@dataclass(frozen=True)
class HumanRankEntry:
    submission_id: str
    accuracy: float
    appropriateness: float
    average: float
    rank: int
    tied: bool


@dataclass(frozen=True)
class PairwiseResult:
    pair: tuple[str, str]
    per_instance: Mapping[str, str]  # instance_id -> winning submission_id
    win_fractions: Mapping[str, float]


@dataclass(frozen=True)
class HumanReport:
    entries: tuple[HumanRankEntry, ...]
    pairwise: tuple[PairwiseResult, ...] = ()


def rank_submissions(per_submission: Mapping[str, tuple[float, float]]) -> list[HumanRankEntry]:
    """Official ordering: average of accuracy and appropriateness, descending.

    Ties share the best rank and are flagged; equal averages order
    stably by submission id.
    """
    averages = {
        sid: (acc + app) / 2 for sid, (acc, app) in per_submission.items()
    }
    ordered = sorted(averages, key=lambda sid: (-averages[sid], sid))
    entries = []
    values = list(averages.values())
    for sid in ordered:
        avg = averages[sid]
        rank = 1 + sum(1 for v in values if v > avg)
        tied = sum(1 for v in values if v == avg) > 1
        acc, app = per_submission[sid]
        entries.append(
            HumanRankEntry(
                submission_id=sid,
                accuracy=acc,
                appropriateness=app,
                average=avg,
                rank=rank,
                tied=tied,
            )
        )
    return entries


class RatingStore:
    """Append-only newline-delimited rating records on durable storage."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def replay(self) -> list[RatingRecord]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(RatingRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as e:
                    raise HumanEvalError(
                        f"{self.path}:{lineno}: corrupt rating record: {e}"
                    ) from e
        return records

    def append(self, record: RatingRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())


class CampaignService:
    """In-memory campaign state over a durable rating store."""

    def __init__(
        self,
        campaigns: Sequence[Campaign],
        store: RatingStore | str | Path,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock: Callable[[], float] = time.time,
    ):
        self._campaigns = {c.campaign_id: c for c in campaigns}
        if len(self._campaigns) != len(campaigns):
            raise ValueError("duplicate campaign ids")
        self._store = store if isinstance(store, RatingStore) else RatingStore(store)
        self._lease_seconds = lease_seconds
        self._clock = clock
        self._lock = threading.RLock()
        self._slots: dict[str, list[_Slot]] = {
            cid: self._build_slots(c) for cid, c in self._campaigns.items()
        }
        self._slot_index: dict[tuple[str, str, tuple[str, ...], str], _Slot] = {}
        for cid, slots in self._slots.items():
            for slot in slots:
                self._slot_index[(cid, slot.instance_id, slot.submissions, slot.task.value)] = slot
        self._assignments: dict[str, tuple[str, _Slot]] = {}
        self._submitted: set[str] = set()
        for record in self._store.replay():
            self._apply_record(record)

    # -- construction ------------------------------------------------------

    @staticmethod
    def _build_slots(campaign: Campaign) -> list[_Slot]:
        slots: list[_Slot] = []
        labels = campaign.dataset.labels
        contexts = campaign.dataset.contexts
        for task in campaign.tasks:
            if task is TaskKind.PAIRWISE:
                continue
            for sid in sorted(campaign.submissions):
                preds = campaign.submissions[sid]
                for i, ctx in enumerate(contexts):
                    if labels[i].target and preds[i].target:
                        slots.append(
                            _Slot(
                                instance_id=ctx.instance_id,
                                instance_index=i,
                                submissions=(sid,),
                                task=task,
                            )
                        )
        if TaskKind.PAIRWISE in campaign.tasks:
            for a, b in campaign.pairs or ():
                pair = tuple(sorted((a, b)))
                preds_a = campaign.submissions[pair[0]]
                preds_b = campaign.submissions[pair[1]]
                for i, ctx in enumerate(contexts):
                    if labels[i].target and preds_a[i].target and preds_b[i].target:
                        slots.append(
                            _Slot(
                                instance_id=ctx.instance_id,
                                instance_index=i,
                                submissions=pair,
                                task=TaskKind.PAIRWISE,
                            )
                        )
        return slots

    def _apply_record(self, record: RatingRecord) -> None:
        key = (record.campaign_id, record.instance_id, record.submissions, record.task.value)
        slot = self._slot_index.get(key)
        if slot is None:
            raise HumanEvalError(
                f"store record {record.assignment_id} does not match any campaign slot"
            )
        slot.ratings[record.worker_id] = record
        slot.issued_workers.add(record.worker_id)
        self._submitted.add(record.assignment_id)

    # -- helpers -----------------------------------------------------------

    def _campaign(self, campaign_id: str) -> Campaign:
        try:
            return self._campaigns[campaign_id]
        except KeyError:
            raise UnknownCampaignError(f"unknown campaign {campaign_id!r}") from None

    def _purge_expired(self, slots: Iterable[_Slot], now: float) -> None:
        for slot in slots:
            if slot.lease is not None and slot.lease[2] <= now:
                slot.lease = None

    def _payload(self, campaign: Campaign, slot: _Slot) -> dict:
        ctx = campaign.dataset.contexts[slot.instance_index]
        label = campaign.dataset.labels[slot.instance_index]
        payload: dict = {
            "instance_id": slot.instance_id,
            "context": [
                {"speaker": t.speaker.value, "text": t.text} for t in ctx.turns
            ],
        }
        if slot.task is TaskKind.PAIRWISE:
            preds_a = campaign.submissions[slot.submissions[0]][slot.instance_index]
            preds_b = campaign.submissions[slot.submissions[1]][slot.instance_index]
            payload["response_a"] = {
                "submission_id": slot.submissions[0],
                "text": preds_a.response,
            }
            payload["response_b"] = {
                "submission_id": slot.submissions[1],
                "text": preds_b.response,
            }
        else:
            pred = campaign.submissions[slot.submissions[0]][slot.instance_index]
            payload["response"] = pred.response
            if slot.task is TaskKind.ACCURACY:
                # raters judge factual fidelity against the gold snippet
                snippet = campaign.dataset.kb.get(label.knowledge[0])
                payload["knowledge"] = {
                    "domain": snippet.ref.domain,
                    "entity_id": snippet.ref.entity_id,
                    "doc_id": snippet.ref.doc_id,
                    "entity_name": snippet.entity_name,
                    "title": snippet.title,
                    "body": snippet.body,
                }
        return payload

    # -- assignment flow ----------------------------------------------------

    def campaigns(self) -> list[dict]:
        with self._lock:
            out = []
            for cid in sorted(self._campaigns):
                campaign = self._campaigns[cid]
                slots = self._slots[cid]
                out.append(
                    {
                        "campaign_id": cid,
                        "tasks": [t.value for t in campaign.tasks],
                        "submissions": sorted(campaign.submissions),
                        "slots_total": len(slots),
                        "slots_complete": sum(1 for s in slots if s.complete),
                    }
                )
            return out

    def next_assignment(
        self, campaign_id: str, worker_id: str, task: TaskKind | None = None
    ) -> Assignment | None:
        if not _WORKER_ID_RE.match(worker_id or ""):
            raise InvalidRatingError(f"malformed worker id {worker_id!r}")
        with self._lock:
            campaign = self._campaign(campaign_id)
            if task is not None and task not in campaign.tasks:
                raise InvalidRatingError(
                    f"task {task.value} is not enabled for campaign {campaign_id}"
                )
            now = self._clock()
            slots = self._slots[campaign_id]
            self._purge_expired(slots, now)
            # resuming: hand back the worker's own pending assignment
            for slot in slots:
                if slot.lease and slot.lease[0] == worker_id:
                    if task is None or slot.task is task:
                        return self._assignment_for(campaign, slot, slot.lease[1], worker_id)
            eligible = [
                slot
                for slot in slots
                if not slot.complete
                and slot.lease is None
                and worker_id not in slot.issued_workers
                and (task is None or slot.task is task)
            ]
            if not eligible:
                return None
            slot = min(
                eligible,
                key=lambda s: (len(s.ratings), s.task.value, s.instance_index, s.submissions),
            )
            assignment_id = (
                f"{campaign_id}:{slot.task.value}:{slot.instance_id}"
                f":{'+'.join(slot.submissions)}:{worker_id}"
            )
            slot.lease = (worker_id, assignment_id, now + self._lease_seconds)
            slot.issued_workers.add(worker_id)
            self._assignments[assignment_id] = (campaign_id, slot)
            return self._assignment_for(campaign, slot, assignment_id, worker_id)

    def _assignment_for(
        self, campaign: Campaign, slot: _Slot, assignment_id: str, worker_id: str
    ) -> Assignment:
        assert slot.lease is not None
        return Assignment(
            assignment_id=assignment_id,
            campaign_id=campaign.campaign_id,
            task=slot.task,
            instance_id=slot.instance_id,
            submissions=slot.submissions,
            worker_id=worker_id,
            expires_at=slot.lease[2],
            payload=self._payload(campaign, slot),
        )

    def submit_rating(
        self,
        assignment_id: str,
        score: int | None = None,
        choice: str | None = None,
    ) -> RatingRecord:
        with self._lock:
            if assignment_id in self._submitted:
                raise DuplicateRatingError(f"assignment {assignment_id} already rated")
            located = self._assignments.get(assignment_id)
            if located is None:
                raise UnknownAssignmentError(f"unknown assignment {assignment_id!r}")
            campaign_id, slot = located
            now = self._clock()
            if (
                slot.lease is None
                or slot.lease[1] != assignment_id
                or slot.lease[2] <= now
            ):
                raise LeaseExpiredError(f"lease expired for assignment {assignment_id}")
            worker_id = slot.lease[0]
            # validate before touching any state so a rejected rating
            # leaves the assignment pending
            if slot.task is TaskKind.PAIRWISE:
                if choice not in ("A", "B") or score is not None:
                    raise InvalidRatingError("pairwise ratings need choice 'A' or 'B'")
            else:
                if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
                    raise InvalidRatingError("score must be an integer in 1..5")
                if choice is not None:
                    raise InvalidRatingError("rating tasks take a score, not a choice")
            record = RatingRecord(
                assignment_id=assignment_id,
                campaign_id=campaign_id,
                instance_id=slot.instance_id,
                submissions=slot.submissions,
                task=slot.task,
                worker_id=worker_id,
                score=score if slot.task is not TaskKind.PAIRWISE else None,
                choice=choice if slot.task is TaskKind.PAIRWISE else None,
                submitted_at=datetime.fromtimestamp(now, tz=timezone.utc).isoformat(),
            )
            self._store.append(record)  # durable before acknowledgment
            slot.ratings[worker_id] = record
            slot.lease = None
            self._submitted.add(assignment_id)
            return record

    # -- reporting -----------------------------------------------------------

    def progress(self, campaign_id: str) -> dict:
        with self._lock:
            self._campaign(campaign_id)
            slots = self._slots[campaign_id]
            now = self._clock()
            self._purge_expired(slots, now)
            per_task: dict[str, dict[str, int]] = {}
            for slot in slots:
                bucket = per_task.setdefault(
                    slot.task.value, {"slots": 0, "complete": 0, "ratings": 0}
                )
                bucket["slots"] += 1
                bucket["complete"] += 1 if slot.complete else 0
                bucket["ratings"] += len(slot.ratings)
            return {
                "campaign_id": campaign_id,
                "slots_total": len(slots),
                "slots_complete": sum(1 for s in slots if s.complete),
                "ratings_submitted": sum(len(s.ratings) for s in slots),
                "ratings_required": len(slots) * RATERS_PER_INSTANCE,
                "open_leases": sum(1 for s in slots if s.lease is not None),
                "per_task": per_task,
            }

    def export_records(self, campaign_id: str) -> list[RatingRecord]:
        with self._lock:
            self._campaign(campaign_id)
            records = []
            for slot in self._slots[campaign_id]:
                records.extend(slot.ratings.values())
            records.sort(key=lambda r: (r.submitted_at, r.assignment_id))
            return records

    def aggregate_rating_task(
        self, campaign_id: str, task: TaskKind, submission_id: str
    ) -> float:
        """Detection-weighted composed score on the native 1-5 scale.

        Per-instance value is the mean of the three ratings rescaled to
        [0, 1] via (score-1)/4, composed like any other metric, and the
        composed F mapped back through *4+1.  Under perfect detection
        this is exactly the mean of the raw per-instance means.
        """
        if task not in RATING_TASKS:
            raise InvalidRatingError("aggregate_rating_task takes a rating task")
        with self._lock:
            campaign = self._campaign(campaign_id)
            if submission_id not in campaign.submissions:
                raise UnknownCampaignError(
                    f"unknown submission {submission_id!r} in campaign {campaign_id}"
                )
            slots = {
                slot.instance_index: slot
                for slot in self._slots[campaign_id]
                if slot.task is task and slot.submissions == (submission_id,)
            }
            missing = [
                slot.instance_id for slot in slots.values() if not slot.complete
            ]
            if missing:
                raise IncompleteRatingsError(missing)
            preds = campaign.submissions[submission_id]
            per_instance: list[InstanceScores] = []
            for i, (ctx, label) in enumerate(
                zip(campaign.dataset.contexts, campaign.dataset.labels)
            ):
                values = {}
                if i in slots:
                    ratings = slots[i].ratings.values()
                    mean = sum(r.score for r in ratings) / RATERS_PER_INSTANCE
                    values = {"human": (mean - 1) / 4}
                per_instance.append(
                    InstanceScores(
                        instance_id=ctx.instance_id,
                        gold_target=label.target,
                        pred_target=preds[i].target,
                        values=values,
                    )
                )
            composed = compose_end_to_end(per_instance, "human")
            return composed.f * 4 + 1


    def final_ranking(self, campaign_id: str) -> HumanReport:
        """Official ranking: average of the two rating-task scores."""
        with self._lock:
            campaign = self._campaign(campaign_id)
            for task in RATING_TASKS:
                if task not in campaign.tasks:
                    raise InvalidRatingError(
                        f"campaign {campaign_id} does not run the {task.value} task"
                    )
            per_submission = {
                sid: (
                    self.aggregate_rating_task(campaign_id, TaskKind.ACCURACY, sid),
                    self.aggregate_rating_task(campaign_id, TaskKind.APPROPRIATENESS, sid),
                )
                for sid in sorted(campaign.submissions)
            }
            entries = tuple(rank_submissions(per_submission))
            pairwise = tuple(
                self.pairwise_verdicts(campaign_id, pair)
                for pair in (campaign.pairs or ())
                if TaskKind.PAIRWISE in campaign.tasks
            )
            return HumanReport(entries=entries, pairwise=pairwise)

    def pairwise_verdicts(
        self, campaign_id: str, pair: tuple[str, str]
    ) -> PairwiseResult:
        """Majority verdict per instance and win fractions for one pair."""
        with self._lock:
            campaign = self._campaign(campaign_id)
            key = tuple(sorted(pair))
            slots = [
                slot
                for slot in self._slots[campaign_id]
                if slot.task is TaskKind.PAIRWISE and slot.submissions == key
            ]
            if not slots:
                raise UnknownCampaignError(
                    f"no pairwise slots for pair {key} in campaign {campaign_id}"
                )
            missing = [slot.instance_id for slot in slots if not slot.complete]
            if missing:
                raise IncompleteRatingsError(missing)
            per_instance: dict[str, str] = {}
            wins = {key[0]: 0, key[1]: 0}
            for slot in slots:
                votes = [r.choice for r in slot.ratings.values()]
                a_votes = sum(1 for v in votes if v == "A")
                winner = key[0] if a_votes * 2 > len(votes) else key[1]
                per_instance[slot.instance_id] = winner
                wins[winner] += 1
            total = len(slots)
            fractions = {sid: wins[sid] / total for sid in key}
            return PairwiseResult(
                pair=key, per_instance=per_instance, win_fractions=fractions
            )
