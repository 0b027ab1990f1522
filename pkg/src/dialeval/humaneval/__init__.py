"""Human-rating campaign administration.

Assigns instances to raters (three per instance), persists 1-5 ratings
for the appropriateness and accuracy tasks plus pairwise A/B choices in
an append-only store, and aggregates them into official rankings.  The
HTTP surface in :mod:`dialeval.humaneval.api` is what the annotation UI
consumes.
"""

from .service import (
    Campaign,
    CampaignService,
    DuplicateRatingError,
    HumanEvalError,
    HumanRankEntry,
    HumanReport,
    IncompleteRatingsError,
    InvalidRatingError,
    LeaseExpiredError,
    PairwiseResult,
    RatingRecord,
    TaskKind,
    UnknownAssignmentError,
    UnknownCampaignError,
    rank_submissions,
)

__all__ = [
    "Campaign",
    "CampaignService",
    "DuplicateRatingError",
    "HumanEvalError",
    "HumanRankEntry",
    "HumanReport",
    "IncompleteRatingsError",
    "InvalidRatingError",
    "LeaseExpiredError",
    "PairwiseResult",
    "RatingRecord",
    "TaskKind",
    "UnknownAssignmentError",
    "UnknownCampaignError",
    "rank_submissions",
]
