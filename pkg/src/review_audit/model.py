"""Domain types for a peer-review dataset and its validation."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional

FEATURES = ("quality", "novelty", "impact", "clarity")
SCORE_RANGE = (1, 5)
CONFIDENCE_RANGE = (1, 3)


class Decision(str, enum.Enum):
    REJECTED = "rejected"
    POSTER = "poster"
    ORAL = "oral"

    @property
    def accepted(self) -> bool:
        return self is not Decision.REJECTED


class Pool(str, enum.Enum):
    INVITED = "invited"
    VOLUNTEER = "volunteer"


class Seniority(str, enum.Enum):
    SENIOR = "senior"
    JUNIOR = "junior"
    STUDENT = "student"
    UNKNOWN = "unknown"


class Role(str, enum.Enum):
    REVIEWER = "reviewer"
    AC = "ac"


class BidLevel(str, enum.Enum):
    NOT_WILLING = "not_willing"
    IN_A_PINCH = "in_a_pinch"
    WILLING = "willing"
    EAGER = "eager"

    @property
    def positive(self) -> bool:
        return self in (BidLevel.WILLING, BidLevel.EAGER)


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    primary_subject: int
    secondary_subjects: frozenset = frozenset()
    decision: Optional[Decision] = None


@dataclass(frozen=True)
class ReviewerRecord:
    reviewer_id: str
    pool: Pool
    seniority: Seniority = Seniority.UNKNOWN
    primary_subject: int = 0
    is_ac: bool = False


@dataclass(frozen=True)
class ReviewRecord:
    paper_id: str
    reviewer_id: str
    scores: Mapping[str, int]
    confidence: int
    fatal_flaw: bool = False
    pre_rebuttal_scores: Optional[Mapping[str, int]] = None

    @property
    def vector(self) -> tuple:
        return tuple(self.scores[f] for f in FEATURES)

    @property
    def mean(self) -> float:
        return sum(self.vector) / len(FEATURES)

    @property
    def median(self) -> float:
        # lower median of the four features, stays on the integer grid
        return sorted(self.vector)[(len(FEATURES) - 1) // 2]

    def measure(self, name: str) -> float:
        """Cardinal measure by name: a feature, ``"mean"`` or ``"median"``."""
        if name == "mean":
            return self.mean
        if name == "median":
            return self.median
        return self.scores[name]


@dataclass(frozen=True)
class BidRecord:
    bidder_id: str
    role: Role
    paper_id: str
    level: BidLevel


@dataclass(frozen=True)
class OrdinalRankingRecord:
    reviewer_id: str
    ranking: tuple  # paper ids, best first


@dataclass(frozen=True)
class DiscussionPostRecord:
    reviewer_id: str
    paper_id: str
    post_count: int


@dataclass(frozen=True)
class Violation:
    locus: str
    message: str

    def __str__(self):
        return f"{self.locus}: {self.message}"


@dataclass(frozen=True)
class Dataset:
    """Immutable audit input.

    Cross-reference indexes are built lazily and cached on first use.
    """

    papers: tuple = ()
    reviewers: tuple = ()
    reviews: tuple = ()
    bids: tuple = ()
    rankings: tuple = ()
    posts: tuple = ()
    accept_fraction: Optional[float] = None
    subject_area_count: int = 0

    @cached_property
    def paper_index(self) -> dict:
        return {p.paper_id: p for p in self.papers}

    @cached_property
    def reviewer_index(self) -> dict:
        return {r.reviewer_id: r for r in self.reviewers}

    @cached_property
    def review_index(self) -> dict:
        return {(r.paper_id, r.reviewer_id): r for r in self.reviews}

    @cached_property
    def reviews_by_paper(self) -> dict:
        out = defaultdict(list)
        for r in sorted(self.reviews, key=lambda r: (r.paper_id, r.reviewer_id)):
            out[r.paper_id].append(r)
        return dict(out)

    @cached_property
    def reviews_by_reviewer(self) -> dict:
        out = defaultdict(list)
        for r in sorted(self.reviews, key=lambda r: (r.reviewer_id, r.paper_id)):
            out[r.reviewer_id].append(r)
        return dict(out)

    @cached_property
    def ranking_index(self) -> dict:
        return {r.reviewer_id: r.ranking for r in self.rankings}

    @cached_property
    def post_counts(self) -> dict:
        return {(p.reviewer_id, p.paper_id): p.post_count for p in self.posts}

    @property
    def has_decisions(self) -> bool:
        return bool(self.papers) and all(p.decision is not None for p in self.papers)

    @property
    def decided_accept_fraction(self) -> Optional[float]:
        if not self.has_decisions:
            return None
        return sum(p.decision.accepted for p in self.papers) / len(self.papers)

    def paper_mean_score(self, paper_id: str) -> Optional[float]:
        """Mean over all reviewers and all four features, None if unreviewed."""
        revs = self.reviews_by_paper.get(paper_id)
        if not revs:
            return None
        return sum(sum(r.vector) for r in revs) / (len(revs) * len(FEATURES))


def _check_scores(scores, locus, out):
    if not isinstance(scores, Mapping):
        out.append(Violation(locus, "scores must be a mapping"))
        return
    for f in FEATURES:
        if f not in scores:
            out.append(Violation(locus, f"missing feature score '{f}'"))
            continue
        v = scores[f]
        if not isinstance(v, int) or isinstance(v, bool) or not SCORE_RANGE[0] <= v <= SCORE_RANGE[1]:
            out.append(Violation(f"{locus}.{f}", "score out of range 1..5"))
    extra = set(scores) - set(FEATURES)
    if extra:
        out.append(Violation(locus, f"unknown feature(s) {sorted(extra)}"))


def validate_dataset(dataset: Dataset) -> list:
    """Return every invariant violation in ``dataset`` (empty list means valid)."""
    out = []
    n_subjects = dataset.subject_area_count

    seen = set()
    for i, p in enumerate(dataset.papers):
        loc = f"papers[{i}]({p.paper_id})"
        if p.paper_id in seen:
            out.append(Violation(loc, "duplicate paper id"))
        seen.add(p.paper_id)
        if p.primary_subject in p.secondary_subjects:
            out.append(Violation(loc, "primary subject repeated among secondary subjects"))
        if n_subjects:
            for s in (p.primary_subject, *p.secondary_subjects):
                if not 1 <= s <= n_subjects:
                    out.append(Violation(loc, f"subject {s} outside 1..{n_subjects}"))
    decided = [p.decision is not None for p in dataset.papers]
    if any(decided) and not all(decided):
        out.append(Violation("papers", "decisions must be present for all papers or for none"))

    seen = set()
    for i, r in enumerate(dataset.reviewers):
        loc = f"reviewers[{i}]({r.reviewer_id})"
        if r.reviewer_id in seen:
            out.append(Violation(loc, "duplicate reviewer id"))
        seen.add(r.reviewer_id)

    papers = dataset.paper_index
    reviewers = dataset.reviewer_index
    pairs = set()
    for i, r in enumerate(dataset.reviews):
        loc = f"reviews[{i}]({r.paper_id},{r.reviewer_id})"
        if r.paper_id not in papers:
            out.append(Violation(loc, "unknown paper"))
        if r.reviewer_id not in reviewers:
            out.append(Violation(loc, "unknown reviewer"))
        key = (r.paper_id, r.reviewer_id)
        if key in pairs:
            out.append(Violation(loc, "duplicate review for (paper, reviewer)"))
        pairs.add(key)
        _check_scores(r.scores, loc + ".scores", out)
        if r.pre_rebuttal_scores is not None:
            _check_scores(r.pre_rebuttal_scores, loc + ".pre_rebuttal_scores", out)
        c = r.confidence
        if not isinstance(c, int) or isinstance(c, bool) or not CONFIDENCE_RANGE[0] <= c <= CONFIDENCE_RANGE[1]:
            out.append(Violation(loc, "confidence out of range 1..3"))

    seen = set()
    for i, b in enumerate(dataset.bids):
        loc = f"bids[{i}]({b.bidder_id},{b.paper_id})"
        if b.bidder_id not in reviewers:
            out.append(Violation(loc, "unknown bidder"))
        if b.paper_id not in papers:
            out.append(Violation(loc, "unknown paper"))
        if (b.bidder_id, b.paper_id) in seen:
            out.append(Violation(loc, "duplicate bid"))
        seen.add((b.bidder_id, b.paper_id))

    seen = set()
    for i, rk in enumerate(dataset.rankings):
        loc = f"rankings[{i}]({rk.reviewer_id})"
        if rk.reviewer_id not in reviewers:
            out.append(Violation(loc, "unknown reviewer"))
        if rk.reviewer_id in seen:
            out.append(Violation(loc, "duplicate ranking for reviewer"))
        seen.add(rk.reviewer_id)
        if len(set(rk.ranking)) != len(rk.ranking):
            out.append(Violation(loc, "duplicate paper in ranking"))
        for pid in rk.ranking:
            if (pid, rk.reviewer_id) not in pairs:
                out.append(Violation(f"{loc}.{pid}", "ranked unreviewed paper"))

    for i, p in enumerate(dataset.posts):
        loc = f"posts[{i}]({p.reviewer_id},{p.paper_id})"
        if p.post_count < 0:
            out.append(Violation(loc, "negative post count"))
        if (p.paper_id, p.reviewer_id) not in pairs:
            out.append(Violation(loc, "posts for a (reviewer, paper) pair without a review"))

    beta = dataset.accept_fraction
    if beta is not None:
        if not 0.0 < beta < 1.0:
            out.append(Violation("meta.accept_fraction", "must lie in (0, 1)"))
        elif dataset.has_decisions:
            frac = dataset.decided_accept_fraction
            # decisions are integral, so allow the rounding slack of one paper
            if abs(frac - beta) > 1.0 / len(dataset.papers):
                out.append(Violation(
                    "meta.accept_fraction",
                    f"{beta} inconsistent with decided fraction {frac:.6f}",
                ))
    return out
