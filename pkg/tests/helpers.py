"""Fixture builders shared by the test modules."""

import itertools

import numpy as np

from review_audit.model import (
    FEATURES, Dataset, Decision, DiscussionPostRecord, OrdinalRankingRecord, PaperRecord, Pool,
    ReviewerRecord, ReviewRecord, Seniority,
)


def vec(x):
    """An int means the same score on every feature."""
    if isinstance(x, int):
        x = (x,) * len(FEATURES)
    return dict(zip(FEATURES, x))


def make_dataset(scores, decisions=None, pools=None, seniority=None, rankings="auto", fatal=None,
                 posts=None, confidence=None, pre=None, accept_fraction=None, subjects=None):
    """Build a dataset from ``{(paper, reviewer): score vector}``.

    ``rankings="auto"`` ranks each reviewer's papers by their own mean score,
    ties by id; pass a dict to give rankings explicitly or None for none.
    """
    papers = sorted({p for p, _ in scores})
    reviewers = sorted({r for _, r in scores} | set(pools or {}))
    decisions = decisions or {}
    pools = pools or {}
    seniority = seniority or {}
    fatal = fatal or {}
    confidence = confidence or {}
    pre = pre or {}
    subjects = subjects or {}
    reviews = tuple(
        ReviewRecord(p, r, vec(s), confidence.get((p, r), 2), fatal.get((p, r), False), pre.get((p, r)))
        for (p, r), s in sorted(scores.items())
    )
    if rankings == "auto":
        by = {}
        for rv in reviews:
            by.setdefault(rv.reviewer_id, []).append(rv)
        rankings = {
            rid: [x.paper_id for x in sorted(rs, key=lambda x: (-x.mean, x.paper_id))]
            for rid, rs in by.items()
        }
    ranking_records = tuple(
        OrdinalRankingRecord(rid, tuple(rk)) for rid, rk in sorted((rankings or {}).items())
    )
    paper_records = tuple(
        PaperRecord(p, subjects.get(p, 1), frozenset(), decisions.get(p)) for p in papers
    )
    reviewer_records = tuple(
        ReviewerRecord(r, pools.get(r, Pool.INVITED), seniority.get(r, Seniority.SENIOR), 1, False)
        for r in reviewers
    )
    post_records = tuple(
        DiscussionPostRecord(r, p, c) for (r, p), c in sorted((posts or {}).items()) if c > 0
    )
    return Dataset(
        papers=paper_records, reviewers=reviewer_records, reviews=reviews, rankings=ranking_records,
        posts=post_records, accept_fraction=accept_fraction,
        subject_area_count=max([1, *subjects.values()]),
    )


def random_fixture(seed, max_papers=8, max_reviewers=6, decided=True):
    """Small random dataset: every reviewer reviews a random subset of papers."""
    rng = np.random.default_rng(seed)
    n_p = int(rng.integers(3, max_papers + 1))
    n_r = int(rng.integers(2, max_reviewers + 1))
    papers = [f"P{i}" for i in range(n_p)]
    reviewers = [f"R{j}" for j in range(n_r)]
    scores = {}
    for r in reviewers:
        k = int(rng.integers(2, n_p + 1))
        for p in rng.choice(papers, size=k, replace=False):
            scores[(str(p), r)] = tuple(int(x) for x in rng.integers(1, 6, size=len(FEATURES)))
    for p in papers:  # every paper gets a review
        if not any(pp == p for pp, _ in scores):
            scores[(p, reviewers[0])] = tuple(int(x) for x in rng.integers(1, 6, size=len(FEATURES)))
    rankings = {}
    for r in reviewers:
        mine = sorted(p for p, rr in scores if rr == r)
        rankings[r] = [mine[i] for i in rng.permutation(len(mine))]
    decisions = None
    if decided:
        n_acc = int(rng.integers(1, n_p // 2 + 1))
        acc = set(rng.choice(papers, size=n_acc, replace=False).tolist())
        decisions = {p: (Decision.POSTER if p in acc else Decision.REJECTED) for p in papers}
    pools = {r: (Pool.INVITED if rng.random() < 0.5 else Pool.VOLUNTEER) for r in reviewers}
    fatal = {key: bool(rng.random() < 0.3) for key in scores}
    return make_dataset(scores, decisions=decisions, pools=pools, rankings=rankings, fatal=fatal)


def all_subsets(n, k):
    return itertools.combinations(range(n), k)
