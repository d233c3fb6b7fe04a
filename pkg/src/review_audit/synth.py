"""Seeded synthetic review datasets with planted effects, and the top-2k selector.

Scores follow a latent model: paper quality ``theta`` is uniform on
``[0, latent_quality_spread]``, a reviewer's raw feature score is
``1 + theta + calibration_shift + bias + noise`` and is discretized at the
cut points 1.5, 2.5, 3.5, 4.5 onto 1..5. Every random stream is a Philox
counter-based generator keyed by the seed with the stream id in the counter,
and draws are consumed in record order, so output is bit-identical for a
given config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleError, MissingDataError, PreconditionError
from .model import (
    FEATURES,
    BidLevel,
    BidRecord,
    Dataset,
    Decision,
    DiscussionPostRecord,
    OrdinalRankingRecord,
    PaperRecord,
    Pool,
    ReviewerRecord,
    ReviewRecord,
    Role,
    Seniority,
)

_STREAMS = {
    name: i for i, name in enumerate([
        "latent", "paper_subjects", "reviewer_traits", "assignment", "noise",
        "messy", "confidence", "rebuttal", "posts", "bids",
    ], start=1)
}

# seniority mix per pool, shaped like the invited/volunteer split of a large venue
_SENIORITY_MIX = {
    Pool.INVITED: (0.60, 0.28, 0.12),
    Pool.VOLUNTEER: (0.12, 0.18, 0.70),
}
_CONFIDENCE_BASE = {Seniority.SENIOR: 2.5, Seniority.JUNIOR: 2.2, Seniority.STUDENT: 1.9}


@dataclass(frozen=True)
class SynthConfig:
    n_papers: int = 200
    n_reviewers: int = 100
    reviews_per_paper: int = 3
    seed: int = 0
    latent_quality_spread: float = 4.0
    reviewer_noise_sd: float = 0.5
    planted_fragment: Optional[tuple] = None  # (subject_code, reviewer_count)
    planted_messy_window: Optional[tuple] = None  # (top_frac, bottom_frac)
    calibration_shift: float = 0.0
    reviewer_bias_sd: float = 0.0
    accept_fraction: float = 0.237
    oral_fraction: float = 0.08  # share of accepted papers given an oral
    subject_area_count: int = 10
    max_papers_per_reviewer: Optional[int] = None
    invited_fraction: float = 0.5
    n_acs: int = 0
    senior_confidence_shift: float = 0.0
    confidence_noise_sd: float = 0.5
    pre_rebuttal_fraction: float = 0.9
    rebuttal_change_prob: float = 0.1
    post_probability: float = 0.3
    bids_per_reviewer: float = 5.0
    fatal_flaw_threshold: float = 2.0  # a review flags a fatal flaw when its mean is below this
    with_rankings: bool = True

    def validate(self):
        if self.n_papers < 1 or self.n_reviewers < 1:
            raise PreconditionError("need at least one paper and one reviewer")
        if self.reviews_per_paper < 1:
            raise PreconditionError("reviews_per_paper must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise PreconditionError("seed must be a 64-bit unsigned integer")
        if self.latent_quality_spread < 0 or self.reviewer_noise_sd < 0 or self.reviewer_bias_sd < 0:
            raise PreconditionError("spread and noise parameters must be non-negative")
        if not 0 < self.accept_fraction < 1:
            raise PreconditionError("accept_fraction must lie in (0, 1)")
        if self.planted_messy_window is not None:
            t, b = self.planted_messy_window
            if t < 0 or b < 0 or t + b >= 1:
                raise PreconditionError("planted window needs t*, b* >= 0 and t* + b* < 1")
        if self.planted_fragment is not None:
            subject, count = self.planted_fragment
            if not 1 <= subject <= self.subject_area_count:
                raise PreconditionError("fragment subject outside the subject-area range")
            if not 0 < count < self.n_reviewers:
                raise PreconditionError("fragment reviewer_count must lie in 1..n_reviewers-1")


def _rng(seed, stream):
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, _STREAMS[stream], 0]))


def _discretize(raw):
    return int(min(5, max(1, math.floor(raw + 0.5))))


def _assign(paper_idx, reviewer_idx, load, cap, rng, out):
    """Greedy most-remaining-capacity assignment with random tie breaks.

    Picking the reviewers with the largest remaining capacity for each paper
    always succeeds when total capacity covers the demand.
    """
    if load > len(reviewer_idx):
        raise InfeasibleError(
            f"reviews_per_paper={load} exceeds the {len(reviewer_idx)} available reviewers",
            constraint="reviews_per_paper",
        )
    if load * len(paper_idx) > cap * len(reviewer_idx):
        raise InfeasibleError(
            f"{load} x {len(paper_idx)} reviews exceed reviewer capacity {cap} x {len(reviewer_idx)}",
            constraint="reviewer_capacity",
        )
    remaining = np.full(len(reviewer_idx), cap, dtype=float)
    for p in paper_idx:
        keys = remaining + rng.random(len(reviewer_idx))
        chosen = np.argsort(-keys, kind="stable")[:load]
        remaining[chosen] -= 1
        out[p] = sorted(reviewer_idx[c] for c in chosen)


def generate_synthetic(config: SynthConfig) -> Dataset:
    config.validate()
    n, m, load = config.n_papers, config.n_reviewers, config.reviews_per_paper
    n_subj = config.subject_area_count
    pw = max(4, len(str(n)))
    rw = max(3, len(str(m + config.n_acs)))
    paper_ids = [f"P{i:0{pw}d}" for i in range(n)]
    reviewer_ids = [f"R{j:0{rw}d}" for j in range(m)]

    # papers: latent quality and subjects
    theta = _rng(config.seed, "latent").uniform(0.0, config.latent_quality_spread, size=n)
    srng = _rng(config.seed, "paper_subjects")
    primaries = srng.integers(1, n_subj + 1, size=n)
    n_secondary = srng.integers(0, 3, size=n)
    secondaries = []
    for i in range(n):
        others = [s for s in range(1, n_subj + 1) if s != primaries[i]]
        k = min(int(n_secondary[i]), len(others))
        picks = srng.permutation(len(others))[:k] if others else []
        secondaries.append(frozenset(others[int(c)] for c in picks))

    # reviewers: pool, seniority, subject, bias
    trng = _rng(config.seed, "reviewer_traits")
    pool_u = trng.random(m)
    sen_u = trng.random(m)
    rsubj = trng.integers(1, n_subj + 1, size=m)
    bias = trng.normal(0.0, 1.0, size=m) * config.reviewer_bias_sd
    pools = [Pool.INVITED if u < config.invited_fraction else Pool.VOLUNTEER for u in pool_u]
    seniority = []
    for j in range(m):
        s, jr, _ = _SENIORITY_MIX[pools[j]]
        u = sen_u[j]
        seniority.append(Seniority.SENIOR if u < s else Seniority.JUNIOR if u < s + jr else Seniority.STUDENT)

    # planted fragment: the last `count` reviewers only review fragment papers
    frag_reviewers, frag_papers = set(), set()
    if config.planted_fragment is not None:
        subject, count = config.planted_fragment
        frag_reviewers = set(range(m - count, m))
        n_frag = max(1, round(n * count / m))
        frag_papers = set(range(n - n_frag, n))
        for j in frag_reviewers:
            rsubj[j] = subject
        for i in frag_papers:
            primaries[i] = subject
            secondaries[i] = frozenset(s for s in secondaries[i] if s != subject)

    cap = config.max_papers_per_reviewer
    arng = _rng(config.seed, "assignment")
    assigned = {}
    groups = [(sorted(set(range(n)) - frag_papers), sorted(set(range(m)) - frag_reviewers))]
    if frag_reviewers:
        groups.append((sorted(frag_papers), sorted(frag_reviewers)))
    for g_papers, g_reviewers in groups:
        g_cap = cap if cap is not None else math.ceil(load * len(g_papers) / len(g_reviewers))
        _assign(g_papers, g_reviewers, load, g_cap, arng, assigned)

    # messy window over the latent ranking (best first, ties by index)
    messy = set()
    if config.planted_messy_window is not None:
        t, b = config.planted_messy_window
        order = sorted(range(n), key=lambda i: (-theta[i], i))
        lo, hi = math.floor(t * n), n - math.floor(b * n)
        messy = set(order[lo:hi])

    nrng = _rng(config.seed, "noise")
    mrng = _rng(config.seed, "messy")
    crng = _rng(config.seed, "confidence")
    rrng = _rng(config.seed, "rebuttal")
    nf = len(FEATURES)
    reviews = []
    for i in range(n):
        for j in assigned[i]:
            noise = nrng.normal(0.0, 1.0, size=nf) * config.reviewer_noise_sd
            uniform = mrng.integers(1, 6, size=nf)
            if i in messy:
                vec = [int(v) for v in uniform]
            else:
                base = 1.0 + theta[i] + config.calibration_shift + bias[j]
                vec = [_discretize(base + e) for e in noise]
            scores = dict(zip(FEATURES, vec))
            sen = seniority[j]
            cbase = _CONFIDENCE_BASE[sen] + (config.senior_confidence_shift if sen is Seniority.SENIOR else 0.0)
            conf = int(min(3, max(1, math.floor(cbase + crng.normal() * config.confidence_noise_sd + 0.5))))
            has_pre, changes, feat, step = rrng.random(), rrng.random(), rrng.integers(0, nf), rrng.random()
            pre = None
            if has_pre < config.pre_rebuttal_fraction:
                pre = dict(scores)
                if changes < config.rebuttal_change_prob:
                    f = FEATURES[int(feat)]
                    v = scores[f]
                    pre[f] = v - 1 if (step < 0.5 and v > 1) or v == 5 else v + 1
            mean = sum(vec) / nf
            reviews.append(ReviewRecord(
                paper_id=paper_ids[i],
                reviewer_id=reviewer_ids[j],
                scores=scores,
                confidence=conf,
                fatal_flaw=mean < config.fatal_flaw_threshold,
                pre_rebuttal_scores=pre,
            ))

    # decisions: top accept_fraction by observed mean score, ties by paper id
    by_paper = {}
    for r in reviews:
        by_paper.setdefault(r.paper_id, []).append(r)
    observed = {pid: sum(sum(r.vector) for r in rs) / (len(rs) * nf) for pid, rs in by_paper.items()}
    ranked = sorted(paper_ids, key=lambda pid: (-observed.get(pid, 0.0), pid))
    n_accept = min(n - 1, max(1, round(config.accept_fraction * n)))
    n_oral = round(config.oral_fraction * n_accept)
    decision = {}
    for pos, pid in enumerate(ranked):
        decision[pid] = Decision.ORAL if pos < n_oral else Decision.POSTER if pos < n_accept else Decision.REJECTED
    papers = tuple(
        PaperRecord(paper_ids[i], int(primaries[i]), secondaries[i], decision[paper_ids[i]])
        for i in range(n)
    )

    reviewers = [
        ReviewerRecord(reviewer_ids[j], pools[j], seniority[j], int(rsubj[j]), False) for j in range(m)
    ]
    ac_ids = [f"A{k:0{rw}d}" for k in range(config.n_acs)]
    for k, aid in enumerate(ac_ids):
        reviewers.append(ReviewerRecord(aid, Pool.INVITED, Seniority.SENIOR, int(rsubj[k % m]), True))

    prng = _rng(config.seed, "posts")
    posts = []
    for r in reviews:
        u, extra = prng.random(), prng.poisson(0.5)
        if u < config.post_probability:
            posts.append(DiscussionPostRecord(r.reviewer_id, r.paper_id, int(1 + extra)))

    rankings = []
    if config.with_rankings:
        by_reviewer = {}
        for r in reviews:
            by_reviewer.setdefault(r.reviewer_id, []).append(r)
        for rid in sorted(by_reviewer):
            rs = sorted(by_reviewer[rid], key=lambda r: (-r.mean, r.paper_id))
            rankings.append(OrdinalRankingRecord(rid, tuple(r.paper_id for r in rs)))

    brng = _rng(config.seed, "bids")
    bids = []
    rate = min(1.0, config.bids_per_reviewer / n)
    bidder_subjects = [(rid, int(rsubj[j]), Role.REVIEWER) for j, rid in enumerate(reviewer_ids)]
    bidder_subjects += [(aid, int(rsubj[k % m]), Role.AC) for k, aid in enumerate(ac_ids)]
    for bidder, subj, role in bidder_subjects:
        u = brng.random(n)
        lv = brng.random(n)
        for i in np.flatnonzero(u < rate):
            same = primaries[i] == subj or subj in secondaries[i]
            pos_prob = 0.8 if same else 0.3
            if lv[i] < pos_prob:
                level = BidLevel.EAGER if lv[i] < pos_prob / 2 else BidLevel.WILLING
            else:
                level = BidLevel.IN_A_PINCH if lv[i] < (1 + pos_prob) / 2 else BidLevel.NOT_WILLING
            bids.append(BidRecord(bidder, role, paper_ids[i], level))

    return Dataset(
        papers=papers,
        reviewers=tuple(reviewers),
        reviews=tuple(reviews),
        bids=tuple(bids),
        rankings=tuple(rankings),
        posts=tuple(posts),
        accept_fraction=n_accept / n,
        subject_area_count=n_subj,
    )


@dataclass(frozen=True)
class Top2kSubset:
    paper_ids: frozenset
    n_accepted: int

    def __contains__(self, paper_id):
        return paper_id in self.paper_ids

    def __len__(self):
        return len(self.paper_ids)


def top2k_subset(dataset: Dataset) -> Top2kSubset:
    """All accepted papers plus as many of the best-scoring rejected ones.

    Rejected papers rank by mean score over all reviewers and features; ties
    at the cut go to the lexicographically smaller paper id, and unreviewed
    papers rank last.
    """
    if not dataset.has_decisions:
        raise MissingDataError("top2k_subset needs decisions")
    accepted = [p.paper_id for p in dataset.papers if p.decision.accepted]
    rejected = [p.paper_id for p in dataset.papers if not p.decision.accepted]
    if len(rejected) < len(accepted):
        raise PreconditionError("fewer rejected than accepted papers")

    def key(pid):
        mean = dataset.paper_mean_score(pid)
        return (mean is None, -(mean or 0.0), pid)

    chosen = sorted(rejected, key=key)[: len(accepted)]
    return Top2kSubset(frozenset(accepted) | frozenset(chosen), len(accepted))
