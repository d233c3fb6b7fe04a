"""Bid statistics and load-constrained reviewer assignment."""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .errors import InfeasibleError, PreconditionError
from .model import BidLevel, Dataset, Role

BID_THRESHOLDS = (0, 2, 5)

DEFAULT_BID_WEIGHTS = {
    BidLevel.NOT_WILLING: 0.25,
    BidLevel.IN_A_PINCH: 0.5,
    None: 0.625,
    BidLevel.WILLING: 0.8125,
    BidLevel.EAGER: 1.0,
}

COST_SCALE = 1_000_000


@dataclass(frozen=True)
class BidStats:
    per_paper_pos: dict
    per_paper_neg: dict
    per_bidder_pos: dict
    per_bidder_neg: dict
    skew: list  # (bidder fraction, positive-bid fraction), bidders sorted by bid count desc
    thresholds: dict  # c -> papers with at most c positive reviewer bids
    ac_zero_positive: int
    n_positive: int
    n_negative: int

    def to_dict(self) -> dict:
        return {
            "per_paper_pos": {str(k): v for k, v in sorted(self.per_paper_pos.items())},
            "per_paper_neg": {str(k): v for k, v in sorted(self.per_paper_neg.items())},
            "per_bidder_pos": {str(k): v for k, v in sorted(self.per_bidder_pos.items())},
            "per_bidder_neg": {str(k): v for k, v in sorted(self.per_bidder_neg.items())},
            "skew": [list(p) for p in self.skew],
            "thresholds": {str(k): v for k, v in sorted(self.thresholds.items())},
            "ac_zero_positive": self.ac_zero_positive,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
        }

    def skew_at(self, bidder_fraction: float) -> float:
        """Share of positive bids held by the top ``bidder_fraction`` of bidders."""
        best = 0.0
        for x, y in self.skew:
            if x <= bidder_fraction + 1e-12:
                best = y
        return best


def lorenz_points(counts: Iterable[int]) -> list:
    counts = sorted(counts, reverse=True)
    total = sum(counts)
    n = len(counts)
    points = [(0.0, 0.0)]
    acc = 0
    for i, c in enumerate(counts, start=1):
        acc += c
        points.append((i / n, acc / total if total else 0.0))
    return points


def bid_statistics(dataset: Dataset) -> BidStats:
    """Histograms of positive and negative reviewer bids per paper and per bidder."""
    papers = [p.paper_id for p in dataset.papers]
    bidders = [r.reviewer_id for r in dataset.reviewers if not r.is_ac]
    pos_paper, neg_paper = Counter(), Counter()
    pos_bidder, neg_bidder = Counter(), Counter()
    ac_pos = Counter()
    for b in dataset.bids:
        if b.role is Role.AC:
            if b.level.positive:
                ac_pos[b.paper_id] += 1
            continue
        if b.level.positive:
            pos_paper[b.paper_id] += 1
            pos_bidder[b.bidder_id] += 1
        else:
            neg_paper[b.paper_id] += 1
            neg_bidder[b.bidder_id] += 1
    per_paper_pos = Counter(pos_paper[p] for p in papers)
    per_paper_neg = Counter(neg_paper[p] for p in papers)
    per_bidder_pos = Counter(pos_bidder[r] for r in bidders)
    per_bidder_neg = Counter(neg_bidder[r] for r in bidders)
    thresholds = {c: sum(1 for p in papers if pos_paper[p] <= c) for c in BID_THRESHOLDS}
    return BidStats(
        per_paper_pos=dict(per_paper_pos),
        per_paper_neg=dict(per_paper_neg),
        per_bidder_pos=dict(per_bidder_pos),
        per_bidder_neg=dict(per_bidder_neg),
        skew=lorenz_points(pos_bidder[r] for r in bidders),
        thresholds=thresholds,
        ac_zero_positive=sum(1 for p in papers if ac_pos[p] == 0),
        n_positive=sum(pos_paper.values()),
        n_negative=sum(neg_paper.values()),
    )


# --------------------------------------------------------------------------
# similarity
# --------------------------------------------------------------------------

def _weights(subjects):
    primary, secondary = subjects
    w = {s: 1 for s in secondary}
    if primary is not None:
        w[primary] = 2
    return w


def subject_similarity(paper_subjects, reviewer_subjects) -> float:
    """Weighted Jaccard overlap of two ``(primary, secondaries)`` subject sets.

    Primary subjects weigh 2 and secondary subjects 1.
    """
    wp = _weights(paper_subjects)
    if not wp:
        raise PreconditionError("paper has no subject areas")
    wr = _weights(reviewer_subjects)
    keys = set(wp) | set(wr)
    inter = sum(min(wp.get(k, 0), wr.get(k, 0)) for k in keys)
    union = sum(max(wp.get(k, 0), wr.get(k, 0)) for k in keys)
    return inter / union


@dataclass(frozen=True)
class SimilarityInputs:
    b: float
    s_affinity: float
    s_subject: float

    def __post_init__(self):
        if not 0.25 <= self.b <= 1.0:
            raise PreconditionError(f"bid weight {self.b} outside [0.25, 1]")
        for name in ("s_affinity", "s_subject"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PreconditionError(f"{name}={v} outside [0, 1]")


def similarity_score(inputs: SimilarityInputs) -> float:
    return inputs.b * (inputs.s_affinity + inputs.s_subject)


def bid_weight(level: Optional[BidLevel], weights: Mapping = DEFAULT_BID_WEIGHTS) -> float:
    """Bid level to the multiplier b; ``None`` means the bidder skipped the paper."""
    if level is not None:
        level = BidLevel(level)
    return weights[level]


def build_similarities(dataset: Dataset, affinities: Optional[Mapping] = None,
                       weights: Mapping = DEFAULT_BID_WEIGHTS) -> dict:
    """Overall ``(paper, reviewer) -> score`` for every non-AC reviewer.

    ``affinities`` maps ``(paper, reviewer)`` to a content affinity in [0, 1];
    pairs it omits get affinity 0.
    """
    affinities = affinities or {}
    bids = {(b.paper_id, b.bidder_id): b.level for b in dataset.bids if b.role is Role.REVIEWER}
    out = {}
    for p in dataset.papers:
        psub = (p.primary_subject, p.secondary_subjects)
        for r in dataset.reviewers:
            if r.is_ac:
                continue
            key = (p.paper_id, r.reviewer_id)
            inputs = SimilarityInputs(
                b=bid_weight(bids.get(key), weights),
                s_affinity=float(affinities.get(key, 0.0)),
                s_subject=subject_similarity(psub, (r.primary_subject, ())),
            )
            out[key] = similarity_score(inputs)
    return out


# --------------------------------------------------------------------------
# min-cost flow assignment
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    pairs: frozenset
    paper_load: int
    reviewer_cap: int
    total_similarity: float
    scores: dict = field(default_factory=dict, compare=False, repr=False)

    def rows(self) -> list:
        return [(p, r, self.scores[(p, r)]) for p, r in sorted(self.pairs)]


class _FlowGraph:
    def __init__(self, n):
        self.adj = [[] for _ in range(n)]
        self.to, self.cap, self.cost = [], [], []

    def add(self, u, v, cap, cost):
        self.adj[u].append(len(self.to))
        self.to.append(v); self.cap.append(cap); self.cost.append(cost)
        self.adj[v].append(len(self.to))
        self.to.append(u); self.cap.append(0); self.cost.append(-cost)

    def min_cost_flow(self, s, t, demand):
        """Successive shortest paths with Dijkstra on reduced costs."""
        n = len(self.adj)
        potential = [0] * n
        flow = 0
        inf = float("inf")
        while flow < demand:
            dist = [inf] * n
            prev = [-1] * n
            dist[s] = 0
            heap = [(0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                for e in self.adj[u]:
                    if self.cap[e] <= 0:
                        continue
                    v = self.to[e]
                    nd = d + self.cost[e] + potential[u] - potential[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        prev[v] = e
                        heapq.heappush(heap, (nd, v))
            if dist[t] == inf:
                break
            for v in range(n):
                if dist[v] < inf:
                    potential[v] += dist[v]
            push = demand - flow
            v = t
            while v != s:
                e = prev[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = t
            while v != s:
                e = prev[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                v = self.to[e ^ 1]
            flow += push
        return flow


def assign_reviewers(similarities: Mapping, paper_load: int, reviewer_cap: int,
                     papers: Optional[Iterable] = None, reviewers: Optional[Iterable] = None) -> Assignment:
    """Maximize total similarity with exactly ``paper_load`` reviewers per paper
    and at most ``reviewer_cap`` papers per reviewer.

    ``similarities`` maps ``(paper, reviewer)`` to a score; absent pairs are
    not allowed. Costs are integers, ``round(1e6 * (2 - s * 2 / s_max))``,
    so the optimum is exact up to that resolution and invariant to scaling.
    """
    papers = sorted(set(papers) if papers is not None else {p for p, _ in similarities})
    reviewers = sorted(set(reviewers) if reviewers is not None else {r for _, r in similarities})
    if paper_load < 1 or reviewer_cap < 1:
        raise PreconditionError("paper_load and reviewer_cap must be positive")
    need = len(papers) * paper_load
    if need > len(reviewers) * reviewer_cap:
        raise InfeasibleError(
            f"total reviewer capacity {len(reviewers) * reviewer_cap} is below the required {need} reviews",
            constraint="reviewer_cap",
        )
    eligible = {p: [] for p in papers}
    for (p, r), s in similarities.items():
        if p in eligible and s is not None and s == s:
            eligible[p].append(r)
    for p in papers:
        if len(eligible[p]) < paper_load:
            raise InfeasibleError(
                f"paper {p!r} has only {len(eligible[p])} eligible reviewers for load {paper_load}",
                constraint=f"paper_load:{p}",
            )
    values = [s for s in similarities.values() if s is not None and s == s]
    s_max = max(values) if values else 0.0
    scale = 2.0 / s_max if s_max > 0 else 1.0
    pidx = {p: 1 + i for i, p in enumerate(papers)}
    ridx = {r: 1 + len(papers) + i for i, r in enumerate(reviewers)}
    sink = 1 + len(papers) + len(reviewers)
    g = _FlowGraph(sink + 1)
    for p in papers:
        g.add(0, pidx[p], paper_load, 0)
    pair_edges = {}
    for p in papers:
        for r in sorted(eligible[p]):
            cost = round(COST_SCALE * (2.0 - similarities[(p, r)] * scale))
            pair_edges[(p, r)] = len(g.to)
            g.add(pidx[p], ridx[r], 1, cost)
    for r in reviewers:
        g.add(ridx[r], sink, reviewer_cap, 0)
    flow = g.min_cost_flow(0, sink, need)
    if flow < need:
        raise InfeasibleError(
            f"maximum flow {flow} < required {need}: eligibility pattern cannot meet the loads",
            constraint="max_flow",
        )
    pairs = frozenset(key for key, e in pair_edges.items() if g.cap[e] == 0)
    scores = {key: float(similarities[key]) for key in pairs}
    return Assignment(pairs, paper_load, reviewer_cap, sum(scores.values()), scores)
