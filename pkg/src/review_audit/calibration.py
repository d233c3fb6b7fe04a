"""Score calibration against the rubric, per-paper score distributions and
subject-area homogeneity of acceptances."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import MissingDataError, PreconditionError
from .model import FEATURES, Dataset
from . import stats

BIN_WIDTH = 0.25
N_BINS = 16  # [1, 5] in quarter steps, the last bin closed


@dataclass(frozen=True)
class RubricTargets:
    """Cumulative share of reviews the rubric allows at or above each score."""

    at_least: dict = field(default_factory=lambda: {5: 0.001, 4: 0.03, 3: 0.30})
    labels: dict = field(default_factory=lambda: {
        5: "award level", 4: "oral level", 3: "poster level", 2: "sub-standard", 1: "low or very low",
    })

    def __post_init__(self):
        ordered = [self.at_least[s] for s in sorted(self.at_least)]
        if any(a <= b for a, b in zip(ordered, ordered[1:])):
            raise PreconditionError("target fractions must decrease strictly with score")


@dataclass(frozen=True)
class FeatureMismatch:
    fractions: dict  # score -> share of reviews
    at_least: dict  # score -> share of reviews scoring >= score
    excess: dict  # score -> at_least - target, for scores with a target


def bin_index(value: float) -> int:
    return min(N_BINS - 1, int((value - 1.0) // BIN_WIDTH))


def bin_edges(i: int) -> tuple:
    return (1.0 + i * BIN_WIDTH, 1.0 + (i + 1) * BIN_WIDTH)


def paper_feature_means(dataset: Dataset) -> dict:
    """``paper_id -> {feature: mean over that paper's reviewers}``."""
    out = {}
    for pid, revs in dataset.reviews_by_paper.items():
        out[pid] = {f: sum(r.scores[f] for r in revs) / len(revs) for f in FEATURES}
    return out


def score_distributions(dataset: Dataset) -> dict:
    """Histograms of per-paper mean score, per feature and decision group.

    Returns ``{feature: {group: [count per bin]}}``; papers without a
    decision fall in the group ``"undecided"``.
    """
    if not dataset.reviews:
        raise MissingDataError("score_distributions needs reviews")
    means = paper_feature_means(dataset)
    papers = dataset.paper_index
    out = {f: {} for f in FEATURES}
    for pid, fm in sorted(means.items()):
        dec = papers[pid].decision
        group = dec.value if dec is not None else "undecided"
        for f in FEATURES:
            hist = out[f].setdefault(group, [0] * N_BINS)
            hist[bin_index(fm[f])] += 1
    return out


def score_distribution_rows(distributions: dict, feature: str) -> list:
    rows = []
    for group in sorted(distributions[feature]):
        for i, count in enumerate(distributions[feature][group]):
            lo, hi = bin_edges(i)
            rows.append((lo, hi, count, group))
    return rows


def rubric_mismatch(dataset: Dataset, targets: RubricTargets = RubricTargets()) -> dict:
    """Per-feature share of reviews at each score versus the rubric targets."""
    if not dataset.reviews:
        raise MissingDataError("rubric_mismatch needs reviews")
    n = len(dataset.reviews)
    table = {}
    for f in FEATURES:
        counts = Counter(r.scores[f] for r in dataset.reviews)
        fractions = {s: counts[s] / n for s in range(1, 6)}
        at_least = {s: sum(fractions[t] for t in range(s, 6)) for s in range(1, 6)}
        excess = {s: at_least[s] - tgt for s, tgt in targets.at_least.items()}
        table[f] = FeatureMismatch(fractions, at_least, excess)
    return table


def fatal_flaw_rate(dataset: Dataset) -> float:
    """Share of papers flagged with a fatal flaw by at least one reviewer."""
    if not dataset.papers:
        raise MissingDataError("fatal_flaw_rate needs papers")
    flagged = {r.paper_id for r in dataset.reviews if r.fatal_flaw}
    return len(flagged) / len(dataset.papers)


def percentile_feedback(dataset: Dataset, paper_id: str, feature: str) -> float:
    """Mid-rank percentile of a paper's mean feature score among all papers.

    ``100 * (below + equal / 2) / n`` where ``equal`` counts the paper itself,
    so the unique top paper sits at ``100 (n - 0.5) / n`` and a full tie at 50.
    """
    means = paper_feature_means(dataset)
    if paper_id not in dataset.paper_index:
        raise PreconditionError(f"unknown paper {paper_id!r}")
    if paper_id not in means:
        raise PreconditionError(f"paper {paper_id!r} has no reviews")
    target = means[paper_id][feature]
    values = [m[feature] for m in means.values()]
    below = sum(1 for v in values if v < target)
    equal = sum(1 for v in values if v == target)
    return 100.0 * (below + 0.5 * equal) / len(values)


def subject_area_homogeneity(dataset: Dataset) -> dict:
    """Chi-square homogeneity of submitted versus accepted primary-subject counts."""
    if not dataset.has_decisions:
        raise MissingDataError("subject_area_homogeneity needs decisions")
    n_subj = dataset.subject_area_count or max(p.primary_subject for p in dataset.papers)
    submitted = [0] * n_subj
    accepted = [0] * n_subj
    for p in dataset.papers:
        submitted[p.primary_subject - 1] += 1
        if p.decision.accepted:
            accepted[p.primary_subject - 1] += 1
    if sum(1 for c in submitted if c) < 2:
        raise PreconditionError("need at least two subject areas with submissions")
    result = stats.chi_square_homogeneity(submitted, accepted)
    return {
        "test": result,
        "submitted": {s + 1: c for s, c in enumerate(submitted)},
        "accepted": {s + 1: c for s, c in enumerate(accepted)},
    }
