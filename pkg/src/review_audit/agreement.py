"""Pairwise agreement counting, ties, reviewer-group comparisons, rebuttal
changes and discussion participation.

Inter-reviewer schemes count one event per (reviewer pair, paper pair) where
both reviewers evaluated both papers. Within-reviewer schemes count one
event per (reviewer, paper pair). Ties are discarded and tallied.
"""

from __future__ import annotations

import enum
import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from . import stats
from .errors import DegenerateError, MissingDataError, PreconditionError
from .model import FEATURES, Dataset, Pool, Seniority
from .synth import top2k_subset

LOW_SAMPLE = 30


class Scheme(str, enum.Enum):
    CARDINAL_FEATURE = "cardinal_feature"
    CARDINAL_MEAN = "cardinal_mean"
    CARDINAL_MEDIAN = "cardinal_median"
    ORDINAL = "ordinal"
    ORDINAL_VS_CARDINAL = "ordinal_vs_cardinal"
    ORDINAL_VS_DECISION = "ordinal_vs_decision"


INTER_REVIEWER = (Scheme.CARDINAL_FEATURE, Scheme.CARDINAL_MEAN, Scheme.CARDINAL_MEDIAN, Scheme.ORDINAL)


@dataclass(frozen=True)
class Population:
    pool: Optional[Pool] = None
    seniority: Optional[Seniority] = None
    top2k: bool = False

    @property
    def name(self) -> str:
        parts = []
        if self.pool is not None:
            parts.append("pool1" if self.pool is Pool.INVITED else "pool2")
        if self.seniority is not None:
            parts.append(self.seniority.value)
        if self.top2k:
            parts.append("top2k")
        return "+".join(parts) or "all"

    @classmethod
    def parse(cls, text: str) -> "Population":
        pool, top2k, seniority = None, False, None
        for part in text.split("+"):
            if part == "all":
                continue
            elif part == "pool1":
                pool = Pool.INVITED
            elif part == "pool2":
                pool = Pool.VOLUNTEER
            elif part == "top2k":
                top2k = True
            elif part in {s.value for s in Seniority}:
                seniority = Seniority(part)
            else:
                raise PreconditionError(f"unknown population {part!r}")
        return cls(pool, seniority, top2k)

    def paper_filter(self, dataset: Dataset):
        if self.top2k:
            return top2k_subset(dataset).paper_ids
        return None

    def reviewer_ok(self, reviewer) -> bool:
        if self.pool is not None and reviewer.pool is not self.pool:
            return False
        if self.seniority is not None and reviewer.seniority is not self.seniority:
            return False
        return True


ALL = Population()


@dataclass(frozen=True)
class AgreementCounts:
    n_agree: int
    n_disagree: int
    n_ties_discarded: int
    scheme: Scheme
    population: str = "all"
    measure: Optional[str] = None

    @property
    def n(self) -> int:
        return self.n_agree + self.n_disagree

    @property
    def disagreement_fraction(self) -> Optional[float]:
        return self.n_disagree / self.n if self.n else None

    @property
    def agreement_fraction(self) -> Optional[float]:
        return self.n_agree / self.n if self.n else None

    @property
    def low_sample(self) -> bool:
        return self.n < LOW_SAMPLE

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "population": self.population,
            "measure": self.measure,
            "n_agree": self.n_agree,
            "n_disagree": self.n_disagree,
            "n_ties_discarded": self.n_ties_discarded,
            "disagreement_fraction": self.disagreement_fraction,
        }


def _sign(x):
    return (x > 0) - (x < 0)


def _tally(pairs_of_signs):
    agree = disagree = ties = 0
    for a, b in pairs_of_signs:
        if a == 0 or b == 0:
            ties += 1
        elif a == b:
            agree += 1
        else:
            disagree += 1
    return agree, disagree, ties


def _allowed_reviewers(dataset, population):
    return {r.reviewer_id for r in dataset.reviewers if population.reviewer_ok(r)}


def _measure_tables(dataset, measure, population):
    """``reviewer -> {paper: value}`` restricted to the population."""
    reviewers = _allowed_reviewers(dataset, population)
    papers = population.paper_filter(dataset)
    out = defaultdict(dict)
    if measure == "ordinal":
        for rid, ranking in dataset.ranking_index.items():
            if rid not in reviewers:
                continue
            for pos, pid in enumerate(ranking):
                if papers is None or pid in papers:
                    out[rid][pid] = -pos  # better rank, larger value
        return out
    for r in dataset.reviews:
        if r.reviewer_id in reviewers and (papers is None or r.paper_id in papers):
            out[r.reviewer_id][r.paper_id] = r.measure(measure)
    return out


def _scheme_measure(scheme, measure):
    if scheme is Scheme.CARDINAL_FEATURE:
        if measure not in FEATURES:
            raise PreconditionError("cardinal_feature needs a feature name as measure")
        return measure
    if scheme is Scheme.CARDINAL_MEAN:
        return "mean"
    if scheme is Scheme.CARDINAL_MEDIAN:
        return "median"
    if scheme is Scheme.ORDINAL:
        return "ordinal"
    if scheme is Scheme.ORDINAL_VS_CARDINAL:
        measure = measure or "mean"
        if measure not in (*FEATURES, "mean", "median"):
            raise PreconditionError(f"unknown cardinal measure {measure!r}")
        return measure
    return None


def _inter_reviewer(tables):
    reviewers = sorted(tables)
    for a, b in itertools.combinations(reviewers, 2):
        ta, tb = tables[a], tables[b]
        shared = sorted(set(ta) & set(tb))
        for p, q in itertools.combinations(shared, 2):
            yield _sign(ta[p] - ta[q]), _sign(tb[p] - tb[q])


def pairwise_agreement(dataset: Dataset, scheme, population: Population = ALL,
                       measure: Optional[str] = None) -> AgreementCounts:
    """Agreement tallies for one comparison scheme over a population.

    ``measure`` picks the feature for ``cardinal_feature`` and the cardinal
    side (a feature, ``"mean"`` or ``"median"``) for ``ordinal_vs_cardinal``.
    """
    scheme = Scheme(scheme)
    measure = _scheme_measure(scheme, measure)
    if scheme in (Scheme.ORDINAL, Scheme.ORDINAL_VS_CARDINAL, Scheme.ORDINAL_VS_DECISION) and not dataset.rankings:
        raise MissingDataError(f"{scheme.value} needs ordinal rankings")
    if (scheme is Scheme.ORDINAL_VS_DECISION or population.top2k) and not dataset.has_decisions:
        raise MissingDataError(f"{scheme.value} over {population.name} needs decisions")

    if scheme in INTER_REVIEWER:
        signs = _inter_reviewer(_measure_tables(dataset, measure, population))
    elif scheme is Scheme.ORDINAL_VS_CARDINAL:
        ordinal = _measure_tables(dataset, "ordinal", population)
        cardinal = _measure_tables(dataset, measure, population)
        signs = (
            (_sign(ordinal[rid][p] - ordinal[rid][q]), _sign(cardinal[rid][p] - cardinal[rid][q]))
            for rid in sorted(ordinal)
            for p, q in itertools.combinations(sorted(ordinal[rid]), 2)
        )
    else:
        ordinal = _measure_tables(dataset, "ordinal", population)
        papers = dataset.paper_index
        signs = []
        for rid in sorted(ordinal):
            for p, q in itertools.combinations(sorted(ordinal[rid]), 2):
                acc_p, acc_q = papers[p].decision.accepted, papers[q].decision.accepted
                if acc_p == acc_q:
                    continue
                signs.append((_sign(ordinal[rid][p] - ordinal[rid][q]), 1 if acc_p else -1))
    agree, disagree, ties = _tally(signs)
    return AgreementCounts(agree, disagree, ties, scheme, population.name, measure)


def tie_fraction(dataset: Dataset, measure: str, population: Population = ALL) -> tuple:
    """Share of (paper, paper, reviewer) triples where the reviewer's measure ties.

    Returns ``(fraction, n_triples)``.
    """
    tables = _measure_tables(dataset, measure, population)
    ties = total = 0
    for values in tables.values():
        for p, q in itertools.combinations(sorted(values), 2):
            total += 1
            ties += values[p] == values[q]
    if total == 0:
        raise PreconditionError("no reviewer reviewed two papers in this population")
    return ties / total, total


def agreement_homogeneity(counts_a: AgreementCounts, counts_b: AgreementCounts) -> stats.TestResult:
    """2x2 Pearson chi-square on {agree, disagree} x {group}.

    The effect size is the difference of agreement proportions, a minus b.
    """
    if counts_a.n == 0 or counts_b.n == 0:
        raise DegenerateError("agreement_homogeneity needs agreements or disagreements in both groups")
    effect = counts_a.agreement_fraction - counts_b.agreement_fraction
    if counts_a.n_agree + counts_b.n_agree == 0 or counts_a.n_disagree + counts_b.n_disagree == 0:
        # one outcome never occurs: both proportions are equal (0 or 1)
        return stats.TestResult(0.0, 1, 1.0, effect, counts_a.n, counts_b.n, ("single outcome observed",))
    r = stats.chi_square_homogeneity(
        [counts_a.n_agree, counts_a.n_disagree], [counts_b.n_agree, counts_b.n_disagree]
    )
    return stats.TestResult(r.statistic, r.dof, r.p_two_sided, effect, counts_a.n, counts_b.n, r.notes)


def agreement_rows(counts_by_group: dict) -> list:
    """Plot rows ``(group, feature, disagreement fraction, ci_width, n)``."""
    rows = []
    for group, counts in counts_by_group.items():
        frac = counts.disagreement_fraction
        width = stats.proportion_ci_width(frac, counts.n) if counts.n else None
        rows.append((group, counts.measure or counts.scheme.value, frac, width, counts.n))
    return rows


# --------------------------------------------------------------------------
# group comparisons
# --------------------------------------------------------------------------

GROUPINGS = {
    "pool": [(Pool.INVITED, Pool.VOLUNTEER)],
    "seniority": [
        (Seniority.SENIOR, Seniority.JUNIOR),
        (Seniority.SENIOR, Seniority.STUDENT),
        (Seniority.JUNIOR, Seniority.STUDENT),
    ],
}


@dataclass(frozen=True)
class GroupComparison:
    grouping: str
    fields: tuple
    rows: tuple  # dicts: group_a, group_b, field, mean_a, mean_b, test, p_adjusted
    m: int

    def to_dict(self) -> dict:
        return {
            "grouping": self.grouping,
            "fields": list(self.fields),
            "bonferroni_m": self.m,
            "rows": [
                {**{k: v for k, v in row.items() if k != "test"}, "test": row["test"].to_dict()}
                for row in self.rows
            ],
        }


def _group_of(reviewer, grouping):
    return reviewer.pool if grouping == "pool" else reviewer.seniority


def group_score_comparison(dataset: Dataset, grouping: str = "pool", field: str = "features",
                           population: Population = ALL) -> GroupComparison:
    """Welch t-test and Cohen's d of review scores between reviewer groups.

    ``field`` is ``"features"`` (all four, Bonferroni m = 4), ``"confidence"``
    or a single feature name. Reviewers of unknown seniority are left out of
    seniority groupings.
    """
    if grouping not in GROUPINGS:
        raise PreconditionError(f"unknown grouping {grouping!r}")
    fields = FEATURES if field == "features" else (field,)
    for f in fields:
        if f not in FEATURES and f != "confidence":
            raise PreconditionError(f"unknown field {f!r}")
    papers = population.paper_filter(dataset)
    # the grouping dimension itself is not filtered
    scope = Population(None if grouping == "pool" else population.pool,
                       None if grouping == "seniority" else population.seniority)
    reviewers = dataset.reviewer_index
    values = defaultdict(lambda: defaultdict(list))
    for r in dataset.reviews:
        if papers is not None and r.paper_id not in papers:
            continue
        rev = reviewers[r.reviewer_id]
        if not scope.reviewer_ok(rev):
            continue
        g = _group_of(rev, grouping)
        for f in fields:
            values[g][f].append(r.confidence if f == "confidence" else r.scores[f])
    rows = []
    for ga, gb in GROUPINGS[grouping]:
        for f in fields:
            a, b = values[ga][f], values[gb][f]
            if len(a) < 2 or len(b) < 2:
                raise DegenerateError(f"degenerate group: {ga.value}={len(a)}, {gb.value}={len(b)} reviews")
            test = stats.welch_t_test(a, b)
            rows.append({
                "group_a": ga.value,
                "group_b": gb.value,
                "field": f,
                "mean_a": sum(a) / len(a),
                "mean_b": sum(b) / len(b),
                "test": test,
            })
    m = len(fields)
    adjusted = [stats.bonferroni_adjust([row["test"].p_two_sided], m)[0] for row in rows]
    for row, p in zip(rows, adjusted):
        row["p_adjusted"] = p
        row["significant"] = p < stats.SIGNIFICANCE
    return GroupComparison(grouping, tuple(fields), tuple(rows), m)


# --------------------------------------------------------------------------
# rebuttals and discussions
# --------------------------------------------------------------------------

def rebuttal_deltas(dataset: Dataset) -> dict:
    """How many pre-rebuttal reviews changed, and the mean absolute change."""
    pre = [r for r in dataset.reviews if r.pre_rebuttal_scores is not None]
    if not pre:
        raise MissingDataError("rebuttal_deltas needs pre-rebuttal score snapshots")
    changed = [r for r in pre if any(r.scores[f] != r.pre_rebuttal_scores[f] for f in FEATURES)]
    return {
        "n_pre_rebuttal": len(pre),
        "n_changed": len(changed),
        "n_papers_changed": len({r.paper_id for r in changed}),
        "mean_abs_delta": {
            f: sum(abs(r.scores[f] - r.pre_rebuttal_scores[f]) for r in pre) / len(pre) for f in FEATURES
        },
    }


DISCUSSION_GROUPINGS = {
    "pool": (("invited", lambda r: r.pool is Pool.INVITED), ("volunteer", lambda r: r.pool is Pool.VOLUNTEER)),
    "student": (
        ("non_student", lambda r: r.seniority in (Seniority.SENIOR, Seniority.JUNIOR)),
        ("student", lambda r: r.seniority is Seniority.STUDENT),
    ),
}


def discussion_participation(dataset: Dataset, grouping: str = "pool", population: Population = ALL) -> dict:
    """Shares of pairs, posts and participating pairs per reviewer group, plus
    a Welch test on posts per (reviewer, paper) pair (pairs without posts count 0)."""
    if not dataset.posts:
        raise MissingDataError("discussion_participation needs discussion posts")
    if grouping not in DISCUSSION_GROUPINGS:
        raise PreconditionError(f"unknown grouping {grouping!r}")
    papers = population.paper_filter(dataset)
    reviewers = dataset.reviewer_index
    posts = dataset.post_counts
    per_group = {}
    for name, member in DISCUSSION_GROUPINGS[grouping]:
        counts = [
            posts.get((r.reviewer_id, r.paper_id), 0)
            for r in dataset.reviews
            if (papers is None or r.paper_id in papers) and member(reviewers[r.reviewer_id])
        ]
        per_group[name] = counts
    totals = {
        "count": sum(len(c) for c in per_group.values()),
        "posts": sum(sum(c) for c in per_group.values()),
        "papers": sum(sum(1 for x in c if x > 0) for c in per_group.values()),
    }
    shares = {}
    for name, c in per_group.items():
        raw = {"count": len(c), "posts": sum(c), "papers": sum(1 for x in c if x > 0)}
        shares[name] = {k: (raw[k] / totals[k] if totals[k] else None) for k in raw}
        shares[name]["n_pairs"] = raw["count"]
    (na, a), (nb, b) = per_group.items()
    notes = []
    try:
        test = stats.welch_t_test(a, b)
    except DegenerateError as exc:  # shares stay meaningful without the test
        test = None
        notes.append(str(exc))
    return {"grouping": grouping, "population": population.name, "shares": shares,
            "totals": totals, "test": test, "notes": notes}


def participation_decision_agreement(dataset: Dataset, population: Population = ALL) -> tuple:
    """Does the decision side with the reviewers who joined the discussion?

    Per paper with both participating and silent reviewers, compare the
    average score (over features and reviewers) of each side. The paper
    agrees when the higher side matches the decision; equal averages are
    discarded. Returns ``(AgreementCounts, binomial sign TestResult)``.
    """
    if not dataset.has_decisions:
        raise MissingDataError("participation_decision_agreement needs decisions")
    if not dataset.posts:
        raise MissingDataError("participation_decision_agreement needs discussion posts")
    papers = population.paper_filter(dataset)
    reviewers = dataset.reviewer_index
    posts = dataset.post_counts
    agree = disagree = ties = 0
    for pid, revs in sorted(dataset.reviews_by_paper.items()):
        if papers is not None and pid not in papers:
            continue
        revs = [r for r in revs if population.reviewer_ok(reviewers[r.reviewer_id])]
        part = [r.mean for r in revs if posts.get((r.reviewer_id, pid), 0) > 0]
        silent = [r.mean for r in revs if posts.get((r.reviewer_id, pid), 0) == 0]
        if not part or not silent:
            continue
        diff = sum(part) / len(part) - sum(silent) / len(silent)
        if diff == 0:
            ties += 1
            continue
        accepted = dataset.paper_index[pid].decision.accepted
        if (diff > 0) == accepted:
            agree += 1
        else:
            disagree += 1
    if agree + disagree == 0:
        raise PreconditionError("no paper has both participating and silent reviewers with different averages")
    counts = AgreementCounts(agree, disagree, ties, Scheme.CARDINAL_MEAN, population.name, "participation")
    return counts, stats.binomial_sign_test(agree, disagree)
