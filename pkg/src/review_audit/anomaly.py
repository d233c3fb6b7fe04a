"""Inconsistencies between a reviewer's cardinal reviews and their own ranking."""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass

from .errors import MissingDataError
from .model import FEATURES, Dataset


class FindingKind(str, enum.Enum):
    FEATURE_DOMINANCE_INVERSION = "feature_dominance_inversion"
    FATAL_FLAW_INVERSION = "fatal_flaw_inversion"


@dataclass(frozen=True)
class InconsistencyFinding:
    kind: FindingKind
    reviewer_id: str
    paper_hi: str  # ranked higher by the reviewer
    paper_lo: str
    evidence: dict

    def row(self) -> tuple:
        return (self.kind.value, self.reviewer_id, self.paper_hi, self.paper_lo,
                json.dumps(self.evidence, sort_keys=True, separators=(",", ":")))


@dataclass(frozen=True)
class FindingSet:
    kind: FindingKind
    findings: tuple

    @property
    def n_pairs(self) -> int:
        return len(self.findings)

    @property
    def n_reviewers(self) -> int:
        return len({f.reviewer_id for f in self.findings})

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_pairs": self.n_pairs,
            "n_reviewers": self.n_reviewers,
            "findings": [
                {"reviewer": f.reviewer_id, "paper_hi": f.paper_hi, "paper_lo": f.paper_lo, "evidence": f.evidence}
                for f in self.findings
            ],
        }


FINDINGS_HEADER = ("kind", "reviewer", "paper_hi", "paper_lo", "evidence_json")


def _ranked_pairs(dataset: Dataset, population):
    """Yield ``(reviewer, review_hi, review_lo)`` for every ordered pair in a ranking."""
    if not dataset.rankings:
        raise MissingDataError("inconsistency detection needs ordinal rankings")
    papers = population.paper_filter(dataset) if population is not None else None
    reviewers = dataset.reviewer_index
    reviews = dataset.review_index
    for rid, ranking in sorted(dataset.ranking_index.items()):
        if population is not None and not population.reviewer_ok(reviewers[rid]):
            continue
        ranked = [p for p in ranking if papers is None or p in papers]
        for hi, lo in itertools.combinations(ranked, 2):
            yield rid, reviews[(hi, rid)], reviews[(lo, rid)]


def _sorted(kind, findings):
    findings.sort(key=lambda f: (f.reviewer_id, f.paper_hi, f.paper_lo))
    return FindingSet(kind, tuple(findings))


def feature_dominance_inversions(dataset: Dataset, population=None) -> FindingSet:
    """Pairs where the lower-ranked paper scores strictly higher on every feature."""
    out = []
    for rid, hi, lo in _ranked_pairs(dataset, population):
        if all(lo.scores[f] > hi.scores[f] for f in FEATURES):
            out.append(InconsistencyFinding(
                FindingKind.FEATURE_DOMINANCE_INVERSION, rid, hi.paper_id, lo.paper_id,
                {"scores_hi": list(hi.vector), "scores_lo": list(lo.vector)},
            ))
    return _sorted(FindingKind.FEATURE_DOMINANCE_INVERSION, out)


def fatal_flaw_inversions(dataset: Dataset, population=None) -> FindingSet:
    """Pairs where a paper the reviewer flagged is ranked above one they did not flag."""
    out = []
    for rid, hi, lo in _ranked_pairs(dataset, population):
        if hi.fatal_flaw and not lo.fatal_flaw:
            out.append(InconsistencyFinding(
                FindingKind.FATAL_FLAW_INVERSION, rid, hi.paper_id, lo.paper_id,
                {"fatal_flaw_hi": True, "fatal_flaw_lo": False},
            ))
    return _sorted(FindingKind.FATAL_FLAW_INVERSION, out)
