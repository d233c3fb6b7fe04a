"""Audit sections, JSON/CSV/markdown emission.

Each section builder returns a :class:`Section` holding JSON-ready data,
CSV tables and warnings. Missing optional data (no decisions, rankings or
posts) turns into a warning; other precondition failures propagate.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import agreement as ag
from . import anomaly, assignment, calibration, graph, randomness
from .errors import MissingDataError, PreconditionError
from .io import dataset_digest, write_csv
from .model import FEATURES, Dataset
from .synth import top2k_subset

SECTIONS = (
    "bids", "co_review", "calibration", "pools", "rebuttals_discussions",
    "subject_areas", "randomness", "ordinal", "anomalies",
)

AGREEMENT_HEADER = ("group", "feature", "value", "ci_width", "n")
POPULATIONS = ("all", "pool1", "pool2", "top2k")


class SectionError(PreconditionError):
    def __init__(self, section, cause):
        super().__init__(f"section {section}: {cause}")
        self.section = section
        self.cause = cause


@dataclass
class Section:
    name: str
    data: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # filename -> (header, rows)
    warnings: list = field(default_factory=list)
    skipped: bool = False

    def to_dict(self) -> dict:
        out = {"skipped": self.skipped, "warnings": list(self.warnings)}
        out.update(self.data)
        return out


@dataclass(frozen=True)
class AuditConfig:
    seed: int = 0
    mu: int = 100
    alpha: float = 0.01
    granularity: float = 0.05
    iterations: int = 1000
    accept_frac: float = 0.237

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def jsonable(obj):
    """Recursively convert results to plain JSON types."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(jsonable(k)): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def _optional(section: Section, fn, *args, **kwargs):
    """Run ``fn``; on missing data record a warning and return None."""
    try:
        return fn(*args, **kwargs)
    except MissingDataError as exc:
        section.warnings.append(str(exc))
        return None


# --------------------------------------------------------------------------
# sections
# --------------------------------------------------------------------------

def bids_section(dataset: Dataset) -> Section:
    sec = Section("bids")
    if not dataset.bids:
        sec.warnings.append("no bids recorded")
    st = assignment.bid_statistics(dataset)
    sec.data = st.to_dict()
    sec.data["skew_at_10pct"] = st.skew_at(0.1)
    rows = [(c, n, "positive") for c, n in sorted(st.per_paper_pos.items())]
    rows += [(c, n, "negative") for c, n in sorted(st.per_paper_neg.items())]
    sec.tables["bids_per_paper.csv"] = (("bids", "n_papers", "kind"), rows)
    rows = [(c, n, "positive") for c, n in sorted(st.per_bidder_pos.items())]
    rows += [(c, n, "negative") for c, n in sorted(st.per_bidder_neg.items())]
    sec.tables["bids_per_bidder.csv"] = (("bids", "n_bidders", "kind"), rows)
    sec.tables["bids_skew.csv"] = (("bidder_fraction", "positive_bid_fraction"), st.skew)
    return sec


def co_review_section(dataset: Dataset, kinds=(graph.GraphKind.REVIEWER, graph.GraphKind.PAPER)) -> Section:
    sec = Section("co_review")
    for kind in kinds:
        g = graph.build_co_review_graph(dataset, kind)
        entry = {"n_nodes": g.n, "n_edges": len(g.edges()), "n_components": len(g.components())}
        if g.n < 3:
            sec.warnings.append(f"{kind.value}: fewer than 3 nodes, profile skipped")
            sec.data[kind.value] = entry
            continue
        curve = graph.ncp_sweep(g)
        cands = graph.detect_fragmentation(curve)
        flagged = [c for c in cands if c.flagged]
        entry["candidates"] = [c.to_dict() for c in cands]
        entry["n_flagged"] = len(flagged)
        members = set()
        for c in flagged:
            members |= c.community
        if kind is graph.GraphKind.REVIEWER:
            entry["flagged_subjects"] = [
                graph.cluster_subject_histogram(dataset, c.community) for c in flagged
            ]
        sec.data[kind.value] = entry
        tag = kind.value
        sec.tables[f"{tag}_ncp.csv"] = (
            ("k", "normalized_size", "phi"),
            [(p.k, p.k / curve.n_nodes, p.phi) for p in curve.points],
        )
        sec.tables[f"{tag}_edges.csv"] = (("u", "v"), g.edges())
        sec.tables[f"{tag}_membership.csv"] = (("node", "flagged"), graph.membership_rows(g, members))
    return sec


def calibration_section(dataset: Dataset) -> Section:
    sec = Section("calibration")
    targets = calibration.RubricTargets()
    mismatch = calibration.rubric_mismatch(dataset, targets)
    sec.data["rubric"] = {
        f: {"fractions": m.fractions, "at_least": m.at_least, "excess": m.excess} for f, m in mismatch.items()
    }
    sec.data["fatal_flaw_rate"] = calibration.fatal_flaw_rate(dataset)
    dist = calibration.score_distributions(dataset)
    if not dataset.has_decisions:
        sec.warnings.append("no decisions: score distributions are not split by decision")
    sec.data["distributions"] = dist
    for f in FEATURES:
        sec.tables[f"score_distribution_{f}.csv"] = (
            ("bin_lo", "bin_hi", "count", "decision_group"), calibration.score_distribution_rows(dist, f),
        )
    rows = []
    for f, m in mismatch.items():
        for s in range(1, 6):
            rows.append((f, s, m.fractions[s], m.at_least[s], targets.at_least.get(s)))
    sec.tables["rubric.csv"] = (("feature", "score", "fraction", "at_least", "target"), rows)
    return sec


def _agreement_row_block(dataset, scheme, populations, measure=None, warnings=None):
    counts = {}
    label = ag.Scheme(scheme).value + (f"/{measure}" if measure else "")
    for name in populations:
        pop = ag.Population.parse(name)
        try:
            c = ag.pairwise_agreement(dataset, scheme, pop, measure)
        except MissingDataError as exc:
            if warnings is not None:
                warnings.append(f"{label}/{name}: {exc}")
            continue
        if pop.top2k and c.low_sample and scheme in ag.INTER_REVIEWER and warnings is not None:
            warnings.append(f"{label}/{name}: low sample ({c.n} < {ag.LOW_SAMPLE})")
        counts[name] = c
    return counts


def pools_section(dataset: Dataset, populations=POPULATIONS) -> Section:
    sec = Section("pools")
    comps = {}
    for grouping in ("pool", "seniority"):
        for fld in ("features", "confidence"):
            comps[f"{grouping}/{fld}"] = ag.group_score_comparison(dataset, grouping, fld).to_dict()
    sec.data["score_comparisons"] = comps
    agreement, homogeneity, rows = {}, {}, []
    for measure in (*FEATURES, "mean"):
        scheme = ag.Scheme.CARDINAL_FEATURE if measure in FEATURES else ag.Scheme.CARDINAL_MEAN
        counts = _agreement_row_block(dataset, scheme, populations, measure if measure in FEATURES else None,
                                      sec.warnings)
        agreement[measure] = {k: v.to_dict() for k, v in counts.items()}
        rows += ag.agreement_rows(counts)
        if "pool1" in counts and "pool2" in counts:
            try:
                homogeneity[measure] = ag.agreement_homogeneity(counts["pool1"], counts["pool2"])
            except PreconditionError as exc:
                sec.warnings.append(f"homogeneity {measure}: {exc}")
    sec.data["inter_reviewer_agreement"] = agreement
    sec.data["agreement_homogeneity_pool1_vs_pool2"] = homogeneity
    sec.tables["inter_reviewer_disagreement.csv"] = (AGREEMENT_HEADER, rows)
    return sec


def rebuttals_section(dataset: Dataset) -> Section:
    sec = Section("rebuttals_discussions")
    sec.data["rebuttal"] = _optional(sec, ag.rebuttal_deltas, dataset)
    participation = {}
    rows = []
    for grouping in ("pool", "student"):
        res = _optional(sec, ag.discussion_participation, dataset, grouping)
        if res is None:
            break
        participation[grouping] = res
        for group, shares in res["shares"].items():
            for bar in ("count", "posts", "papers"):
                rows.append((group, bar, shares[bar], None, shares["n_pairs"]))
    sec.data["participation"] = participation
    if rows:
        sec.tables["discussion_participation.csv"] = (AGREEMENT_HEADER, rows)
    res = _optional(sec, ag.participation_decision_agreement, dataset)
    sec.data["participation_decision"] = None if res is None else {"counts": res[0], "test": res[1]}
    return sec


def subject_areas_section(dataset: Dataset) -> Section:
    sec = Section("subject_areas")
    if not dataset.has_decisions:
        sec.skipped = True
        sec.warnings.append("no decisions: subject-area homogeneity skipped")
        return sec
    res = calibration.subject_area_homogeneity(dataset)
    sec.data = res
    sec.tables["subject_areas.csv"] = (
        ("subject", "submitted", "accepted"),
        [(s, res["submitted"][s], res["accepted"][s]) for s in res["submitted"]],
    )
    return sec


def randomness_section(dataset: Dataset, config: AuditConfig, messy=True, bootstrap=True) -> Section:
    sec = Section("randomness")
    if messy:
        mcfg = randomness.MessyMiddleConfig(config.mu, config.alpha, config.granularity)
        res = randomness.messy_middle(dataset, mcfg)
        sec.warnings.extend(res.warnings)
        sec.data["messy_middle"] = res.to_dict()
        sec.tables["messy_grid.csv"] = (randomness.GRID_HEADER, randomness.messy_grid_export(res))
    if bootstrap:
        boot = randomness.bootstrap_decision_variance(
            dataset, config.iterations, config.accept_frac, config.seed
        )
        sec.data["bootstrap"] = boot.to_dict()
        sec.tables["bootstrap_variance_hist.csv"] = (
            ("bin_lo", "bin_hi", "count", "decision_group"), randomness.variance_histogram_rows(boot),
        )
        sec.tables["bootstrap_papers.csv"] = (
            ("paper_id", "beta", "variance"),
            [(p, float(b), float(b * (1 - b))) for p, b in zip(boot.paper_ids, boot.beta)],
        )
    return sec


def ordinal_section(dataset: Dataset, populations=POPULATIONS) -> Section:
    sec = Section("ordinal")
    ties, tie_rows = {}, []
    for measure in (*FEATURES, "mean", "median"):
        ties[measure] = {}
        for name in populations:
            pop = ag.Population.parse(name)
            try:
                frac, n = ag.tie_fraction(dataset, measure, pop)
            except MissingDataError as exc:
                sec.warnings.append(f"ties/{name}: {exc}")
                continue
            except PreconditionError as exc:
                sec.warnings.append(f"ties/{measure}/{name}: {exc}")
                continue
            ties[measure][name] = {"fraction": frac, "n": n}
            tie_rows.append((name, measure, frac, ag.stats.proportion_ci_width(frac, n), n))
    sec.data["ties"] = ties
    sec.tables["ties.csv"] = (AGREEMENT_HEADER, tie_rows)
    schemes = {}
    rows = []
    blocks = [
        ("cardinal_median", ag.Scheme.CARDINAL_MEDIAN, None),
        ("ordinal", ag.Scheme.ORDINAL, None),
        ("ordinal_vs_decision", ag.Scheme.ORDINAL_VS_DECISION, None),
    ] + [(f"ordinal_vs_cardinal/{m}", ag.Scheme.ORDINAL_VS_CARDINAL, m) for m in (*FEATURES, "mean")]
    for key, scheme, measure in blocks:
        counts = _agreement_row_block(dataset, scheme, populations, measure, sec.warnings)
        schemes[key] = {k: v.to_dict() for k, v in counts.items()}
        rows += [(g, key, v, w, n) for g, _, v, w, n in ag.agreement_rows(counts)]
    sec.data["agreement"] = schemes
    sec.tables["ordinal_disagreement.csv"] = (AGREEMENT_HEADER, rows)
    return sec


def anomalies_section(dataset: Dataset, populations=("all", "top2k")) -> Section:
    sec = Section("anomalies")
    if not dataset.rankings:
        sec.skipped = True
        sec.warnings.append("no ordinal rankings: inconsistency detection skipped")
        return sec
    rows = []
    for name in populations:
        pop = ag.Population.parse(name)
        if pop.top2k and not dataset.has_decisions:
            sec.warnings.append("no decisions: top2k anomalies skipped")
            continue
        entry = {}
        for detect in (anomaly.feature_dominance_inversions, anomaly.fatal_flaw_inversions):
            found = detect(dataset, pop)
            entry[found.kind.value] = found.to_dict()
            if name == "all":
                rows += [f.row() for f in found.findings]
        sec.data[name] = entry
    sec.tables["anomalies.csv"] = (anomaly.FINDINGS_HEADER, rows)
    return sec


def top2k_section(dataset: Dataset) -> Section:
    sec = Section("top2k")
    sub = top2k_subset(dataset)
    sec.data = {"n_accepted": sub.n_accepted, "n_papers": len(sub), "paper_ids": sorted(sub.paper_ids)}
    sec.tables["top2k.csv"] = (("paper_id",), [(p,) for p in sorted(sub.paper_ids)])
    return sec


# --------------------------------------------------------------------------
# full audit
# --------------------------------------------------------------------------

def _guard(name, fn, *args):
    try:
        return fn(*args)
    except MissingDataError as exc:
        return Section(name, skipped=True, warnings=[str(exc)])
    except PreconditionError as exc:
        raise SectionError(name, exc) from exc


def run_audit(dataset: Dataset, config: AuditConfig = AuditConfig()) -> dict:
    """All nine analysis sections, in a fixed order."""
    sections = {
        "bids": _guard("bids", bids_section, dataset),
        "co_review": _guard("co_review", co_review_section, dataset),
        "calibration": _guard("calibration", calibration_section, dataset),
        "pools": _guard("pools", pools_section, dataset),
        "rebuttals_discussions": _guard("rebuttals_discussions", rebuttals_section, dataset),
        "subject_areas": _guard("subject_areas", subject_areas_section, dataset),
    }
    if dataset.has_decisions:
        sections["randomness"] = _guard("randomness", randomness_section, dataset, config)
    else:
        sections["randomness"] = Section(
            "randomness", skipped=True, warnings=["no decisions: randomness analyses skipped"]
        )
    sections["ordinal"] = _guard("ordinal", ordinal_section, dataset)
    sections["anomalies"] = _guard("anomalies", anomalies_section, dataset)
    return sections


def build_report(dataset: Dataset, sections: dict, config: Optional[AuditConfig] = None) -> dict:
    return jsonable({
        "metadata": {
            "dataset_digest": dataset_digest(dataset),
            "tool_version": __version__,
            "config": config.to_dict() if config is not None else {},
            "n_papers": len(dataset.papers),
            "n_reviewers": len(dataset.reviewers),
            "n_reviews": len(dataset.reviews),
        },
        "sections": {name: sec.to_dict() for name, sec in sections.items()},
    })


def _fmt(x, digits=3):
    if x is None:
        return "n/a"
    return f"{x:.{digits}g}" if isinstance(x, float) else str(x)


def key_observations(report: dict) -> dict:
    """Threshold-driven observations per section, for the markdown summary."""
    present = report["sections"]
    s = {name: present.get(name, {"skipped": True}) for name in SECTIONS}
    obs = {name: [] for name in SECTIONS}
    if not s["bids"]["skipped"]:
        th = s["bids"]["thresholds"]
        obs["bids"].append(f"papers with at most 2 positive reviewer bids: {th.get('2', 0)}")
        obs["bids"].append(f"top 10% of bidders hold {_fmt(s['bids']['skew_at_10pct'])} of positive bids")
    for kind in ("reviewer_graph", "paper_graph"):
        entry = s["co_review"].get(kind)
        if entry and "n_flagged" in entry:
            obs["co_review"].append(
                f"{kind}: {entry['n_components']} components, {entry['n_flagged']} flagged fragment(s)"
            )
    if not s["calibration"]["skipped"]:
        for f, m in s["calibration"]["rubric"].items():
            ex = m["excess"]["3"]
            if ex > 0.1:
                obs["calibration"].append(
                    f"{f}: {_fmt(m['at_least']['3'])} of reviews score 3 or more, above the 0.30 target"
                )
        obs["calibration"].append(f"fatal-flaw rate: {_fmt(s['calibration']['fatal_flaw_rate'])}")
    if not s["pools"]["skipped"]:
        for key, comp in s["pools"]["score_comparisons"].items():
            for row in comp["rows"]:
                if row["significant"]:
                    obs["pools"].append(
                        f"{key}: {row['group_a']} vs {row['group_b']} differ on {row['field']} "
                        f"(adjusted p {_fmt(row['p_adjusted'])}, d {_fmt(row['test']['effect_size'])})"
                    )
        if not obs["pools"]:
            obs["pools"].append("no significant group differences after multiple-testing correction")
    reb = s["rebuttals_discussions"]
    if reb.get("rebuttal"):
        r = reb["rebuttal"]
        obs["rebuttals_discussions"].append(
            f"{r['n_changed']} of {r['n_pre_rebuttal']} pre-rebuttal reviews changed"
        )
    if reb.get("participation_decision"):
        t = reb["participation_decision"]["test"]
        obs["rebuttals_discussions"].append(
            f"decision sides with discussion participants: sign-test p {_fmt(t['p_two_sided'])}"
        )
    if not s["subject_areas"]["skipped"]:
        t = s["subject_areas"]["test"]
        obs["subject_areas"].append(f"acceptance vs subject area: chi-square p {_fmt(t['p_two_sided'])}")
    if not s["randomness"]["skipped"]:
        mm = s["randomness"].get("messy_middle")
        if mm:
            obs["randomness"].append(f"messy-middle size {_fmt(mm['size'])} at (t, b) = {mm['witness']}")
        bt = s["randomness"].get("bootstrap")
        if bt:
            uncertain = sum(1 for p in bt["papers"] if p["variance"] > 0.1)
            obs["randomness"].append(f"papers with bootstrap decision variance above 0.1: {uncertain}")
    ties = s["ordinal"].get("ties", {})
    for f in FEATURES:
        frac = ties.get(f, {}).get("all", {}).get("fraction")
        if frac is not None and frac > 0.3:
            obs["ordinal"].append(f"{f}: {_fmt(frac)} of same-reviewer paper pairs are tied")
    if not s["anomalies"]["skipped"] and "all" in s["anomalies"]:
        for kind, entry in s["anomalies"]["all"].items():
            obs["anomalies"].append(f"{kind}: {entry['n_pairs']} pairs from {entry['n_reviewers']} reviewers")
    return {name: items for name, items in obs.items() if name in present}


def markdown_summary(report: dict) -> str:
    meta = report["metadata"]
    lines = [
        "# Review audit summary",
        "",
        f"- dataset digest: `{meta['dataset_digest']}`",
        f"- papers: {meta['n_papers']}, reviewers: {meta['n_reviewers']}, reviews: {meta['n_reviews']}",
        "",
    ]
    obs = key_observations(report)
    for name, sec in report["sections"].items():
        lines.append(f"## {name.replace('_', ' ')}")
        lines.append("")
        if sec["skipped"]:
            lines.append("skipped")
        for item in obs.get(name, []):
            lines.append(f"- {item}")
        for w in sec["warnings"]:
            lines.append(f"- warning: {w}")
        lines.append("")
    return "\n".join(lines)


def write_outputs(out_dir, report: dict, sections: dict, formats=("json", "csv", "md"),
                  json_name="report.json") -> list:
    """Write the report; returns the relative paths written, sorted."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        (out / json_name).write_text(dumps(report), encoding="utf-8")
        written.append(json_name)
    if "csv" in formats:
        for sec in sections.values():
            for fname, (header, rows) in sec.tables.items():
                write_csv(out / fname, header, rows)
                written.append(fname)
    if "md" in formats:
        (out / "summary.md").write_text(markdown_summary(report), encoding="utf-8")
        written.append("summary.md")
    return sorted(written)
