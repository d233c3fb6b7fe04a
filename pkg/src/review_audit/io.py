"""Dataset serialization: canonical JSON document and per-table CSV files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

from .errors import ParseError, ValidationError
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
    validate_dataset,
)

TABLES = ("papers", "reviewers", "reviews", "bids", "rankings", "posts")

CSV_COLUMNS = {
    "papers": ["id", "primary_subject", "secondary_subjects", "decision"],
    "reviewers": ["id", "pool", "seniority", "primary_subject", "is_ac"],
    "reviews": (
        ["paper", "reviewer"]
        + [f"scores.{f}" for f in FEATURES]
        + ["confidence", "fatal_flaw"]
        + [f"pre_rebuttal_scores.{f}" for f in FEATURES]
    ),
    "bids": ["bidder", "role", "paper", "level"],
    "rankings": ["reviewer", "papers"],
    "posts": ["reviewer", "paper", "count"],
    "meta": ["accept_fraction", "subject_area_count"],
}


# --------------------------------------------------------------------------
# to plain python
# --------------------------------------------------------------------------

def _scores_dict(scores):
    return {f: int(scores[f]) for f in FEATURES}


def dataset_to_dict(dataset: Dataset) -> dict:
    """Canonical plain-dict form: rows sorted by their identifying keys."""
    papers = [
        {
            "id": p.paper_id,
            "primary_subject": p.primary_subject,
            "secondary_subjects": sorted(p.secondary_subjects),
            "decision": p.decision.value if p.decision is not None else None,
        }
        for p in sorted(dataset.papers, key=lambda p: p.paper_id)
    ]
    reviewers = [
        {
            "id": r.reviewer_id,
            "pool": r.pool.value,
            "seniority": r.seniority.value,
            "primary_subject": r.primary_subject,
            "is_ac": r.is_ac,
        }
        for r in sorted(dataset.reviewers, key=lambda r: r.reviewer_id)
    ]
    reviews = []
    for r in sorted(dataset.reviews, key=lambda r: (r.paper_id, r.reviewer_id)):
        row = {
            "paper": r.paper_id,
            "reviewer": r.reviewer_id,
            "scores": _scores_dict(r.scores),
            "confidence": r.confidence,
            "fatal_flaw": r.fatal_flaw,
        }
        if r.pre_rebuttal_scores is not None:
            row["pre_rebuttal_scores"] = _scores_dict(r.pre_rebuttal_scores)
        reviews.append(row)
    bids = [
        {"bidder": b.bidder_id, "role": b.role.value, "paper": b.paper_id, "level": b.level.value}
        for b in sorted(dataset.bids, key=lambda b: (b.bidder_id, b.paper_id))
    ]
    rankings = [
        {"reviewer": r.reviewer_id, "papers": list(r.ranking)}
        for r in sorted(dataset.rankings, key=lambda r: r.reviewer_id)
    ]
    posts = [
        {"reviewer": p.reviewer_id, "paper": p.paper_id, "count": p.post_count}
        for p in sorted(dataset.posts, key=lambda p: (p.reviewer_id, p.paper_id))
    ]
    return {
        "papers": papers,
        "reviewers": reviewers,
        "reviews": reviews,
        "bids": bids,
        "rankings": rankings,
        "posts": posts,
        "meta": {
            "accept_fraction": dataset.accept_fraction,
            "subject_area_count": dataset.subject_area_count,
        },
    }


def dumps_dataset(dataset: Dataset) -> str:
    return json.dumps(dataset_to_dict(dataset), sort_keys=True, indent=2) + "\n"


def dataset_digest(dataset: Dataset) -> str:
    return hashlib.sha256(dumps_dataset(dataset).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# from plain python
# --------------------------------------------------------------------------

_MISSING = object()


def _field(obj, key, locus, kind=None, default=_MISSING):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", locus)
    if key not in obj:
        if default is not _MISSING:
            return default
        raise ParseError(f"missing field '{key}'", f"{locus}.{key}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"expected {_kind_name(kind)}, got {type(value).__name__}", f"{locus}.{key}")
    if kind is int and isinstance(value, bool):
        raise ParseError("expected int, got bool", f"{locus}.{key}")
    return value


def _kind_name(kind):
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _enum(cls, value, locus):
    try:
        return cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ParseError(f"invalid value {value!r} (allowed: {allowed})", locus) from None


def _scores(obj, locus):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", locus)
    out = {}
    for f in FEATURES:
        out[f] = _field(obj, f, locus, int)
    return out


def dataset_from_dict(doc) -> Dataset:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")

    def rows(name):
        value = doc.get(name, [])
        if not isinstance(value, list):
            raise ParseError("expected an array", name)
        return value

    papers = []
    for i, row in enumerate(rows("papers")):
        loc = f"papers[{i}]"
        decision = _field(row, "decision", loc, (str, type(None)), default=None)
        papers.append(PaperRecord(
            paper_id=_field(row, "id", loc, str),
            primary_subject=_field(row, "primary_subject", loc, int),
            secondary_subjects=frozenset(_field(row, "secondary_subjects", loc, list, default=[])),
            decision=None if decision is None else _enum(Decision, decision, f"{loc}.decision"),
        ))
    reviewers = []
    for i, row in enumerate(rows("reviewers")):
        loc = f"reviewers[{i}]"
        reviewers.append(ReviewerRecord(
            reviewer_id=_field(row, "id", loc, str),
            pool=_enum(Pool, _field(row, "pool", loc, str), f"{loc}.pool"),
            seniority=_enum(Seniority, _field(row, "seniority", loc, str, default="unknown"), f"{loc}.seniority"),
            primary_subject=_field(row, "primary_subject", loc, int, default=0),
            is_ac=_field(row, "is_ac", loc, bool, default=False),
        ))
    reviews = []
    for i, row in enumerate(rows("reviews")):
        loc = f"reviews[{i}]"
        pre = _field(row, "pre_rebuttal_scores", loc, (dict, type(None)), default=None)
        reviews.append(ReviewRecord(
            paper_id=_field(row, "paper", loc, str),
            reviewer_id=_field(row, "reviewer", loc, str),
            scores=_scores(_field(row, "scores", loc, dict), f"{loc}.scores"),
            confidence=_field(row, "confidence", loc, int),
            fatal_flaw=_field(row, "fatal_flaw", loc, bool, default=False),
            pre_rebuttal_scores=None if pre is None else _scores(pre, f"{loc}.pre_rebuttal_scores"),
        ))
    bids = []
    for i, row in enumerate(rows("bids")):
        loc = f"bids[{i}]"
        bids.append(BidRecord(
            bidder_id=_field(row, "bidder", loc, str),
            role=_enum(Role, _field(row, "role", loc, str), f"{loc}.role"),
            paper_id=_field(row, "paper", loc, str),
            level=_enum(BidLevel, _field(row, "level", loc, str), f"{loc}.level"),
        ))
    rankings = []
    for i, row in enumerate(rows("rankings")):
        loc = f"rankings[{i}]"
        ranked = _field(row, "papers", loc, list)
        for j, pid in enumerate(ranked):
            if not isinstance(pid, str):
                raise ParseError("expected str", f"{loc}.papers[{j}]")
        rankings.append(OrdinalRankingRecord(_field(row, "reviewer", loc, str), tuple(ranked)))
    posts = []
    for i, row in enumerate(rows("posts")):
        loc = f"posts[{i}]"
        posts.append(DiscussionPostRecord(
            reviewer_id=_field(row, "reviewer", loc, str),
            paper_id=_field(row, "paper", loc, str),
            post_count=_field(row, "count", loc, int),
        ))
    meta = doc.get("meta", {})
    beta = _field(meta, "accept_fraction", "meta", (int, float, type(None)), default=None)
    return Dataset(
        papers=tuple(papers),
        reviewers=tuple(reviewers),
        reviews=tuple(reviews),
        bids=tuple(bids),
        rankings=tuple(rankings),
        posts=tuple(posts),
        accept_fraction=None if beta is None else float(beta),
        subject_area_count=_field(meta, "subject_area_count", "meta", int, default=0),
    )


def loads_dataset(text: str, validate: bool = True) -> Dataset:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    dataset = dataset_from_dict(doc)
    if validate:
        violations = validate_dataset(dataset)
        if violations:
            raise ValidationError(violations)
    return dataset


def load_dataset(path, validate: bool = True) -> Dataset:
    """Load a dataset from a JSON file or a directory of CSV tables."""
    path = Path(path)
    if path.is_dir():
        return load_dataset_csv(path, validate=validate)
    return loads_dataset(path.read_text(encoding="utf-8"), validate=validate)


def write_dataset(dataset: Dataset, path) -> None:
    Path(path).write_text(dumps_dataset(dataset), encoding="utf-8")


# --------------------------------------------------------------------------
# CSV tables
# --------------------------------------------------------------------------

def _join(values):
    return ";".join(str(v) for v in values)


def _split(cell):
    return [c for c in cell.split(";") if c != ""] if cell else []


def dataset_to_csv_tables(dataset: Dataset) -> dict:
    """Render each table as CSV text, keyed by table name."""
    doc = dataset_to_dict(dataset)
    rows = {
        "papers": [
            [p["id"], p["primary_subject"], _join(p["secondary_subjects"]), p["decision"] or ""]
            for p in doc["papers"]
        ],
        "reviewers": [
            [r["id"], r["pool"], r["seniority"], r["primary_subject"], int(r["is_ac"])]
            for r in doc["reviewers"]
        ],
        "reviews": [
            [r["paper"], r["reviewer"]]
            + [r["scores"][f] for f in FEATURES]
            + [r["confidence"], int(r["fatal_flaw"])]
            + ([r["pre_rebuttal_scores"][f] for f in FEATURES] if "pre_rebuttal_scores" in r else [""] * 4)
            for r in doc["reviews"]
        ],
        "bids": [[b["bidder"], b["role"], b["paper"], b["level"]] for b in doc["bids"]],
        "rankings": [[r["reviewer"], _join(r["papers"])] for r in doc["rankings"]],
        "posts": [[p["reviewer"], p["paper"], p["count"]] for p in doc["posts"]],
        "meta": [[
            "" if doc["meta"]["accept_fraction"] is None else repr(doc["meta"]["accept_fraction"]),
            doc["meta"]["subject_area_count"],
        ]],
    }
    out = {}
    for name, table in rows.items():
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS[name])
        writer.writerows(table)
        out[name] = buf.getvalue()
    return out


def write_dataset_csv(dataset: Dataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in dataset_to_csv_tables(dataset).items():
        (directory / f"{name}.csv").write_text(text, encoding="utf-8")


def _csv_int(row, key, locus):
    try:
        return int(row[key])
    except ValueError:
        raise ParseError(f"expected integer, got {row[key]!r}", f"{locus}.{key}") from None


def _read_table(directory, name, required=True):
    path = directory / f"{name}.csv"
    if not path.exists():
        if required:
            raise ParseError("missing table file", str(path))
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        columns = CSV_COLUMNS[name]
        for col in columns:
            if name == "reviews" and col.startswith("pre_rebuttal_scores."):
                continue
            if col not in header:
                raise ParseError(f"missing column '{col}'", f"{path.name}:1")
        out = []
        for row in reader:
            # header is line 1
            out.append((f"{path.name}:{reader.line_num}", row))
        return out


def load_dataset_csv(directory, validate: bool = True) -> Dataset:
    directory = Path(directory)
    doc = {name: [] for name in TABLES}
    for loc, row in _read_table(directory, "papers"):
        doc["papers"].append({
            "id": row["id"],
            "primary_subject": _csv_int(row, "primary_subject", loc),
            "secondary_subjects": [int(s) for s in _split(row["secondary_subjects"])],
            "decision": row["decision"] or None,
        })
    for loc, row in _read_table(directory, "reviewers"):
        doc["reviewers"].append({
            "id": row["id"],
            "pool": row["pool"],
            "seniority": row["seniority"] or "unknown",
            "primary_subject": _csv_int(row, "primary_subject", loc),
            "is_ac": row["is_ac"] in ("1", "true", "True"),
        })
    for loc, row in _read_table(directory, "reviews"):
        rec = {
            "paper": row["paper"],
            "reviewer": row["reviewer"],
            "scores": {f: _csv_int(row, f"scores.{f}", loc) for f in FEATURES},
            "confidence": _csv_int(row, "confidence", loc),
            "fatal_flaw": row["fatal_flaw"] in ("1", "true", "True"),
        }
        pre = [row.get(f"pre_rebuttal_scores.{f}") or "" for f in FEATURES]
        if any(pre):
            rec["pre_rebuttal_scores"] = {
                f: _csv_int(row, f"pre_rebuttal_scores.{f}", loc) for f in FEATURES
            }
        doc["reviews"].append(rec)
    for loc, row in _read_table(directory, "bids", required=False):
        doc["bids"].append({k: row[k] for k in CSV_COLUMNS["bids"]})
    for loc, row in _read_table(directory, "rankings", required=False):
        doc["rankings"].append({"reviewer": row["reviewer"], "papers": _split(row["papers"])})
    for loc, row in _read_table(directory, "posts", required=False):
        doc["posts"].append({
            "reviewer": row["reviewer"], "paper": row["paper"], "count": _csv_int(row, "count", loc),
        })
    meta = _read_table(directory, "meta", required=False)
    if meta:
        loc, row = meta[0]
        try:
            beta = float(row["accept_fraction"]) if row["accept_fraction"] else None
        except ValueError:
            raise ParseError("expected number", f"{loc}.accept_fraction") from None
        doc["meta"] = {
            "accept_fraction": beta,
            "subject_area_count": _csv_int(row, "subject_area_count", loc),
        }
    dataset = dataset_from_dict(doc)
    if validate:
        violations = validate_dataset(dataset)
        if violations:
            raise ValidationError(violations)
    return dataset


def write_csv(path, header, rows) -> None:
    """Write a plot or export table; floats use repr for exact round-trip."""
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
