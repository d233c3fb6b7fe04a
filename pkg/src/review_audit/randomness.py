"""Messy-middle search over (top, bottom) trims and bootstrap decision variance."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stats
from .errors import MissingDataError, PreconditionError
from .model import Dataset

BOOTSTRAP_STREAM = 0xB0075
VARIANCE_BINS = 10  # over [0, 0.25]


@dataclass(frozen=True)
class MessyMiddleConfig:
    mu: int = 100
    alpha: float = 0.01
    granularity: float = 0.05

    def __post_init__(self):
        if self.mu < 1:
            raise PreconditionError("mu must be at least 1")
        if not 0 < self.alpha < 0.5:
            raise PreconditionError("alpha must lie in (0, 0.5)")
        if self.granularity <= 0 or self.granularity > 1:
            raise PreconditionError("granularity must lie in (0, 1]")
        steps = round(1 / self.granularity)
        if abs(steps * self.granularity - 1) > 1e-9:
            raise PreconditionError(f"granularity {self.granularity} does not divide 1")

    @property
    def steps(self) -> int:
        return round(1 / self.granularity)


@dataclass(frozen=True)
class MessyCell:
    t: float
    b: float
    n_agree: int
    m: int
    bounds_ok: bool  # both (beta - t) n >= mu and ((1 - beta) - b) n >= mu
    eligible: bool

    @property
    def r(self) -> Optional[float]:
        return self.n_agree / self.m if self.m else None

    @property
    def ci_width(self) -> Optional[float]:
        return stats.proportion_ci_width(self.r, self.m) if self.m else None


@dataclass(frozen=True)
class MessyMiddleResult:
    grid: tuple  # MessyCell, row-major over (t, b)
    size: float
    witness: Optional[tuple]
    beta: float
    n_papers: int
    config: MessyMiddleConfig
    warnings: tuple = ()

    def cell(self, t: float, b: float) -> MessyCell:
        steps = self.config.steps
        i, j = round(t * steps), round(b * steps)
        return self.grid[i * (steps + 1) + j]

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "witness": list(self.witness) if self.witness else None,
            "beta": self.beta,
            "n_papers": self.n_papers,
            "mu": self.config.mu,
            "alpha": self.config.alpha,
            "granularity": self.config.granularity,
            "rounding": "top and bottom paper counts rounded down",
            "warnings": list(self.warnings),
        }


def _resolve_beta(dataset: Dataset):
    warnings = []
    n = len(dataset.papers)
    if dataset.has_decisions:
        beta = dataset.decided_accept_fraction
        meta = dataset.accept_fraction
        if meta is not None and abs(meta - beta) > 1.0 / n:
            warnings.append(f"accept_fraction {meta} disagrees with decisions ({beta:.6g}); using decisions")
        return beta, warnings
    if dataset.accept_fraction is None:
        raise MissingDataError("messy_middle needs decisions or an accept_fraction (beta missing)")
    return dataset.accept_fraction, warnings


def paper_order(dataset: Dataset) -> list:
    """Reviewed papers by mean score (over features and reviewers) descending, ties by id."""
    keyed = []
    for pid, revs in dataset.reviews_by_paper.items():
        total = sum(sum(r.vector) for r in revs)
        keyed.append((-total / len(revs), pid))
    return [pid for _, pid in sorted(keyed)]


def agreement_tuples(dataset: Dataset, rank: dict, reviewer_ok=None):
    """All non-tied (reviewer pair, paper pair) events on review means.

    Returns arrays ``(lo, hi, agree)`` with ``lo < hi`` the paper ranks.
    """
    tables = {}
    for r in dataset.reviews:
        if r.paper_id in rank and (reviewer_ok is None or reviewer_ok(r.reviewer_id)):
            tables.setdefault(r.reviewer_id, {})[rank[r.paper_id]] = sum(r.vector)
    los, his, agrees = [], [], []
    for a, b in itertools.combinations(sorted(tables), 2):
        ta, tb = tables[a], tables[b]
        shared = np.array(sorted(set(ta) & set(tb)), dtype=np.int64)
        if len(shared) < 2:
            continue
        va = np.array([ta[p] for p in shared])
        vb = np.array([tb[p] for p in shared])
        i, j = np.triu_indices(len(shared), 1)
        sa = np.sign(va[i] - va[j])
        sb = np.sign(vb[i] - vb[j])
        keep = (sa != 0) & (sb != 0)
        los.append(shared[i][keep])  # shared is sorted, so shared[i] < shared[j]
        his.append(shared[j][keep])
        agrees.append(sa[keep] == sb[keep])
    if not los:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0, dtype=bool)
    return np.concatenate(los), np.concatenate(his), np.concatenate(agrees)


def messy_middle(dataset: Dataset, config: MessyMiddleConfig = MessyMiddleConfig(),
                 reviewer_ok=None) -> MessyMiddleResult:
    """Largest middle band (1 - t - b) of the score ranking where co-reviewers
    agree on the order of paper pairs at a rate below ``0.5 + alpha``.

    ``reviewer_ok`` optionally restricts which reviewers contribute tuples.
    """
    if len(dataset.papers) < 2:
        raise PreconditionError("messy_middle needs at least two papers")
    beta, warnings = _resolve_beta(dataset)
    order = paper_order(dataset)
    n = len(order)
    if n < 2:
        raise PreconditionError("messy_middle needs at least two reviewed papers")
    rank = {pid: i for i, pid in enumerate(order)}
    lo, hi, agree = agreement_tuples(dataset, rank, reviewer_ok)

    steps = config.steps
    cuts = np.array([(i * n) // steps for i in range(steps + 1)], dtype=np.int64)
    # a tuple is inside cell (i, j) iff cuts[i] <= lo and hi < n - cuts[j]
    imax = np.searchsorted(cuts, lo, side="right") - 1
    jmax = np.searchsorted(cuts, n - 1 - hi, side="right") - 1
    shape = (steps + 1, steps + 1)
    tot = np.zeros(shape, dtype=np.int64)
    agr = np.zeros(shape, dtype=np.int64)
    np.add.at(tot, (imax, jmax), 1)
    np.add.at(agr, (imax[agree], jmax[agree]), 1)
    tot = tot[::-1, ::-1].cumsum(0).cumsum(1)[::-1, ::-1]
    agr = agr[::-1, ::-1].cumsum(0).cumsum(1)[::-1, ::-1]

    cells = []
    best, witness = 0, None
    for i in range(steps + 1):
        for j in range(steps + 1):
            t, b = i / steps, j / steps
            m, a = int(tot[i, j]), int(agr[i, j])
            bounds = (beta - t) * n >= config.mu and ((1 - beta) - b) * n >= config.mu
            ok = bounds and m >= config.mu and a / m < 0.5 + config.alpha
            cells.append(MessyCell(t, b, a, m, bounds, ok))
            if ok and steps - i - j > best:
                best, witness = steps - i - j, (t, b)
    return MessyMiddleResult(tuple(cells), best / steps, witness, beta, n, config, tuple(warnings))


def compare_messy_middle(result_a: MessyMiddleResult, result_b: MessyMiddleResult,
                         mu: Optional[int] = None) -> dict:
    """Re-run the size maximization over cells with m >= mu in both grids."""
    if [(c.t, c.b) for c in result_a.grid] != [(c.t, c.b) for c in result_b.grid]:
        raise PreconditionError("messy-middle grids differ in granularity")
    out = {}
    for name, res in (("size_a", result_a), ("size_b", result_b)):
        mu_ = res.config.mu if mu is None else mu
        best, witness = 0.0, None
        for ca, cb in zip(result_a.grid, result_b.grid):
            c = ca if res is result_a else cb
            if not (ca.m >= mu_ and cb.m >= mu_ and c.bounds_ok):
                continue
            if c.r < 0.5 + res.config.alpha:
                size = round(1 - c.t - c.b, 12)
                if size > best:
                    best, witness = size, (c.t, c.b)
        out[name] = best
        out[name.replace("size", "witness")] = witness
    return out


GRID_HEADER = ("t", "b", "r", "m", "ci_width", "eligible")


def messy_grid_export(result: MessyMiddleResult) -> list:
    """Rows ``t,b,r,m,ci_width,eligible``; r and ci_width empty where m = 0."""
    return [(c.t, c.b, c.r, c.m, c.ci_width, c.eligible) for c in result.grid]


# --------------------------------------------------------------------------
# bootstrap
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapResult:
    paper_ids: tuple
    beta: np.ndarray
    iterations: int
    seed: int
    accept_frac: float
    n_accept: int
    histogram: dict = field(default_factory=dict)  # decision group -> counts per variance bin

    @property
    def variance(self) -> np.ndarray:
        return self.beta * (1 - self.beta)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "seed": self.seed,
            "accept_frac": self.accept_frac,
            "n_accept": self.n_accept,
            "papers": [
                {"paper_id": pid, "beta": float(b), "variance": float(b * (1 - b))}
                for pid, b in zip(self.paper_ids, self.beta)
            ],
            "histogram": self.histogram,
        }


def variance_bin_edges(i: int) -> tuple:
    w = 0.25 / VARIANCE_BINS
    return (i * w, (i + 1) * w)


def _bootstrap_chunk(seed, iterations, totals, counts, id_rank, n_accept):
    n, width = totals.shape
    cols = np.arange(width)
    accepted = np.zeros(n, dtype=np.int64)
    for it in iterations:
        rng = np.random.Generator(np.random.Philox(key=seed, counter=[it, 0, BOOTSTRAP_STREAM, 0]))
        u = rng.random((n, width))
        picks = np.minimum((u * counts[:, None]).astype(np.int64), counts[:, None] - 1)
        drawn = np.take_along_axis(totals, picks, axis=1)
        drawn[cols[None, :] >= counts[:, None]] = 0
        score = drawn.sum(axis=1) / counts  # exact ratios compare equal when equal
        order = np.lexsort((id_rank, -score))
        accepted[order[:n_accept]] += 1
    return accepted


def bootstrap_decision_variance(dataset: Dataset, iterations: int = 1000, accept_frac: float = 0.237,
                                seed: int = 0, threads: Optional[int] = None) -> BootstrapResult:
    """Resample each paper's reviewers with replacement, accept the top
    ``round(accept_frac * n)`` papers by mean score (ties by id), and record
    how often each paper is accepted.

    Iteration ``i`` draws from a Philox stream whose counter holds ``i``, so
    the result does not depend on how iterations are split across threads.
    """
    if iterations < 1:
        raise PreconditionError("iterations must be positive")
    if not 0 < accept_frac < 1:
        raise PreconditionError("accept_frac must lie in (0, 1)")
    by_paper = dataset.reviews_by_paper
    missing = [p.paper_id for p in dataset.papers if p.paper_id not in by_paper]
    if missing:
        raise PreconditionError(f"paper {missing[0]!r} has zero reviews")
    paper_ids = tuple(sorted(p.paper_id for p in dataset.papers))
    n = len(paper_ids)
    k = np.array([len(by_paper[p]) for p in paper_ids], dtype=np.int64)
    totals = np.zeros((n, int(k.max())), dtype=np.int64)
    for i, pid in enumerate(paper_ids):
        for j, r in enumerate(by_paper[pid]):
            totals[i, j] = sum(r.vector)
    n_accept = math.floor(accept_frac * n + 0.5)
    id_rank = np.arange(n)

    if threads is None:
        threads = int(os.environ.get("REVIEW_AUDIT_THREADS", "1") or 1)
    threads = max(1, min(threads, iterations))
    chunks = [range(c, iterations, threads) for c in range(threads)]
    if threads == 1:
        accepted = _bootstrap_chunk(seed, chunks[0], totals, k, id_rank, n_accept)
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda ch: _bootstrap_chunk(seed, ch, totals, k, id_rank, n_accept), chunks))
        accepted = sum(parts)
    beta = accepted / iterations

    papers = dataset.paper_index
    hist = {}
    var = beta * (1 - beta)
    for pid, v in zip(paper_ids, var):
        dec = papers[pid].decision
        group = dec.value if dec is not None else "undecided"
        counts = hist.setdefault(group, [0] * VARIANCE_BINS)
        counts[min(VARIANCE_BINS - 1, int(v / (0.25 / VARIANCE_BINS)))] += 1
    hist = dict(sorted(hist.items()))
    return BootstrapResult(paper_ids, beta, iterations, seed, accept_frac, n_accept, hist)


def variance_histogram_rows(result: BootstrapResult) -> list:
    rows = []
    for group, counts in result.histogram.items():
        for i, c in enumerate(counts):
            lo, hi = variance_bin_edges(i)
            rows.append((lo, hi, c, group))
    return rows
