"""Co-review graphs, cut conductance and network community profiles.

Conductance here is the cut size divided by ``max(|S|, |V \\ S|)``: a node
count, not an edge volume, so values can exceed 1.
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import AuditError, PreconditionError
from .model import Dataset

EIGEN_TOL = 1e-8
EIGEN_MAX_ITER = 10_000
BRUTE_FORCE_MAX_NODES = 22


class GraphKind(str, enum.Enum):
    REVIEWER = "reviewer_graph"
    PAPER = "paper_graph"


class ConvergenceError(AuditError, ArithmeticError):
    pass


@dataclass(frozen=True)
class CoReviewGraph:
    node_ids: tuple
    neighbors: tuple  # per node, sorted tuple of neighbour indices
    kind: GraphKind = GraphKind.REVIEWER

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @cached_property
    def index(self) -> dict:
        return {node: i for i, node in enumerate(self.node_ids)}

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=float)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, nb in enumerate(self.neighbors):
            a[i, list(nb)] = 1.0
        return a

    def edges(self) -> list:
        """Edges as sorted ``(u, v)`` id pairs with ``u < v``."""
        out = []
        for i, nb in enumerate(self.neighbors):
            for j in nb:
                u, v = self.node_ids[i], self.node_ids[j]
                if u < v:
                    out.append((u, v))
        return sorted(out)

    def components(self) -> list:
        """Connected components as sorted index lists, ordered by smallest member."""
        seen = [False] * self.n
        comps = []
        for start in range(self.n):
            if seen[start]:
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self.neighbors[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    @classmethod
    def from_edges(cls, node_ids: Iterable, edges: Iterable, kind=GraphKind.REVIEWER):
        ids = tuple(sorted(set(node_ids)))
        index = {v: i for i, v in enumerate(ids)}
        nbrs = defaultdict(set)
        for u, v in edges:
            if u == v:
                continue
            nbrs[index[u]].add(index[v])
            nbrs[index[v]].add(index[u])
        return cls(ids, tuple(tuple(sorted(nbrs[i])) for i in range(len(ids))), kind)


@dataclass(frozen=True)
class NcpPoint:
    k: int
    phi: float
    witness_set: frozenset


@dataclass(frozen=True)
class NcpCurve:
    node_ids: tuple
    points: tuple

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def ks(self) -> list:
        return [p.k for p in self.points]

    @property
    def phis(self) -> list:
        return [p.phi for p in self.points]

    @property
    def normalized_sizes(self) -> list:
        return [p.k / self.n_nodes for p in self.points]

    def point(self, k: int) -> NcpPoint:
        return self.points[k - 1]


def build_co_review_graph(dataset: Dataset, kind=GraphKind.REVIEWER) -> CoReviewGraph:
    """Reviewer graph (shared papers) or paper graph (shared reviewers).

    Reviewer graphs hold every non-AC reviewer plus anyone who wrote a review;
    paper graphs hold every paper. Nodes without co-reviews stay isolated.
    """
    kind = GraphKind(kind)
    if kind is GraphKind.REVIEWER:
        nodes = {r.reviewer_id for r in dataset.reviewers if not r.is_ac}
        nodes |= {r.reviewer_id for r in dataset.reviews}
        groups = dataset.reviews_by_paper
        member = lambda rev: rev.reviewer_id  # noqa: E731
    else:
        nodes = {p.paper_id for p in dataset.papers}
        groups = dataset.reviews_by_reviewer
        member = lambda rev: rev.paper_id  # noqa: E731
    edges = []
    for revs in groups.values():
        ids = sorted(member(r) for r in revs)
        edges.extend(itertools.combinations(ids, 2))
    return CoReviewGraph.from_edges(nodes, edges, kind)


def _indices(graph, node_set):
    idx = []
    for v in node_set:
        if v not in graph.index:
            raise PreconditionError(f"node {v!r} is not in the graph")
        idx.append(graph.index[v])
    return set(idx)


def cut_size(graph: CoReviewGraph, members: set) -> int:
    return sum(1 for i in members for j in graph.neighbors[i] if j not in members)


def conductance(graph: CoReviewGraph, node_set: Iterable) -> float:
    """Crossing edges of S divided by max(|S|, |V \\ S|)."""
    members = _indices(graph, node_set)
    if not members or len(members) >= graph.n:
        raise PreconditionError("conductance needs a non-empty proper subset of the nodes")
    return cut_size(graph, members) / max(len(members), graph.n - len(members))


# --------------------------------------------------------------------------
# spectral sweep
# --------------------------------------------------------------------------

def second_eigenvector(adjacency: np.ndarray, tol=EIGEN_TOL, max_iter=EIGEN_MAX_ITER) -> np.ndarray:
    """Second eigenvector of the lazy random walk ``(I + D^-1 A) / 2``.

    Works on the symmetric similar matrix ``(I + D^-1/2 A D^-1/2) / 2`` by
    power iteration, deflating the known top eigenvector ``D^1/2 1``, and
    returns the right eigenvector of the walk (``D^-1`` times the left one),
    whose ordering drives the sweep. The graph must be connected.
    """
    n = adjacency.shape[0]
    deg = adjacency.sum(axis=1)
    if np.any(deg == 0):
        raise PreconditionError("second_eigenvector needs a connected graph without isolated nodes")
    inv_sqrt = 1.0 / np.sqrt(deg)
    lazy = 0.5 * (np.eye(n) + inv_sqrt[:, None] * adjacency * inv_sqrt[None, :])
    top = np.sqrt(deg)
    top /= np.linalg.norm(top)
    x = np.random.default_rng(0x5EED).standard_normal(n)
    x -= top * (top @ x)
    x /= np.linalg.norm(x)
    for _ in range(max_iter):
        y = lazy @ x
        y -= top * (top @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            # start vector lay in the null space; any deflated direction will do
            y = np.arange(n, dtype=float)
            y -= top * (top @ y)
            norm = np.linalg.norm(y)
        y /= norm
        if np.max(np.abs(y - x)) < tol:
            return y * inv_sqrt
        x = y
    raise ConvergenceError(f"power iteration did not converge within {max_iter} iterations")


def _component_sweep(graph, comp):
    """Best internal cut per size j within one connected component.

    Returns ``{j: (cut, member_indices)}`` for j in 1..len(comp)-1, taking
    the better of the sweep prefix of size j and the suffix of size j.
    """
    size = len(comp)
    if size < 2:
        return {}
    local = {v: i for i, v in enumerate(comp)}
    a = np.zeros((size, size))
    for v in comp:
        for w in graph.neighbors[v]:
            a[local[v], local[w]] = 1.0
    vec = second_eigenvector(a)
    order = [comp[i] for i in sorted(range(size), key=lambda i: (vec[i], i))]
    prefix_cut = [0] * (size + 1)
    inside = set()
    cut = 0
    for pos, v in enumerate(order, start=1):
        internal = sum(1 for w in graph.neighbors[v] if w in inside)
        cut += len(graph.neighbors[v]) - 2 * internal
        inside.add(v)
        prefix_cut[pos] = cut
    best = {}
    for j in range(1, size):
        pre, suf = prefix_cut[j], prefix_cut[size - j]
        if pre <= suf:
            best[j] = (pre, order[:j])
        else:
            best[j] = (suf, order[size - j:])
    return best


def _subset_sums(sizes, total):
    """0/1 knapsack reachability table over component sizes."""
    table = np.zeros((len(sizes) + 1, total + 1), dtype=bool)
    table[0, 0] = True
    for i, s in enumerate(sizes, start=1):
        table[i] = table[i - 1]
        if s <= total:
            table[i, s:] |= table[i - 1, : total + 1 - s]
    return table


def _reconstruct(table, sizes, target):
    picked = []
    s = target
    for i in range(len(sizes), 0, -1):
        if not table[i - 1, s]:
            picked.append(i - 1)
            s -= sizes[i - 1]
    return picked


def ncp_sweep(graph: CoReviewGraph) -> NcpCurve:
    """Approximate network community profile from second-eigenvector sweeps.

    Every point is an actual node set of size k, so the curve upper-bounds
    the exact minimum conductance at each k. Disconnected graphs are swept
    per component; unions of whole components give zero-cut candidates and
    pad partial-component cuts up to size k.
    """
    n = graph.n
    if n < 3:
        raise PreconditionError("ncp_sweep needs at least 3 nodes")
    comps = graph.components()
    sizes = [len(c) for c in comps]
    best_cut = [None] * n  # best_cut[k] = (cut, member indices)

    def offer(k, cut, members):
        cur = best_cut[k]
        if cur is None or cut < cur[0]:
            best_cut[k] = (cut, members)

    if len(comps) > 1:
        table = _subset_sums(sizes, n)
        for k in range(1, n):
            if table[-1, k]:
                members = [v for ci in _reconstruct(table, sizes, k) for v in comps[ci]]
                offer(k, 0, members)
    for ci, comp in enumerate(comps):
        sweep = _component_sweep(graph, comp)
        if not sweep:
            continue
        if len(comps) == 1:
            for j, (cut, members) in sweep.items():
                offer(j, cut, members)
            continue
        others = [s for i, s in enumerate(sizes) if i != ci]
        other_ids = [i for i in range(len(comps)) if i != ci]
        table = _subset_sums(others, n)
        reach = np.flatnonzero(table[-1])
        for j, (cut, members) in sweep.items():
            for pad in reach:
                k = j + int(pad)
                if k >= n:
                    break
                cur = best_cut[k]
                if cur is not None and cur[0] <= cut:
                    continue
                extra = [v for oi in _reconstruct(table, others, int(pad)) for v in comps[other_ids[oi]]]
                offer(k, cut, list(members) + extra)
    points = []
    for k in range(1, n):
        cut, members = best_cut[k]
        witness = frozenset(graph.node_ids[i] for i in members)
        points.append(NcpPoint(k, cut / max(k, n - k), witness))
    return NcpCurve(graph.node_ids, tuple(points))


def min_conductance_bruteforce(graph: CoReviewGraph, k: int):
    """Exact minimum conductance over all size-k node sets.

    Returns ``(phi, witness)`` where the witness is the lexicographically
    least minimizer in node order.
    """
    n = graph.n
    if n > BRUTE_FORCE_MAX_NODES:
        raise PreconditionError(f"graph too large for exhaustive search ({n} > {BRUTE_FORCE_MAX_NODES} nodes)")
    if not 1 <= k <= n - 1:
        raise PreconditionError("k must lie in 1..|V|-1")
    masks = [sum(1 << j for j in nb) for nb in graph.neighbors]
    best, best_set = None, None
    for combo in itertools.combinations(range(n), k):
        smask = 0
        for i in combo:
            smask |= 1 << i
        outside = ~smask
        cut = sum(bin(masks[i] & outside).count("1") for i in combo)
        if best is None or cut < best:
            best, best_set = cut, combo
    phi = best / max(k, n - k)
    return phi, frozenset(graph.node_ids[i] for i in best_set)


def bruteforce_ncp(graph: CoReviewGraph) -> list:
    return [min_conductance_bruteforce(graph, k) for k in range(1, graph.n)]


# --------------------------------------------------------------------------
# fragmentation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FragmentCandidate:
    k: int
    normalized_size: float
    phi: float
    witness_set: frozenset
    community: frozenset  # the smaller side of the cut
    depth: float  # local smoothed value over phi, as a ratio
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "normalized_size": self.normalized_size,
            "phi": self.phi,
            "depth": None if np.isinf(self.depth) else self.depth,
            "community_size": len(self.community),
            "flagged": self.flagged,
        }


def _median_filter(values, window):
    half = window // 2
    n = len(values)
    return np.array([np.median(values[max(0, i - half): min(n, i + half + 1)]) for i in range(n)])


def detect_fragmentation(curve: NcpCurve, size_threshold=0.9, depth_threshold=2.0,
                         window=5, floor=1e-9) -> list:
    """Local minima of the profile, flagging the ones that look like fragments.

    A point is a local minimum when it is the lowest raw value in its full
    ``window`` and sits strictly below the median-smoothed log curve there.
    It is flagged when its normalized size is at most ``1 - size_threshold``
    or at least ``size_threshold`` and the smoothed value exceeds phi by at
    least the factor ``depth_threshold``. Endpoints whose window would be
    clipped are never minima.
    """
    if not curve.points:
        raise PreconditionError("empty curve")
    phis = np.array(curve.phis, dtype=float)
    logs = np.log(np.maximum(phis, floor))
    smooth = _median_filter(logs, window)
    half = window // 2
    universe = frozenset(curve.node_ids)
    out = []
    for i in range(half, len(phis) - half):
        lo, hi = i - half, i + half + 1
        if phis[i] > phis[lo:hi].min() or not logs[i] < smooth[i]:
            continue
        # keep only the first point of a flat-bottomed basin
        if i > lo and phis[i - 1] == phis[i]:
            continue
        p = curve.points[i]
        norm = p.k / curve.n_nodes
        depth = float(np.exp(smooth[i] - logs[i]))
        edge = norm >= size_threshold or norm <= 1.0 - size_threshold
        if 2 * p.k > curve.n_nodes:
            community = universe - p.witness_set
        else:
            community = p.witness_set
        out.append(FragmentCandidate(
            k=p.k,
            normalized_size=norm,
            phi=p.phi,
            witness_set=p.witness_set,
            community=community,
            depth=depth,
            flagged=bool(edge and depth >= depth_threshold),
        ))
    return out


def cluster_subject_histogram(dataset: Dataset, node_set: Iterable) -> dict:
    """Primary-subject counts of a reviewer set, with each subject's share captured."""
    reviewers = dataset.reviewer_index
    members = list(node_set)
    for rid in members:
        if rid not in reviewers:
            raise PreconditionError(f"{rid!r} is not a reviewer id")
    counts = Counter(reviewers[rid].primary_subject for rid in members)
    totals = Counter(r.primary_subject for r in dataset.reviewers)
    return {
        "counts": dict(sorted(counts.items())),
        "fraction_of_subject": {s: counts[s] / totals[s] for s in sorted(counts)},
    }


def edge_list_lines(graph: CoReviewGraph) -> list:
    return [f"{u},{v}" for u, v in graph.edges()]


def membership_rows(graph: CoReviewGraph, flagged_nodes) -> list:
    flagged_nodes = set(flagged_nodes)
    return [(node, int(node in flagged_nodes)) for node in graph.node_ids]
