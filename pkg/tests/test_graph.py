import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_dataset
from oracles import brute_min_conductance
from review_audit import graph
from review_audit.errors import PreconditionError
from review_audit.graph import CoReviewGraph, GraphKind
from review_audit.model import Pool, ReviewerRecord, Seniority
from review_audit.synth import SynthConfig, generate_synthetic


def complete(n, offset=0):
    return list(itertools.combinations(range(offset, offset + n), 2))


def g_of(n, edges):
    return CoReviewGraph.from_edges(range(n), edges)


K5K5 = g_of(10, complete(5) + complete(5, 5) + [(4, 5)])


def test_two_reviewers_one_paper():
    ds = make_dataset({("P1", "R1"): 3, ("P1", "R2"): 4})
    g = graph.build_co_review_graph(ds, GraphKind.REVIEWER)
    assert g.edges() == [("R1", "R2")]


def test_paper_graph_triangle():
    ds = make_dataset({("P1", "R1"): 3, ("P2", "R1"): 4, ("P3", "R1"): 2})
    g = graph.build_co_review_graph(ds, "paper_graph")
    assert g.edges() == [("P1", "P2"), ("P1", "P3"), ("P2", "P3")]


def test_isolated_reviewer_kept():
    ds = make_dataset({("P1", "R1"): 3, ("P1", "R2"): 4, ("P2", "R3"): 2})
    g = graph.build_co_review_graph(ds)
    assert g.node_ids == ("R1", "R2", "R3")
    assert g.degrees.tolist() == [1, 1, 0]


def test_edge_witnesses_transpose():
    ds = generate_synthetic(SynthConfig(n_papers=30, n_reviewers=12, seed=2))
    rg = graph.build_co_review_graph(ds, GraphKind.REVIEWER)
    pg = graph.build_co_review_graph(ds, GraphKind.PAPER)
    # every co-review triple (paper, r1, r2) gives an r1-r2 edge and, with a
    # second paper, a paper edge; check each edge has a witness
    by_paper = ds.reviews_by_paper
    for u, v in rg.edges():
        assert any({u, v} <= {r.reviewer_id for r in revs} for revs in by_paper.values())
    by_rev = ds.reviews_by_reviewer
    for u, v in pg.edges():
        assert any({u, v} <= {r.paper_id for r in revs} for revs in by_rev.values())


def test_conductance_examples():
    k4 = g_of(4, complete(4))
    assert graph.conductance(k4, {0}) == 1.0
    two = g_of(6, complete(3) + complete(3, 3))
    assert graph.conductance(two, {0, 1, 2}) == 0.0
    path = g_of(4, [(0, 1), (1, 2), (2, 3)])
    assert graph.conductance(path, {0, 1}) == 0.5


def test_conductance_errors():
    k4 = g_of(4, complete(4))
    with pytest.raises(PreconditionError):
        graph.conductance(k4, set())
    with pytest.raises(PreconditionError):
        graph.conductance(k4, {0, 1, 2, 3})
    with pytest.raises(PreconditionError):
        graph.conductance(k4, {7})


def test_bruteforce_examples():
    k4 = g_of(4, complete(4))
    assert graph.min_conductance_bruteforce(k4, 1) == (1.0, frozenset({0}))
    phi, witness = graph.min_conductance_bruteforce(K5K5, 5)
    assert phi == 0.2 and witness == frozenset(range(5))
    star = g_of(6, [(0, i) for i in range(1, 6)])
    assert graph.min_conductance_bruteforce(star, 1) == (0.2, frozenset({1}))


def test_bruteforce_guard():
    big = g_of(23, [(i, i + 1) for i in range(22)])
    with pytest.raises(PreconditionError, match="too large"):
        graph.min_conductance_bruteforce(big, 3)


def test_k5k5_sweep():
    curve = graph.ncp_sweep(K5K5)
    assert curve.point(5).phi == pytest.approx(0.2)
    assert min(curve.phis) == pytest.approx(0.2)
    assert curve.point(5).witness_set in (frozenset(range(5)), frozenset(range(5, 10)))


def test_k6_profile():
    # phi(k) = k (6 - k) / max(k, 6 - k): 1, 2, 3, 2, 1, so minimum at k = 1 and 5
    k6 = g_of(6, complete(6))
    curve = graph.ncp_sweep(k6)
    exact = [phi for phi, _ in graph.bruteforce_ncp(k6)]
    assert exact == [1.0, 2.0, 3.0, 2.0, 1.0]
    assert curve.phis == pytest.approx(exact)


def test_disconnected_profile():
    g = g_of(10, [(i, i + 1) for i in range(3)] + [(i, i + 1) for i in range(4, 9)])
    curve = graph.ncp_sweep(g)
    assert curve.point(4).phi == 0.0 or curve.point(6).phi == 0.0
    assert curve.point(4).witness_set == frozenset(range(4))


def test_sweep_too_small():
    with pytest.raises(PreconditionError):
        graph.ncp_sweep(g_of(2, [(0, 1)]))


def test_witness_sets_are_exact():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(3, 15))
        edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.35]
        g = g_of(n, edges)
        for p in graph.ncp_sweep(g).points:
            assert len(p.witness_set) == p.k
            assert graph.conductance(g, p.witness_set) == pytest.approx(p.phi)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 10), st.floats(0.1, 0.9), st.integers(0, 2 ** 32 - 1))
def test_sweep_upper_bounds_bruteforce(n, density, seed):
    rng = np.random.default_rng(seed)
    edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < density]
    g = g_of(n, edges)
    curve = graph.ncp_sweep(g)
    for p in curve.points:
        assert p.phi >= brute_min_conductance(n, edges, p.k) - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2 ** 32 - 1))
def test_conductance_symmetry_and_bounds(n, seed):
    rng = np.random.default_rng(seed)
    edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.5]
    g = g_of(n, edges)
    members = {i for i in range(n) if rng.random() < 0.5} or {0}
    if len(members) == n:
        members.discard(0)
    rest = set(range(n)) - members
    phi = graph.conductance(g, members)
    assert phi == graph.conductance(g, rest)
    assert 0 <= phi <= min(len(members), len(rest))


def test_k20_not_flagged():
    curve = graph.ncp_sweep(g_of(20, complete(20)))
    assert not any(c.flagged for c in graph.detect_fragmentation(curve))


def test_monotone_to_center_not_flagged():
    pts = tuple(graph.NcpPoint(k, min(k, 12 - k) * 1.0, frozenset(range(k))) for k in range(1, 12))
    curve = graph.NcpCurve(tuple(range(12)), pts)
    assert graph.detect_fragmentation(curve) == []


def test_planted_island_flagged():
    cfg = SynthConfig(n_papers=200, n_reviewers=100, seed=1, planted_fragment=(7, 10))
    ds = generate_synthetic(cfg)
    g = graph.build_co_review_graph(ds)
    island = {r.reviewer_id for r in ds.reviewers[-10:]}
    flagged = [c for c in graph.detect_fragmentation(graph.ncp_sweep(g)) if c.flagged]
    assert any(c.community == island for c in flagged)


def test_subject_histogram():
    reviewers = [ReviewerRecord(f"R{i:02d}", Pool.INVITED, Seniority.SENIOR, 7 if i < 40 else 2) for i in range(50)]
    ds = make_dataset({}, pools={})
    from dataclasses import replace
    ds = replace(ds, reviewers=tuple(reviewers))
    h = graph.cluster_subject_histogram(ds, [f"R{i:02d}" for i in range(30)])
    assert h["counts"] == {7: 30}
    assert h["fraction_of_subject"][7] == 0.75
    assert graph.cluster_subject_histogram(ds, [])["counts"] == {}
    with pytest.raises(PreconditionError):
        graph.cluster_subject_histogram(ds, ["nobody"])


def test_exports():
    g = g_of(3, [(0, 1), (1, 2)])
    assert graph.edge_list_lines(g) == ["0,1", "1,2"]
    assert graph.membership_rows(g, {1}) == [(0, 0), (1, 1), (2, 0)]
