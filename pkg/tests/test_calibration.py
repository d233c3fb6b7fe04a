import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_dataset
from review_audit import calibration as cal
from review_audit.errors import MissingDataError, PreconditionError
from review_audit.model import FEATURES, Decision


def _impact_sample(counts):
    """One review per paper; impact takes each score ``counts[s-1]`` times."""
    scores, i = {}, 0
    for s, c in enumerate(counts, start=1):
        for _ in range(c):
            scores[(f"P{i:04d}", "R1")] = (3, 3, s, 3)
            i += 1
    return make_dataset(scores, rankings=None)


def test_bin_of_three_and_four():
    ds = make_dataset({("P1", "R1"): (3, 1, 1, 1), ("P1", "R2"): (4, 1, 1, 1)},
                      decisions={"P1": Decision.POSTER})
    dist = cal.score_distributions(ds)
    hist = dist["quality"]["poster"]
    i = hist.index(1)
    assert cal.bin_edges(i) == (3.5, 3.75)
    assert sum(hist) == 1


def test_all_ones_spike():
    ds = make_dataset({(f"P{i}", r): 1 for i in range(4) for r in ("R1", "R2")})
    dist = cal.score_distributions(ds)
    for f in FEATURES:
        assert dist[f]["undecided"][0] == 4
        assert sum(dist[f]["undecided"]) == 4


def test_mixed_fixture_means():
    ds = make_dataset(
        {("P1", "R1"): (5, 1, 2, 3), ("P1", "R2"): (4, 2, 2, 3), ("P2", "R1"): (1, 1, 1, 1),
         ("P3", "R1"): (2, 5, 3, 4), ("P3", "R2"): (3, 5, 4, 4)},
        decisions={"P1": Decision.ORAL, "P2": Decision.REJECTED, "P3": Decision.POSTER},
    )
    means = cal.paper_feature_means(ds)
    assert means["P1"] == {"quality": 4.5, "novelty": 1.5, "impact": 2.0, "clarity": 3.0}
    assert means["P3"]["impact"] == 3.5
    dist = cal.score_distributions(ds)
    assert dist["quality"]["oral"][cal.bin_index(4.5)] == 1
    assert dist["novelty"]["poster"][-1] == 1  # 5.0 lands in the closed last bin
    rows = cal.score_distribution_rows(dist, "quality")
    assert len(rows) == 3 * cal.N_BINS
    assert rows[0] == (1.0, 1.25, 0, "oral")


def test_impact_row():
    table = cal.rubric_mismatch(_impact_sample([66, 364, 459, 107, 4]))
    impact = table["impact"]
    assert impact.at_least[3] == pytest.approx(0.570)
    assert impact.excess[3] == pytest.approx(0.27)
    assert sum(impact.fractions.values()) == pytest.approx(1.0, abs=1e-9)


def test_all_twos():
    ds = make_dataset({(f"P{i}", "R1"): 2 for i in range(5)})
    for row in cal.rubric_mismatch(ds).values():
        assert row.at_least[3] == 0
        assert row.excess[3] == pytest.approx(-0.30)


def test_exactly_at_targets():
    # 1 of 1000 at 5, 29 at 4, 270 at 3 gives cumulative 0.001, 0.03, 0.30
    impact = cal.rubric_mismatch(_impact_sample([350, 350, 270, 29, 1]))["impact"]
    for s in (3, 4, 5):
        assert impact.excess[s] == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=5, max_size=5).filter(lambda c: sum(c) > 0))
def test_mismatch_rows_sum_to_one(counts):
    impact = cal.rubric_mismatch(_impact_sample(counts))["impact"]
    assert sum(impact.fractions.values()) == pytest.approx(1.0, abs=1e-9)
    cum = [impact.at_least[s] for s in range(1, 6)]
    assert all(a >= b - 1e-12 for a, b in zip(cum, cum[1:]))


def test_targets_must_decrease():
    with pytest.raises(PreconditionError):
        cal.RubricTargets(at_least={5: 0.1, 4: 0.05, 3: 0.3})


def test_fatal_flaw_rate():
    scores = {(f"P{i}", "R1"): 3 for i in range(5)}
    assert cal.fatal_flaw_rate(make_dataset(scores)) == 0
    assert cal.fatal_flaw_rate(make_dataset(scores, fatal={k: True for k in scores})) == 1
    flagged = make_dataset(scores, fatal={("P1", "R1"): True, ("P3", "R1"): True})
    assert cal.fatal_flaw_rate(flagged) == 0.4


def test_fatal_flaw_counts_papers_once():
    scores = {("P1", "R1"): 3, ("P1", "R2"): 3, ("P2", "R1"): 3}
    ds = make_dataset(scores, fatal={("P1", "R1"): True, ("P1", "R2"): True})
    assert cal.fatal_flaw_rate(ds) == 0.5


def test_percentiles():
    ds = make_dataset({(f"P{i}", "R1"): s for i, s in enumerate((1, 2, 4, 5))})
    got = [cal.percentile_feedback(ds, f"P{i}", "novelty") for i in range(4)]
    assert got == [12.5, 37.5, 62.5, 87.5]
    assert got[-1] == 100 * (4 - 0.5) / 4
    tied = make_dataset({(f"P{i}", "R1"): 3 for i in range(6)})
    assert {cal.percentile_feedback(tied, f"P{i}", "impact") for i in range(6)} == {50.0}
    with pytest.raises(PreconditionError):
        cal.percentile_feedback(ds, "nope", "impact")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=2, max_size=12))
def test_percentile_monotone_invariance(values):
    ds = make_dataset({(f"P{i:02d}", "R1"): v for i, v in enumerate(values)})
    # a strictly monotone transform of the scale keeps the same ranks
    flipped = make_dataset({(f"P{i:02d}", "R1"): 6 - v for i, v in enumerate(values)})
    for i in range(len(values)):
        a = cal.percentile_feedback(ds, f"P{i:02d}", "quality")
        b = cal.percentile_feedback(flipped, f"P{i:02d}", "quality")
        assert a == pytest.approx(100 - b)


def _subject_dataset(submitted, accepted):
    scores, decisions, subjects = {}, {}, {}
    for area, (n_sub, n_acc) in enumerate(zip(submitted, accepted), start=1):
        for j in range(n_sub):
            pid = f"A{area}P{j:03d}"
            scores[(pid, "R1")] = 3
            subjects[pid] = area
            decisions[pid] = Decision.POSTER if j < n_acc else Decision.REJECTED
    return make_dataset(scores, decisions=decisions, subjects=subjects, rankings=None)


def test_homogeneity_proportional():
    res = cal.subject_area_homogeneity(_subject_dataset([40, 20, 60], [10, 5, 15]))
    assert res["test"].statistic == pytest.approx(0.0)
    assert res["submitted"] == {1: 40, 2: 20, 3: 60}
    assert res["accepted"] == {1: 10, 2: 5, 3: 15}


def test_homogeneity_single_area_acceptance():
    res = cal.subject_area_homogeneity(_subject_dataset([50, 50, 50], [30, 0, 0]))
    assert res["test"].p_two_sided < 1e-6


def test_homogeneity_lottery():
    import numpy as np
    small = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sub = [60, 80, 40, 70]
        acc = [int(rng.binomial(n, 0.25)) for n in sub]
        if cal.subject_area_homogeneity(_subject_dataset(sub, acc))["test"].p_two_sided < 0.01:
            small += 1
    assert small <= 2


def test_homogeneity_needs_decisions():
    with pytest.raises(MissingDataError):
        cal.subject_area_homogeneity(make_dataset({("P1", "R1"): 3}))
