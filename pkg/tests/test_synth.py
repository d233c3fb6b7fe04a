import pytest

from helpers import make_dataset
from review_audit import agreement as ag
from review_audit import graph, io
from review_audit.errors import InfeasibleError, MissingDataError, PreconditionError
from review_audit.model import FEATURES, Decision, validate_dataset
from review_audit.synth import SynthConfig, generate_synthetic, top2k_subset


def test_deterministic_bytes():
    cfg = SynthConfig(n_papers=80, n_reviewers=40, seed=11, n_acs=4, planted_fragment=(2, 5))
    assert io.dumps_dataset(generate_synthetic(cfg)) == io.dumps_dataset(generate_synthetic(cfg))


def test_seed_changes_output():
    a = generate_synthetic(SynthConfig(n_papers=50, n_reviewers=20, seed=1))
    b = generate_synthetic(SynthConfig(n_papers=50, n_reviewers=20, seed=2))
    assert io.dataset_digest(a) != io.dataset_digest(b)


@pytest.mark.parametrize("cfg", [
    SynthConfig(),
    SynthConfig(n_papers=30, n_reviewers=12, reviews_per_paper=4, seed=5, planted_messy_window=(0.2, 0.3)),
    SynthConfig(n_papers=100, n_reviewers=50, seed=9, planted_fragment=(3, 10), n_acs=5, reviewer_bias_sd=0.4),
    SynthConfig(n_papers=40, n_reviewers=10, seed=2, with_rankings=False, calibration_shift=1.5),
])
def test_validates_cleanly(cfg):
    ds = generate_synthetic(cfg)
    assert validate_dataset(ds) == []
    counts = {}
    for r in ds.reviews:
        counts[r.paper_id] = counts.get(r.paper_id, 0) + 1
    assert set(counts.values()) == {cfg.reviews_per_paper}


def test_noise_free_monotone_means_full_agreement():
    ds = generate_synthetic(SynthConfig(n_papers=60, n_reviewers=15, reviews_per_paper=4, seed=4, reviewer_noise_sd=0))
    for f in FEATURES:
        c = ag.pairwise_agreement(ds, "cardinal_feature", measure=f)
        assert c.n_disagree == 0 and c.n_agree > 0


def test_messy_window_is_uniform_and_rest_monotone():
    cfg = SynthConfig(n_papers=400, n_reviewers=40, reviews_per_paper=3, seed=8, reviewer_noise_sd=0,
                      planted_messy_window=(0.0, 0.5))
    ds = generate_synthetic(cfg)
    means = {pid: ds.paper_mean_score(pid) for pid in ds.paper_index}
    spread_by_paper = {}
    for r in ds.reviews:
        spread_by_paper.setdefault(r.paper_id, set()).add(r.vector)
    consistent = [pid for pid, v in spread_by_paper.items() if len(v) == 1]
    # outside the window every reviewer of a paper gives the same vector
    assert len(consistent) >= 195
    assert sum(1 for pid in means if means[pid] is not None) == 400


def test_planted_fragment_has_zero_conductance():
    cfg = SynthConfig(n_papers=150, n_reviewers=60, seed=3, planted_fragment=(4, 12))
    ds = generate_synthetic(cfg)
    g = graph.build_co_review_graph(ds)
    island = {r.reviewer_id for r in ds.reviewers[-12:]}
    assert graph.conductance(g, island) == 0.0


def test_infeasible_load_rejected():
    with pytest.raises(InfeasibleError):
        generate_synthetic(SynthConfig(n_papers=10, n_reviewers=2, reviews_per_paper=3))
    with pytest.raises(InfeasibleError):
        generate_synthetic(SynthConfig(n_papers=10, n_reviewers=5, reviews_per_paper=3, max_papers_per_reviewer=4))


def test_bad_config():
    with pytest.raises(PreconditionError):
        generate_synthetic(SynthConfig(planted_messy_window=(0.5, 0.5)))
    with pytest.raises(PreconditionError):
        generate_synthetic(SynthConfig(seed=-1))


def _with_decisions(means, accepted):
    scores = {(p, "R1"): m for p, m in means.items()}
    decisions = {p: Decision.POSTER if p in accepted else Decision.REJECTED for p in means}
    return make_dataset(scores, decisions=decisions)


def test_top2k_all_four():
    ds = _with_decisions({"P1": 5, "P2": 4, "P3": 1, "P4": 2}, {"P1", "P2"})
    assert top2k_subset(ds).paper_ids == {"P1", "P2", "P3", "P4"}


def test_top2k_highest_rejected():
    ds = make_dataset(
        {("A1", "R1"): 5, ("A2", "R1"): 5, ("X", "R1"): 3, ("Y", "R1"): (3, 2, 3, 2), ("Z", "R1"): 2},
        decisions={"A1": Decision.ORAL, "A2": Decision.POSTER, "X": Decision.REJECTED,
                   "Y": Decision.REJECTED, "Z": Decision.REJECTED},
    )
    assert top2k_subset(ds).paper_ids == {"A1", "A2", "X", "Y"}


def test_top2k_tie_at_cut_uses_lower_id():
    # rejected means: P2 3.0, P3 2.0, P4 2.0 and P5 2.0; 2 accepted, so the
    # cut falls inside the 2.0 tie and P3 (lowest id) wins it
    ds = _with_decisions({"P0": 5, "P1": 4, "P2": 3, "P5": 2, "P4": 2, "P3": 2}, {"P0", "P1"})
    assert top2k_subset(ds).paper_ids == {"P0", "P1", "P2", "P3"}


def test_top2k_errors():
    with pytest.raises(MissingDataError):
        top2k_subset(make_dataset({("P1", "R1"): 3, ("P2", "R1"): 2}))
    ds = _with_decisions({"P1": 5, "P2": 4, "P3": 1}, {"P1", "P2"})
    with pytest.raises(PreconditionError):
        top2k_subset(ds)


def test_top2k_size_on_synthetic():
    ds = generate_synthetic(SynthConfig(n_papers=120, n_reviewers=50, seed=6))
    n_acc = sum(p.decision.accepted for p in ds.papers)
    assert len(top2k_subset(ds)) == 2 * n_acc
