import math

import numpy as np
import pytest

from fairmw.domain import Example, Group, NEG, POS, RunConfig
from fairmw.engines import RoundOutcome, Trajectory, run_trial
from fairmw.errors import (
    DomainError,
    EmptyTrajectory,
    EngineMismatch,
    UndefinedGap,
)
from fairmw.experts import ErrorProfile, SyntheticEnsemble
from fairmw.metrics import (
    BoundReport,
    FairnessReport,
    compute_rates,
    epsilon_fairness_check,
    gamma,
    measured_epsilon,
    regret,
    validate_bounds,
)


def test_gamma_reference_values():
    assert abs(gamma(0.25) - 0.767779828765767) < 1e-12
    assert abs(gamma(0.25) - 0.76778) < 1e-5
    assert abs(gamma(1e-6) - 0.9999990000005002) < 1e-12


def test_gamma_domain():
    for bad in (0.0, 0.5, 0.6, -0.1):
        with pytest.raises(DomainError):
            gamma(bad)


def test_gamma_limits():
    # continuous extensions: 1 at eta -> 0+, 1/2 at eta -> 1/2-
    assert abs(gamma(0.5 - 1e-12) - 0.5) < 1e-9
    assert gamma(1e-9) < 1.0


def test_gamma_monotone_and_bounded():
    grid = np.linspace(0.001, 0.499, 100)
    vals = [gamma(float(e)) for e in grid]
    assert all(0.0 < v < 1.0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_compute_rates_hand_example():
    confusion = np.array([[9, 2, 8, 1], [8, 1, 9, 2]], dtype=np.int64)
    r = compute_rates(confusion)
    assert abs(r.fpr_a - 0.2) < 1e-15
    assert abs(r.fnr_a - 0.1) < 1e-15
    assert abs(r.err_a - 0.15) < 1e-15
    assert abs(r.fpr_gap - 0.1) < 1e-15
    assert abs(r.fnr_gap - 0.1) < 1e-15
    assert r.eer_gap == 0.0


def test_compute_rates_mapping_input():
    r = compute_rates({Group.A: (9, 2, 8, 1), Group.B: (8, 1, 9, 2)})
    assert abs(r.fpr_b - 0.1) < 1e-15
    assert abs(r.fnr_b - 0.2) < 1e-15


def test_compute_rates_undefined_cells():
    # group A saw no negatives: its fpr and the fpr gap are None, not 0
    confusion = np.array([[2, 0, 0, 1], [1, 1, 1, 1]], dtype=np.int64)
    r = compute_rates(confusion)
    assert r.fpr_a is None
    assert r.fpr_gap is None
    assert r.fnr_gap is not None
    with pytest.raises(UndefinedGap):
        epsilon_fairness_check(r, 0.05)


def test_epsilon_fairness_check():
    def report(fpr_gap, fnr_gap):
        return FairnessReport(0.1, 0.1, 0.1, 0.1, 0.1, 0.1, fpr_gap, fnr_gap, 0.0)

    assert epsilon_fairness_check(report(0.03, 0.04), 0.05)
    assert not epsilon_fairness_check(report(0.06, 0.01), 0.05)
    assert not epsilon_fairness_check(report(0.01, 0.06), 0.05)
    assert epsilon_fairness_check(report(0.0, 0.0), 0.0)


def fabricate(engine, eta, names, rows):
    """rows: (group, label, expected_loss, realized_loss, per-expert losses)."""
    traj = Trajectory(engine, eta, names, len(rows))
    for t, (g, y, exp, real, losses) in enumerate(rows, start=1):
        traj.record(t, RoundOutcome(
            t=t, group=g, label=y, table_chosen=None, expert_chosen=0,
            prediction=1 - y, realized_loss=real, expected_loss=exp,
            per_expert_losses=np.asarray(losses, dtype=float)))
    return traj


def test_regret_hand_example():
    per_round = (3 / 7, 4 / 7, 1.0)
    rows = [(Group.A, POS, 0.6, 5 / 7, per_round)] * 7
    traj = fabricate("mw", 0.3, ["f1", "f2", "f3"], rows)
    realized, expected = regret(traj)
    assert abs(realized - 2.0) < 1e-9
    assert abs(expected - 1.2) < 1e-9


def test_regret_can_be_negative():
    rows = [(Group.A, POS, 0.0, 0.0, (0.5, 1.0))] * 4
    realized, expected = regret(fabricate("mw", 0.3, ["f1", "f2"], rows))
    assert abs(realized - (-2.0)) < 1e-9
    assert abs(expected - (-2.0)) < 1e-9


def test_regret_empty_trajectory():
    with pytest.raises(EmptyTrajectory):
        regret(Trajectory("mw", 0.3, ["f1", "f2"], 0))


def test_measured_epsilon():
    rows = [
        (Group.A, NEG, 0.5, 0.0, (0.0, 1.0)),
        (Group.A, NEG, 0.5, 1.0, (1.0, 1.0)),
        (Group.B, NEG, 0.5, 0.0, (0.0, 1.0)),
        (Group.A, POS, 0.5, 0.0, (1.0, 1.0)),  # no B positives: skipped
    ]
    traj = fabricate("mw", 0.3, ["f1", "f2"], rows)
    # negatives: A rates (0.5, 1.0), B rates (0.0, 1.0) -> max gap 0.5
    assert abs(measured_epsilon(traj) - 0.5) < 1e-12


def test_theorem1_margins_hand_example():
    eta = 0.25
    rows = [(Group.A, POS, 0.5, 1.0, (1.0, 0.0))]
    traj = fabricate("mw", eta, ["f1", "f2"], rows)
    report = validate_bounds(traj, RunConfig(engine="mw", horizon=1, eta=eta))
    slack = math.log(2) / eta
    assert abs(report.theorem1_margin["f1"] - (1.25 + slack - 0.5)) < 1e-12
    assert abs(report.theorem1_margin["f2"] - (slack - 0.5)) < 1e-12
    assert abs(report.min_margin() - (slack - 0.5)) < 1e-12
    assert report.lemma1_margin is None
    assert report.fairness_bound_rhs is None


def test_group_aware_margins_per_group():
    eta = 0.2
    rows = [
        (Group.A, POS, 0.5, 1.0, (1.0, 0.0)),
        (Group.B, POS, 0.5, 0.0, (0.0, 1.0)),
    ]
    traj = fabricate("group_aware", eta, ["f1", "f2"], rows)
    report = validate_bounds(traj, RunConfig(engine="group_aware", horizon=2, eta=eta))
    slack = math.log(2) / eta
    assert set(report.theorem1_margin) == {
        ("A", "f1"), ("A", "f2"), ("B", "f1"), ("B", "f2")}
    assert abs(report.theorem1_margin["A", "f2"] - (slack - 0.5)) < 1e-12
    assert abs(report.theorem1_margin["B", "f1"] - (slack - 0.5)) < 1e-12
    assert abs(report.theorem1_margin["A", "f1"] - (1.2 + slack - 0.5)) < 1e-12


def test_engine_mismatch():
    traj = fabricate("mw", 0.3, ["f1", "f2"], [(Group.A, POS, 0.5, 0.0, (0, 1))])
    with pytest.raises(EngineMismatch):
        validate_bounds(traj, RunConfig(engine="group_aware", horizon=1, eta=0.3))
    with pytest.raises(EmptyTrajectory):
        validate_bounds(Trajectory("mw", 0.3, ["f1", "f2"], 0),
                        RunConfig(engine="mw", horizon=1, eta=0.3))


def test_unvisited_cell_margins_are_exact():
    # an all-(A,+) run leaves the other cells empty: lemma 1 margin is
    # exactly ln(d)/eta and lemma 2 margin exactly 0 there
    ens = SyntheticEnsemble([ErrorProfile(0.2, 0.2, 0.2, 0.2),
                             ErrorProfile(0.3, 0.3, 0.3, 0.3)])
    stream = [Example(Group.A, POS) for _ in range(12)]
    cfg = RunConfig(engine="fairness_aware", horizon=12, eta=0.25, seed=1)
    traj = run_trial(cfg, stream, ens)
    report = validate_bounds(traj, cfg)
    slack = math.log(2) / 0.25
    for g, y in (("A", 0), ("B", 0), ("B", 1)):
        assert report.lemma1_margin[g, y, "expert_0"] == slack
        assert report.lemma1_margin[g, y, "expert_1"] == slack
        assert report.lemma2_margin[g, y] == 0.0
    # the visited cell accumulated real expectation mass
    assert report.lemma2_margin["A", 1] > 0.0
    # no B arrivals at all: both fairness right-hand sides are undefined
    assert report.fairness_bound_rhs == {"fpr": None, "fnr": None}


def test_rmw_bounds_hold_on_seeded_run():
    ens = SyntheticEnsemble([ErrorProfile(0.35, 0.1, 0.3, 0.15),
                             ErrorProfile(0.1, 0.35, 0.15, 0.3),
                             ErrorProfile(0.2, 0.2, 0.2, 0.2)])
    rng = np.random.default_rng(77)
    stream = [Example(Group(int(rng.integers(0, 2))), int(rng.integers(0, 2)))
              for _ in range(600)]
    cfg = RunConfig(engine="fairness_aware", horizon=600, eta=0.1, seed=5,
                    q_recompute_stride=4)
    traj = run_trial(cfg, stream, ens)
    report = validate_bounds(traj, cfg)
    assert report.min_margin() >= -1e-9
    assert report.fairness_bound_rhs["fpr"] is not None
    assert report.fairness_bound_rhs["fpr"] >= 0.0
    assert report.fairness_bound_rhs["fnr"] >= 0.0
    assert report.epsilon_used == measured_epsilon(traj)


def test_epsilon_override_feeds_the_rhs():
    ens = SyntheticEnsemble([ErrorProfile(0.3, 0.2, 0.25, 0.15),
                             ErrorProfile(0.15, 0.25, 0.2, 0.3)])
    rng = np.random.default_rng(31)
    stream = [Example(Group(int(rng.integers(0, 2))), int(rng.integers(0, 2)))
              for _ in range(200)]
    cfg = RunConfig(engine="fairness_aware", horizon=200, eta=0.2, seed=9)
    traj = run_trial(cfg, stream, ens)
    low = validate_bounds(traj, cfg, epsilon=0.0)
    high = validate_bounds(traj, cfg, epsilon=0.5)
    assert low.epsilon_used == 0.0 and high.epsilon_used == 0.5
    # the eps * (1 + eta) term moves both sides by the same positive shift
    # unless the absolute value folds; check it responded at all
    assert high.fairness_bound_rhs["fpr"] != low.fairness_bound_rhs["fpr"]


def test_fairness_rhs_none_without_final_state():
    rows = [(Group.A, POS, 0.5, 0.0, (0.0, 1.0)),
            (Group.B, NEG, 0.5, 0.0, (1.0, 0.0))]
    traj = fabricate("fairness_aware", 0.25, ["f1", "f2"], rows)
    report = validate_bounds(
        traj, RunConfig(engine="fairness_aware", horizon=2, eta=0.25))
    assert report.fairness_bound_rhs == {"fpr": None, "fnr": None}


def test_bound_report_min_margin_empty():
    assert BoundReport(gamma_eta=0.7).min_margin() is None
