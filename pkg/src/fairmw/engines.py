"""The three online selection algorithms as sequential state machines.

* mw: one flat pool of expert weights, updated every round.
* group_aware: one weight slice per group; the arriving group's slice is
  used for selection and is the only one updated.
* fairness_aware: one slice per (group, label); a slice of the arriving
  group is sampled according to q, the expert comes from that slice, and
  after the label is revealed only the (group, true label) slice is
  updated.  Cross-table loss gaps (alpha), arrival-rate estimates and the
  per-round q* recomputation live here too.

Selection sampling is inverse-CDF over the unnormalized slice in declared
expert order, so identical weights and rng state replay identically.

Randomness layout: each trial derives
``SeedSequence(config.seed, spawn_key=(trial,))`` and spawns three
children — 0 for stream synthesis/shuffling (used by the harness),
1 for synthetic expert draws, 2 for engine sampling.  Per round the draw
order is: expert predictions (expert order), then the table draw
(fairness_aware only), then the expert draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (
    NEG,
    POS,
    Group,
    QDistribution,
    RunConfig,
    WeightTable,
    recommended_eta,
    trial_seed_sequence,
    zero_one_loss,
)
from .errors import EmptyStream, StreamExhausted
from .estimators import AlphaTracker, RateEstimates
from .qopt import assemble_constraint_system, solve_q

__all__ = [
    "MwState",
    "GroupAwareState",
    "RmwState",
    "RoundOutcome",
    "Trajectory",
    "mw_step",
    "group_aware_step",
    "rmw_step",
    "run_trial",
    "trial_seed_sequence",
]


@dataclass
class MwState:
    weights: WeightTable
    eta: float

    @classmethod
    def fresh(cls, d: int, eta: float) -> "MwState":
        return cls(WeightTable.flat(d), eta)


@dataclass
class GroupAwareState:
    weights: WeightTable
    eta: float

    @classmethod
    def fresh(cls, d: int, eta: float) -> "GroupAwareState":
        return cls(WeightTable.grouped(d), eta)


@dataclass
class RmwState:
    weights: WeightTable
    eta: float
    estimates: RateEstimates
    alphas: AlphaTracker = field(default_factory=AlphaTracker)

    @classmethod
    def fresh(cls, d: int, eta: float, dirichlet_alpha: float = 1.0) -> "RmwState":
        return cls(WeightTable.full(d), eta, RateEstimates(dirichlet_alpha))


@dataclass
class RoundOutcome:
    t: int
    group: Group
    label: int
    table_chosen: tuple[Group, int] | None
    expert_chosen: int
    prediction: int
    realized_loss: float
    expected_loss: float
    per_expert_losses: np.ndarray
    q_used: QDistribution | None = None
    # fairness_aware bookkeeping: expectation of this round's losses under
    # the (group, label) slice and under the opposite slice, pre-update.
    right_table_loss: float = 0.0
    wrong_table_loss: float = 0.0


def _sample(w: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over unnormalized weights, one rng draw."""
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(idx, len(w) - 1)


def mw_step(state: MwState, predictions: np.ndarray, true_label: int,
            rng: np.random.Generator, loss_fn=zero_one_loss) -> RoundOutcome:
    """One round of plain multiplicative weights."""
    w = state.weights.slice()
    losses = _losses(predictions, true_label, loss_fn)
    expected = float(w @ losses) / float(w.sum())
    chosen = _sample(w, rng)
    outcome = RoundOutcome(
        t=0, group=Group.A, label=true_label, table_chosen=None,
        expert_chosen=chosen, prediction=int(predictions[chosen]),
        realized_loss=float(losses[chosen]), expected_loss=expected,
        per_expert_losses=losses)
    state.weights.update(state.eta, losses)
    return outcome


def group_aware_step(state: GroupAwareState, predictions: np.ndarray, group: Group,
                     true_label: int, rng: np.random.Generator,
                     loss_fn=zero_one_loss) -> RoundOutcome:
    """One round of group-aware MW: selection and update on one group slice."""
    w = state.weights.slice(group)
    losses = _losses(predictions, true_label, loss_fn)
    expected = float(w @ losses) / float(w.sum())
    chosen = _sample(w, rng)
    outcome = RoundOutcome(
        t=0, group=group, label=true_label, table_chosen=None,
        expert_chosen=chosen, prediction=int(predictions[chosen]),
        realized_loss=float(losses[chosen]), expected_loss=expected,
        per_expert_losses=losses)
    state.weights.update(state.eta, losses, group)
    return outcome


def rmw_step(state: RmwState, predictions: np.ndarray, group: Group, true_label: int,
             q: QDistribution, rng: np.random.Generator,
             loss_fn=zero_one_loss) -> RoundOutcome:
    """One round of fairness-aware MW.

    Draw order: table (negative slice with probability q_{z,-}), then
    expert from the chosen slice.  Expected loss is the full mixture over
    both slices of the arriving group.  Alpha contributions and arrival
    counts are recorded from pre-update state before the (group, label)
    slice is updated.
    """
    q_neg, q_pos = q.for_group(group)
    losses = _losses(predictions, true_label, loss_fn)

    table_label = NEG if rng.random() < q_neg else POS
    w_table = state.weights.slice(group, table_label)
    chosen = _sample(w_table, rng)

    w_right = state.weights.slice(group, true_label)
    w_wrong = state.weights.slice(group, 1 - true_label)
    e_right = float(w_right @ losses) / float(w_right.sum())
    e_wrong = float(w_wrong @ losses) / float(w_wrong.sum())
    q_right = q_pos if true_label == POS else q_neg
    expected = q_right * e_right + (1.0 - q_right) * e_wrong

    state.alphas.add(group, 1 - true_label, e_wrong - e_right)
    outcome = RoundOutcome(
        t=0, group=group, label=true_label, table_chosen=(group, table_label),
        expert_chosen=chosen, prediction=int(predictions[chosen]),
        realized_loss=float(losses[chosen]), expected_loss=expected,
        per_expert_losses=losses, q_used=q,
        right_table_loss=e_right, wrong_table_loss=e_wrong)
    state.weights.update(state.eta, losses, group, true_label)
    state.estimates.update(group, true_label)
    return outcome


def _losses(predictions: np.ndarray, true_label: int, loss_fn) -> np.ndarray:
    if loss_fn is zero_one_loss:
        return (predictions != true_label).astype(np.float64)
    return np.array([loss_fn(int(p), true_label) for p in predictions], dtype=np.float64)


class Trajectory:
    """Complete record of one trial, stored columnwise.

    Cumulative losses marked "expected" integrate the per-round
    expectation of the selection distribution actually used; "realized"
    integrates the sampled expert's loss.  Gap series hold NaN on rounds
    where a defining rate has no observations yet.
    """

    def __init__(self, engine: str, eta: float, expert_names: list[str], T: int):
        self.engine = engine
        self.eta = eta
        self.expert_names = list(expert_names)
        d = len(expert_names)
        self.d = d
        self.T = T
        self.group = np.zeros(T, dtype=np.int8)
        self.label = np.zeros(T, dtype=np.int8)
        self.table = np.full(T, -1, dtype=np.int8)
        self.expert = np.zeros(T, dtype=np.int32)
        self.prediction = np.zeros(T, dtype=np.int8)
        self.realized = np.zeros(T)
        self.expected = np.zeros(T)
        self.per_expert_losses = np.zeros((T, d))
        self.q_used = np.full((T, 4), np.nan) if engine == "fairness_aware" else None
        self.right_step = np.zeros(T) if engine == "fairness_aware" else None
        # Series (running, per round).
        self.regret_realized = np.zeros(T)
        self.regret_expected = np.zeros(T)
        self.fpr_gap = np.full(T, np.nan)
        self.fnr_gap = np.full(T, np.nan)
        self.eer_gap = np.full(T, np.nan)
        # Aggregates.
        self.L_realized = 0.0
        self.L_expected = 0.0
        self.L_z = np.zeros(2)
        self.L_zy = np.zeros((2, 2))
        self.L_f = np.zeros(d)
        self.L_fz = np.zeros((2, d))
        self.L_fzy = np.zeros((2, 2, d))
        self.right_table_cum = np.zeros((2, 2))
        self.confusion = np.zeros((2, 4), dtype=np.int64)  # per group: tp, fp, tn, fn
        self.counts = np.zeros((2, 2), dtype=np.int64)
        # fairness_aware finals, filled by run_trial.
        self.alpha_sums = None
        self.q_final = None
        self.p_hat_final = None
        self.mu_hat_final = None

    def __len__(self) -> int:
        return self.T

    def record(self, t: int, out: RoundOutcome) -> None:
        """Append round t (1-based); updates every aggregate and series."""
        i = t - 1
        g, y = out.group, out.label
        self.group[i] = g
        self.label[i] = y
        self.expert[i] = out.expert_chosen
        self.prediction[i] = out.prediction
        self.realized[i] = out.realized_loss
        self.expected[i] = out.expected_loss
        self.per_expert_losses[i] = out.per_expert_losses
        if out.table_chosen is not None:
            self.table[i] = out.table_chosen[1]
        if self.q_used is not None and out.q_used is not None:
            self.q_used[i] = out.q_used.as_vector()
        if self.right_step is not None:
            self.right_step[i] = out.right_table_loss
            self.right_table_cum[g, y] += out.right_table_loss

        self.L_realized += out.realized_loss
        self.L_expected += out.expected_loss
        self.L_z[g] += out.expected_loss
        self.L_zy[g, y] += out.expected_loss
        self.L_f += out.per_expert_losses
        self.L_fz[g] += out.per_expert_losses
        self.L_fzy[g, y] += out.per_expert_losses
        self.counts[g, y] += 1

        if out.prediction == 1:
            col = 0 if y == 1 else 1  # tp / fp
        else:
            col = 3 if y == 1 else 2  # fn / tn
        self.confusion[g, col] += 1

        best = float(self.L_f.min())
        self.regret_realized[i] = self.L_realized - best
        self.regret_expected[i] = self.L_expected - best

        tp = self.confusion[:, 0]
        fp = self.confusion[:, 1]
        tn = self.confusion[:, 2]
        fn = self.confusion[:, 3]
        neg = fp + tn
        pos = tp + fn
        if neg[0] > 0 and neg[1] > 0:
            self.fpr_gap[i] = abs(fp[0] / neg[0] - fp[1] / neg[1])
        if pos[0] > 0 and pos[1] > 0:
            self.fnr_gap[i] = abs(fn[0] / pos[0] - fn[1] / pos[1])
        tot = neg + pos
        if tot[0] > 0 and tot[1] > 0:
            err = (fp + fn) / np.maximum(tot, 1)
            self.eer_gap[i] = abs(err[0] - err[1])

    def outcome(self, t: int) -> RoundOutcome:
        """Reconstruct round t (1-based) as a RoundOutcome view."""
        i = t - 1
        table = None
        if self.table[i] >= 0:
            table = (Group(int(self.group[i])), int(self.table[i]))
        q = None
        if self.q_used is not None and np.isfinite(self.q_used[i, 0]):
            q = QDistribution(*(float(v) for v in self.q_used[i]))
        return RoundOutcome(
            t=t, group=Group(int(self.group[i])), label=int(self.label[i]),
            table_chosen=table, expert_chosen=int(self.expert[i]),
            prediction=int(self.prediction[i]), realized_loss=float(self.realized[i]),
            expected_loss=float(self.expected[i]),
            per_expert_losses=self.per_expert_losses[i], q_used=q,
            right_table_loss=float(self.right_step[i]) if self.right_step is not None else 0.0)

    def __iter__(self):
        return (self.outcome(t) for t in range(1, self.T + 1))

    def error_rate(self) -> float:
        return float(self.realized.sum() / self.T) if self.T else 0.0

    def group_error_rates(self) -> tuple[float | None, float | None]:
        out = []
        for g in (0, 1):
            n = int(self.counts[g].sum())
            wrong = int(self.confusion[g, 1] + self.confusion[g, 3])
            out.append(wrong / n if n else None)
        return tuple(out)

    def to_dict(self) -> dict:
        """Deterministic plain-python dump (tests serialize this)."""
        return {
            "engine": self.engine,
            "eta": self.eta,
            "experts": self.expert_names,
            "T": self.T,
            "group": self.group.tolist(),
            "label": self.label.tolist(),
            "table": self.table.tolist(),
            "expert": self.expert.tolist(),
            "prediction": self.prediction.tolist(),
            "realized": self.realized.tolist(),
            "expected": self.expected.tolist(),
            "regret_realized": self.regret_realized.tolist(),
            "regret_expected": self.regret_expected.tolist(),
            "L_realized": self.L_realized,
            "L_expected": self.L_expected,
            "L_f": self.L_f.tolist(),
            "counts": self.counts.tolist(),
            "confusion": self.confusion.tolist(),
        }


def run_trial(config: RunConfig, stream, ensemble, trial: int = 0,
              loss_fn=zero_one_loss) -> Trajectory:
    """Run one trial of config.engine over the stream.

    The stream is consumed in order for config.horizon rounds; shorter
    streams raise StreamExhausted (empty ones EmptyStream unless
    config.allow_empty).  For fairness_aware, q starts uniform and is
    re-solved from running alpha sums and rate estimates whenever
    (t-1) % q_recompute_stride == 0 (t >= 2), with elapsed rounds t-1 in
    the constraint denominators.
    """
    n = len(stream)
    if n == 0:
        if config.allow_empty:
            return Trajectory(config.engine, config.eta or 0.0, ensemble.names, 0)
        raise EmptyStream("trial started on an empty stream")
    T = config.horizon
    if T > n:
        raise StreamExhausted(f"stream has {n} examples, horizon {T}")
    if ensemble.num_rounds is not None and ensemble.num_rounds < T:
        raise StreamExhausted(
            f"ensemble covers {ensemble.num_rounds} rounds, horizon {T}")

    d = ensemble.d
    eta = config.eta if config.eta is not None else recommended_eta(T, d)
    _, expert_ss, engine_ss = trial_seed_sequence(config.seed, trial)
    expert_rng = np.random.default_rng(expert_ss)
    engine_rng = np.random.default_rng(engine_ss)

    traj = Trajectory(config.engine, eta, ensemble.names, T)
    engine = config.engine

    if engine == "mw":
        state = MwState.fresh(d, eta)
        for t in range(1, T + 1):
            ex = stream[t - 1]
            preds = ensemble.round_predictions(t, ex, expert_rng)
            out = mw_step(state, preds, ex.label, engine_rng, loss_fn)
            out.t, out.group = t, ex.group
            traj.record(t, out)
        return traj

    if engine == "group_aware":
        state = GroupAwareState.fresh(d, eta)
        for t in range(1, T + 1):
            ex = stream[t - 1]
            preds = ensemble.round_predictions(t, ex, expert_rng)
            out = group_aware_step(state, preds, ex.group, ex.label, engine_rng, loss_fn)
            out.t = t
            traj.record(t, out)
        return traj

    state = RmwState.fresh(d, eta, config.dirichlet_alpha)
    q = QDistribution.uniform()
    stride = config.q_recompute_stride
    lam = config.lam
    b_tol = config.b_tolerance
    for t in range(1, T + 1):
        ex = stream[t - 1]
        preds = ensemble.round_predictions(t, ex, expert_rng)
        if t >= 2 and (t - 1) % stride == 0:
            est = state.estimates
            system = assemble_constraint_system(
                state.alphas.sums_vector(), est.p_hat,
                est.mu_hat(Group.A), est.mu_hat(Group.B),
                t_elapsed=t - 1, b_tolerance=b_tol, lam=lam)
            q = solve_q(system)
        out = rmw_step(state, preds, ex.group, ex.label, q, engine_rng, loss_fn)
        out.t = t
        traj.record(t, out)

    est = state.estimates
    traj.alpha_sums = state.alphas.sums.copy()
    traj.q_final = q
    traj.p_hat_final = est.p_hat
    traj.mu_hat_final = (est.mu_hat(Group.A), est.mu_hat(Group.B))
    return traj
