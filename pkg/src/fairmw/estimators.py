"""Running arrival statistics and cross-table loss-gap (alpha) tracking.

Rates are estimated two ways: plain frequentist counts and a Dirichlet
posterior predictive with symmetric prior mass ``alpha_prior`` per cell.
The Dirichlet variant keeps every derived probability strictly inside
(0, 1), which guarantees positive denominators in the constraint system
from the very first round.

All (2, 2) count/sum arrays are indexed [group, label].
"""

from __future__ import annotations

import numpy as np

from .domain import Group, WeightTable
from .errors import NoObservations

__all__ = [
    "frequentist_rate",
    "dirichlet_rate",
    "RateEstimates",
    "alpha_step",
    "AlphaTracker",
]


def frequentist_rate(counts: np.ndarray, t: int) -> np.ndarray:
    """Cell rates c_{z,y}/t.  Raises NoObservations at t = 0."""
    if t < 1:
        raise NoObservations("no rounds observed yet")
    return np.asarray(counts, dtype=float) / t


def dirichlet_rate(counts: np.ndarray, t: int, alpha_prior: float) -> np.ndarray:
    """Posterior predictive cell rates (c + alpha)/(t + 4*alpha)."""
    return (np.asarray(counts, dtype=float) + alpha_prior) / (t + 4.0 * alpha_prior)


class RateEstimates:
    """Streaming (group, label) counts with smoothed derived rates.

    p_hat is the smoothed probability of group A; mu_hat(z) the smoothed
    group-conditional positive rate, computed from counts within group z
    only: (c_{z,+} + alpha)/(t_z + 2*alpha).
    """

    def __init__(self, dirichlet_alpha: float = 1.0):
        self.alpha = float(dirichlet_alpha)
        self.counts = np.zeros((2, 2), dtype=np.int64)
        self.t = 0

    def update(self, group: Group, label: int) -> None:
        self.counts[group, label] += 1
        self.t += 1

    def cell_rates(self) -> np.ndarray:
        return dirichlet_rate(self.counts, self.t, self.alpha)

    def frequentist_rates(self) -> np.ndarray:
        return frequentist_rate(self.counts, self.t)

    @property
    def p_hat(self) -> float:
        a = self.alpha
        return (float(self.counts[Group.A].sum()) + 2.0 * a) / (self.t + 4.0 * a)

    def mu_hat(self, group: Group) -> float:
        a = self.alpha
        t_z = float(self.counts[group].sum())
        return (float(self.counts[group, 1]) + a) / (t_z + 2.0 * a)

    def snapshot(self) -> "RateEstimates":
        out = RateEstimates(self.alpha)
        out.counts = self.counts.copy()
        out.t = self.t
        return out


def alpha_step(weights: WeightTable, losses: np.ndarray,
               group: Group, label: int) -> np.ndarray:
    """Per-round alpha contributions for all four cells, [group, label].

    On a (z, y) arrival the only nonzero cell is (z, 1-y): the expected
    loss the wrong-label table would have suffered on this round's losses
    minus the expected loss of the right-label table, both taken from the
    pre-update weights.
    """
    out = np.zeros((2, 2))
    w_right = weights.slice(group, label)
    w_wrong = weights.slice(group, 1 - label)
    e_right = float(w_right @ losses) / float(w_right.sum())
    e_wrong = float(w_wrong @ losses) / float(w_wrong.sum())
    out[group, 1 - label] = e_wrong - e_right
    return out


class AlphaTracker:
    """Running per-cell sums of the alpha loss gaps."""

    def __init__(self):
        self.sums = np.zeros((2, 2))
        self.last = np.zeros((2, 2))

    def record(self, weights: WeightTable, losses: np.ndarray,
               group: Group, label: int) -> np.ndarray:
        """Compute this round's contributions from pre-update weights and add them."""
        contrib = alpha_step(weights, losses, group, label)
        self.sums += contrib
        self.last = contrib
        return contrib

    def add(self, group: Group, wrong_label: int, value: float) -> None:
        """Fast path used by the engine, which already has the two expectations."""
        self.last = np.zeros((2, 2))
        self.last[group, wrong_label] = value
        self.sums[group, wrong_label] += value

    def sums_vector(self) -> np.ndarray:
        """Sums in canonical cell order (A,-), (B,-), (A,+), (B,+)."""
        s = self.sums
        return np.array([s[0, 0], s[1, 0], s[0, 1], s[1, 1]])
