"""Sources of per-round expert predictions.

Three kinds of ensemble share one interface: ``names`` (d unique
identifiers), ``num_rounds`` (None when unlimited) and
``round_predictions(t, example, rng)`` returning d predictions in {0,1}
for 1-based round t.

* SyntheticEnsemble — each expert flips the true label with a per-cell
  Bernoulli error rate; the generative model under which per-expert
  epsilon-fairness can be set exactly.
* FileEnsemble — replays a CSV of precomputed predictions, one row per
  round.
* BuiltinEnsemble — fixed pre-trained models (logistic / stump) applied
  to the arrival's features.

Ensembles are immutable after construction; randomness comes only from
the rng passed per call, so parallel trials stay independent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .domain import Example, Group
from .errors import DegenerateData, FormatError, InvalidExpertCount, StreamExhausted

__all__ = [
    "ErrorProfile",
    "synthetic_predict",
    "SyntheticEnsemble",
    "load_prediction_file",
    "FileEnsemble",
    "train_builtin",
    "LogisticExpert",
    "StumpExpert",
    "BuiltinEnsemble",
]


@dataclass(frozen=True)
class ErrorProfile:
    """Chance of predicting the wrong label on each (group, label) cell."""

    e_a_neg: float
    e_a_pos: float
    e_b_neg: float
    e_b_pos: float

    def __post_init__(self):
        for v in (self.e_a_neg, self.e_a_pos, self.e_b_neg, self.e_b_pos):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"error rate {v} outside [0, 1]")

    def rate(self, group: Group, label: int) -> float:
        if group == Group.A:
            return self.e_a_pos if label else self.e_a_neg
        return self.e_b_pos if label else self.e_b_neg

    def max_cell_gap(self) -> float:
        """Largest cross-group error gap over the two labels."""
        return max(abs(self.e_a_neg - self.e_b_neg), abs(self.e_a_pos - self.e_b_pos))


def synthetic_predict(profile: ErrorProfile, example: Example, rng: np.random.Generator) -> int:
    """True label, flipped with the cell's error probability; one rng draw."""
    wrong = rng.random() < profile.rate(example.group, example.label)
    return 1 - example.label if wrong else example.label


class SyntheticEnsemble:
    """d stochastic experts with fixed error profiles."""

    def __init__(self, profiles: list[ErrorProfile], names: list[str] | None = None):
        if len(profiles) < 2:
            raise InvalidExpertCount(f"need at least 2 experts, got {len(profiles)}")
        self.profiles = list(profiles)
        self.names = list(names) if names else [f"expert_{i}" for i in range(len(profiles))]
        _check_names(self.names, len(profiles))
        self.num_rounds = None

    @property
    def d(self) -> int:
        return len(self.profiles)

    def round_predictions(self, t: int, example: Example, rng: np.random.Generator) -> np.ndarray:
        # One draw per expert, in declared expert order.
        return np.array([synthetic_predict(p, example, rng) for p in self.profiles],
                        dtype=np.int8)


class FileEnsemble:
    """Replays a prediction matrix; row t serves round t."""

    def __init__(self, names: list[str], matrix: np.ndarray):
        if len(names) < 2:
            raise InvalidExpertCount(f"need at least 2 experts, got {len(names)}")
        _check_names(names, len(names))
        self.names = list(names)
        self.matrix = matrix
        self.num_rounds = matrix.shape[0]

    @property
    def d(self) -> int:
        return len(self.names)

    def round_predictions(self, t: int, example: Example, rng=None) -> np.ndarray:
        if t > self.num_rounds:
            raise StreamExhausted(
                f"prediction file has {self.num_rounds} rounds, round {t} requested")
        return self.matrix[t - 1]


def load_prediction_file(path) -> FileEnsemble:
    """Parse the predictions CSV: header of expert names, then 0/1 rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected a header row") from None
        names = [h.strip() for h in header]
        if len(names) < 2 or any(not n for n in names):
            raise FormatError(f"{path}: bad header {header!r}")
        if len(set(names)) != len(names):
            raise FormatError(f"{path}: duplicate expert names in header")
        rows = []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise FormatError(
                    f"{path}: row {rownum} has {len(row)} cells, expected {len(names)}")
            parsed = []
            for colnum, cell in enumerate(row, start=1):
                cell = cell.strip()
                if cell not in ("0", "1"):
                    raise FormatError(
                        f"{path}: row {rownum}, column {colnum}: {cell!r} is not 0 or 1")
                parsed.append(int(cell))
            rows.append(parsed)
    matrix = np.array(rows, dtype=np.int8).reshape(len(rows), len(names))
    return FileEnsemble(names, matrix)


class LogisticExpert:
    """Logistic regression trained by full-batch gradient descent."""

    def __init__(self, weights: np.ndarray, bias: float, mean: np.ndarray, scale: np.ndarray):
        self.weights = weights
        self.bias = bias
        self.mean = mean
        self.scale = scale

    def predict(self, features: np.ndarray) -> int:
        z = (features - self.mean) / self.scale
        return int(z @ self.weights + self.bias > 0.0)


class StumpExpert:
    """Single-feature threshold rule; constant when no split helps."""

    def __init__(self, feature: int, threshold: float, polarity: int, constant: int | None = None):
        self.feature = feature
        self.threshold = threshold
        self.polarity = polarity
        self.constant = constant

    def predict(self, features: np.ndarray) -> int:
        if self.constant is not None:
            return self.constant
        above = features[self.feature] > self.threshold
        return int(above) if self.polarity > 0 else int(not above)


def train_builtin(training_split: list[Example], kind: str, epochs: int = 500,
                  seed: int = 0, include_group: bool = True):
    """Train one minimal expert on (features [+ group indicator], label)."""
    if not training_split:
        raise DegenerateData("empty training split")
    x = np.array([_feature_row(ex, include_group) for ex in training_split])
    y = np.array([ex.label for ex in training_split], dtype=float)
    if x.shape[1] == 0:
        raise DegenerateData("examples carry no features to train on")

    if kind == "logistic":
        return _train_logistic(x, y, epochs, seed)
    if kind == "stump":
        return _train_stump(x, y)
    raise ValueError(f"unknown builtin expert kind {kind!r}")


def _feature_row(ex: Example, include_group: bool) -> np.ndarray:
    if include_group:
        return np.append(ex.features, float(ex.group))
    return np.asarray(ex.features, dtype=float)


def _train_logistic(x: np.ndarray, y: np.ndarray, epochs: int, seed: int) -> LogisticExpert:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0.0] = 1.0
    xs = (x - mean) / scale
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    w = rng.normal(0.0, 0.01, size=xs.shape[1])
    bias = 0.0
    lr = 0.1
    n = xs.shape[0]
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(xs @ w + bias)))
        grad_w = xs.T @ (p - y) / n
        grad_b = float(np.mean(p - y))
        w -= lr * grad_w
        bias -= lr * grad_b
    return LogisticExpert(w, bias, mean, scale)


def _train_stump(x: np.ndarray, y: np.ndarray) -> StumpExpert:
    n = x.shape[0]
    majority = int(y.sum() * 2 >= n)
    if np.all(y == y[0]):
        # Degenerate single-label data: the constant predictor is exact.
        return StumpExpert(0, 0.0, 1, constant=int(y[0]))

    best = (n + 1, 0, 0.0, 1)  # (errors, feature, threshold, polarity)
    for j in range(x.shape[1]):
        values = np.unique(x[:, j])
        if len(values) < 2:
            continue
        thresholds = (values[:-1] + values[1:]) / 2.0
        for thr in thresholds:
            pred = (x[:, j] > thr).astype(float)
            err_pos = int(np.sum(pred != y))
            err_neg = n - err_pos
            if err_pos < best[0]:
                best = (err_pos, j, float(thr), 1)
            if err_neg < best[0]:
                best = (err_neg, j, float(thr), -1)
    if best[0] > n:
        # Every feature is constant: fall back to the majority label.
        return StumpExpert(0, 0.0, 1, constant=majority)
    return StumpExpert(best[1], best[2], best[3])


class BuiltinEnsemble:
    """Fixed trained models evaluated on each arrival's features."""

    def __init__(self, names: list[str], models: list, include_group: bool = True):
        if len(models) < 2:
            raise InvalidExpertCount(f"need at least 2 experts, got {len(models)}")
        _check_names(names, len(models))
        self.names = list(names)
        self.models = list(models)
        self.include_group = include_group
        self.num_rounds = None

    @property
    def d(self) -> int:
        return len(self.models)

    def round_predictions(self, t: int, example: Example, rng=None) -> np.ndarray:
        row = _feature_row(example, self.include_group)
        return np.array([m.predict(row) for m in self.models], dtype=np.int8)


def _check_names(names: list[str], d: int) -> None:
    if len(names) != d or len(set(names)) != d:
        raise ValueError(f"need {d} unique expert names, got {names!r}")
