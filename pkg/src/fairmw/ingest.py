"""Dataset loading, binarization, splitting and arrival streams.

Datasets are UTF-8 CSV files with a header row (RFC 4180 quoting is
accepted).  A DatasetSchema names the label and group columns and how to
binarize them; everything else it needs is data, so the three bundled
presets (adult, german, compas) are editable text files in
``fairmw/presets/``.

Binarization values are strings.  A value may list alternatives
separated by ``|`` ("good|1"), or be a numeric comparison such as
``>=25`` — the form used to bracket a numeric column like age into the
two groups.  Rows may additionally be restricted by filter expressions
(``filter.N = column OP value``); a row whose filter cell is missing or
non-numeric (for numeric comparisons) fails the filter and is dropped.
When ``group.b`` is given, rows matching neither group expression are
dropped, which is how a multi-valued attribute is restricted to two
groups.  All drops are counted by reason in the IngestReport.

Missing cells are the empty string or "?" after whitespace stripping;
the only missing policy is drop_row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .domain import NEG, POS, Example, Group, trial_seed_sequence
from .errors import EmptyDataset, SchemaError

__all__ = [
    "DatasetSchema",
    "DatasetStats",
    "IngestReport",
    "load_dataset",
    "dataset_stats",
    "split_shuffle",
    "reshuffle",
    "load_preset",
    "preset_path",
    "BUNDLED_PRESETS",
    "synth_stream",
]

MISSING = ("", "?")
BUNDLED_PRESETS = ("adult", "german", "compas")

_FILTER_OPS = (">=", "<=", "!=", "==", ">", "<")


def _matcher(expr: str):
    """Compile a value expression into a cell predicate.

    A comparison prefix against a number compares numerically (cells that
    do not parse fail the predicate).  ==/!= against a non-numeric value
    test membership in |-separated string alternatives.  Any other
    op-looking prefix of a non-numeric value is taken to be literal data
    (the census income label ">50K" is the motivating case), so it falls
    through to plain membership, as does an expression with no prefix.
    """
    expr = expr.strip()
    for op in _FILTER_OPS:
        if not expr.startswith(op):
            continue
        rest = expr[len(op):].strip()
        try:
            threshold = float(rest)
        except ValueError:
            if op not in ("==", "!="):
                break
            alts = {a.strip() for a in rest.split("|")}
            if op == "==":
                return lambda cell, _alts=alts: cell in _alts
            return lambda cell, _alts=alts: cell not in _alts

        def cmp(cell: str, _op=op, _thr=threshold) -> bool:
            try:
                v = float(cell)
            except ValueError:
                return False
            if _op == ">=":
                return v >= _thr
            if _op == "<=":
                return v <= _thr
            if _op == ">":
                return v > _thr
            if _op == "<":
                return v < _thr
            if _op == "==":
                return v == _thr
            return v != _thr

        return cmp
    alts = {a.strip() for a in expr.split("|")}
    return lambda cell, _alts=alts: cell in _alts


@dataclass(frozen=True)
class DatasetSchema:
    """How to read one dataset file into Examples."""

    label_column: str
    positive_value: str
    group_column: str
    group_a_value: str
    feature_columns: tuple[str, ...] | str = "all-remaining"
    missing_policy: str = "drop_row"
    group_b_value: str | None = None
    filters: tuple[tuple[str, str, str], ...] = ()
    name: str = ""
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.label_column == self.group_column:
            raise SchemaError("label and group columns must differ")
        if self.missing_policy != "drop_row":
            raise SchemaError(f"unsupported missing policy {self.missing_policy!r}")


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_kept: int = 0
    drops: dict = field(default_factory=dict)
    encoding: list = field(default_factory=list)  # (column, kind, categories)
    notes: list = field(default_factory=list)

    def drop(self, reason: str) -> None:
        self.drops[reason] = self.drops.get(reason, 0) + 1

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "drops": dict(sorted(self.drops.items())),
            "encoding": [list(e) for e in self.encoding],
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class DatasetStats:
    n_rounds: int
    p: float
    mu_a_pos: float | None
    mu_b_pos: float | None
    disparate_impact: float | None

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "p": self.p,
            "mu_a_pos": self.mu_a_pos,
            "mu_b_pos": self.mu_b_pos,
            "disparate_impact": self.disparate_impact,
        }


def load_dataset(path, schema: DatasetSchema) -> tuple[list[Example], IngestReport]:
    """Read one CSV into Examples plus an audit report.

    Non-numeric feature columns are one-hot encoded with category order
    fixed by first occurrence among kept rows; the ordering is emitted in
    the report so downstream training is auditable.
    """
    report = IngestReport(notes=list(schema.notes))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        col = {name: i for i, name in enumerate(header)}
        for needed in (schema.label_column, schema.group_column):
            if needed not in col:
                raise SchemaError(f"{path}: column {needed!r} not in header")
        if schema.feature_columns == "all-remaining":
            feature_names = [h for h in header
                             if h not in (schema.label_column, schema.group_column)]
        else:
            feature_names = list(schema.feature_columns)
            for name in feature_names:
                if name not in col:
                    raise SchemaError(f"{path}: feature column {name!r} not in header")
        filters = []
        for fcol, fop, fval in schema.filters:
            if fcol not in col:
                raise SchemaError(f"{path}: filter column {fcol!r} not in header")
            if fop not in ("==", "!="):
                try:
                    float(fval)
                except ValueError:
                    raise SchemaError(
                        f"{path}: filter {fcol} {fop} {fval!r} needs a numeric value"
                    ) from None
            filters.append((col[fcol], _matcher(fop + fval)))

        is_positive = _matcher(schema.positive_value)
        is_group_a = _matcher(schema.group_a_value)
        is_group_b = _matcher(schema.group_b_value) if schema.group_b_value else None

        labels: list[int] = []
        groups: list[Group] = []
        raw_features: list[list[str]] = []
        ncols = len(header)
        label_i, group_i = col[schema.label_column], col[schema.group_column]
        feat_i = [col[n] for n in feature_names]

        for row in reader:
            if not row:
                continue
            report.rows_read += 1
            if len(row) != ncols:
                report.drop("ragged_row")
                continue
            cells = [c.strip() for c in row]
            if any(not m(cells[i]) for i, m in filters):
                report.drop("filtered")
                continue
            if cells[label_i] in MISSING:
                report.drop("missing_label")
                continue
            if cells[group_i] in MISSING:
                report.drop("missing_group")
                continue
            feats = [cells[i] for i in feat_i]
            if any(v in MISSING for v in feats):
                report.drop("missing_feature")
                continue
            gcell = cells[group_i]
            if is_group_a(gcell):
                group = Group.A
            elif is_group_b is not None and not is_group_b(gcell):
                report.drop("group_not_listed")
                continue
            else:
                group = Group.B
            labels.append(POS if is_positive(cells[label_i]) else NEG)
            groups.append(group)
            raw_features.append(feats)

    if labels and POS not in labels:
        raise SchemaError(
            f"{path}: positive value {schema.positive_value!r} matched no row")

    matrix, encoding = _encode_features(feature_names, raw_features)
    report.encoding = encoding
    report.rows_kept = len(labels)
    examples = [Example(group=g, label=y, features=matrix[i])
                for i, (g, y) in enumerate(zip(groups, labels))]
    return examples, report


def _encode_features(names: list[str], rows: list[list[str]]):
    """Numeric columns pass through; the rest one-hot by first occurrence."""
    n = len(rows)
    columns: list[np.ndarray] = []
    encoding = []
    for j, name in enumerate(names):
        values = [rows[i][j] for i in range(n)]
        try:
            numeric = np.array([float(v) for v in values])
            columns.append(numeric.reshape(n, 1))
            encoding.append((name, "numeric", ()))
            continue
        except ValueError:
            pass
        categories: list[str] = []
        index = {}
        for v in values:
            if v not in index:
                index[v] = len(categories)
                categories.append(v)
        onehot = np.zeros((n, len(categories)))
        for i, v in enumerate(values):
            onehot[i, index[v]] = 1.0
        columns.append(onehot)
        encoding.append((name, "one-hot", tuple(categories)))
    if not columns:
        return np.zeros((n, 0)), encoding
    return np.hstack(columns), encoding


def dataset_stats(examples: list[Example]) -> DatasetStats:
    """Empirical n, p, per-group positive rates and disparate impact."""
    if not examples:
        raise EmptyDataset("no examples")
    n = len(examples)
    n_a = sum(1 for e in examples if e.group == Group.A)
    n_b = n - n_a
    pos_a = sum(1 for e in examples if e.group == Group.A and e.label == POS)
    pos_b = sum(1 for e in examples if e.group == Group.B and e.label == POS)
    mu_a = pos_a / n_a if n_a else None
    mu_b = pos_b / n_b if n_b else None
    di = (mu_b / mu_a) if (mu_a and mu_b is not None) else None
    return DatasetStats(n_rounds=n, p=n_a / n, mu_a_pos=mu_a, mu_b_pos=mu_b,
                        disparate_impact=di)


def split_shuffle(examples: list[Example], ratio: float, seed: int):
    """Seeded permutation, first floor(ratio*n) rows train, rest test."""
    if not examples:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0,1), got {ratio}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(len(examples))
    cut = int(ratio * len(examples))
    train = [examples[i] for i in perm[:cut]]
    test = [examples[i] for i in perm[cut:]]
    return train, test


def reshuffle(examples: list[Example], seed: int, trial: int) -> list[Example]:
    """Per-trial arrival order: stream child of the documented derivation."""
    stream_ss = trial_seed_sequence(seed, trial)[0]
    rng = np.random.default_rng(stream_ss)
    perm = rng.permutation(len(examples))
    return [examples[i] for i in perm]


def synth_stream(p: float, mu_a: float, mu_b: float, T: int,
                 rng: np.random.Generator) -> list[Example]:
    """I.i.d. arrivals: group A with probability p, then the group's
    positive rate decides the label.  Two rng draws per example."""
    out = []
    for _ in range(T):
        group = Group.A if rng.random() < p else Group.B
        mu = mu_a if group == Group.A else mu_b
        label = POS if rng.random() < mu else NEG
        out.append(Example(group=group, label=label))
    return out


def preset_path(name: str):
    """Filesystem path of a bundled preset (context-free: files ship as data)."""
    return resources.files("fairmw").joinpath("presets", f"{name}.preset")


def load_preset(name_or_path) -> DatasetSchema:
    """Load a schema from a bundled preset name or a preset file path."""
    name = str(name_or_path)
    if name in BUNDLED_PRESETS:
        text = preset_path(name).read_text(encoding="utf-8")
        source = f"preset:{name}"
    else:
        with open(name_or_path, encoding="utf-8") as fh:
            text = fh.read()
        source = name

    pairs: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"{source}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        pairs.append((key.strip(), value.strip()))
    kv = dict(pairs)

    required = ("label.column", "label.positive", "group.column", "group.a")
    for key in required:
        if key not in kv:
            raise SchemaError(f"{source}: missing required key {key!r}")

    features: tuple[str, ...] | str = "all-remaining"
    if kv.get("features", "all-remaining") != "all-remaining":
        features = tuple(f.strip() for f in kv["features"].split(",") if f.strip())

    filters = []
    for key, value in pairs:
        if key.startswith("filter."):
            parts = value.split(None, 2)
            if len(parts) != 3 or parts[1] not in _FILTER_OPS:
                raise SchemaError(f"{source}: bad filter {value!r} "
                                  "(expected: column OP value)")
            filters.append((parts[0], parts[1], parts[2]))
    notes = tuple(v for k, v in pairs if k == "note" or k.startswith("note."))

    return DatasetSchema(
        label_column=kv["label.column"],
        positive_value=kv["label.positive"],
        group_column=kv["group.column"],
        group_a_value=kv["group.a"],
        feature_columns=features,
        group_b_value=kv.get("group.b") or None,
        filters=tuple(filters),
        name=kv.get("name", ""),
        notes=notes,
    )
