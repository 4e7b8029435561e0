"""Batch experiment harness.

Subcommands:

* run             -- execute repeated trials, write summary.json + rounds.csv
* stats           -- dataset statistics for a (csv, preset) pair, JSON on stdout
* validate-bounds -- run trials and check every deterministic margin, write bounds.json
* sweep           -- re-run one config across a list of parameter values

Configs are flat ``key = value`` text files (# comments, blank lines ok).
Everything emitted is a pure function of (config, seed): floats are
written as their shortest round-trip repr, trial results are assembled in
trial order whatever the worker count, and no timestamps appear anywhere.

Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime error,
5 bound violation.  FAIRMW_LOG={error,warn,info,debug} controls stderr
logging (default warn).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import ENGINES, RunConfig, recommended_eta, trial_seed_sequence
from .engines import run_trial
from .errors import (
    ConfigError,
    DegenerateData,
    EmptyDataset,
    FairmwError,
    FormatError,
    SchemaError,
)
from .experts import (
    BuiltinEnsemble,
    ErrorProfile,
    SyntheticEnsemble,
    load_prediction_file,
    train_builtin,
)
from .ingest import (
    dataset_stats,
    load_dataset,
    load_preset,
    reshuffle,
    split_shuffle,
    synth_stream,
)
from .metrics import compute_rates, regret, validate_bounds

__all__ = ["main", "parse_config", "build_spec", "ExperimentSpec"]

logger = logging.getLogger("fairmw.cli")

MARGIN_THRESHOLD = -1e-9

ROUNDS_HEADER = ("t,engine,trial_mean_regret_realized,trial_mean_regret_expected,"
                 "fpr_gap,fnr_gap,eer_gap,q_a_neg,q_b_neg")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


# ---------------------------------------------------------------------------
# Config file -> ExperimentSpec


def parse_config(path) -> dict[str, str]:
    """Read a flat key = value file into an ordered dict of raw strings."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass
class ExperimentSpec:
    """Fully validated experiment description (before data is touched)."""

    run: RunConfig
    raw: dict[str, str]                 # config echo, post-override
    horizon_explicit: bool
    stream_kind: str                    # "synthetic" | "dataset"
    stream_p: float | None = None
    stream_mu_a: float | None = None
    stream_mu_b: float | None = None
    data_path: str | None = None
    data_preset: str | None = None
    split_ratio: float = 0.7
    experts_source: str = "synthetic"   # synthetic | file | builtin
    profiles: tuple[tuple[str, ErrorProfile], ...] = ()
    experts_file: str | None = None
    experts_kinds: tuple[str, ...] = ()
    include_group: bool = True
    epochs: int = 500
    epsilon: float | None = None        # fairness-bound plug-in override


def _as_int(key: str, s: str, minimum: int | None = None) -> int:
    try:
        v = int(s)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {s!r}") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {v}")
    return v


def _as_float(key: str, s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {s!r}") from None
    if not np.isfinite(v):
        raise ConfigError(f"{key}: must be finite, got {s!r}")
    return v


def _as_prob(key: str, s: str) -> float:
    v = _as_float(key, s)
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"{key}: must lie in [0, 1], got {v}")
    return v


def _as_bool(key: str, s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {s!r}")


def build_spec(cfg: dict[str, str], source: str = "<config>") -> ExperimentSpec:
    """Validate raw config keys and assemble an ExperimentSpec."""
    cfg = dict(cfg)
    known: set[str] = set()

    def take(key: str, default: str | None = None) -> str | None:
        known.add(key)
        return cfg.get(key, default)

    engine = take("engine", "mw")
    eta_raw = take("eta", "auto")
    eta = None if eta_raw == "auto" else _as_float("eta", eta_raw)
    seed = _as_int("seed", take("seed", "0"), minimum=0)
    trials = _as_int("trials", take("trials", "1"), minimum=1)
    lam = tuple(_as_float(k, take(k, "1"))
                for k in ("lambda.fpr", "lambda.fnr", "lambda.regret"))
    b_tol = tuple(_as_float(k, take(k, "0")) for k in ("b.fpr", "b.fnr", "b.regret"))
    budget = tuple(_as_prob(k, take(k, "0.05")) for k in ("budget.fpr", "budget.fnr"))
    dirichlet_alpha = _as_float("dirichlet_alpha", take("dirichlet_alpha", "1.0"))
    stride = _as_int("stride", take("stride", "1"), minimum=1)
    allow_empty = _as_bool("allow_empty", take("allow_empty", "false"))
    eps_raw = take("epsilon")
    epsilon = None if eps_raw is None else _as_prob("epsilon", eps_raw)

    stream_kind = take("stream.kind")
    data_path = take("data.path")
    data_preset = take("data.preset")
    split_ratio = _as_float("data.split_ratio", take("data.split_ratio", "0.7"))
    if not 0.0 < split_ratio < 1.0:
        raise ConfigError(f"data.split_ratio: must lie in (0, 1), got {split_ratio}")

    if stream_kind is None:
        stream_kind = "dataset" if data_path else "synthetic" if "stream.p" in cfg else None
    if stream_kind not in ("synthetic", "dataset"):
        raise ConfigError(
            f"{source}: set stream.kind to synthetic or dataset "
            "(dataset mode also needs data.path)")

    p = mu_a = mu_b = None
    if stream_kind == "synthetic":
        if data_path or data_preset:
            raise ConfigError("stream.kind=synthetic conflicts with data.* keys")
        for key in ("stream.p", "stream.mu_a", "stream.mu_b"):
            if key not in cfg:
                raise ConfigError(f"synthetic stream needs {key}")
        p = _as_prob("stream.p", take("stream.p"))
        mu_a = _as_prob("stream.mu_a", take("stream.mu_a"))
        mu_b = _as_prob("stream.mu_b", take("stream.mu_b"))
    else:
        if any(k in cfg for k in ("stream.p", "stream.mu_a", "stream.mu_b")):
            raise ConfigError("stream.* rate keys only apply to synthetic streams")
        if not data_path:
            raise ConfigError("dataset stream needs data.path")
        if not data_preset:
            raise ConfigError("dataset stream needs data.preset")

    horizon_raw = take("horizon")
    horizon_explicit = horizon_raw is not None
    if horizon_explicit:
        horizon = _as_int("horizon", horizon_raw, minimum=1)
    else:
        horizon = 1000  # dataset mode replaces this with the test length

    source_default = "synthetic" if stream_kind == "synthetic" else "builtin"
    experts_source = take("experts.source", source_default)
    if experts_source not in ("synthetic", "file", "builtin"):
        raise ConfigError(f"experts.source: unknown source {experts_source!r}")

    profiles: list[tuple[str, ErrorProfile]] = []
    for key in cfg:
        if not key.startswith("experts.profile."):
            continue
        known.add(key)
        name = key[len("experts.profile."):]
        if not name:
            raise ConfigError(f"{key}: profile needs a name suffix")
        parts = [s.strip() for s in cfg[key].split(",")]
        if len(parts) != 4:
            raise ConfigError(
                f"{key}: expected 4 error rates (e_a_neg, e_a_pos, e_b_neg, e_b_pos)")
        rates = [_as_prob(key, s) for s in parts]
        profiles.append((name, ErrorProfile(*rates)))

    experts_file = take("experts.file")
    kinds_raw = take("experts.kinds", "logistic,stump")
    kinds = tuple(s.strip() for s in kinds_raw.split(",") if s.strip())
    include_group = _as_bool("experts.include_group", take("experts.include_group", "true"))
    epochs = _as_int("experts.epochs", take("experts.epochs", "500"), minimum=1)

    if experts_source == "synthetic":
        if len(profiles) < 2:
            raise ConfigError("experts.source=synthetic needs at least 2 experts.profile.* keys")
    elif experts_source == "file":
        if not experts_file:
            raise ConfigError("experts.source=file needs experts.file")
    else:  # builtin
        if stream_kind != "dataset":
            raise ConfigError("experts.source=builtin needs a dataset stream to train on")
        if len(kinds) < 2:
            raise ConfigError("experts.kinds: need at least 2 entries")
        for k in kinds:
            if k not in ("logistic", "stump"):
                raise ConfigError(f"experts.kinds: unknown kind {k!r}")

    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ConfigError(f"{source}: unknown keys: {', '.join(unknown)}")

    run = RunConfig(
        engine=engine, horizon=horizon, eta=eta, seed=seed, trials=trials,
        lam=lam, b_tolerance=b_tol, dirichlet_alpha=dirichlet_alpha,
        q_recompute_stride=stride, fairness_budget=budget, allow_empty=allow_empty)
    return ExperimentSpec(
        run=run, raw=cfg, horizon_explicit=horizon_explicit,
        stream_kind=stream_kind, stream_p=p, stream_mu_a=mu_a, stream_mu_b=mu_b,
        data_path=data_path, data_preset=data_preset, split_ratio=split_ratio,
        experts_source=experts_source, profiles=tuple(profiles),
        experts_file=experts_file, experts_kinds=kinds,
        include_group=include_group, epochs=epochs, epsilon=epsilon)


def load_spec(args) -> ExperimentSpec:
    cfg = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = str(args.seed)
    if getattr(args, "trials", None) is not None:
        cfg["trials"] = str(args.trials)
    return build_spec(cfg, source=str(args.config))


# ---------------------------------------------------------------------------
# Payload preparation (everything trials share, built once)


@dataclass
class TrialPayload:
    run: RunConfig
    stream_kind: str
    stream_params: tuple[float, float, float] | None
    test_examples: list | None
    ensemble: object
    epsilon: float | None


def prepare_payload(spec: ExperimentSpec) -> tuple[TrialPayload, dict]:
    """Resolve data, experts and the effective horizon; returns run info too."""
    run = spec.run
    info: dict = {"ingest_report": None, "data_stats": None}

    if spec.stream_kind == "synthetic":
        if spec.experts_source == "file":
            ensemble = load_prediction_file(spec.experts_file)
        else:
            ensemble = SyntheticEnsemble([p for _, p in spec.profiles],
                                         [n for n, _ in spec.profiles])
        stream_params = (spec.stream_p, spec.stream_mu_a, spec.stream_mu_b)
        test = None
    else:
        schema = load_preset(spec.data_preset)
        examples, report = load_dataset(spec.data_path, schema)
        info["ingest_report"] = report.to_dict()
        info["data_stats"] = dataset_stats(examples).to_dict()
        train, test = split_shuffle(examples, spec.split_ratio, run.seed)
        if not spec.horizon_explicit:
            run = dataclasses.replace(run, horizon=len(test))
        stream_params = None
        if spec.experts_source == "builtin":
            models, names = [], []
            for i, kind in enumerate(spec.experts_kinds):
                models.append(train_builtin(train, kind, epochs=spec.epochs,
                                            seed=run.seed + 7919 * i,
                                            include_group=spec.include_group))
                names.append(f"{kind}_{i}")
            ensemble = BuiltinEnsemble(names, models, spec.include_group)
        elif spec.experts_source == "file":
            ensemble = load_prediction_file(spec.experts_file)
        else:
            ensemble = SyntheticEnsemble([p for _, p in spec.profiles],
                                         [n for n, _ in spec.profiles])

    epsilon = spec.epsilon
    if epsilon is None and spec.experts_source == "synthetic" and spec.profiles:
        epsilon = max(p.max_cell_gap() for _, p in spec.profiles)

    info["d"] = ensemble.d
    info["experts"] = list(ensemble.names)
    info["eta"] = run.eta if run.eta is not None else recommended_eta(run.horizon, ensemble.d)
    logger.info("prepared %s run: d=%d, horizon=%d, eta=%g",
                run.engine, ensemble.d, run.horizon, info["eta"])
    return TrialPayload(run, spec.stream_kind, stream_params, test, ensemble, epsilon), info


# ---------------------------------------------------------------------------
# Per-trial execution (worker-safe)


_PAYLOAD: TrialPayload | None = None


def _worker_init(payload: TrialPayload) -> None:
    global _PAYLOAD
    _PAYLOAD = payload


def _margin_key(key) -> str:
    """Flatten a margin dict key to 'group/label/expert' text."""
    if isinstance(key, str):
        return key
    parts = []
    for part in key:
        if isinstance(part, int):
            parts.append("+" if part == 1 else "-")
        else:
            parts.append(str(part))
    return "/".join(parts)


def _run_one_trial(trial: int) -> dict:
    pl = _PAYLOAD
    cfg = pl.run
    if pl.stream_kind == "synthetic":
        stream_ss = trial_seed_sequence(cfg.seed, trial)[0]
        rng = np.random.default_rng(stream_ss)
        stream = synth_stream(*pl.stream_params, cfg.horizon, rng)
    else:
        stream = reshuffle(pl.test_examples, cfg.seed, trial)
    traj = run_trial(cfg, stream, pl.ensemble, trial)

    if traj.T == 0:
        summary = {"trial": trial, "error_rate": None, "err_a": None, "err_b": None,
                   "fpr_a": None, "fpr_b": None, "fnr_a": None, "fnr_b": None,
                   "fpr_gap": None, "fnr_gap": None, "eer_gap": None,
                   "regret_realized": None, "regret_expected": None,
                   "min_bound_margin": None, "gamma_eta": None, "epsilon_used": None,
                   "fairness_bound_rhs": None, "q_final": None, "alpha_sums": None,
                   "counts": [[0, 0], [0, 0]]}
        return {"trial": trial, "summary": summary,
                "series": np.zeros((0, 7)), "margins": {}, "violations": []}

    report = validate_bounds(traj, cfg, epsilon=pl.epsilon)
    rates = compute_rates(traj.confusion)
    reg_real, reg_exp = regret(traj)
    err_a, err_b = traj.group_error_rates()
    margins = {}
    for pool in (report.theorem1_margin, report.lemma1_margin, report.lemma2_margin):
        if pool:
            for k, v in pool.items():
                margins[_margin_key(k)] = float(v)
    violations = sorted((k, v) for k, v in margins.items() if v < MARGIN_THRESHOLD)

    summary = {
        "trial": trial,
        "error_rate": traj.error_rate(),
        "err_a": err_a, "err_b": err_b,
        "fpr_a": rates.fpr_a, "fpr_b": rates.fpr_b,
        "fnr_a": rates.fnr_a, "fnr_b": rates.fnr_b,
        "fpr_gap": rates.fpr_gap, "fnr_gap": rates.fnr_gap, "eer_gap": rates.eer_gap,
        "regret_realized": reg_real, "regret_expected": reg_exp,
        "min_bound_margin": report.min_margin(),
        "gamma_eta": report.gamma_eta,
        "epsilon_used": report.epsilon_used,
        "fairness_bound_rhs": report.fairness_bound_rhs,
        "q_final": None if traj.q_final is None else
                   [float(v) for v in np.asarray(traj.q_final.as_vector())],
        "alpha_sums": None if traj.alpha_sums is None else traj.alpha_sums.tolist(),
        "counts": traj.counts.tolist(),
    }
    if traj.q_used is not None:
        q_a, q_b = traj.q_used[:, 0], traj.q_used[:, 1]
    else:
        q_a = q_b = np.full(traj.T, np.nan)
    series = np.column_stack([
        traj.regret_realized, traj.regret_expected,
        traj.fpr_gap, traj.fnr_gap, traj.eer_gap, q_a, q_b])
    return {"trial": trial, "summary": summary, "series": series,
            "margins": margins, "violations": violations}


def execute_trials(payload: TrialPayload, workers: int) -> list[dict]:
    """Run all trials; results come back in trial order regardless of workers."""
    trials = payload.run.trials
    if workers <= 1 or trials == 1:
        _worker_init(payload)
        return [_run_one_trial(i) for i in range(trials)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                             initargs=(payload,)) as pool:
        return list(pool.map(_run_one_trial, range(trials)))


# ---------------------------------------------------------------------------
# Output assembly


def _jsonsafe(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonsafe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonsafe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonsafe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def _write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonsafe(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _aggregate(results: list[dict], key: str) -> dict:
    vals = [r["summary"][key] for r in results]
    defined = np.array([v for v in vals if v is not None], dtype=float)
    if defined.size == 0:
        return {"mean": None, "std": None, "count": 0}
    return {"mean": float(defined.mean()), "std": float(defined.std()),
            "count": int(defined.size)}


_AGG_KEYS = ("error_rate", "err_a", "err_b", "fpr_gap", "fnr_gap", "eer_gap",
             "regret_realized", "regret_expected", "min_bound_margin")


def summary_doc(spec: ExperimentSpec, payload: TrialPayload, info: dict,
                results: list[dict]) -> dict:
    run = payload.run
    agg = {k: _aggregate(results, k) for k in _AGG_KEYS}
    budget = {"fpr": run.fairness_budget[0], "fnr": run.fairness_budget[1]}
    for k in ("fpr", "fnr"):
        mean = agg[f"{k}_gap"]["mean"]
        budget[f"{k}_within"] = None if mean is None else bool(mean <= budget[k])
    return {
        "engine": run.engine,
        "horizon": run.horizon,
        "eta": info["eta"],
        "seed": run.seed,
        "trials": run.trials,
        "d": info["d"],
        "experts": info["experts"],
        "config": dict(spec.raw),
        "ingest_report": info["ingest_report"],
        "data_stats": info["data_stats"],
        "trial_results": [r["summary"] for r in results],
        "aggregate": agg,
        "fairness_budget": budget,
    }


def _nanmean_cols(block: np.ndarray) -> np.ndarray:
    """Column means ignoring NaN; NaN where no trial has a value."""
    mask = np.isfinite(block)
    count = mask.sum(axis=0)
    total = np.where(mask, block, 0.0).sum(axis=0)
    out = np.full(block.shape[1], np.nan)
    np.divide(total, count, out=out, where=count > 0)
    return out


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


def write_rounds_csv(path: Path, engine: str, results: list[dict], T: int) -> None:
    lines = [ROUNDS_HEADER]
    if T > 0:
        stack = np.stack([r["series"] for r in results])  # (trials, T, 7)
        t = np.arange(1, T + 1, dtype=float)
        reg_real = stack[:, :, 0].mean(axis=0) / t
        reg_exp = stack[:, :, 1].mean(axis=0) / t
        gaps = [_nanmean_cols(stack[:, :, j]) for j in (2, 3, 4, 5, 6)]
        for i in range(T):
            cells = [str(i + 1), engine, repr(float(reg_real[i])), repr(float(reg_exp[i]))]
            cells += [_fmt(col[i]) for col in gaps]
            lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_run(args) -> int:
    spec = load_spec(args)
    payload, info = prepare_payload(spec)
    results = execute_trials(payload, args.workers)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "summary.json", summary_doc(spec, payload, info, results))
    write_rounds_csv(outdir / "rounds.csv", payload.run.engine, results, payload.run.horizon)
    logger.info("wrote %s and rounds.csv", outdir / "summary.json")
    return 0


def cmd_validate_bounds(args) -> int:
    spec = load_spec(args)
    payload, info = prepare_payload(spec)
    results = execute_trials(payload, args.workers)
    violations = [{"trial": r["trial"], "name": name, "margin": margin}
                  for r in results for name, margin in r["violations"]]
    doc = {
        "engine": payload.run.engine,
        "eta": info["eta"],
        "trials": payload.run.trials,
        "threshold": MARGIN_THRESHOLD,
        "ok": not violations,
        "violations": violations,
        "trial_reports": [{
            "trial": r["trial"],
            "gamma_eta": r["summary"]["gamma_eta"],
            "epsilon_used": r["summary"]["epsilon_used"],
            "fairness_bound_rhs": r["summary"]["fairness_bound_rhs"],
            "min_margin": r["summary"]["min_bound_margin"],
            "margins": r["margins"],
        } for r in results],
    }
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "bounds.json", doc)
    if violations:
        first = violations[0]
        print(f"bound violation: trial {first['trial']}, {first['name']}, "
              f"margin {first['margin']!r}", file=sys.stderr)
        return 5
    logger.info("all margins >= %g across %d trials", MARGIN_THRESHOLD, len(results))
    return 0


def cmd_stats(args) -> int:
    schema = load_preset(args.preset)
    examples, report = load_dataset(args.data, schema)
    stats = dataset_stats(examples)
    _, test = split_shuffle(examples, args.split_ratio, args.seed)
    doc = {
        "stats": {**stats.to_dict(), "n_rounds": len(test), "n_total": len(examples)},
        "split_ratio": args.split_ratio,
        "ingest_report": report.to_dict(),
    }
    print(json.dumps(_jsonsafe(doc), indent=2, sort_keys=True))
    return 0


def _parse_sweep_values(param: str, text: str) -> list[tuple[str, dict[str, str]]]:
    """Return (label, config-key overrides) per swept value."""
    items: list[tuple[str, dict[str, str]]] = []
    if param in ("eta", "q_recompute_stride"):
        values = [s.strip() for s in text.split(",") if s.strip()]
        for v in values:
            if param == "eta":
                items.append((v, {"eta": v}))
            else:
                items.append((v, {"stride": v}))
    else:  # lambda | b_tolerance: semicolon-separated comma triples
        prefix = "lambda" if param == "lambda" else "b"
        for triple in (s.strip() for s in text.split(";") if s.strip()):
            parts = [p.strip() for p in triple.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"sweep value {triple!r}: expected 3 comma-separated numbers")
            items.append((triple, {f"{prefix}.fpr": parts[0], f"{prefix}.fnr": parts[1],
                                   f"{prefix}.regret": parts[2]}))
    if not items:
        raise ConfigError("sweep needs at least one value")
    return items


def cmd_sweep(args) -> int:
    base = parse_config(args.config)
    if args.seed is not None:
        base["seed"] = str(args.seed)
    if args.trials is not None:
        base["trials"] = str(args.trials)
    values = _parse_sweep_values(args.param, args.values)
    outroot = Path(args.out)
    outroot.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, (label, overrides) in enumerate(values):
        cfg = {**base, **overrides}
        spec = build_spec(cfg, source=f"{args.config}[{args.param}={label}]")
        payload, info = prepare_payload(spec)
        results = execute_trials(payload, args.workers)
        sub = outroot / f"{args.param}_{i}"
        sub.mkdir(parents=True, exist_ok=True)
        _write_json(sub / "summary.json", summary_doc(spec, payload, info, results))
        write_rounds_csv(sub / "rounds.csv", payload.run.engine, results, payload.run.horizon)
        manifest.append({"index": i, "value": label, "dir": sub.name})
        logger.info("sweep %s=%s done", args.param, label)
    _write_json(outroot / "sweep.json", {"parameter": args.param, "values": manifest})
    return 0


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairmw",
        description="Run online expert-selection experiments with fairness accounting.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="parallel trial workers")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--trials", type=int, default=None, help="override config trials")

    p_run = sub.add_parser("run", help="execute trials, write summary.json/rounds.csv")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate-bounds", help="check deterministic bound margins")
    add_common(p_val)
    p_val.set_defaults(func=cmd_validate_bounds)

    p_stats = sub.add_parser("stats", help="dataset statistics as JSON on stdout")
    p_stats.add_argument("--data", required=True, help="dataset CSV path")
    p_stats.add_argument("--preset", required=True, help="schema preset name or path")
    p_stats.add_argument("--split-ratio", type=float, default=0.7)
    p_stats.add_argument("--seed", type=int, default=0)
    p_stats.set_defaults(func=cmd_stats)

    p_sweep = sub.add_parser("sweep", help="repeat a run across parameter values")
    add_common(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         choices=["eta", "lambda", "b_tolerance", "q_recompute_stride"])
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values; semicolon-separated triples "
                              "for lambda/b_tolerance")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def _init_logging() -> None:
    level_name = os.environ.get("FAIRMW_LOG", "warn").lower()
    level = _LOG_LEVELS.get(level_name, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    if level_name not in _LOG_LEVELS:
        logger.warning("unknown FAIRMW_LOG value %r, using warn", level_name)


def main(argv=None) -> int:
    _init_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (SchemaError, FormatError, EmptyDataset, DegenerateData, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except FairmwError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
