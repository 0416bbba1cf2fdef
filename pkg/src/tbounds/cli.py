"""Command-line front end.

Subcommands
-----------
bounds      sharp interval at one sensitivity level from trial/target CSVs
envelope    interval per grid value as CSV (geometric grid), optional figure
simulate    write a simulated trial/target CSV pair plus a truth JSON
experiment  run a named Monte Carlo study; writes CSV tables, a manifest
            JSON, and figures into an output directory

Data formats
------------
Trial CSV header is ``x1,...,xp,a,y`` with arm labels in {-1, 1}; labels
in {0, 1} are accepted with --binary-arm and remapped to {-1, +1}.  Target
CSV header is ``x1,...,xp``.  UTF-8, comma separated, '.' decimal point.
Config files are flat ``key=value`` lines; ``#`` starts a comment.  The
same ``key=value`` tokens may be given on the command line and win over
the file.

All floats are written with 17 significant digits, so outputs round-trip
exactly and identical runs diff byte-identically.  JSON objects use a
fixed field order.

Exit codes: 0 ok, 2 usage or parse failure, 3 numerical failure, 4 data
failure.  The environment variable TB_SEED, when set, overrides --seed.
"""

import argparse
import csv
import json
import math
import os
import sys
from time import perf_counter

import numpy as np

from .core import (
    DataFormatError,
    DegenerateResampleError,
    EmptyArmError,
    GridError,
    InvalidLambdaError,
    InvalidWeightError,
    RejectionStallError,
    SeparationError,
    TargetCovariates,
    TrialDataset,
    UnsupportedKindError,
)
from .bounds import ate_bounds, sensitivity_envelope
from .baselines import naive_point_estimate
from .dgp import KINDS, BoundedConfig, generate, preset
from .weights import count_clamped, fit_membership, inverse_odds_weights, weight_diagnostics
from .experiments import (
    ReplicateFailure,
    bangbang_snapshot,
    baselines_study,
    breakeven_study,
    default_breakeven_grid,
    id_vs_est_study,
    robustness_study,
    run_sweep,
    scaling_study,
    weight_sensitivity_study,
)

_USAGE_ERRORS = (InvalidLambdaError, GridError, UnsupportedKindError, DataFormatError)
_NUMERIC_ERRORS = (SeparationError, RejectionStallError, InvalidWeightError,
                   ReplicateFailure, np.linalg.LinAlgError)
_DATA_ERRORS = (EmptyArmError, DegenerateResampleError)


# ---------------------------------------------------------------------------
# serialization helpers

def _fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def _cell(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt_float(value)
    return str(value)


def _json_text(obj) -> str:
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    return json.dumps(obj)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_json_text(obj) + "\n")


def _write_rows_csv(path, rows):
    fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_cell(row.get(name, "")) for name in fieldnames])


# ---------------------------------------------------------------------------
# CSV ingestion

def _read_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _float_field(token, path, lineno, column):
    try:
        return float(token)
    except ValueError:
        raise DataFormatError(
            f"{path} line {lineno}: column '{column}' has non-numeric value {token!r}"
        ) from None


def _x_header_width(header, path):
    p = 0
    while p < len(header) and header[p] == f"x{p + 1}":
        p += 1
    if p == 0:
        raise DataFormatError(f"{path}: header must start with covariate columns x1,...,xp")
    return p


def read_trial_csv(path, binary_arm=False) -> TrialDataset:
    """Parse a trial CSV with header x1,...,xp,a,y into a TrialDataset."""
    rows = _read_csv(path)
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    p = _x_header_width(header, path)
    expected = [f"x{j}" for j in range(1, p + 1)] + ["a", "y"]
    if header != expected:
        for column in ("a", "y"):
            if column not in header:
                raise DataFormatError(
                    f"{path}: missing required column '{column}' "
                    f"(expected header {','.join(expected)})"
                )
        raise DataFormatError(f"{path}: expected header {','.join(expected)}, "
                              f"got {','.join(header)}")
    allowed = {0.0, 1.0} if binary_arm else {-1.0, 1.0}
    x_rows, arms, outcomes = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != p + 2:
            raise DataFormatError(
                f"{path} line {lineno}: expected {p + 2} fields, got {len(row)}"
            )
        x_rows.append([_float_field(row[j], path, lineno, f"x{j + 1}") for j in range(p)])
        arm = _float_field(row[p], path, lineno, "a")
        if arm not in allowed:
            hint = "" if binary_arm else " (use --binary-arm for 0/1 labels)"
            raise DataFormatError(
                f"{path} line {lineno}: arm must be one of "
                f"{sorted(int(v) for v in allowed)}, got {row[p]!r}{hint}"
            )
        arms.append(int(2 * arm - 1) if binary_arm else int(arm))
        outcomes.append(_float_field(row[p + 1], path, lineno, "y"))
    if not x_rows:
        raise DataFormatError(f"{path}: no data rows")
    return TrialDataset(np.asarray(x_rows), np.asarray(arms), np.asarray(outcomes))


def read_target_csv(path) -> TargetCovariates:
    """Parse a target CSV with header x1,...,xp into TargetCovariates."""
    rows = _read_csv(path)
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    p = _x_header_width(header, path)
    if header != [f"x{j}" for j in range(1, p + 1)]:
        raise DataFormatError(f"{path}: header must be exactly x1,...,xp")
    x_rows = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != p:
            raise DataFormatError(f"{path} line {lineno}: expected {p} fields, got {len(row)}")
        x_rows.append([_float_field(row[j], path, lineno, f"x{j + 1}") for j in range(p)])
    if not x_rows:
        raise DataFormatError(f"{path}: no data rows")
    return TargetCovariates(np.asarray(x_rows))


def write_trial_csv(path, trial):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(1, trial.p + 1)] + ["a", "y"])
        for i in range(trial.n):
            writer.writerow([_fmt_float(v) for v in trial.x[i]]
                            + [str(int(trial.a[i])), _fmt_float(trial.y[i])])


def write_target_csv(path, target):
    x = target.x
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(1, x.shape[1] + 1)])
        for i in range(x.shape[0]):
            writer.writerow([_fmt_float(v) for v in x[i]])


# ---------------------------------------------------------------------------
# config parsing

def _read_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    out = {}
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise DataFormatError(f"{path} line {lineno}: expected key=value, got {text!r}")
        key, _, value = text.partition("=")
        out[key.strip()] = value.strip()
    return out


def _collect_raw_config(args):
    raw = {}
    if getattr(args, "config", None):
        raw.update(_read_config_file(args.config))
    for item in getattr(args, "overrides", None) or []:
        if "=" not in item:
            raise DataFormatError(f"expected key=value override, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def _typed_value(raw, default, key):
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], str):
                return tuple(items)
            if default and isinstance(default[0], int):
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
        return raw
    except ValueError as exc:
        raise DataFormatError(f"config key '{key}': {exc}") from exc


def _resolve_config(defaults, raw, context):
    config = dict(defaults)
    for key, value in raw.items():
        if key not in defaults:
            raise DataFormatError(f"unknown config key '{key}' for {context}")
        config[key] = _typed_value(value, defaults[key], key)
    return config


def _parse_feature_subset(text, p):
    indices = []
    for token in text.split(","):
        token = token.strip()
        name = token[1:] if token.startswith("x") else token
        try:
            j = int(name)
        except ValueError:
            raise DataFormatError(
                f"feature subset entries must be column names like x1, got {token!r}"
            ) from None
        if not 1 <= j <= p:
            raise DataFormatError(f"feature subset column {token!r} outside x1..x{p}")
        indices.append(j - 1)
    if not indices:
        raise DataFormatError("feature subset must name at least one column")
    return tuple(sorted(set(indices)))


# ---------------------------------------------------------------------------
# shared command plumbing

def _load_csv_pair(args):
    trial = read_trial_csv(args.trial_csv, binary_arm=args.binary_arm)
    target = read_target_csv(args.target_csv)
    if target.x.shape[1] != trial.p:
        raise DataFormatError(
            f"trial has {trial.p} covariates but target has {target.x.shape[1]}"
        )
    return trial, target


def _fitted_weights(trial, target, weight_mode, feature_subset_text):
    subset = None
    if feature_subset_text:
        subset = _parse_feature_subset(feature_subset_text, trial.p)
    if weight_mode == "fitted_x1":
        subset = (0,)
    model = fit_membership(trial.x, target.x, feature_subset=subset)
    return inverse_odds_weights(model, trial.x), model


def _require_lambda_at_least_one(lam):
    if not (lam >= 1.0):
        raise InvalidLambdaError("lambda must be >= 1")


# ---------------------------------------------------------------------------
# commands

def cmd_bounds(args) -> int:
    _require_lambda_at_least_one(args.lam)
    trial, target = _load_csv_pair(args)
    weights, model = _fitted_weights(trial, target, args.weight_mode, args.feature_subset)
    interval = ate_bounds(trial, weights, args.lam)
    diag = weight_diagnostics(weights, count_clamped(model, trial.x))
    payload = {
        "lambda": float(args.lam),
        "lower": interval.lower,
        "upper": interval.upper,
        "width": interval.width,
        "naive_point": naive_point_estimate(trial, weights),
        "n_r": trial.n,
        "n_o": target.x.shape[0],
        "ess": diag["effective_sample_size"],
    }
    print(_json_text(payload))
    return 0


def cmd_envelope(args) -> int:
    if not (args.lambda_min >= 1.0):
        raise InvalidLambdaError("lambda_min must be >= 1")
    if not (args.lambda_max >= args.lambda_min):
        raise InvalidLambdaError("lambda_max must be >= lambda_min")
    if args.grid_points < 2:
        raise GridError("grid_points must be at least 2")
    trial, target = _load_csv_pair(args)
    weights, _ = _fitted_weights(trial, target, args.weight_mode, args.feature_subset)
    # geometric spacing; a degenerate [c, c] range repeats one interval
    grid = np.geomspace(args.lambda_min, args.lambda_max, args.grid_points)
    unique = np.unique(grid)
    env = sensitivity_envelope(trial, weights, unique)
    positions = np.searchsorted(unique, grid)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["lambda", "lower", "upper", "width"])
    for lam, k in zip(grid, positions):
        iv = env.intervals[k]
        writer.writerow([_fmt_float(lam), _fmt_float(iv.lower),
                         _fmt_float(iv.upper), _fmt_float(iv.width)])
    if args.figure:
        from . import figures
        naive = naive_point_estimate(trial, weights)
        figures.envelope_figure(grid, [env.intervals[k].lower for k in positions],
                                [env.intervals[k].upper for k in positions],
                                args.figure, naive=naive)
    return 0


_SIM_KEY_TYPES = {
    "kind": str, "p": int, "mu_shift": float, "gamma_r": float, "gamma_o": float,
    "beta0": float, "beta_x": tuple, "tau0": float, "beta_u": float, "sigma": float,
    "cov_box": float, "y_low": float, "y_high": float, "delta": float,
}
_BOUNDS_KEYS = ("cov_box", "y_low", "y_high", "delta")


def _spec_from_config(raw):
    config = {}
    for key, value in raw.items():
        caster = _SIM_KEY_TYPES.get(key)
        if caster is None:
            raise DataFormatError(f"unknown config key '{key}'")
        try:
            if caster is tuple:
                config[key] = tuple(float(s) for s in value.split(",") if s.strip())
            else:
                config[key] = caster(value)
        except ValueError as exc:
            raise DataFormatError(f"config key '{key}': {exc}") from exc
    kind = config.pop("kind", "linear")
    if kind not in KINDS:
        raise DataFormatError(f"unknown kind {kind!r}; choose one of {', '.join(KINDS)}")
    bounds_fields = {k: config.pop(k) for k in _BOUNDS_KEYS if k in config}
    if bounds_fields and kind != "bounded":
        key = next(iter(bounds_fields))
        raise DataFormatError(f"config key '{key}' is only valid for kind=bounded")
    if kind == "bounded":
        base = preset("bounded").bounds
        config["bounds"] = BoundedConfig(
            cov_box=bounds_fields.get("cov_box", base.cov_box),
            y_low=bounds_fields.get("y_low", base.y_low),
            y_high=bounds_fields.get("y_high", base.y_high),
            delta=bounds_fields.get("delta", base.delta),
        )
    try:
        return preset(kind, **config)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from exc


def _spec_echo(spec):
    bounds = None
    if spec.bounds is not None:
        bounds = {"cov_box": spec.bounds.cov_box, "y_low": spec.bounds.y_low,
                  "y_high": spec.bounds.y_high, "delta": spec.bounds.delta}
    return {
        "kind": spec.kind, "p": spec.p, "mu_shift": spec.mu_shift,
        "gamma_r": spec.gamma_r, "gamma_o": spec.gamma_o, "beta0": spec.beta0,
        "beta_x": list(spec.beta_x), "tau0": spec.tau0, "beta_u": spec.beta_u,
        "sigma": spec.sigma, "bounds": bounds,
    }


def cmd_simulate(args) -> int:
    spec = _spec_from_config(_collect_raw_config(args))
    try:
        draw = generate(spec, args.n_r, args.n_o, args.seed)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from exc
    prefix = args.out_prefix
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    trial_path = prefix + "_trial.csv"
    target_path = prefix + "_target.csv"
    truth_path = prefix + "_truth.json"
    write_trial_csv(trial_path, draw.trial)
    write_target_csv(target_path, draw.target)
    _write_json(truth_path, {
        "true_tau": draw.true_tau,
        "spec": _spec_echo(spec),
        "seed": args.seed,
        "n_r": args.n_r,
        "n_o": args.n_o,
    })
    for path in (trial_path, target_path, truth_path):
        print(path)
    return 0


# ---------------------------------------------------------------------------
# experiment dispatch

_DGP_NUMERIC = ("mu_shift", "gamma_r", "gamma_o", "tau0", "beta_u", "sigma")
_DGP_DEFAULTS = {"mu_shift": 0.5, "gamma_r": 0.0, "gamma_o": 0.5,
                 "tau0": 1.0, "beta_u": 0.5, "sigma": 1.0}

_EXPERIMENT_DEFAULTS = {
    "sweep": {
        "kind": "linear", **_DGP_DEFAULTS,
        "n_r": 500, "n_o": 1000, "n_reps": 200,
        "lambda_grid": (1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.8, 2.0, 2.5, 3.0),
        "weight_mode": "oracle", "bootstrap_resamples": 0, "oracle_n": 0,
    },
    "breakeven": {
        "gamma_os": (0.25, 0.5, 0.75, 1.0),
        "n_r": 500, "n_o": 1000, "n_reps": 200,
        "lambda_grid": default_breakeven_grid(),
        "alpha": 0.01, "target_coverage": 0.95, "weight_mode": "oracle",
    },
    "baselines": {
        "kind": "linear", **_DGP_DEFAULTS,
        "n_r": 500, "n_o": 1000, "n_reps": 200, "lams": (2.0,),
        "bootstrap_resamples": 200, "weight_mode": "oracle",
    },
    "scaling": {
        "kind": "linear", **_DGP_DEFAULTS,
        "n_r_list": (1000, 10000, 100000), "lam": 2.0,
        "n_reps": 100, "n_o": 1000, "oracle_n": 100000, "weight_mode": "oracle",
    },
    "robustness": {
        "kinds": ("linear", "nonlinear", "binary", "heavy_tail"),
        "lams": (1.5, 2.0, 3.0),
        "n_r": 500, "n_o": 1000, "n_reps": 200, "weight_mode": "oracle",
    },
    "weights": {
        **_DGP_DEFAULTS,
        "lams": (1.5, 2.0), "n_r": 500, "n_o": 1000, "n_reps": 150,
    },
    "id-vs-est": {
        "kind": "linear", **_DGP_DEFAULTS,
        "n_r_list": (200, 1000, 5000), "n_o": 1000, "lams": (2.0,),
        "n_reps": 200, "bootstrap_resamples": 200, "weight_mode": "oracle",
    },
    "bangbang": {
        "kind": "linear", **_DGP_DEFAULTS,
        "n_r": 500, "lam": 2.0, "weight_mode": "oracle",
    },
}


def _config_spec(config):
    return preset(config["kind"], **{k: config[k] for k in _DGP_NUMERIC})


def _sweep_tables(config, seed, workers):
    sweep = run_sweep(
        _config_spec(config), config["n_r"], config["n_o"], config["lambda_grid"],
        config["n_reps"], weight_mode=config["weight_mode"], seed=seed, workers=workers,
        bootstrap_resamples=config["bootstrap_resamples"] or None,
        oracle_n=config["oracle_n"] or None,
    )
    rows = [{"lam": r.lam, "coverage": r.coverage, "cov_low": r.cov_low,
             "cov_high": r.cov_high, "mean_width": r.mean_width,
             "oracle_width": r.oracle_width, "sharpness": r.sharpness}
            for r in sweep.rows]
    reps = []
    for rep in sweep.replications:
        row = {"replicate_id": rep.replicate_id, "lambda_min": rep.lambda_min,
               "naive": rep.naive, "ess": rep.weight_ess,
               "max_weight": rep.weight_max, "clamped": rep.weight_clamped}
        if rep.bootstrap is not None:
            row["boot_lower"], row["boot_upper"] = rep.bootstrap
        reps.append(row)
    return {"sweep.csv": rows, "replicates.csv": reps}


def _breakeven_tables(config, seed, workers):
    rows = breakeven_study(
        config["gamma_os"], n_r=config["n_r"], n_o=config["n_o"],
        n_reps=config["n_reps"], lambda_grid=config["lambda_grid"],
        weight_mode=config["weight_mode"], seed=seed, alpha=config["alpha"],
        target_coverage=config["target_coverage"], workers=workers,
    )
    return {"breakeven.csv": rows}


def _baselines_tables(config, seed, workers):
    rows = baselines_study(
        _config_spec(config), n_r=config["n_r"], n_o=config["n_o"],
        lams=config["lams"], n_reps=config["n_reps"],
        bootstrap_resamples=config["bootstrap_resamples"],
        weight_mode=config["weight_mode"], seed=seed, workers=workers,
    )
    return {"baselines.csv": rows}


def _scaling_tables(config, seed, workers):
    rows = scaling_study(
        _config_spec(config), config["n_r_list"], lam=config["lam"],
        n_reps=config["n_reps"], n_o=config["n_o"],
        weight_mode=config["weight_mode"], seed=seed, workers=workers,
        oracle_n=config["oracle_n"],
    )
    return {"scaling.csv": rows}


def _robustness_tables(config, seed, workers):
    rows = robustness_study(
        kinds=config["kinds"], lams=config["lams"], n_r=config["n_r"],
        n_o=config["n_o"], n_reps=config["n_reps"],
        weight_mode=config["weight_mode"], seed=seed, workers=workers,
    )
    return {"robustness.csv": rows}


def _weights_tables(config, seed, workers):
    spec = preset("linear", **{k: config[k] for k in _DGP_NUMERIC})
    rows = weight_sensitivity_study(
        spec, lams=config["lams"], n_r=config["n_r"], n_o=config["n_o"],
        n_reps=config["n_reps"], seed=seed, workers=workers,
    )
    return {"weights.csv": rows}


def _id_vs_est_tables(config, seed, workers):
    rows = id_vs_est_study(
        _config_spec(config), n_r_list=config["n_r_list"], n_o=config["n_o"],
        lams=config["lams"], n_reps=config["n_reps"],
        bootstrap_resamples=config["bootstrap_resamples"],
        weight_mode=config["weight_mode"], seed=seed, workers=workers,
    )
    return {"id_vs_est.csv": rows}


def _bangbang_tables(config, seed, workers):
    snap = bangbang_snapshot(
        _config_spec(config), n_r=config["n_r"], lam=config["lam"], seed=seed,
        weight_mode=config["weight_mode"],
    )
    return {"bangbang.csv": snap.table()}


_EXPERIMENT_RUNNERS = {
    "sweep": _sweep_tables,
    "breakeven": _breakeven_tables,
    "baselines": _baselines_tables,
    "scaling": _scaling_tables,
    "robustness": _robustness_tables,
    "weights": _weights_tables,
    "id-vs-est": _id_vs_est_tables,
    "bangbang": _bangbang_tables,
}

# experiment name -> (table the figure reads, renderer attribute on figures)
_EXPERIMENT_FIGURES = {
    "sweep": ("sweep.csv", "sweep_figure"),
    "breakeven": ("breakeven.csv", "breakeven_figure"),
    "baselines": ("baselines.csv", "baselines_figure"),
    "scaling": ("scaling.csv", "scaling_figure"),
    "robustness": ("robustness.csv", "robustness_figure"),
    "weights": ("weights.csv", "weights_figure"),
    "id-vs-est": ("id_vs_est.csv", "id_vs_est_figure"),
    "bangbang": ("bangbang.csv", "bangbang_figure"),
}


def cmd_experiment(args) -> int:
    name = args.name
    defaults = _EXPERIMENT_DEFAULTS[name]
    config = _resolve_config(defaults, _collect_raw_config(args), f"experiment '{name}'")
    os.makedirs(args.out_dir, exist_ok=True)
    start = perf_counter()
    tables = _EXPERIMENT_RUNNERS[name](config, args.seed, args.workers)
    wall = perf_counter() - start
    outputs = []
    for filename, rows in tables.items():
        _write_rows_csv(os.path.join(args.out_dir, filename), rows)
        outputs.append(filename)
    if not args.no_figures:
        from . import figures
        table_key, renderer = _EXPERIMENT_FIGURES[name]
        figure_name = name.replace("-", "_") + ".png"
        getattr(figures, renderer)(tables[table_key],
                                   os.path.join(args.out_dir, figure_name))
        outputs.append(figure_name)
    manifest = {
        "experiment": name,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in config.items()},
        "seed": args.seed,
        "workers": args.workers,
        "wall_seconds": wall,
        "outputs": outputs,
    }
    _write_json(os.path.join(args.out_dir, "manifest.json"), manifest)
    for filename in outputs + ["manifest.json"]:
        print(os.path.join(args.out_dir, filename))
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_csv_io_options(parser):
    parser.add_argument("--trial-csv", required=True,
                        help="trial data with header x1,...,xp,a,y")
    parser.add_argument("--target-csv", required=True,
                        help="target covariates with header x1,...,xp")
    parser.add_argument("--weight-mode", choices=("fitted", "fitted_x1"),
                        default="fitted",
                        help="membership-model weights on all covariates or x1 only")
    parser.add_argument("--feature-subset", default=None, metavar="COLS",
                        help="restrict the membership model, e.g. x1,x3")
    parser.add_argument("--binary-arm", action="store_true",
                        help="accept arm labels 0/1 and remap them to -1/+1")
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tbounds",
        description="Sharp bounds on a target-population average treatment effect "
                    "under a bounded outcome-density-ratio sensitivity model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bounds = sub.add_parser("bounds", help="interval at one sensitivity level")
    _add_csv_io_options(bounds)
    bounds.add_argument("--lambda", dest="lam", type=float, required=True,
                        help="sensitivity parameter, at least 1")
    bounds.set_defaults(func=cmd_bounds)

    envelope = sub.add_parser("envelope", help="interval per grid value as CSV")
    _add_csv_io_options(envelope)
    envelope.add_argument("--lambda-min", type=float, default=1.0)
    envelope.add_argument("--lambda-max", type=float, required=True)
    envelope.add_argument("--grid-points", type=int, default=21,
                          help="geometric grid size between the endpoints")
    envelope.add_argument("--figure", default=None, metavar="PATH",
                          help="also render the envelope to this PNG")
    envelope.set_defaults(func=cmd_envelope)

    simulate = sub.add_parser("simulate", help="write a simulated dataset pair")
    simulate.add_argument("--out-prefix", required=True,
                          help="writes PREFIX_trial.csv, PREFIX_target.csv, PREFIX_truth.json")
    simulate.add_argument("--n-r", type=int, required=True, help="trial sample size")
    simulate.add_argument("--n-o", type=int, required=True, help="target sample size")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--config", default=None, help="flat key=value design file")
    simulate.add_argument("overrides", nargs="*", metavar="key=value",
                          help="design overrides, e.g. kind=binary gamma_o=0.75")
    simulate.set_defaults(func=cmd_simulate, accepts_overrides=True)

    experiment = sub.add_parser("experiment", help="run a named study")
    experiment.add_argument("name", choices=sorted(_EXPERIMENT_RUNNERS))
    experiment.add_argument("--out-dir", required=True)
    experiment.add_argument("--seed", type=int, default=0)
    experiment.add_argument("--workers", type=int, default=1)
    experiment.add_argument("--config", default=None, help="flat key=value study file")
    experiment.add_argument("--no-figures", action="store_true",
                            help="skip PNG rendering")
    experiment.add_argument("overrides", nargs="*", metavar="key=value",
                            help="study overrides, e.g. n_reps=50 lams=1.5,2.0")
    experiment.set_defaults(func=cmd_experiment, accepts_overrides=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        # key=value overrides may follow optional flags, which the standard
        # positional matcher cannot express; fold leftovers back in by hand
        args, extras = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 2 if exc.code is None else int(exc.code)
    if extras:
        stray_flags = [e for e in extras if e.startswith("-")]
        if stray_flags or not getattr(args, "accepts_overrides", False):
            print(f"error: unrecognized arguments: {' '.join(extras)}", file=sys.stderr)
            return 2
        args.overrides = list(args.overrides or []) + extras
    if "TB_SEED" in os.environ and hasattr(args, "seed"):
        try:
            args.seed = int(os.environ["TB_SEED"])
        except ValueError:
            print("error: TB_SEED must be an integer", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
