"""Monte Carlo studies: coverage, width, and comparison tables.

One engine, run_sweep, drives every study.  A replicate draws a dataset,
builds weights, evaluates the interval envelope over a sensitivity grid,
and records coverage of the design's true effect, interval widths, the
per-replicate tipping point, the naive point estimate, and optional
bootstrap intervals.  Studies differ only in how they arrange sweeps and
flatten them into rows.

Reproducibility contract: replicate r uses seed base_seed + r, bootstrap
resampling inside replicate r uses a fixed large offset from that seed,
and replications are independent, so serial and multi-worker execution
produce identical tables (timing metadata aside).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .core import ARM_LABELS, TboundsError, build_arm_distribution
from .bounds import extract_multipliers, sensitivity_envelope, worst_case_bounds
from .baselines import bootstrap_ci, naive_point_estimate
from .dgp import generate, preset, tail_trimmed_lambda, true_ate
from .weights import (
    count_clamped,
    fit_membership,
    inverse_odds_weights,
    oracle_gaussian_weights,
    weight_diagnostics,
)

WEIGHT_MODES = ("oracle", "fitted", "fitted_x1")

_BOOT_SEED_OFFSET = 10**9
_ORACLE_SEED = 77_000_001
_Z95 = 1.959963984540054


class ReplicateFailure(TboundsError):
    """A replicate raised; the message carries its seed for replay."""


def wilson_interval(successes, trials, z=_Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials)) / denom
    # endpoints are exact at the boundary proportions; avoid rounding drift
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class ReplicationResult:
    """Per-replicate record of one sweep."""

    replicate_id: int
    intervals: tuple
    covered: tuple
    lambda_min: float
    naive: float
    bootstrap: tuple = None
    weight_ess: float = 0.0
    weight_max: float = 0.0
    weight_clamped: int = 0

    def __post_init__(self):
        if len(self.intervals) != len(self.covered):
            raise ValueError("intervals and covered must align")
        flags = np.asarray(self.covered, dtype=bool)
        # nesting: once an interval covers the truth, wider ones must too
        if np.any(np.diff(flags.astype(int)) < 0):
            raise ValueError("covered flags must be monotone along the grid")


@dataclass(frozen=True)
class LambdaRow:
    """Aggregated metrics at one grid value."""

    lam: float
    coverage: float
    cov_low: float
    cov_high: float
    mean_width: float
    oracle_width: float = float("nan")
    sharpness: float = float("nan")


@dataclass(frozen=True)
class SweepSummary:
    """Everything a sweep produced: per-grid rows plus raw replications."""

    grid: tuple
    rows: tuple
    replications: tuple
    true_tau: float
    n_r: int
    n_o: int
    n_reps: int
    weight_mode: str
    base_seed: int
    bounds_seconds: float
    total_seconds: float

    def __post_init__(self):
        if len(self.grid) != len(self.rows):
            raise ValueError("grid and rows must align")
        if len(self.grid) > 1 and np.any(np.diff(np.asarray(self.grid)) <= 0):
            raise ValueError("grid must be strictly increasing")

    def _index(self, lam):
        grid = np.asarray(self.grid)
        k = int(np.argmin(np.abs(grid - lam)))
        if abs(grid[k] - lam) > 1e-9:
            raise KeyError(f"lambda {lam} not on the sweep grid")
        return k

    def coverage_at(self, lam) -> float:
        return self.rows[self._index(lam)].coverage

    def width_at(self, lam) -> float:
        return self.rows[self._index(lam)].mean_width

    def lambda_min_values(self) -> tuple:
        return tuple(rep.lambda_min for rep in self.replications)


def _weights_for(draw, spec, weight_mode):
    if weight_mode == "oracle":
        shift = spec.bounds.delta if spec.kind == "bounded" else spec.mu_shift
        return oracle_gaussian_weights(draw.trial.x, shift), 0
    if weight_mode in ("fitted", "fitted_x1"):
        subset = (0,) if weight_mode == "fitted_x1" else None
        model = fit_membership(draw.trial.x, draw.target.x, feature_subset=subset)
        return inverse_odds_weights(model, draw.trial.x), count_clamped(model, draw.trial.x)
    raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}, got {weight_mode!r}")


def _one_replicate(spec, n_r, n_o, grid, weight_mode, base_seed, r, bootstrap_resamples):
    seed = base_seed + r
    try:
        draw = generate(spec, n_r, n_o, seed)
        w, clamped = _weights_for(draw, spec, weight_mode)
        diag = weight_diagnostics(w, clamped)
        t0 = perf_counter()
        env = sensitivity_envelope(draw.trial, w, grid)
        bounds_dt = perf_counter() - t0
        covered = tuple(bool(c) for c in env.covers(draw.true_tau))
        boot = None
        if bootstrap_resamples:
            res = bootstrap_ci(draw.trial, w, n_resamples=bootstrap_resamples,
                               seed=_BOOT_SEED_OFFSET + seed)
            boot = (res.lower, res.upper)
        rep = ReplicationResult(
            replicate_id=r,
            intervals=env.intervals,
            covered=covered,
            lambda_min=env.smallest_covering(draw.true_tau),
            naive=naive_point_estimate(draw.trial, w),
            bootstrap=boot,
            weight_ess=diag["effective_sample_size"],
            weight_max=diag["max_weight"],
            weight_clamped=diag["clamped_count"],
        )
        return rep, bounds_dt, draw.true_tau
    except ReplicateFailure:
        raise
    except Exception as exc:
        raise ReplicateFailure(f"replicate {r} (seed {seed}) failed: {exc}") from exc


def run_sweep(spec, n_r, n_o, lambda_grid, n_reps, weight_mode="oracle", seed=0,
              workers=1, bootstrap_resamples=None, oracle_n=None) -> SweepSummary:
    """Replicate generate -> weight -> envelope and aggregate per grid value.

    With oracle_n set, one extra large draw supplies the oracle widths and
    the per-grid sharpness ratios (mean width / oracle width).
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    if weight_mode not in WEIGHT_MODES:
        raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}, got {weight_mode!r}")
    grid = tuple(float(g) for g in lambda_grid)
    t_start = perf_counter()

    def job(r):
        return _one_replicate(spec, n_r, n_o, grid, weight_mode, seed, r, bootstrap_resamples)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, range(n_reps)))
    else:
        outcomes = [job(r) for r in range(n_reps)]

    reps = tuple(o[0] for o in outcomes)
    bounds_seconds = float(sum(o[1] for o in outcomes))
    true_tau = outcomes[0][2]

    oracle_widths = np.full(len(grid), np.nan)
    if oracle_n is not None:
        oracle_widths = _oracle_widths(spec, grid, weight_mode, oracle_n, _ORACLE_SEED)

    rows = []
    for k, lam in enumerate(grid):
        hits = sum(rep.covered[k] for rep in reps)
        lo, hi = wilson_interval(hits, n_reps)
        mean_width = float(np.mean([rep.intervals[k].width for rep in reps]))
        ow = float(oracle_widths[k])
        sharp = mean_width / ow if np.isfinite(ow) and ow > 0 else float("nan")
        rows.append(LambdaRow(lam=lam, coverage=hits / n_reps, cov_low=lo, cov_high=hi,
                              mean_width=mean_width, oracle_width=ow, sharpness=sharp))
    return SweepSummary(
        grid=grid,
        rows=tuple(rows),
        replications=reps,
        true_tau=true_tau,
        n_r=n_r,
        n_o=n_o,
        n_reps=n_reps,
        weight_mode=weight_mode,
        base_seed=seed,
        bounds_seconds=bounds_seconds,
        total_seconds=perf_counter() - t_start,
    )


def _oracle_widths(spec, grid, weight_mode, n_big, seed):
    if n_big < 10**4:
        raise ValueError("oracle width needs n_big >= 1e4")
    draw = generate(spec, n_big, n_big, seed)
    w, _ = _weights_for(draw, spec, weight_mode)
    env = sensitivity_envelope(draw.trial, w, grid)
    return env.widths()


def oracle_width(spec, lam, weight_mode="oracle", n_big=10**5, seed=_ORACLE_SEED) -> float:
    """Envelope width on one very large draw; the sharpness denominator."""
    return float(_oracle_widths(spec, (float(lam),), weight_mode, n_big, seed)[0])


def breakeven_lambda(sweep, target_coverage=0.95):
    """First grid value whose coverage reaches the target, else None."""
    for row in sweep.rows:
        if row.coverage >= target_coverage:
            return row.lam
    return None


def default_breakeven_grid():
    """Linear grid with step 0.1, the resolution the breakeven table uses."""
    return tuple(np.round(np.arange(1.0, 2.5 + 1e-9, 0.1), 10))


def breakeven_study(gamma_os, n_r=500, n_o=1000, n_reps=200, lambda_grid=None,
                    weight_mode="oracle", seed=0, alpha=0.01, target_coverage=0.95,
                    workers=1):
    """Breakeven sensitivity level per moderator-shift strength.

    Each row pairs the empirical breakeven (smallest grid value reaching
    target coverage) with the analytic tail-trimmed level implied by the
    design at the same shift.
    """
    grid = default_breakeven_grid() if lambda_grid is None else tuple(lambda_grid)
    rows = []
    for gamma_o in gamma_os:
        spec = preset("linear", gamma_o=float(gamma_o))
        sweep = run_sweep(spec, n_r, n_o, grid, n_reps, weight_mode=weight_mode,
                          seed=seed, workers=workers)
        be = breakeven_lambda(sweep, target_coverage)
        rows.append({
            "gamma_o": float(gamma_o),
            "breakeven_lambda": be,
            "tail_trimmed_lambda": tail_trimmed_lambda(spec, alpha),
            "true_tau": sweep.true_tau,
            "coverage_at_max_lambda": sweep.rows[-1].coverage,
        })
    return rows


def baselines_study(spec, n_r=500, n_o=1000, lams=(1.5, 2.0), n_reps=200,
                    bootstrap_resamples=200, weight_mode="oracle", seed=0, workers=1):
    """Interval procedures side by side: naive point, bootstrap CI around
    it, sharp bounds per sensitivity level, and the worst-case interval."""
    grid = tuple(sorted(float(l) for l in lams))
    sweep = run_sweep(spec, n_r, n_o, grid, n_reps, weight_mode=weight_mode, seed=seed,
                      workers=workers, bootstrap_resamples=bootstrap_resamples)
    tau = sweep.true_tau
    reps = sweep.replications

    # worst-case intervals need their own pass over the same draws
    wc_covered, wc_widths = [], []
    for rep in reps:
        draw = generate(spec, n_r, n_o, seed + rep.replicate_id)
        w, _ = _weights_for(draw, spec, weight_mode)
        wc = worst_case_bounds(draw.trial, w)
        wc_covered.append(wc.contains(tau))
        wc_widths.append(wc.width)

    naive_vals = np.array([rep.naive for rep in reps])
    boot = np.array([rep.bootstrap for rep in reps])
    boot_cov = np.mean((boot[:, 0] <= tau) & (tau <= boot[:, 1]))
    rows = []

    def with_wilson(row, hits):
        lo, hi = wilson_interval(hits, len(reps))
        row.update(cov_low=lo, cov_high=hi)
        return row

    rows.append(with_wilson({
        "procedure": "naive", "lam": "",
        "coverage": float(np.mean(naive_vals == tau)),
        "mean_width": 0.0,
        "mean_point": float(naive_vals.mean()),
        "sd_point": float(naive_vals.std(ddof=1)),
    }, int(np.sum(naive_vals == tau))))
    rows.append(with_wilson({
        "procedure": "bootstrap", "lam": "",
        "coverage": float(boot_cov),
        "mean_width": float(np.mean(boot[:, 1] - boot[:, 0])),
        "mean_point": float(naive_vals.mean()),
        "sd_point": float(naive_vals.std(ddof=1)),
    }, int(round(boot_cov * len(reps)))))
    for k, lam in enumerate(grid):
        row = sweep.rows[k]
        rows.append({
            "procedure": "sharp", "lam": lam,
            "coverage": row.coverage, "cov_low": row.cov_low, "cov_high": row.cov_high,
            "mean_width": row.mean_width, "mean_point": "", "sd_point": "",
        })
    rows.append(with_wilson({
        "procedure": "worst_case", "lam": "",
        "coverage": float(np.mean(wc_covered)),
        "mean_width": float(np.mean(wc_widths)),
        "mean_point": "", "sd_point": "",
    }, int(np.sum(wc_covered))))
    return rows


def scaling_study(spec, n_r_list, lam=2.0, n_reps=300, n_o=1000, weight_mode="oracle",
                  seed=0, workers=1, oracle_n=10**5):
    """Coverage, width, sharpness, and bounds-only wall time per trial size."""
    sizes = [int(n) for n in n_r_list]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("n_r_list must be strictly increasing")
    ow = oracle_width(spec, lam, weight_mode=weight_mode, n_big=oracle_n)
    rows = []
    for n_r in sizes:
        sweep = run_sweep(spec, n_r, n_o, (float(lam),), n_reps,
                          weight_mode=weight_mode, seed=seed, workers=workers)
        row = sweep.rows[0]
        rows.append({
            "n_r": n_r,
            "coverage": row.coverage,
            "cov_low": row.cov_low,
            "cov_high": row.cov_high,
            "mean_width": row.mean_width,
            "oracle_width": ow,
            "sharpness": row.mean_width / ow if ow > 0 else float("nan"),
            "bounds_ms_per_call": 1000.0 * sweep.bounds_seconds / n_reps,
        })
    return rows


def id_vs_est_study(spec, n_r_list=(200, 1000, 5000), n_o=1000, lams=(2.0,),
                    n_reps=200, bootstrap_resamples=200, weight_mode="oracle",
                    seed=0, workers=1):
    """Estimation error shrinks with n while identification error does not:
    bootstrap CIs around the naive point versus sharp bounds, across sizes."""
    grid = tuple(sorted(float(l) for l in lams))
    rows = []
    for n_r in n_r_list:
        sweep = run_sweep(spec, int(n_r), n_o, grid, n_reps, weight_mode=weight_mode,
                          seed=seed, workers=workers, bootstrap_resamples=bootstrap_resamples)
        tau = sweep.true_tau
        boot = np.array([rep.bootstrap for rep in sweep.replications])
        hits = int(np.sum((boot[:, 0] <= tau) & (tau <= boot[:, 1])))
        lo, hi = wilson_interval(hits, n_reps)
        rows.append({
            "n_r": int(n_r), "procedure": "bootstrap", "lam": "",
            "coverage": hits / n_reps, "cov_low": lo, "cov_high": hi,
            "mean_width": float(np.mean(boot[:, 1] - boot[:, 0])),
        })
        for k, lam in enumerate(grid):
            row = sweep.rows[k]
            rows.append({
                "n_r": int(n_r), "procedure": "sharp", "lam": lam,
                "coverage": row.coverage, "cov_low": row.cov_low, "cov_high": row.cov_high,
                "mean_width": row.mean_width,
            })
    return rows


def robustness_study(kinds=("linear", "nonlinear", "binary", "heavy_tail"),
                     lams=(1.5, 2.0, 3.0), n_r=500, n_o=1000, n_reps=200,
                     weight_mode="oracle", seed=0, workers=1):
    """Coverage and width per (outcome family, sensitivity level)."""
    grid = tuple(sorted(float(l) for l in lams))
    rows = []
    for kind in kinds:
        sweep = run_sweep(preset(kind), n_r, n_o, grid, n_reps,
                          weight_mode=weight_mode, seed=seed, workers=workers)
        for k, lam in enumerate(grid):
            row = sweep.rows[k]
            rows.append({
                "kind": kind, "lam": lam, "true_tau": sweep.true_tau,
                "coverage": row.coverage, "cov_low": row.cov_low, "cov_high": row.cov_high,
                "mean_width": row.mean_width,
            })
    return rows


def weight_sensitivity_study(spec, lams=(1.5, 2.0), n_r=500, n_o=1000, n_reps=150,
                             strategies=WEIGHT_MODES, seed=0, workers=1):
    """Oracle vs estimated vs deliberately misspecified weights."""
    if spec.kind != "linear":
        raise ValueError("weight sensitivity study is defined for the linear kind")
    grid = tuple(sorted(float(l) for l in lams))
    rows = []
    for strategy in strategies:
        sweep = run_sweep(spec, n_r, n_o, grid, n_reps, weight_mode=strategy,
                          seed=seed, workers=workers)
        ess = [rep.weight_ess for rep in sweep.replications]
        wmax = [rep.weight_max for rep in sweep.replications]
        clamped = sum(rep.weight_clamped for rep in sweep.replications)
        for k, lam in enumerate(grid):
            row = sweep.rows[k]
            rows.append({
                "strategy": strategy, "lam": lam,
                "coverage": row.coverage, "cov_low": row.cov_low, "cov_high": row.cov_high,
                "mean_width": row.mean_width,
                "mean_ess": float(np.mean(ess)),
                "median_ess": float(np.median(ess)),
                "mean_max_weight": float(np.mean(wmax)),
                "total_clamped": int(clamped),
            })
    return rows


@dataclass(frozen=True)
class BangBangSnapshot:
    """Single-draw multiplier profiles for every arm and direction."""

    lam: float
    distributions: dict = field(repr=False)
    multipliers: dict = field(repr=False)

    def table(self):
        rows = []
        for (arm, direction), m in sorted(self.multipliers.items()):
            dist = self.distributions[arm]
            for i in range(dist.n):
                rows.append({
                    "arm": arm, "direction": direction, "index": i,
                    "outcome": float(dist.outcomes[i]),
                    "prob": float(dist.probs[i]),
                    "multiplier": float(m.values[i]),
                })
        return rows


def bangbang_snapshot(spec, n_r=500, lam=2.0, seed=0, n_o=None, weight_mode="oracle"):
    """Optimal multiplier vectors on one draw, for the tilting picture."""
    draw = generate(spec, n_r, n_o if n_o is not None else n_r, seed)
    w, _ = _weights_for(draw, spec, weight_mode)
    dists = {arm: build_arm_distribution(draw.trial, w, arm) for arm in ARM_LABELS}
    multipliers = {
        (arm, direction): extract_multipliers(dists[arm], lam, direction)
        for arm in ARM_LABELS
        for direction in ("lower", "upper")
    }
    return BangBangSnapshot(lam=float(lam), distributions=dists, multipliers=multipliers)
