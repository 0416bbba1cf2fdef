"""Comparator procedures: the naive transported estimate and its bootstrap.

The naive estimator reweights each arm to the target covariate law and
differences the arm means.  It is consistent only when covariates carry
the whole trial-to-target shift; an unmeasured moderator leaves it biased
no matter the sample size, which is what the bounds machinery quantifies.
"""

from dataclasses import dataclass

import numpy as np

from .core import ARM_LABELS, DegenerateResampleError, TrialDataset, build_arm_distribution
from .weights import fit_membership, inverse_odds_weights

_MAX_REDRAWS = 100


def naive_point_estimate(dataset, raw_weights) -> float:
    """Difference of within-arm weighted outcome means.

    Weight normalization happens separately inside each arm, so the
    estimate is invariant to rescaling the raw weights.  Equals either
    endpoint of ate_bounds at lam = 1.
    """
    plus = build_arm_distribution(dataset, raw_weights, ARM_LABELS[1])
    minus = build_arm_distribution(dataset, raw_weights, ARM_LABELS[0])
    return plus.mean() - minus.mean()


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile bootstrap interval around the naive point estimate."""

    lower: float
    upper: float
    point: float
    level: float
    n_resamples: int

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _resample_indices(rng, n, a):
    """Index vector for one resample, redrawn while an arm comes up empty."""
    for _ in range(_MAX_REDRAWS + 1):
        idx = rng.integers(0, n, size=n)
        arms = a[idx]
        if (arms == ARM_LABELS[0]).any() and (arms == ARM_LABELS[1]).any():
            return idx
    raise DegenerateResampleError(
        f"could not draw a resample with both arms in {_MAX_REDRAWS + 1} attempts"
    )


def bootstrap_ci(dataset, raw_weights=None, target=None, n_resamples=200, level=0.95,
                 seed=0, feature_subset=None) -> BootstrapResult:
    """Nonparametric bootstrap percentile interval for the naive estimator.

    Two weighting modes:
      raw_weights given   weights are held fixed; resampled units keep
                          their original weight (the default framing)
      target given        the membership model is refit on every resample,
                          with the target covariate rows resampled too

    Trial units are resampled with replacement; a resample that empties an
    arm is redrawn, up to 100 retries.  Deterministic given the seed.
    """
    if (raw_weights is None) == (target is None):
        raise ValueError("provide exactly one of raw_weights (fixed mode) or target (refit mode)")
    if n_resamples < 50:
        raise ValueError("n_resamples must be at least 50")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n = dataset.n
    if raw_weights is not None:
        raw_weights = np.asarray(raw_weights, dtype=np.float64)
        point = naive_point_estimate(dataset, raw_weights)
    else:
        model = fit_membership(dataset.x, target.x, feature_subset=feature_subset)
        point = naive_point_estimate(dataset, inverse_odds_weights(model, dataset.x))
    estimates = np.empty(n_resamples)
    for b in range(n_resamples):
        idx = _resample_indices(rng, n, dataset.a)
        ds_b = TrialDataset(x=dataset.x[idx], a=dataset.a[idx], y=dataset.y[idx])
        if raw_weights is not None:
            w_b = raw_weights[idx]
        else:
            tgt_idx = rng.integers(0, target.n, size=target.n)
            model_b = fit_membership(ds_b.x, target.x[tgt_idx], feature_subset=feature_subset)
            w_b = inverse_odds_weights(model_b, ds_b.x)
        estimates[b] = naive_point_estimate(ds_b, w_b)
    half = (1.0 - level) / 2.0
    lo, hi = np.quantile(estimates, [half, 1.0 - half])
    return BootstrapResult(lower=float(lo), upper=float(hi), point=float(point),
                           level=float(level), n_resamples=int(n_resamples))
