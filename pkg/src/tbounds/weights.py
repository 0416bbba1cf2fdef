"""Inverse-odds weights for carrying trial estimates to a target population.

A logistic regression of the membership indicator (target vs trial) on
pooled covariates gives each trial unit a weight proportional to the
target/trial covariate density ratio.  Weighted arm means then estimate
target-population arm means.  For simulated Gaussian covariate shifts the
exact density ratio is available in closed form and serves as the oracle.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from .core import SeparationError, _frozen_array

COEF_GUARD = 30.0
CLAMP = 30.0
RIDGE = 1e-10


@dataclass(frozen=True)
class MembershipModel:
    """Fitted logistic membership model P(target | x).

    ``coefs`` always has full covariate length; slopes excluded by a
    feature subset are stored as exact zeros.
    """

    intercept: float
    coefs: np.ndarray
    n_r: int
    n_o: int
    converged: bool
    n_iter: int
    ll_trace: tuple = field(repr=False)

    def __post_init__(self):
        coefs = np.asarray(self.coefs, dtype=np.float64)
        if coefs.ndim != 1:
            raise ValueError("coefs must be a 1-d vector")
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(coefs))):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "coefs", _frozen_array(coefs))
        object.__setattr__(self, "ll_trace", tuple(self.ll_trace))

    def linear_predictor(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.intercept + x @ self.coefs


def _as_covariate_matrix(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty 2-d array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def fit_membership(trial_x, target_x, feature_subset=None, max_iter=100, tol=1e-8):
    """Fit the pooled logistic membership model by iteratively reweighted
    least squares.

    The pooled sample stacks trial rows (label 0) over target rows
    (label 1) and maximizes the binomial log-likelihood with a fixed
    ridge jitter on the normal equations.  Steps are halved whenever the
    penalized log-likelihood would decrease, so the recorded trace is
    nondecreasing.  ``feature_subset`` gives zero-based column indices;
    excluded slopes come back as exact zeros.

    Raises SeparationError when any coefficient escapes past 30, the
    signature of quasi-complete separation.
    """
    trial_x = _as_covariate_matrix(trial_x, "trial_x")
    target_x = _as_covariate_matrix(target_x, "target_x")
    if trial_x.shape[1] != target_x.shape[1]:
        raise ValueError("trial and target covariates must have equal width")
    p = trial_x.shape[1]
    if feature_subset is None:
        cols = np.arange(p)
    else:
        cols = np.asarray(sorted(set(int(j) for j in feature_subset)), dtype=int)
        if cols.size == 0 or cols.min() < 0 or cols.max() >= p:
            raise ValueError(f"feature_subset must be nonempty zero-based indices below {p}")
    n_r, n_o = trial_x.shape[0], target_x.shape[0]
    x = np.vstack([trial_x[:, cols], target_x[:, cols]])
    s = np.concatenate([np.zeros(n_r), np.ones(n_o)])
    design = np.column_stack([np.ones(x.shape[0]), x])
    k = design.shape[1]

    def penalized_ll(beta):
        eta = design @ beta
        ll = float(np.sum(s * log_expit(eta) + (1.0 - s) * log_expit(-eta)))
        return ll - 0.5 * RIDGE * float(beta @ beta)

    beta = np.zeros(k)
    ll = penalized_ll(beta)
    trace = [ll]
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        prob = expit(design @ beta)
        grad = design.T @ (s - prob) - RIDGE * beta
        hess = (design * (prob * (1.0 - prob))[:, None]).T @ design + RIDGE * np.eye(k)
        delta = np.linalg.solve(hess, grad)
        step = 1.0
        for _ in range(30):
            candidate = beta + step * delta
            ll_new = penalized_ll(candidate)
            if ll_new >= ll - 1e-10 * (1.0 + abs(ll)):
                break
            step *= 0.5
        else:
            break  # no ascent direction left within fp noise
        moved = step * float(np.max(np.abs(delta)))
        beta = candidate
        ll = ll_new
        trace.append(ll)
        if np.max(np.abs(beta)) > COEF_GUARD:
            raise SeparationError(
                "membership fit diverged (|coefficient| > 30); covariates likely separate the samples"
            )
        if moved < tol:
            converged = True
            break

    coefs = np.zeros(p)
    coefs[cols] = beta[1:]
    return MembershipModel(
        intercept=float(beta[0]),
        coefs=coefs,
        n_r=n_r,
        n_o=n_o,
        converged=converged,
        n_iter=n_iter,
        ll_trace=tuple(trace),
    )


def inverse_odds_weights(model, trial_x) -> np.ndarray:
    """exp of the linear predictor, the density-ratio weight up to a constant.

    Within-arm normalization later absorbs the constant prevalence
    factor, so the raw odds scale is fine.  The linear predictor is
    clamped to [-30, 30] against overflow; count_clamped reports how
    many units hit the clamp.
    """
    eta = np.clip(model.linear_predictor(trial_x), -CLAMP, CLAMP)
    return np.exp(eta)


def count_clamped(model, trial_x) -> int:
    """Number of units whose linear predictor exceeds the clamp range."""
    eta = model.linear_predictor(trial_x)
    return int(np.count_nonzero(np.abs(eta) > CLAMP))


def oracle_gaussian_weights(trial_x, mu_shift) -> np.ndarray:
    """Exact density ratio N(mu_shift*1, I) / N(0, I) at the trial rows.

    Also correct for truncated-normal covariates sharing a box, since the
    truncation constants cancel after within-arm normalization.
    """
    x = _as_covariate_matrix(trial_x, "trial_x")
    mu = float(mu_shift)
    p = x.shape[1]
    return np.exp(mu * x.sum(axis=1) - p * mu * mu / 2.0)


def weight_diagnostics(weights, clamped_count=0) -> dict:
    """Summary statistics used when comparing weighting strategies."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be a nonempty positive 1-d vector")
    total = float(w.sum())
    return {
        "max_weight": float(w.max()),
        "effective_sample_size": total * total / float(w @ w),
        "clamped_count": int(clamped_count),
    }
