"""Simulation designs: covariate-shifted populations with a hidden moderator.

Five outcome families share one skeleton.  Trial covariates are standard
normal (truncated to a box for the bounded kind), target covariates are
mean-shifted, and a moderator U depends on X1 with a population-specific
slope, so the target differs from the trial even given X.  Treatment is a
fair coin coded -1/+1.

Generator conventions, fixed here once:
  linear      Y = b0 + bx'X + A(tau0 + bu*U) + eps,  eps ~ N(0, sigma^2 + bu^2)
  heavy_tail  same mean; eps = t3 scaled to variance sigma^2 plus N(0, bu^2)
  nonlinear   Y = b0 + sin(pi X1/2) + X2^2 + A(tau0 + bu*|U|sign(X1)) + N(0, sigma^2)
  binary      Y ~ Bernoulli(expit(b0 + bx'X + A(tau0 + bu*U)))
  bounded     Y ~ TruncNormal(b0 + bx'X + A(tau0 + bu*U), sigma^2; [y_low, y_high])

The linear and heavy-tail families carry an extra independent noise term at
the moderator scale bu on top of sigma; the other families do not.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import expit
from scipy.stats import norm

from .core import (
    RejectionStallError,
    TargetCovariates,
    TrialDataset,
    UnsupportedKindError,
)

KINDS = ("linear", "nonlinear", "binary", "heavy_tail", "bounded")

# every replication shares one truth per spec; see true_ate
_TRUTH_SEED = 903_217
_TRUTH_N = 10**6
_MAX_REJECTION_ROUNDS = 10**6


@dataclass(frozen=True)
class BoundedConfig:
    """Supports for the bounded kind: covariate box half-width, outcome
    range, and the target covariate shift delta."""

    cov_box: float = 3.0
    y_low: float = -3.0
    y_high: float = 3.0
    delta: float = 0.5

    def __post_init__(self):
        if not self.cov_box > 0:
            raise ValueError("cov_box must be positive")
        if not self.y_low < self.y_high:
            raise ValueError("y_low must be below y_high")


@dataclass(frozen=True)
class DgpSpec:
    """Full parameterization of one simulation design.  Hashable, so truth
    values can be cached per spec."""

    kind: str
    p: int = 5
    mu_shift: float = 0.5
    gamma_r: float = 0.0
    gamma_o: float = 0.5
    beta0: float = 1.0
    beta_x: tuple = (0.3, 0.2, 0.1, 0.1, 0.1)
    tau0: float = 1.0
    beta_u: float = 0.5
    sigma: float = 1.0
    bounds: BoundedConfig = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be positive")
        beta_x = tuple(float(b) for b in self.beta_x)
        if len(beta_x) != self.p:
            raise ValueError(f"beta_x must have length p={self.p}, got {len(beta_x)}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if (self.kind == "bounded") != (self.bounds is not None):
            raise ValueError("bounds must be given exactly when kind='bounded'")
        object.__setattr__(self, "beta_x", beta_x)


_PRESETS = {
    "linear": {},
    "nonlinear": {},
    "heavy_tail": {},
    "binary": {"beta0": -0.5, "tau0": 0.5, "beta_u": 0.3},
    "bounded": {
        "beta_x": (0.5, 0.3, 0.2, 0.1, 0.1),
        "beta_u": 0.25,
        "gamma_o": 0.2,
        "bounds": BoundedConfig(),
    },
}


def preset(kind, **overrides) -> DgpSpec:
    """Default parameterization for a kind, with optional field overrides."""
    if kind not in _PRESETS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    fields = dict(_PRESETS[kind])
    fields.update(overrides)
    return DgpSpec(kind=kind, **fields)


@dataclass(frozen=True)
class SimDraw:
    """One simulated dataset pair plus the design's true target ATE."""

    trial: TrialDataset
    target: TargetCovariates
    true_tau: float
    seed: int

    def __post_init__(self):
        if not np.isfinite(self.true_tau):
            raise ValueError("true_tau must be finite")


def _truncated_normal(rng, mean, sd, low, high):
    """Rejection-sample entrywise truncated normals around a mean array.

    Each round redraws only the entries still outside [low, high]; raises
    after _MAX_REJECTION_ROUNDS rounds, which only happens when the
    acceptance probability of some entry is astronomically small.
    """
    mean = np.asarray(mean, dtype=np.float64)
    out = np.empty_like(mean)
    pending = np.ones(mean.shape, dtype=bool)
    for _ in range(_MAX_REJECTION_ROUNDS):
        k = int(pending.sum())
        if k == 0:
            return out
        z = mean[pending] + sd * rng.standard_normal(k)
        out[pending] = z
        still = pending.copy()
        still[pending] = (z < low) | (z > high)
        pending = still
    raise RejectionStallError(
        f"truncated-normal rejection made no progress after {_MAX_REJECTION_ROUNDS} rounds"
    )


def generate(spec, n_r, n_o, seed) -> SimDraw:
    """Draw one trial dataset and one target covariate sample.

    Deterministic given (spec, n_r, n_o, seed); the draw order is fixed:
    trial covariates, target covariates, moderator, arms, outcome noise.
    """
    if n_r < 2 or n_o < 2:
        raise ValueError("n_r and n_o must both be at least 2")
    rng = np.random.default_rng(seed)
    p = spec.p
    if spec.kind == "bounded":
        box = spec.bounds.cov_box
        trial_x = _truncated_normal(rng, np.zeros((n_r, p)), 1.0, -box, box)
        target_x = _truncated_normal(rng, np.full((n_o, p), spec.bounds.delta), 1.0, -box, box)
    else:
        trial_x = rng.standard_normal((n_r, p))
        target_x = rng.standard_normal((n_o, p)) + spec.mu_shift
    u = spec.gamma_r * trial_x[:, 0] + rng.standard_normal(n_r)
    a = 2 * rng.integers(0, 2, size=n_r) - 1
    beta = np.asarray(spec.beta_x)
    if spec.kind in ("linear", "heavy_tail"):
        loc = spec.beta0 + trial_x @ beta + a * (spec.tau0 + spec.beta_u * u)
        if spec.kind == "linear":
            y = loc + np.sqrt(spec.sigma**2 + spec.beta_u**2) * rng.standard_normal(n_r)
        else:
            y = (loc + np.sqrt(spec.sigma**2 / 3.0) * rng.standard_t(3, n_r)
                 + spec.beta_u * rng.standard_normal(n_r))
    elif spec.kind == "nonlinear":
        loc = (spec.beta0 + np.sin(np.pi * trial_x[:, 0] / 2.0) + trial_x[:, 1] ** 2
               + a * (spec.tau0 + spec.beta_u * np.abs(u) * np.sign(trial_x[:, 0])))
        y = loc + spec.sigma * rng.standard_normal(n_r)
    elif spec.kind == "binary":
        logit = spec.beta0 + trial_x @ beta + a * (spec.tau0 + spec.beta_u * u)
        y = (rng.random(n_r) < expit(logit)).astype(np.float64)
    else:
        loc = spec.beta0 + trial_x @ beta + a * (spec.tau0 + spec.beta_u * u)
        y = _truncated_normal(rng, loc, spec.sigma, spec.bounds.y_low, spec.bounds.y_high)
        assert y.min() >= spec.bounds.y_low and y.max() <= spec.bounds.y_high
    return SimDraw(
        trial=TrialDataset(x=trial_x, a=a, y=y),
        target=TargetCovariates(x=target_x),
        true_tau=true_ate(spec),
        seed=int(seed),
    )


def _truncated_mean(loc, sd, low, high):
    a = (low - loc) / sd
    b = (high - loc) / sd
    denom = np.clip(norm.cdf(b) - norm.cdf(a), 1e-300, None)
    return loc + sd * (norm.pdf(a) - norm.pdf(b)) / denom


@lru_cache(maxsize=None)
def _mc_truth(spec, n_truth, seed):
    rng = np.random.default_rng(seed)
    if spec.kind == "nonlinear":
        x1 = spec.mu_shift + rng.standard_normal(n_truth)
        u = spec.gamma_o * x1 + rng.standard_normal(n_truth)
        contrast = 2.0 * (spec.tau0 + spec.beta_u * np.abs(u) * np.sign(x1))
    elif spec.kind == "binary":
        x = spec.mu_shift + rng.standard_normal((n_truth, spec.p))
        u = spec.gamma_o * x[:, 0] + rng.standard_normal(n_truth)
        base = spec.beta0 + x @ np.asarray(spec.beta_x)
        contrast = expit(base + (spec.tau0 + spec.beta_u * u)) - expit(base - (spec.tau0 + spec.beta_u * u))
    else:
        box = spec.bounds.cov_box
        x = _truncated_normal(rng, np.full((n_truth, spec.p), spec.bounds.delta), 1.0, -box, box)
        u = spec.gamma_o * x[:, 0] + rng.standard_normal(n_truth)
        base = spec.beta0 + x @ np.asarray(spec.beta_x)
        lift = spec.tau0 + spec.beta_u * u
        contrast = (_truncated_mean(base + lift, spec.sigma, spec.bounds.y_low, spec.bounds.y_high)
                    - _truncated_mean(base - lift, spec.sigma, spec.bounds.y_low, spec.bounds.y_high))
    return float(contrast.mean())


def true_ate(spec, n_truth=_TRUTH_N, seed=None) -> float:
    """True target-population ATE for a design.

    Closed form for the linear-mean kinds: 2*tau0 + 2*beta_u*gamma_o*mu_shift.
    The other kinds integrate the potential-outcome contrast over the target
    law of (X, U) by Monte Carlo; results are cached per (spec, n, seed) so
    every replication of a study shares one truth.
    """
    if spec.kind in ("linear", "heavy_tail"):
        return 2.0 * spec.tau0 + 2.0 * spec.beta_u * spec.gamma_o * spec.mu_shift
    if n_truth < 10**5:
        raise ValueError("Monte Carlo truth needs n_truth >= 1e5")
    if seed is None:
        seed = _TRUTH_SEED
    return _mc_truth(spec, int(n_truth), int(seed))


def tail_trimmed_lambda(spec, alpha) -> float:
    """Smallest sensitivity bound holding off a trial-probability-alpha set.

    For the linear kind the conditional outcome laws are normal with equal
    variance v = sigma^2 + beta_u^2 and means differing by
    beta_u*(gamma_o - gamma_r)*x1, so the likelihood ratio is log-linear in
    y.  This returns exp of the (1 - alpha) quantile of |log LR| under the
    trial joint law of (X1, Y), found by integrating the conditional normal
    band probability over X1 and root-finding on the quantile level.
    """
    if spec.kind != "linear":
        raise UnsupportedKindError(f"tail-trimmed bound needs the linear kind, got {spec.kind!r}")
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    dif = spec.beta_u * (spec.gamma_o - spec.gamma_r)
    if dif == 0.0:
        return 1.0
    v = spec.sigma**2 + spec.beta_u**2
    sd = np.sqrt(v)

    def central_mass(w):
        def integrand(x):
            d = dif * x
            if d == 0.0:
                return norm.pdf(x)
            c = w * v / abs(d)
            band = norm.cdf((0.5 * d + c) / sd) - norm.cdf((0.5 * d - c) / sd)
            return band * norm.pdf(x)

        val, _ = quad(integrand, 0.0, np.inf, limit=200)
        return 2.0 * val

    w = brentq(lambda w: central_mass(w) - (1.0 - alpha), 1e-9, 60.0, xtol=1e-10)
    return float(np.exp(w))
