"""Core data types for transported-effect bounds.

The estimation setting: a randomized trial with outcomes ``y``, arms
``a`` in {-1, +1}, and covariates ``x``; plus a covariate-only sample
from the target population.  Each unit carries a positive baseline
weight (typically an inverse-odds weight for target membership).  Per
arm, normalizing the weights yields a weighted empirical outcome
distribution, and the bounds machinery re-tilts that distribution by a
multiplier constrained to ``[1/lam, lam]``.

This module holds the validated containers that the rest of the package
passes around, plus the shared exception types.  Everything is
immutable: arrays are copied on construction and marked read-only, so
values can be shared freely across threads and processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ARM_LABELS = (-1, 1)

# Tolerances used by container validation.  Mass conservation is checked
# at 1e-12 on construction; multiplier normalization at 1e-10.
MASS_TOL = 1e-12
MULTIPLIER_NORM_TOL = 1e-10


class TboundsError(Exception):
    """Base class for all package-specific failures."""


class InvalidLambdaError(TboundsError, ValueError):
    """Sensitivity parameter outside [1, inf)."""


class InvalidWeightError(TboundsError, ValueError):
    """Baseline weights must be finite and strictly positive."""


class EmptyArmError(TboundsError):
    """A requested arm has no units (data failure, CLI exit code 4)."""


class GridError(TboundsError, ValueError):
    """A sensitivity grid is empty, unsorted, or dips below 1."""


class SeparationError(TboundsError):
    """Membership fit diverged (perfectly separable populations)."""


class RejectionStallError(TboundsError):
    """Truncated-normal rejection sampling exceeded the attempt cap."""


class DegenerateResampleError(TboundsError):
    """Bootstrap could not draw a resample with both arms populated."""


class UnsupportedKindError(TboundsError, ValueError):
    """Raised when an operation needs analytic structure a kind lacks."""


class DataFormatError(TboundsError, ValueError):
    """Malformed input file (CLI exit code 2)."""


def as_lambda(value) -> float:
    """Validate a sensitivity parameter and return it as a plain float.

    Accepts floats, ints, or a SensitivityParam.  lam = 1 recovers point
    identification; lam < 1 or a non-finite value is rejected.
    """
    lam = float(value)
    if not np.isfinite(lam) or lam < 1.0:
        raise InvalidLambdaError(f"sensitivity parameter must satisfy lam >= 1, got {value!r}")
    return lam


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SensitivityParam:
    """Likelihood-ratio bound lam >= 1 on the target/trial outcome densities."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", as_lambda(self.value))

    def __float__(self) -> float:
        return self.value

    @property
    def is_point_identified(self) -> bool:
        return self.value == 1.0


@dataclass(frozen=True)
class TrialUnit:
    """A single trial record: covariates, arm label in {-1, +1}, outcome."""

    x: tuple
    a: int
    y: float

    def __post_init__(self):
        if self.a not in ARM_LABELS:
            raise ValueError(f"arm label must be -1 or +1, got {self.a}")
        if not np.isfinite(self.y):
            raise ValueError("outcome must be finite")


@dataclass(frozen=True)
class TrialDataset:
    """Immutable column store for a randomized trial sample.

    Parameters
    ----------
    x : array_like, shape (n, p)
        Covariate matrix.
    a : array_like, shape (n,)
        Arm labels, each -1 or +1.
    y : array_like, shape (n,)
        Observed outcomes.
    """

    x: np.ndarray
    a: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        a = np.asarray(self.a)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"covariates must be 2-d, got shape {x.shape}")
        n = x.shape[0]
        if a.shape != (n,) or y.shape != (n,):
            raise ValueError(f"column lengths disagree: x {x.shape}, a {a.shape}, y {y.shape}")
        if n == 0:
            raise ValueError("dataset must contain at least one unit")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates must be finite")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcomes must be finite")
        a = a.astype(np.int64)
        if not np.all(np.isin(a, ARM_LABELS)):
            raise ValueError("arm labels must be coded -1 / +1")
        object.__setattr__(self, "x", _frozen_array(x))
        object.__setattr__(self, "a", _frozen_array(a, dtype=np.int64))
        object.__setattr__(self, "y", _frozen_array(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def arm_mask(self, arm: int) -> np.ndarray:
        if arm not in ARM_LABELS:
            raise ValueError(f"arm label must be -1 or +1, got {arm}")
        return self.a == arm

    def unit(self, i: int) -> TrialUnit:
        return TrialUnit(x=tuple(self.x[i]), a=int(self.a[i]), y=float(self.y[i]))


@dataclass(frozen=True)
class TargetCovariates:
    """Covariate-only sample from the target population, shape (n, p)."""

    x: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError(f"target covariates must be a nonempty 2-d array, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("target covariates must be finite")
        object.__setattr__(self, "x", _frozen_array(x))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class ArmDistribution:
    """Weighted empirical outcome distribution for one arm.

    ``outcomes`` is sorted ascending (stable sort, original-index
    tie-break) and ``probs`` are the matching normalized weights.
    Atoms are kept per unit; tied outcomes are not merged.
    """

    arm: int
    outcomes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        if self.arm not in ARM_LABELS:
            raise ValueError(f"arm label must be -1 or +1, got {self.arm}")
        outcomes = np.asarray(self.outcomes, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if outcomes.ndim != 1 or outcomes.shape != probs.shape or outcomes.size == 0:
            raise ValueError("outcomes and probs must be matching nonempty 1-d arrays")
        if np.any(np.diff(outcomes) < 0):
            raise ValueError("outcomes must be sorted ascending")
        if not np.all(np.isfinite(probs)) or np.any(probs <= 0):
            raise InvalidWeightError("probabilities must be finite and strictly positive")
        total = float(probs.sum())
        if abs(total - 1.0) > MASS_TOL * max(1.0, probs.size):
            raise ValueError(f"probabilities must sum to 1, got {total!r}")
        object.__setattr__(self, "outcomes", _frozen_array(outcomes))
        object.__setattr__(self, "probs", _frozen_array(probs))

    @property
    def n(self) -> int:
        return self.outcomes.size

    def mean(self) -> float:
        return float(self.probs @ self.outcomes)


@dataclass(frozen=True)
class BoundInterval:
    """A [lower, upper] identification interval at sensitivity level lam."""

    lower: float
    upper: float
    lam: float

    def __post_init__(self):
        lower = float(self.lower)
        upper = float(self.upper)
        if not (np.isfinite(lower) and np.isfinite(upper)):
            raise ValueError("interval endpoints must be finite")
        if lower > upper:
            raise ValueError(f"lower bound {lower} exceeds upper bound {upper}")
        lam = float(self.lam)
        if not (lam >= 1.0 or np.isinf(lam)):
            raise InvalidLambdaError(f"sensitivity parameter must satisfy lam >= 1, got {self.lam!r}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lam", lam)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class Envelope:
    """Identification intervals across an ascending sensitivity grid."""

    grid: np.ndarray
    intervals: tuple

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0:
            raise GridError("grid must be a nonempty 1-d array")
        if grid.size != len(self.intervals):
            raise GridError("grid and intervals must have equal length")
        if np.any(np.diff(grid) <= 0):
            raise GridError("grid must be strictly increasing")
        object.__setattr__(self, "grid", _frozen_array(grid))
        object.__setattr__(self, "intervals", tuple(self.intervals))

    def __len__(self) -> int:
        return len(self.intervals)

    def lowers(self) -> np.ndarray:
        return np.array([iv.lower for iv in self.intervals])

    def uppers(self) -> np.ndarray:
        return np.array([iv.upper for iv in self.intervals])

    def widths(self) -> np.ndarray:
        return self.uppers() - self.lowers()

    def covers(self, value: float) -> np.ndarray:
        """Boolean per grid point: does the interval contain value."""
        return np.array([iv.contains(value) for iv in self.intervals])

    def smallest_covering(self, value: float):
        """Smallest grid value whose interval contains value, else None."""
        hits = self.covers(value)
        if not hits.any():
            return None
        return float(self.grid[int(np.argmax(hits))])


@dataclass(frozen=True)
class Multipliers:
    """Optimal likelihood-ratio multipliers aligned to ArmDistribution order.

    The optimum is bang-bang: every value sits at 1/lam or lam except at
    most one interior coordinate, and values are weakly monotone in the
    sorted-outcome order (nondecreasing for the upper bound,
    nonincreasing for the lower).
    """

    values: np.ndarray
    lam: float
    direction: str
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        lam = as_lambda(self.lam)
        if self.direction not in ("lower", "upper"):
            raise ValueError(f"direction must be 'lower' or 'upper', got {self.direction!r}")
        values = np.asarray(self.values, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
            raise ValueError("values and probs must be matching nonempty 1-d arrays")
        inv = 1.0 / lam
        tol = 1e-12 * lam
        if np.any(values < inv - tol) or np.any(values > lam + tol):
            raise ValueError("multipliers must lie in [1/lam, lam]")
        norm = float(probs @ values)
        if abs(norm - 1.0) > MULTIPLIER_NORM_TOL:
            raise ValueError(f"multipliers must satisfy sum(p * lam_i) = 1, got {norm!r}")
        interior = np.count_nonzero((values > inv + tol) & (values < lam - tol))
        if interior > 1:
            raise ValueError(f"bang-bang violated: {interior} interior multipliers")
        diffs = np.diff(values)
        if self.direction == "upper" and np.any(diffs < -tol):
            raise ValueError("upper-bound multipliers must be nondecreasing")
        if self.direction == "lower" and np.any(diffs > tol):
            raise ValueError("lower-bound multipliers must be nonincreasing")
        object.__setattr__(self, "values", _frozen_array(values))
        object.__setattr__(self, "probs", _frozen_array(probs))
        object.__setattr__(self, "lam", lam)

    @property
    def n_interior(self) -> int:
        inv = 1.0 / self.lam
        tol = 1e-12 * self.lam
        return int(np.count_nonzero((self.values > inv + tol) & (self.values < self.lam - tol)))


def validate_weights(raw_weights, n: int) -> np.ndarray:
    """Check baseline weights: shape (n,), finite, strictly positive."""
    w = np.asarray(raw_weights, dtype=np.float64)
    if w.shape != (n,):
        raise InvalidWeightError(f"weights must have shape ({n},), got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidWeightError("weights must be finite")
    if np.any(w <= 0):
        raise InvalidWeightError("weights must be strictly positive")
    return w


def build_arm_distribution(dataset: TrialDataset, raw_weights, arm: int) -> ArmDistribution:
    """Normalize weights within one arm and sort its outcomes.

    Weights are normalized by the within-arm total, so a global rescaling
    of the raw weights leaves the distribution unchanged.  Sorting is
    stable with original-index tie-breaking.
    """
    w = validate_weights(raw_weights, dataset.n)
    mask = dataset.arm_mask(arm)
    if not mask.any():
        raise EmptyArmError(f"no units in arm {arm:+d}")
    y = dataset.y[mask]
    w_arm = w[mask]
    order = np.argsort(y, kind="stable")
    probs = w_arm / w_arm.sum()
    return ArmDistribution(arm=arm, outcomes=y[order], probs=probs[order])
