"""Bound-route tests.

The greedy fill, the exhaustive threshold enumeration, and the quantile
functional are three independent derivations of the same arm bound.
Expected values below were worked out by hand from the linear-program
definition before any route was implemented.
"""

import numpy as np
import pytest

from tbounds.core import (
    ArmDistribution,
    BoundInterval,
    EmptyArmError,
    GridError,
    InvalidLambdaError,
    TrialDataset,
    build_arm_distribution,
)
from tbounds.bounds import (
    ate_bounds,
    default_lambda_grid,
    extract_multipliers,
    greedy_arm_bound,
    oracle_arm_bound,
    quantile_functional_bound,
    sensitivity_envelope,
    worst_case_bounds,
)

ROUTES = [greedy_arm_bound, oracle_arm_bound, quantile_functional_bound]


def dist(outcomes, probs, arm=1):
    return ArmDistribution(arm=arm, outcomes=np.asarray(outcomes, float), probs=np.asarray(probs, float))


def two_arm_dataset(y_plus, y_minus, w_plus=None, w_minus=None):
    y = np.concatenate([y_plus, y_minus]).astype(float)
    a = np.concatenate([np.ones(len(y_plus)), -np.ones(len(y_minus))]).astype(int)
    x = np.zeros((len(y), 1))
    w_plus = np.ones(len(y_plus)) if w_plus is None else np.asarray(w_plus, float)
    w_minus = np.ones(len(y_minus)) if w_minus is None else np.asarray(w_minus, float)
    return TrialDataset(x=x, a=a, y=y), np.concatenate([w_plus, w_minus])


def random_dist(rng, n_max=50):
    n = int(rng.integers(1, n_max + 1))
    y = rng.normal(size=n) * 10.0 ** rng.uniform(-2, 2)
    if rng.random() < 0.3:
        y = np.round(y, 1)  # force ties
    w = rng.uniform(0.05, 5.0, size=n)
    order = np.argsort(y, kind="stable")
    return dist(y[order], (w / w.sum())[order])


# ---------------------------------------------------------------------------
# Frozen two- and three-atom values (hand-derived from the LP).
# ---------------------------------------------------------------------------


class TestFrozenValues:
    def test_binary_upper(self):
        d = dist([0.0, 1.0], [0.5, 0.5])
        for route in ROUTES:
            assert route(d, 2.0, "upper") == pytest.approx(0.75, abs=1e-12)

    def test_binary_lower(self):
        d = dist([0.0, 1.0], [0.5, 0.5])
        for route in ROUTES:
            assert route(d, 2.0, "lower") == pytest.approx(0.25, abs=1e-12)

    def test_three_atom_upper(self):
        # budget 0.5 all lands on the top atom: q = (0.1, 0.15, 0.75)
        d = dist([1.0, 2.0, 3.0], [0.2, 0.3, 0.5])
        for route in ROUTES:
            assert route(d, 2.0, "upper") == pytest.approx(2.65, abs=1e-12)

    def test_three_atom_lower(self):
        # bottom atom saturates (cap 0.3), remaining 0.2 is interior at atom 2
        d = dist([1.0, 2.0, 3.0], [0.2, 0.3, 0.5])
        for route in ROUTES:
            assert route(d, 2.0, "lower") == pytest.approx(1.85, abs=1e-12)

    def test_binary_multipliers(self):
        d = dist([0.0, 1.0], [0.5, 0.5])
        m = extract_multipliers(d, 2.0, "upper")
        np.testing.assert_allclose(m.values, [0.5, 1.5], atol=1e-14)

    def test_three_atom_multipliers(self):
        d = dist([1.0, 2.0, 3.0], [0.2, 0.3, 0.5])
        m = extract_multipliers(d, 2.0, "upper")
        np.testing.assert_allclose(m.values, [0.5, 0.5, 1.5], atol=1e-14)
        assert m.n_interior == 1

    def test_ate_binary_symmetric(self):
        ds, w = two_arm_dataset([0.0, 1.0], [0.0, 1.0])
        iv = ate_bounds(ds, w, 2.0)
        assert iv.lower == pytest.approx(-0.5, abs=1e-12)
        assert iv.upper == pytest.approx(0.5, abs=1e-12)


# ---------------------------------------------------------------------------
# Limits and equivariances.
# ---------------------------------------------------------------------------


class TestLimits:
    def test_lambda_one_is_mean(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            d = random_dist(rng)
            mean = d.mean()
            for route in ROUTES:
                assert route(d, 1.0, "upper") == pytest.approx(mean, abs=1e-12)
                assert route(d, 1.0, "lower") == pytest.approx(mean, abs=1e-12)

    def test_lambda_large_approaches_extremes(self):
        d = dist([-2.0, 0.5, 7.0], [0.3, 0.3, 0.4])
        assert greedy_arm_bound(d, 1e8, "upper") == pytest.approx(7.0, abs=1e-5)
        assert greedy_arm_bound(d, 1e8, "lower") == pytest.approx(-2.0, abs=1e-5)

    def test_translation_and_scale(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            d = random_dist(rng)
            lam = float(rng.uniform(1.0, 6.0))
            up = greedy_arm_bound(d, lam, "upper")
            lo = greedy_arm_bound(d, lam, "lower")
            a, b = float(rng.uniform(0.1, 3.0)), float(rng.normal())
            d2 = dist(a * d.outcomes + b, d.probs)
            assert greedy_arm_bound(d2, lam, "upper") == pytest.approx(a * up + b, rel=1e-10, abs=1e-10)
            assert greedy_arm_bound(d2, lam, "lower") == pytest.approx(a * lo + b, rel=1e-10, abs=1e-10)

    def test_negation_swaps_directions(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            d = random_dist(rng)
            lam = float(rng.uniform(1.0, 6.0))
            neg = dist(-d.outcomes[::-1], d.probs[::-1])
            assert greedy_arm_bound(neg, lam, "upper") == pytest.approx(
                -greedy_arm_bound(d, lam, "lower"), rel=1e-10, abs=1e-12
            )

    def test_bounds_bracket_mean(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            d = random_dist(rng)
            lam = float(rng.uniform(1.0, 10.0))
            assert greedy_arm_bound(d, lam, "lower") <= d.mean() + 1e-10
            assert greedy_arm_bound(d, lam, "upper") >= d.mean() - 1e-10


# ---------------------------------------------------------------------------
# Route agreement on random instances (small-scale version of the
# acceptance check, which runs 1,000 instances).
# ---------------------------------------------------------------------------


class TestRouteAgreement:
    def test_routes_agree(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            d = random_dist(rng)
            lam = 1.0 if rng.random() < 0.1 else float(rng.uniform(1.0, 10.0))
            for direction in ("lower", "upper"):
                vals = [route(d, lam, direction) for route in ROUTES]
                scale = max(1.0, abs(vals[0]))
                assert abs(vals[0] - vals[1]) <= 1e-10 * scale
                assert abs(vals[0] - vals[2]) <= 1e-10 * scale

    def test_deterministic(self):
        d = random_dist(np.random.default_rng(8))
        a = greedy_arm_bound(d, 3.7, "upper")
        b = greedy_arm_bound(d, 3.7, "upper")
        assert a == b


# ---------------------------------------------------------------------------
# Multiplier structure.
# ---------------------------------------------------------------------------


class TestMultipliers:
    def test_bang_bang_and_reconstruction(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            d = random_dist(rng)
            lam = float(rng.uniform(1.0 + 1e-9, 8.0))
            for direction in ("lower", "upper"):
                m = extract_multipliers(d, lam, direction)
                # construction already validates range, normalization,
                # interior count and monotonicity; check the objective
                val = float((d.probs * m.values) @ d.outcomes)
                assert val == pytest.approx(greedy_arm_bound(d, lam, direction), rel=1e-12, abs=1e-12)

    def test_lambda_one_multipliers_are_unit(self):
        d = dist([1.0, 2.0], [0.4, 0.6])
        m = extract_multipliers(d, 1.0, "upper")
        np.testing.assert_array_equal(m.values, [1.0, 1.0])


# ---------------------------------------------------------------------------
# ATE-level interval, envelope, worst case.
# ---------------------------------------------------------------------------


class TestAteBounds:
    def test_nesting_in_lambda(self):
        rng = np.random.default_rng(10)
        ds, w = two_arm_dataset(rng.normal(size=40), rng.normal(size=35),
                                rng.uniform(0.2, 2.0, 40), rng.uniform(0.2, 2.0, 35))
        prev = ate_bounds(ds, w, 1.0)
        for lam in [1.2, 1.5, 2.0, 3.0, 8.0]:
            iv = ate_bounds(ds, w, lam)
            assert iv.lower <= prev.lower + 1e-12
            assert iv.upper >= prev.upper - 1e-12
            prev = iv

    def test_weight_rescaling_invariance(self):
        rng = np.random.default_rng(11)
        ds, w = two_arm_dataset(rng.normal(size=20), rng.normal(size=20),
                                rng.uniform(0.2, 2.0, 20), rng.uniform(0.2, 2.0, 20))
        a = ate_bounds(ds, w, 2.5)
        b = ate_bounds(ds, 37.0 * w, 2.5)
        assert (a.lower, a.upper) == (b.lower, b.upper)

    def test_lambda_below_one_rejected(self):
        ds, w = two_arm_dataset([0.0, 1.0], [0.0, 1.0])
        with pytest.raises(InvalidLambdaError):
            ate_bounds(ds, w, 0.5)

    def test_empty_arm_rejected(self):
        ds = TrialDataset(x=np.zeros((2, 1)), a=np.array([1, 1]), y=np.array([0.0, 1.0]))
        with pytest.raises(EmptyArmError):
            ate_bounds(ds, np.ones(2), 2.0)


class TestEnvelope:
    def test_rows_match_ate_bounds_exactly(self):
        rng = np.random.default_rng(12)
        ds, w = two_arm_dataset(rng.normal(size=30), rng.normal(size=30),
                                rng.uniform(0.5, 2.0, 30), rng.uniform(0.5, 2.0, 30))
        grid = [1.0, 1.3, 2.0, 4.5]
        env = sensitivity_envelope(ds, w, grid)
        for lam, iv in zip(env.grid, env.intervals):
            direct = ate_bounds(ds, w, lam)
            assert iv.lower == direct.lower and iv.upper == direct.upper

    def test_widths_nondecreasing(self):
        rng = np.random.default_rng(13)
        ds, w = two_arm_dataset(rng.normal(size=50), rng.normal(size=50))
        env = sensitivity_envelope(ds, w, default_lambda_grid(5.0, num=15))
        widths = env.widths()
        assert np.all(np.diff(widths) >= -1e-12)

    def test_bad_grid_rejected(self):
        ds, w = two_arm_dataset([0.0, 1.0], [0.0, 1.0])
        with pytest.raises(GridError):
            sensitivity_envelope(ds, w, [])
        with pytest.raises(GridError):
            sensitivity_envelope(ds, w, [2.0, 1.5])
        with pytest.raises(GridError):
            sensitivity_envelope(ds, w, [0.9, 1.5])

    def test_default_grid_geometric(self):
        grid = default_lambda_grid(4.0, num=5)
        ratios = grid[1:] / grid[:-1]
        np.testing.assert_allclose(ratios, ratios[0])
        assert grid[0] == 1.0 and grid[-1] == pytest.approx(4.0)


class TestWorstCase:
    def test_explicit_binary_support(self):
        ds, w = two_arm_dataset([0.0, 1.0, 1.0], [0.0, 0.0, 1.0])
        iv = worst_case_bounds(ds, w, support=(0.0, 1.0))
        assert (iv.lower, iv.upper) == (-1.0, 1.0)
        assert iv.width == 2.0

    def test_constant_outcomes_zero_interval(self):
        ds, w = two_arm_dataset([3.0, 3.0], [3.0, 3.0])
        with pytest.warns(UserWarning):
            iv = worst_case_bounds(ds, w)
        assert (iv.lower, iv.upper) == (0.0, 0.0)

    def test_per_arm_empirical_support(self):
        ds, w = two_arm_dataset([1.0, 4.0], [0.0, 2.0])
        iv = worst_case_bounds(ds, w)
        # arm ranges: [1,4] and [0,2]
        assert (iv.lower, iv.upper) == (1.0 - 2.0, 4.0 - 0.0)
        assert iv.width == (4.0 - 1.0) + (2.0 - 0.0)

    def test_contains_every_sharp_interval(self):
        rng = np.random.default_rng(14)
        ds, w = two_arm_dataset(rng.normal(size=30), rng.normal(size=30),
                                rng.uniform(0.3, 3.0, 30), rng.uniform(0.3, 3.0, 30))
        wc = worst_case_bounds(ds, w)
        for lam in [1.0, 2.0, 10.0, 100.0]:
            iv = ate_bounds(ds, w, lam)
            assert wc.lower <= iv.lower + 1e-10 and iv.upper <= wc.upper + 1e-10


# ---------------------------------------------------------------------------
# Distribution construction (frozen example from the weighted-sort rule).
# ---------------------------------------------------------------------------


class TestBuildArmDistribution:
    def test_weighted_sort_example(self):
        ds = TrialDataset(x=np.zeros((3, 1)), a=np.array([1, 1, 1]), y=np.array([5.0, 4.0, 6.0]))
        d = build_arm_distribution(ds, np.array([2.0, 1.0, 1.0]), arm=1)
        np.testing.assert_array_equal(d.outcomes, [4.0, 5.0, 6.0])
        np.testing.assert_allclose(d.probs, [0.25, 0.5, 0.25])

    def test_mass_conservation_random(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            n = int(rng.integers(2, 60))
            ds = TrialDataset(
                x=np.zeros((n, 1)),
                a=np.where(rng.random(n) < 0.5, 1, -1) if n > 2 else np.array([1, -1] * (n // 2) + [1] * (n % 2)),
                y=rng.normal(size=n),
            )
            w = rng.uniform(0.1, 4.0, size=n)
            for arm in (-1, 1):
                if not ds.arm_mask(arm).any():
                    continue
                d = build_arm_distribution(ds, w, arm)
                assert abs(d.probs.sum() - 1.0) <= 1e-12 * d.n
                assert np.all(np.diff(d.outcomes) >= 0)
