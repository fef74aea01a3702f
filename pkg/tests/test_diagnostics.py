import numpy as np
import pytest

from diagnostics import (LipschitzObservable, correlation, d2_surrogate, dprime_surrogate, indicator,
                         isotonic_residual, shell_trend, short_return_flags, short_return_measure, tower_tail, vr_measure)
from hitting import MapBall


@pytest.fixture
def cosine():
    return LipschitzObservable(lambda p: np.cos(2.0 * np.pi * p[:, 0]), 2.0 * np.pi, 1.0)


def test_lipschitz_check(doubling, cosine, rng):
    assert cosine.check(doubling, rng)
    steep = LipschitzObservable(lambda p: np.cos(2.0 * np.pi * p[:, 0]), 1.0, 1.0)
    assert not steep.check(doubling, rng)


def test_indicator_of_balls_and_intervals(doubling):
    points = np.array([[0.1], [0.45], [0.9]])
    np.testing.assert_array_equal(indicator(doubling, (0.0, 0.5), points), [1.0, 1.0, 0.0])
    np.testing.assert_array_equal(indicator(doubling, MapBall(np.array([0.0]), 0.15), points), [1.0, 0.0, 1.0])


@pytest.mark.parametrize("j", range(7))
def test_doubling_correlations_match_the_exact_values(doubling, lebesgue_samples, j):
    identity = LipschitzObservable(lambda p: p[:, 0], 1.0, 1.0)
    estimate = correlation(doubling, identity, (0.0, 0.5), j, lebesgue_samples)
    exact = 2.0 ** -(j + 3)
    assert estimate.value < 0
    assert abs(abs(estimate.value) - exact) <= max(0.05 * exact, 3.0 * estimate.half_width)


def test_correlation_rejects_negative_lags(doubling, cosine, lebesgue_samples):
    with pytest.raises(ValueError):
        correlation(doubling, cosine, (0.0, 0.5), -1, lebesgue_samples)


def test_short_returns_of_the_doubling_map(doubling, rng):
    r = 0.01
    estimate = short_return_measure(doubling, r, 1, rng.random((20000, 1)))
    assert estimate.value == pytest.approx(6.0 * r, rel=0.1)


def test_short_return_flags_near_the_fixed_point(doubling):
    flags, touched = short_return_flags(doubling, 0.01, 2, np.array([[0.001], [0.3141]]))
    assert touched == 0
    np.testing.assert_array_equal(flags, [[True, True], [False, False]])


def test_short_return_flags_skip_the_singular_set(lorenz1d):
    _, touched = short_return_flags(lorenz1d, 0.01, 1, np.array([[0.0], [0.5]]))
    assert touched == 1


def test_short_returns_need_a_radius(doubling):
    with pytest.raises(ValueError):
        short_return_flags(doubling, 0.0, 1, np.zeros((1, 1)))


def test_vr_shrinks_with_the_radius(doubling, rng):
    samples = rng.random((20000, 1))
    wide = vr_measure(doubling, 1e-2, 5, samples)
    narrow = vr_measure(doubling, 1e-3, 5, samples)
    assert wide.value > narrow.value


def test_tower_tail_is_non_increasing(lsv):
    result = tower_tail(lsv, [1, 2, 5, 10, 20, 50, 100], 20000, seed=1)
    assert np.all(np.diff(result.tail) <= 0)
    assert result.tail[0] > 0
    assert result.degree == -result.exponent
    assert not result.meets_theorem_threshold


def test_tower_tail_needs_a_tower(doubling):
    with pytest.raises(NotImplementedError):
        tower_tail(doubling, [1, 10], 100, seed=1)


@pytest.mark.slow
def test_lsv_tower_tail_exponent(lsv):
    result = tower_tail(lsv, np.unique(np.geomspace(10, 100, 12).astype(int)), 200000, seed=2)
    assert result.exponent == pytest.approx(-lsv.tower_degree, abs=0.3)


def test_empty_window_has_no_d2_gap(doubling):
    curve = d2_surrogate(doubling, 0.3141, 0.05, 0, [0, 3, 10], 2000, seed=3)
    np.testing.assert_array_equal(curve.gap, 0.0)


def test_d2_gap_decays(doubling):
    curve = d2_surrogate(doubling, 0.3141, 0.05, 5, [20, 30], 20000, seed=4, n=100, t_exponent=0.5)
    assert np.all(curve.gap <= 3.0 * curve.half_width + 0.005)
    assert curve.window == 5
    assert curve.n_gap is not None


def test_d2_window_must_be_nonnegative(doubling):
    with pytest.raises(ValueError):
        d2_surrogate(doubling, 0.3141, 0.05, -1, [0], 10, seed=1)


def test_isotonic_residual():
    assert isotonic_residual([3.0, 2.0, 2.0, 1.0]) == 0.0
    assert isotonic_residual([1.0, 2.0]) == pytest.approx(0.5)
    assert isotonic_residual([1.0, 2.0], increasing=True) == 0.0
    assert isotonic_residual([]) == 0.0


def test_shell_trend_flags_ratios_growing_as_r_shrinks():
    radii = [0.1, 0.01, 0.001]
    residual, bounded = shell_trend(radii, [1.0, 2.0, 4.0], [0.01] * 3, 0.1)
    assert residual > 0.0
    assert not bounded
    assert shell_trend(radii, [4.0, 2.0, 1.0], [0.01] * 3, 0.1) == (0.0, True)
    assert shell_trend(radii[::-1], [1.0, 2.0, 4.0], [0.01] * 3, 0.1) == (0.0, True)
    assert shell_trend([], [], [], 0.1) == (0.0, True)


def test_dprime_sums_grow_with_the_number_of_terms(doubling):
    sums = dprime_surrogate(doubling, 0.3141, 0.01, 100, [1, 5, 20], 5000, seed=5)
    assert np.all(np.diff(sums.sums) <= 0)
    assert abs(sums.ball_measure.value - 0.02) <= 3.0 * sums.ball_measure.half_width


def test_dprime_sums_are_inflated_at_a_fixed_point(doubling):
    generic = dprime_surrogate(doubling, 0.3141, 0.01, 100, [5], 5000, seed=6)
    periodic = dprime_surrogate(doubling, 0.0, 0.01, 100, [5], 5000, seed=6)
    assert periodic.sums[0] > generic.sums[0] + 3.0 * (periodic.half_width[0] + generic.half_width[0])


def test_dprime_needs_positive_k(doubling):
    with pytest.raises(ValueError):
        dprime_surrogate(doubling, 0.3141, 0.01, 100, [0], 100, seed=1)
