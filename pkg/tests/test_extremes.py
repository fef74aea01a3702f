import math

import numpy as np
import pytest

from dynamics import MeasureProfile
from errors import DomainError, ProfileRangeExceeded
from extremes import (ObservableSpec, TailTransform, evl_empirical, evl_hitting_duality, level_radius, limit_law,
                      normalizing_level, observe, observe_many, orbit_min_distance, running_max)
from suspension import FlowPoint, FlowState

RADII = np.geomspace(1e-7, 0.5, 400)


def lebesgue_profile(center: float) -> MeasureProfile:
    return MeasureProfile(np.array([center]), RADII, 2.0 * RADII, 10 ** 9)


def flow_profile(center) -> MeasureProfile:
    # μ_X of a box of radius r for the unit-roof doubling flow: (2r)^2.
    radii = RADII[RADII <= 0.4]
    return MeasureProfile(np.asarray(center, dtype=float), radii, 4.0 * radii ** 2, 10 ** 9)


@pytest.fixture
def gumbel(doubling):
    return ObservableSpec(1, doubling, 0.5, lebesgue_profile(0.5))


def test_kind_one_observable(gumbel):
    assert observe(gumbel, 0.6) == pytest.approx(-math.log(0.2))
    assert observe(gumbel, 0.5) == math.inf


def test_kind_two_and_three_observables(doubling):
    frechet = ObservableSpec(2, doubling, 0.5, lebesgue_profile(0.5), beta=2.0)
    weibull = ObservableSpec(3, doubling, 0.5, lebesgue_profile(0.5), gamma=2.0, D=5.0)
    assert observe(frechet, 0.6) == pytest.approx(0.2 ** -0.5)
    assert observe(weibull, 0.6) == pytest.approx(5.0 - 0.2 ** 0.5)
    assert observe(weibull, 0.5) == 5.0


def test_observe_many_matches_observe(gumbel):
    points = np.array([[0.1], [0.45], [0.8]])
    np.testing.assert_allclose(observe_many(gumbel, points), [observe(gumbel, p[0]) for p in points])


def test_distances_past_the_profile(doubling):
    spec = ObservableSpec(1, doubling, 0.5, MeasureProfile(np.array([0.5]), RADII[RADII <= 0.1],
                                                           2.0 * RADII[RADII <= 0.1], 100))
    with pytest.raises(ProfileRangeExceeded):
        observe(spec, 0.0)
    assert spec.phi(0.3, clamp=True) == pytest.approx(spec.phi(spec.max_radius))


def test_normalizing_levels(doubling, gumbel):
    assert normalizing_level(gumbel, math.e ** 2, 0.0) == pytest.approx(2.0)
    frechet = ObservableSpec(2, doubling, 0.5, lebesgue_profile(0.5), beta=2.0)
    assert normalizing_level(frechet, 4.0, 1.0) == pytest.approx(2.0)
    weibull = ObservableSpec(3, doubling, 0.5, lebesgue_profile(0.5), gamma=2.0, D=5.0)
    assert normalizing_level(weibull, 4.0, -1.0) == pytest.approx(4.5)


def test_level_radius(gumbel):
    assert level_radius(gumbel, 100.0, 0.0) == pytest.approx(0.005)
    assert observe(gumbel, 0.5 + level_radius(gumbel, 100.0, 1.0)) == pytest.approx(
        normalizing_level(gumbel, 100.0, 1.0))


def test_levels_need_a_positive_horizon(gumbel):
    with pytest.raises(DomainError):
        normalizing_level(gumbel, 0.0, 0.0)
    with pytest.raises(DomainError):
        level_radius(gumbel, -1.0, 0.0)


def test_tail_transform_domains():
    with pytest.raises(DomainError):
        TailTransform(2, beta=2.0)(0.0)
    with pytest.raises(DomainError):
        TailTransform(3, gamma=2.0)(0.5)
    with pytest.raises(DomainError):
        TailTransform(4)
    assert TailTransform(3, gamma=2.0)(-2.0) == pytest.approx(4.0)


def test_observable_validation(doubling):
    with pytest.raises(DomainError):
        ObservableSpec(1, doubling, 0.5, lebesgue_profile(0.5), form="torus")
    with pytest.raises(DomainError):
        ObservableSpec(3, doubling, 0.5, lebesgue_profile(0.5), D=math.inf)


def test_limit_laws():
    assert limit_law(1, 0.0) == pytest.approx(math.exp(-1.0))
    assert limit_law(2, 1.0, beta=2.0) == pytest.approx(math.exp(-1.0))
    assert limit_law(3, -2.0, gamma=2.0) == pytest.approx(math.exp(-4.0))
    assert limit_law(1, 0.0, G=lambda t: 1.0 / (1.0 + t)) == pytest.approx(0.5)


def test_running_max_along_a_short_orbit(doubling, gumbel):
    # Orbit 0.3, 0.6, 0.2, 0.4: 0.4 and 0.6 both lie at distance 0.1 from 0.5.
    assert running_max(doubling, gumbel, 0.3, 3) == pytest.approx(-math.log(0.2))
    assert running_max(doubling, gumbel, 0.3, 0) == pytest.approx(-math.log(0.4))


def test_flow_form_observable(unit_flow, doubling):
    spec = ObservableSpec(1, doubling, FlowPoint(np.array([0.5]), 0.5), flow_profile([0.5, 0.5]), form="flow")
    assert observe(spec, (0.6, 0.5)) == pytest.approx(-math.log(0.2))
    assert observe(spec, (0.5, 0.45)) == pytest.approx(-math.log(0.1))
    with pytest.raises(DomainError):
        spec.distances(np.array([[0.5]]))


def test_flow_minimum_distance_follows_segments(unit_flow):
    starts = FlowState(np.array([[0.15]]), np.array([0.2]))
    center = FlowPoint(np.array([0.3]), 0.5)
    assert orbit_min_distance(unit_flow, center, starts, 0.5)[0] == pytest.approx(0.15)
    assert orbit_min_distance(unit_flow, center, starts, 2.0)[0] == pytest.approx(0.0)
    low = FlowPoint(np.array([0.3]), 0.05)
    # The second segment only climbs to height 0.02 by t = 0.82.
    assert orbit_min_distance(unit_flow, low, starts, 0.82)[0] == pytest.approx(0.03)
    assert orbit_min_distance(unit_flow, low, starts, 0.9)[0] == pytest.approx(0.0)


def test_running_max_on_the_flow(unit_flow, doubling):
    spec = ObservableSpec(1, doubling, FlowPoint(np.array([0.3]), 0.5), flow_profile([0.3, 0.5]), form="flow")
    assert running_max(unit_flow, spec, (0.15, 0.2), 2.0) == math.inf


def test_forms_must_match_the_model(unit_flow, gumbel):
    with pytest.raises(DomainError):
        evl_empirical(unit_flow, gumbel, 100.0, [0.0], 10, seed=1)


def test_gumbel_law_for_the_doubling_map(doubling):
    spec = ObservableSpec(1, doubling, 0.3141, lebesgue_profile(0.3141))
    result = evl_empirical(doubling, spec, 1000.0, np.linspace(-1.0, 3.0, 9), 5000, seed=2)
    assert np.max(np.abs(result.empirical - result.predicted)) <= 0.04
    assert np.all(np.diff(result.levels) > 0)
    assert np.all(np.diff(result.radii) < 0)


def test_weibull_law_for_the_doubling_map(doubling):
    spec = ObservableSpec(3, doubling, 0.3141, lebesgue_profile(0.3141), gamma=2.0, D=5.0)
    result = evl_empirical(doubling, spec, 1000.0, np.linspace(-2.0, -0.25, 8), 5000, seed=3)
    assert np.max(np.abs(result.empirical - result.predicted)) <= 0.04


def test_frechet_law_for_the_doubling_map(doubling):
    spec = ObservableSpec(2, doubling, 0.3141, lebesgue_profile(0.3141), beta=2.0)
    result = evl_empirical(doubling, spec, 1000.0, np.linspace(0.5, 4.0, 8), 5000, seed=6)
    assert np.max(np.abs(result.empirical - result.predicted)) <= 0.04


def test_evl_distribution_is_non_decreasing_in_y(doubling):
    spec = ObservableSpec(1, doubling, 0.3141, lebesgue_profile(0.3141))
    result = evl_empirical(doubling, spec, 500.0, np.linspace(-2.0, 4.0, 25), 2000, seed=7)
    assert np.all(np.diff(result.empirical) >= 0.0)
    assert np.all(np.diff(result.predicted) >= 0.0)


def test_evl_and_hitting_agree(doubling):
    spec = ObservableSpec(1, doubling, 0.3141, lebesgue_profile(0.3141))
    result = evl_hitting_duality(doubling, spec, 200.0, 0.5, 5000, seed=4)
    assert result.difference <= 3.0 * result.combined_half_width
    assert result.same_sample_gap <= 1e-3
    assert result.radius == pytest.approx(math.exp(-0.5) / 400.0)


def test_evl_and_hitting_agree_on_the_flow(unit_flow, doubling):
    spec = ObservableSpec(1, doubling, FlowPoint(np.array([0.3141]), 0.5), flow_profile([0.3141, 0.5]),
                          form="flow")
    result = evl_hitting_duality(unit_flow, spec, 200.0, 0.5, 5000, seed=5)
    assert result.difference <= 3.0 * result.combined_half_width
    assert result.same_sample_gap <= 1e-3
