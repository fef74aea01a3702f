import numpy as np
import pytest

from dynamics import sample_invariant
from errors import ConfigError, DirtyFlowBox, NonIntegrableRoof, NonPositiveRoof
from suspension import (FlowBall, FlowPoint, FlowState, advance_state, build_suspension, check_integrable,
                        create_roof, direct_flow_ball_measure, flow_advance, flow_ball_measure, flow_measure_profile,
                        is_clean, require_clean, roof_infimum, sample_flow_invariant)


def test_create_roof_fills_defaults():
    roof = create_roof("affine", {"b": 0.25})
    assert roof.params == {"a": 1.0, "b": 0.25}
    np.testing.assert_allclose(roof(np.array([[0.0], [1.0]])), [1.0, 1.25])


def test_create_roof_rejects_unknown_names():
    with pytest.raises(ConfigError, match="Unknown roof"):
        create_roof("quadratic")
    with pytest.raises(ConfigError, match="slope"):
        create_roof("constant", {"slope": 1.0})


def test_constant_roof_mean_is_exact(doubling):
    flow = build_suspension(doubling, create_roof("constant", {"c": 2.0}), seed=1, mean_roof_samples=100)
    assert flow.mean_roof.value == 2.0
    assert flow.mean_roof.half_width == 0.0


def test_affine_roof_mean(affine_flow):
    assert abs(affine_flow.mean - 1.25) <= 3.0 * affine_flow.mean_roof.half_width
    assert affine_flow.roof_cap == pytest.approx(1.1 * 1.5, rel=1e-3)


def test_loglorenz_roof_has_a_finite_mean(lorenz1d):
    flow = build_suspension(lorenz1d, create_roof("loglorenz"), seed=2, mean_roof_samples=20000)
    assert 0.0 < flow.mean < np.inf
    assert not flow.roof.bounded


def test_negative_roof_is_rejected(doubling):
    with pytest.raises(NonPositiveRoof):
        build_suspension(doubling, create_roof("affine", {"a": -1.0, "b": 0.5}), seed=1, mean_roof_samples=1000)


def test_unsettled_roof_mean_is_not_integrable():
    values = np.concatenate((np.ones(1000), np.full(1000, 1000.0)))
    with pytest.raises(NonIntegrableRoof):
        check_integrable(values)
    check_integrable(np.full(2000, 3.0))


def test_flow_points_must_lie_below_the_roof(unit_flow):
    assert unit_flow.as_flow_point((0.3, 0.0)).height == 0.0
    with pytest.raises(ValueError):
        unit_flow.as_flow_point((0.3, 1.0))
    with pytest.raises(ValueError):
        unit_flow.as_flow_point((0.3, -0.1))


def test_clean_flow_boxes(unit_flow):
    center = FlowPoint(np.array([0.3]), 0.5)
    assert is_clean(unit_flow, FlowBall(center, 0.02))
    assert not is_clean(unit_flow, FlowBall(center, 0.5))
    assert not is_clean(unit_flow, FlowBall(FlowPoint(np.array([0.3]), 0.99), 0.02))
    with pytest.raises(DirtyFlowBox):
        require_clean(unit_flow, FlowBall(center, 0.6))


def test_roof_infimum_over_a_base_ball(doubling):
    roof = create_roof("affine", {"a": 1.0, "b": 1.0})
    assert roof_infimum(roof, doubling, 0.5, 0.1) == pytest.approx(1.4)


def test_flow_advance_between_crossings(unit_flow):
    point = flow_advance(unit_flow, (0.3, 0.2), 0.5)
    assert point.base[0] == 0.3
    assert point.height == pytest.approx(0.7)


def test_flow_advance_across_roofs(unit_flow):
    point = flow_advance(unit_flow, (0.3, 0.2), 1.0)
    assert point.base[0] == pytest.approx(0.6)
    assert point.height == pytest.approx(0.2)
    point = flow_advance(unit_flow, (0.3, 0.2), 2.5)
    assert point.base[0] == pytest.approx(0.2)
    assert point.height == pytest.approx(0.7)


def test_flow_advance_lands_on_the_roof_crossing(unit_flow):
    point = flow_advance(unit_flow, (0.3, 0.2), 0.8)
    assert point.base[0] == pytest.approx(0.6)
    assert point.height == pytest.approx(0.0, abs=1e-9)
    point = flow_advance(unit_flow, (0.3, 0.2), 2.8)
    assert point.base[0] == pytest.approx(0.4)
    assert point.height == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("s, t", [(0.7, 1.9), (1.4, 1.2)])
def test_flow_advance_is_a_semigroup(affine_flow, s, t):
    direct = flow_advance(affine_flow, (0.3, 0.2), s + t)
    composed = flow_advance(affine_flow, flow_advance(affine_flow, (0.3, 0.2), s), t)
    np.testing.assert_allclose(composed.base, direct.base)
    assert composed.height == pytest.approx(direct.height)


def test_flow_advance_with_a_varying_roof(affine_flow):
    # r(0.25) = 1.125, then the base moves to 0.5.
    point = flow_advance(affine_flow, (0.25, 0.125), 1.5)
    assert point.base[0] == 0.5
    assert point.height == pytest.approx(0.5)


def test_flow_advance_rejects_negative_time(unit_flow):
    with pytest.raises(ValueError):
        flow_advance(unit_flow, (0.3, 0.2), -1.0)


def test_product_formula(unit_flow, lebesgue_samples):
    ball = FlowBall(FlowPoint(np.array([0.3]), 0.5), 0.02)
    estimate = flow_ball_measure(unit_flow, ball, lebesgue_samples, strict=True)
    assert abs(estimate.value - 0.04 * 0.04) <= 3.0 * estimate.half_width


def test_product_formula_matches_direct_counting(affine_flow, doubling):
    ball = FlowBall(FlowPoint(np.array([0.4]), 0.6), 0.05)
    product = flow_ball_measure(affine_flow, ball, sample_invariant(doubling, 4, 100000), strict=True)
    direct = direct_flow_ball_measure(affine_flow, ball, sample_flow_invariant(affine_flow, 4, 200000))
    assert abs(product.value - direct.value) <= 3.0 * np.hypot(product.half_width, direct.half_width)


def test_dirty_balls_in_strict_mode(unit_flow, lebesgue_samples):
    ball = FlowBall(FlowPoint(np.array([0.3]), 0.95), 0.1)
    with pytest.raises(DirtyFlowBox):
        flow_ball_measure(unit_flow, ball, lebesgue_samples, strict=True)


def test_dirty_balls_are_counted_directly(unit_flow, rng):
    ball = FlowBall(FlowPoint(np.array([0.3]), 0.95), 0.1)
    estimate = flow_ball_measure(unit_flow, ball, rng.random((50000, 1)))
    # The box [0.2, 0.4] x [0.85, 1) holds 0.2 * 0.15 of the unit flow.
    assert abs(estimate.value - 0.03) <= 3.0 * estimate.half_width


def test_flow_samples_follow_the_weighted_base(affine_flow):
    state = sample_flow_invariant(affine_flow, 9, 50000)
    assert len(state) == 50000
    assert np.all((state.heights >= 0.0) & (state.heights < affine_flow.roof(state.bases)))
    # Base density (1 + x/2) / 1.25 has mean (1/2 + 1/6) / 1.25.
    assert np.mean(state.bases) == pytest.approx((0.5 + 1.0 / 6.0) / 1.25, abs=0.01)


def test_flow_measure_profile(unit_flow, lebesgue_samples):
    radii = np.geomspace(1e-3, 0.1, 20)
    profile = flow_measure_profile(unit_flow, (0.3, 0.5), radii, lebesgue_samples)
    assert profile.center.shape == (2,)
    assert np.all(np.diff(profile.values) >= 0)
    np.testing.assert_allclose(profile.values[-1], 0.2 * 0.2, rtol=0.05)


def test_flow_measure_is_invariant(affine_flow):
    state = sample_flow_invariant(affine_flow, 10, 100000)
    bases, heights = advance_state(affine_flow, state.bases, state.heights, 0.73, np.random.default_rng(10))
    moved = FlowState(bases, heights)
    for center in (FlowPoint(np.array([0.4]), 0.6), FlowPoint(np.array([0.8]), 0.3)):
        ball = FlowBall(center, 0.1)
        before = direct_flow_ball_measure(affine_flow, ball, state)
        after = direct_flow_ball_measure(affine_flow, ball, moved)
        assert abs(before.value - after.value) <= 3.0 * np.hypot(before.half_width, after.half_width)
