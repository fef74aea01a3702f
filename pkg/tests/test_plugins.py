import numpy as np
import pytest

import pluginmanager
from dynamics import iterate
from errors import ConfigError, DomainError, SingularOrbit
from plugins.doubling import DoublingMap
from plugins.lorenz1d import lorenz_branch


def test_builtin_systems_are_listed():
    systems = {info["system"] for info in pluginmanager.get_plugins_info()}
    assert systems == {"doubling", "lsv", "lorenz1d", "lorenz2d"}


def test_plugin_info_properties():
    plugin, newest = pluginmanager.get_plugin("lsv")
    assert plugin.verified
    assert plugin.system == "lsv"
    assert plugin.identifier == "org.reclab.lsv"
    assert plugin.dimension == 1
    assert plugin.parameters == {"alpha": 0.5}
    assert newest == plugin.version
    assert plugin.readme


def test_create_system_resolves_defaults():
    system = pluginmanager.create_system("lorenz2d", {"lam": 0.2})
    assert system.params == {"alpha": 0.7, "b": 1.8, "lam": 0.2, "c": 0.6}
    assert isinstance(pluginmanager.create_system("doubling"), DoublingMap)


def test_unknown_system_is_a_config_error():
    with pytest.raises(ConfigError, match="Unknown system"):
        pluginmanager.create_system("tent")


def test_unknown_parameter_is_a_config_error():
    with pytest.raises(ConfigError, match="beta"):
        pluginmanager.create_system("lsv", {"beta": 1.0})


def test_unknown_plugin_version_names_the_newest():
    with pytest.raises(ConfigError, match="1.0.0"):
        pluginmanager.create_system("doubling", plugin_version="9.9.9")


@pytest.mark.parametrize("system, params", [
    ("lsv", {"alpha": 0.0}),
    ("lsv", {"alpha": 1.5}),
    ("lorenz1d", {"alpha": 1.2}),
    ("lorenz1d", {"b": 2.5}),
    ("lorenz2d", {"lam": 0.6}),
    ("lorenz2d", {"c": 0.1}),
])
def test_parameters_outside_their_domain_are_rejected(system, params):
    with pytest.raises(DomainError):
        pluginmanager.create_system(system, params)


def test_doubling_orbit(doubling):
    assert iterate(doubling, 0.3, 0) == 0.3
    assert iterate(doubling, 0.3, 1) == pytest.approx(0.6)
    assert iterate(doubling, 0.3, 3) == pytest.approx(0.4)


def test_doubling_distance_is_circular(doubling):
    d = doubling.distance(doubling.as_points([0.95, 0.5]), np.array([0.05]))
    np.testing.assert_allclose(d, [0.1, 0.45])


def test_doubling_refill_stays_in_the_domain(doubling, rng):
    points = doubling.advance(doubling.as_points([0.0, 0.75]), rng)
    assert np.all((points >= 0.0) & (points < 1.0))
    assert points[1, 0] == pytest.approx(0.5, abs=1e-15)


def test_lsv_branches(lsv):
    images = lsv.map(lsv.as_points([0.25, 0.75]))
    np.testing.assert_allclose(images[:, 0], [0.25 * (1.0 + np.sqrt(2.0) * 0.5), 0.5])
    assert lsv.tower_degree == 2.0
    np.testing.assert_array_equal(lsv.tower_base_mask(lsv.as_points([0.25, 0.5, 0.75])), [False, True, True])


def test_lorenz1d_branch_limits():
    x = np.array([1e-300, -1e-300, 1.0])
    np.testing.assert_allclose(lorenz_branch(x, 0.7, 1.8), [-1.0, 1.0, 0.8])


def test_lorenz1d_stops_at_the_singular_point(lorenz1d):
    with pytest.raises(SingularOrbit):
        iterate(lorenz1d, 0.0, 1)


def test_lorenz2d_map(lorenz2d):
    image = lorenz2d.map(np.array([[0.5, 0.2], [-0.5, 0.2]]))
    f = 1.8 * 0.5 ** 0.7 - 1.0
    np.testing.assert_allclose(image, [[f, 0.66], [-f, -0.54]])


def test_lorenz2d_distance_is_the_max_metric(lorenz2d):
    d = lorenz2d.distance(np.array([[0.1, 0.5], [0.4, 0.0]]), np.array([0.0, 0.0]))
    np.testing.assert_allclose(d, [0.5, 0.4])


def test_ball_grid_covers_the_box(lorenz2d):
    grid = lorenz2d.ball_grid(np.array([0.2, -0.3]), 0.1, resolution=4)
    assert grid.shape == (81, 2)
    np.testing.assert_allclose(grid.min(axis=0), [0.1, -0.4])
    np.testing.assert_allclose(grid.max(axis=0), [0.3, -0.2])


def test_as_points_checks_dimension(lorenz2d):
    with pytest.raises(ValueError):
        lorenz2d.as_points(np.zeros((3, 1)))
