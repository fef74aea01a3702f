import numpy as np
import pytest

import montecarlo
import pluginmanager
from suspension import build_suspension, create_roof


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("XDG_DATA_HOME", str(tmp_path / "data"))
    pluginmanager.use_builtin_plugins_only(True)
    montecarlo.configure(workers=1, block_size=montecarlo.DEFAULT_BLOCK_SIZE)
    yield
    montecarlo.configure(workers=1, block_size=montecarlo.DEFAULT_BLOCK_SIZE)
    pluginmanager.use_builtin_plugins_only(False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def doubling():
    return pluginmanager.create_system("doubling")


@pytest.fixture
def lsv():
    return pluginmanager.create_system("lsv", {"alpha": 0.5})


@pytest.fixture
def lorenz1d():
    return pluginmanager.create_system("lorenz1d")


@pytest.fixture
def lorenz2d():
    return pluginmanager.create_system("lorenz2d")


@pytest.fixture
def unit_flow(doubling):
    """
    The doubling map suspended under the constant roof 1.
    """
    return build_suspension(doubling, create_roof("constant", {"c": 1.0}), seed=7, mean_roof_samples=1000)


@pytest.fixture
def affine_flow(doubling):
    return build_suspension(doubling, create_roof("affine", {"a": 1.0, "b": 0.5}), seed=8, mean_roof_samples=20000)


@pytest.fixture
def lebesgue_samples(rng):
    return rng.random((200000, 1))
