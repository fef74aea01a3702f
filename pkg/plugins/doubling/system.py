import numpy as np

from plugin_abstract.base_system import BaseSystem

__all__ = ["DoublingMap"]

# Magnitude of the digits refilled after each doubling.
REFILL_SCALE = 2.0 ** -52


class DoublingMap(BaseSystem):
    """
    T(x) = 2x mod 1 on the circle.
    """
    NAME = "doubling"
    DIMENSION = 1
    DIAMETER = 0.5

    def map(self, points: np.ndarray) -> np.ndarray:
        return np.mod(2.0 * points, 1.0)

    def advance(self, points: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        images = self.map(points)
        if rng is None:
            return images
        images = images + REFILL_SCALE * rng.random(images.shape)
        return np.mod(images, 1.0)

    def distance(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        gap = np.abs(points[:, 0] - center[..., 0]) % 1.0
        return np.minimum(gap, 1.0 - gap)

    def uniform_start(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.random((count, 1))

    def wrap(self, points: np.ndarray) -> np.ndarray:
        return np.mod(points, 1.0)

    def derivative(self, points: np.ndarray) -> np.ndarray:
        return np.full(len(points), 2.0)
