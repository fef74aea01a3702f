import numpy as np

from errors import DomainError
from plugin_abstract.base_system import BaseSystem

__all__ = ["Lorenz1DMap", "lorenz_branch"]


def lorenz_branch(x: np.ndarray, alpha: float, b: float) -> np.ndarray:
    """
    f(x) = sign(x)(b|x|^alpha - 1), so that f(0+) = -1 and f(0-) = 1.
    """
    return np.sign(x) * (b * np.power(np.abs(x), alpha) - 1.0)


class Lorenz1DMap(BaseSystem):
    """
    The one-dimensional geometric Lorenz map on [-1, 1] with singular point 0.
    """
    NAME = "lorenz1d"
    DIMENSION = 1
    DIAMETER = 2.0

    def __init__(self, params: dict, **kwargs):
        super().__init__(params, **kwargs)
        self.alpha = float(params["alpha"])
        self.b = float(params["b"])
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("lorenz1d needs alpha in (0, 1).")
        if not 1.0 < self.b <= 2.0:
            raise DomainError("lorenz1d needs b in (1, 2].")

    def map(self, points: np.ndarray) -> np.ndarray:
        return lorenz_branch(points, self.alpha, self.b)

    def singular_mask(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points[:, 0]) < self.SINGULAR_TOLERANCE

    def distance(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        return np.abs(points[:, 0] - center[..., 0])

    def uniform_start(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, (count, 1))

    def wrap(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, -1.0, 1.0)

    def derivative(self, points: np.ndarray) -> np.ndarray:
        return self.b * self.alpha * np.power(np.abs(points[:, 0]), self.alpha - 1.0)
