import numpy as np

from errors import DomainError
from plugin_abstract.base_system import BaseSystem
from plugins.lorenz1d.system import lorenz_branch

__all__ = ["Lorenz2DMap"]


class Lorenz2DMap(BaseSystem):
    """
    The geometric Lorenz return map on the square cross section.
    """
    NAME = "lorenz2d"
    DIMENSION = 2
    DIAMETER = 2.0

    def __init__(self, params: dict, **kwargs):
        super().__init__(params, **kwargs)
        self.alpha = float(params["alpha"])
        self.b = float(params["b"])
        self.lam = float(params["lam"])
        self.c = float(params["c"])
        if not 0.0 < self.alpha < 1.0 or not 1.0 < self.b <= 2.0:
            raise DomainError("lorenz2d needs alpha in (0, 1) and b in (1, 2].")
        if not 0.0 < self.lam <= 0.5:
            raise DomainError("lorenz2d needs lam in (0, 1/2].")
        if not self.lam < self.c <= 1.0 - self.lam:
            raise DomainError("lorenz2d needs lam < c <= 1 - lam so the image strips are disjoint and inside the square.")

    def map(self, points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        return np.column_stack((lorenz_branch(x, self.alpha, self.b), self.lam * y + self.c * np.sign(x)))

    def singular_mask(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points[:, 0]) < self.SINGULAR_TOLERANCE

    def distance(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        return np.max(np.abs(points - center), axis=1)

    def uniform_start(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, (count, 2))

    def wrap(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, -1.0, 1.0)

    def derivative(self, points: np.ndarray) -> np.ndarray:
        return self.b * self.alpha * np.power(np.abs(points[:, 0]), self.alpha - 1.0)
