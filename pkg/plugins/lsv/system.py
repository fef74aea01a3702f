import numpy as np

from errors import DomainError
from plugin_abstract.base_system import BaseSystem

__all__ = ["LsvMap"]


class LsvMap(BaseSystem):
    """
    The Liverani-Saussol-Vaienti map on [0, 1].
    """
    NAME = "lsv"
    DIMENSION = 1
    DIAMETER = 1.0
    TOWER_BASE = 0.5

    def __init__(self, params: dict, **kwargs):
        super().__init__(params, **kwargs)
        self.alpha = float(params["alpha"])
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError("lsv needs alpha in (0, 1].")
        self.__scale = 2.0 ** self.alpha

    @property
    def tower_degree(self) -> float:
        return 1.0 / self.alpha

    def map(self, points: np.ndarray) -> np.ndarray:
        x = points
        left = x * (1.0 + self.__scale * np.power(x, self.alpha))
        right = 2.0 * x - 1.0
        return np.clip(np.where(x < 0.5, left, right), 0.0, 1.0)

    def distance(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        return np.abs(points[:, 0] - center[..., 0])

    def uniform_start(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.random((count, 1))

    def wrap(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, 0.0, 1.0)

    def derivative(self, points: np.ndarray) -> np.ndarray:
        x = points[:, 0]
        left = 1.0 + (1.0 + self.alpha) * self.__scale * np.power(x, self.alpha)
        return np.where(x < 0.5, left, 2.0)

    def tower_base_mask(self, points: np.ndarray) -> np.ndarray:
        return points[:, 0] >= self.TOWER_BASE
