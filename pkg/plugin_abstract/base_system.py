from abc import ABC, abstractmethod

import numpy as np

from errors import SingularOrbit


class BaseSystem(ABC):
    """
    Abstract base class for a measure-preserving map R on a metric domain Ω.

    Points are handled in batches: an array of shape (n, k) where k is DIMENSION. All
    methods that take points accept such batches; as_points() converts scalars and single
    points.

    Attributes:
        NAME (str): The short system name used in experiment configs.
        DIMENSION (int): The dimension k of the domain (1 or 2).
        DIAMETER (float): The diameter of the domain under the system's metric.
        SINGULAR_TOLERANCE (float): Distance to the singular set below which an orbit is singular.
        params (dict): The resolved parameter record.
        sampler_burn_in (int): Iterates discarded before invariant sampling starts.
        sampler_stride (int): Iterates between two retained samples of the same orbit.
    """
    NAME: str = None
    DIMENSION: int = 1
    DIAMETER: float = 1.0
    SINGULAR_TOLERANCE = 1e-12

    def __init__(self, params: dict, sampler_burn_in: int = 1000, sampler_stride: int = 10):
        self.params = dict(params)
        self.sampler_burn_in = sampler_burn_in
        self.sampler_stride = sampler_stride

    def __repr__(self):
        params = ", ".join(f"{key}={value}" for key, value in self.params.items())
        return f"{self.NAME}({params})"

    @property
    def name(self) -> str:
        return self.NAME

    def as_points(self, x) -> np.ndarray:
        """
        Converts a scalar, a single point or a batch into an array of shape (n, DIMENSION).
        """
        points = np.asarray(x, dtype=np.float64)
        if points.ndim == 0:
            points = points.reshape(1, 1)
        elif points.ndim == 1:
            points = points.reshape(-1, self.DIMENSION) if self.DIMENSION == 1 else points.reshape(1, -1)
        if points.shape[1] != self.DIMENSION:
            raise ValueError(f"Points of {self.NAME} must have {self.DIMENSION} coordinates.")
        return points

    def as_center(self, z) -> np.ndarray:
        """
        Converts a single point into a coordinate vector of length DIMENSION.
        """
        return self.as_points(z)[0]

    def unwrap(self, points: np.ndarray):
        """
        Converts a batch back to what a caller passed in for a single point: a float in one
        dimension, a coordinate array otherwise.
        """
        if len(points) == 1:
            return float(points[0, 0]) if self.DIMENSION == 1 else points[0].copy()
        return points

    @abstractmethod
    def map(self, points: np.ndarray) -> np.ndarray:
        """
        Applies R to every point of the batch. The map may be undefined on the singular set.
        """
        pass

    @abstractmethod
    def distance(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        """
        The metric d_Ω between every point of the batch and a center, or row by row against
        a batch of centers of the same shape.
        """
        pass

    @abstractmethod
    def uniform_start(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """
        Draws count points uniformly from the domain.
        """
        pass

    def singular_mask(self, points: np.ndarray) -> np.ndarray:
        """
        Flags points within SINGULAR_TOLERANCE of the singular set. Maps defined everywhere
        keep the default.
        """
        return np.zeros(len(points), dtype=bool)

    def ensure_regular(self, points: np.ndarray):
        if self.singular_mask(points).any():
            raise SingularOrbit(f"An orbit of {self.NAME} reached its singular set.")

    def advance(self, points: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """
        One Monte Carlo step of the orbit. Equals map(), but systems that lose precision under
        iteration may refill the lost low-order digits from rng.

        :raises SingularOrbit: If a point of the batch lies on the singular set.
        """
        self.ensure_regular(points)
        return self.map(points)

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """
        Brings points back into the domain, for domains with identifications.
        """
        return points

    def derivative(self, points: np.ndarray) -> np.ndarray:
        """
        |R'| along the expanding direction, for systems that expose it.
        """
        raise NotImplementedError(f"{self.NAME} does not expose a derivative.")

    def tower_base_mask(self, points: np.ndarray) -> np.ndarray:
        """
        Flags points in the base of the system's tower, for systems modeled by a tower.
        """
        raise NotImplementedError(f"{self.NAME} has no designated tower base.")

    def ball_offsets(self, radius: float, resolution: int = 20) -> np.ndarray:
        """
        Offsets of a regular grid of spacing radius / resolution over the closed ball of the
        given radius around the origin. Balls of the max metric are boxes, so the product grid
        covers them exactly.
        """
        steps = np.linspace(-radius, radius, 2 * resolution + 1)
        if self.DIMENSION == 1:
            return steps.reshape(-1, 1)
        return np.stack(np.meshgrid(steps, steps, indexing="ij"), axis=-1).reshape(-1, 2)

    def ball_grid(self, center: np.ndarray, radius: float, resolution: int = 20) -> np.ndarray:
        return self.wrap(np.asarray(center, dtype=np.float64) + self.ball_offsets(radius, resolution))
