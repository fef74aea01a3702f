"""
Orbits, invariant-measure sampling and ball-measure estimates of base systems.

Invariant measures are realised by Birkhoff sampling: many orbits started uniformly at
random, a burn-in discarded, then one point kept every `sampler_stride` iterates.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.stats

import montecarlo
from errors import EmptySample, ProfileRangeExceeded, SingularOrbit, ZeroBallMeasure
from montecarlo import BlockSeed, Estimate
from plugin_abstract.base_system import BaseSystem

logger = logging.getLogger(__name__)

CHAINS_PER_BLOCK = 4096
MAX_RESTARTS = 3


def iterate(system: BaseSystem, x, n: int):
    """
    Computes R^n(x) with the exact float map.

    :param system: The base system.
    :param x: A point (scalar in one dimension) or a batch of points.
    :param n: The number of iterates, n >= 0.
    :returns: R^n(x), in the shape x was given in.
    :raises SingularOrbit: If the orbit reaches the singular set within n steps.
    """
    if n < 0:
        raise ValueError("n must be nonnegative.")
    points = system.as_points(x)
    for _ in range(n):
        points = system.advance(points)
    return system.unwrap(points)


def orbit_block(system: BaseSystem, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Draws size points from independent orbits after burn-in, keeping one point per stride.
    """
    chains = min(size, CHAINS_PER_BLOCK)
    per_chain = -(-size // chains)
    points = system.uniform_start(rng, chains)
    for _ in range(system.sampler_burn_in):
        points = system.advance(points, rng)
    kept = np.empty((per_chain, chains, system.DIMENSION))
    for i in range(per_chain):
        for _ in range(system.sampler_stride):
            points = system.advance(points, rng)
        kept[i] = points
    return kept.reshape(-1, system.DIMENSION)[:size]


def sample_block(seed: BlockSeed, size: int, system: BaseSystem) -> np.ndarray:
    """
    One block of invariant samples. A block whose orbits hit the singular set is redrawn
    from a fresh generator at most MAX_RESTARTS times.
    """
    for attempt in range(MAX_RESTARTS + 1):
        try:
            return orbit_block(system, seed.rng(attempt), size)
        except SingularOrbit:
            logger.warning("Block %d of %s reached the singular set, restarting (attempt %d)",
                           seed.index, system.NAME, attempt + 1)
    raise SingularOrbit(f"Block {seed.index} of {system.NAME} kept reaching the singular set.")


def sample_invariant(system: BaseSystem, master_seed: int, count: int,
                     stream: int = montecarlo.STREAM_INVARIANT) -> np.ndarray:
    """
    Draws count points distributed (approximately) by the invariant measure.

    The result depends only on (system, master_seed, count, stream), never on the number of
    workers.

    :returns: An array of shape (count, DIMENSION).
    """
    if count < 0:
        raise ValueError("count must be nonnegative.")
    if count == 0:
        return np.empty((0, system.DIMENSION))
    blocks = montecarlo.run_blocks(sample_block, count, master_seed, stream, args=(system,))
    return np.concatenate(blocks)


def _require_samples(samples: np.ndarray):
    if samples is None or len(samples) == 0:
        raise EmptySample("At least one sample is needed to estimate a measure.")


def ball_measure(system: BaseSystem, z, r: float, samples: np.ndarray) -> Estimate:
    """
    Estimates μ(B_r(z)) as the fraction of samples in the closed ball.
    """
    _require_samples(samples)
    if r <= 0:
        raise ValueError("The radius must be positive.")
    inside = system.distance(samples, system.as_center(z)) <= r
    return Estimate.proportion(int(np.count_nonzero(inside)), len(samples))


def _anchored(radii: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.concatenate(([0.0], radii)), np.concatenate(([0.0], values))


def interpolate_profile(radii: np.ndarray, values: np.ndarray, r):
    """
    Piecewise-linear interpolation of a radius profile, anchored at h(0) = 0. Radii beyond the
    grid keep the last value.
    """
    rr, vv = _anchored(radii, values)
    return np.interp(r, rr, vv)


def invert_profile(radii: np.ndarray, values: np.ndarray, y):
    """
    Generalised inverse of interpolate_profile: the smallest radius at which the interpolant
    reaches y.

    :raises ProfileRangeExceeded: If y is above the last grid value.
    """
    rr, vv = _anchored(radii, values)
    y = np.asarray(y, dtype=np.float64)
    if np.any(y > vv[-1]):
        raise ProfileRangeExceeded(f"Profile values end at {vv[-1]:.6g}; cannot invert {np.max(y):.6g}.")
    y_pos = np.maximum(y, 0.0)
    i = np.clip(np.searchsorted(vv, y_pos, side="left"), 1, len(vv) - 1)
    lo, hi = vv[i - 1], vv[i]
    step = np.where(hi > lo, hi - lo, 1.0)
    fraction = np.clip((y_pos - lo) / step, 0.0, 1.0)
    radius = rr[i - 1] + fraction * (rr[i] - rr[i - 1])
    return np.where(y_pos <= 0.0, 0.0, radius)


@dataclass(frozen=True)
class MeasureProfile:
    """
    The radius profile h_z(r) = μ(B_r(z)) on a grid of radii.

    Attributes:
        center (np.ndarray): The center z.
        radii (np.ndarray): Strictly increasing positive radii.
        values (np.ndarray): Non-decreasing estimates of h_z at the radii.
        sample_count (int): The number of samples behind the estimates.
    """
    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    sample_count: int

    def __post_init__(self):
        if np.any(self.radii <= 0) or np.any(np.diff(self.radii) <= 0):
            raise ValueError("Profile radii must be positive and strictly increasing.")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("Profile values must be non-decreasing.")
        if len(self.radii) != len(self.values):
            raise ValueError("Profile radii and values must have the same length.")

    @property
    def max_radius(self) -> float:
        return float(self.radii[-1])

    def value_at(self, r):
        """
        h_z(r), interpolated between grid radii.
        """
        return interpolate_profile(self.radii, self.values, r)

    def l(self, y: float) -> float:
        """
        The smallest grid radius with h >= y.

        :raises ProfileRangeExceeded: If no grid value reaches y.
        """
        reached = np.flatnonzero(self.values >= y)
        if len(reached) == 0:
            raise ProfileRangeExceeded(f"No grid radius reaches measure {y:.6g}.")
        return float(self.radii[reached[0]])

    def radius_for(self, y):
        """
        The smallest radius at which the interpolated profile reaches y.
        """
        return invert_profile(self.radii, self.values, y)

    def jumps(self, factor: float = 5.0) -> list[int]:
        """
        Grid indices whose increment exceeds factor times both neighbouring increments.
        """
        steps = np.diff(np.concatenate(([0.0], self.values)))
        flagged = []
        for i in range(1, len(steps) - 1):
            if steps[i] > factor * max(steps[i - 1], steps[i + 1], np.finfo(float).tiny):
                flagged.append(i)
        return flagged


def profile_counts(distances: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """
    Number of distances at most each radius.
    """
    return np.searchsorted(np.sort(distances), radii, side="right")


def measure_profile(system: BaseSystem, z, radii_grid, samples: np.ndarray) -> MeasureProfile:
    """
    Estimates h_z on a radius grid. Monotonicity is enforced by a cumulative maximum.
    """
    _require_samples(samples)
    radii = np.asarray(radii_grid, dtype=np.float64)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("Radii must be positive and strictly increasing.")
    center = system.as_center(z)
    counts = profile_counts(system.distance(samples, center), radii)
    values = np.maximum.accumulate(counts / len(samples))
    return MeasureProfile(center, radii, values, len(samples))


def annulus_ratio(system: BaseSystem, z, r: float, delta: float, samples: np.ndarray) -> Estimate:
    """
    Estimates μ(B_{r+r^δ}(z) \\ B_r(z)) / μ(B_r(z)).

    :raises ZeroBallMeasure: If no sample falls in B_r(z).
    """
    _require_samples(samples)
    if delta <= 1:
        raise ValueError("delta must exceed 1.")
    d = system.distance(samples, system.as_center(z))
    inner = int(np.count_nonzero(d <= r))
    shell = int(np.count_nonzero((d > r) & (d <= r + r ** delta)))
    if inner == 0:
        raise ZeroBallMeasure(f"No sample fell in the ball of radius {r:.3g}.")
    ratio = shell / inner
    if shell == 0:
        return Estimate(0.0, montecarlo.Z_95 / inner)
    return Estimate(ratio, montecarlo.Z_95 * ratio * np.sqrt(1.0 / shell + 1.0 / inner))


def shell_bound_ratio(system: BaseSystem, z, r: float, eps: float, samples: np.ndarray) -> Estimate:
    """
    Estimates μ(B_{r+eps}(z) \\ B_r(z)) / (r·eps)^{1/2}, bounded for measures with bounded
    densities along unstable curves.
    """
    _require_samples(samples)
    d = system.distance(samples, system.as_center(z))
    shell = int(np.count_nonzero((d > r) & (d <= r + eps)))
    return Estimate.proportion(shell, len(samples)).scaled(1.0 / np.sqrt(r * eps))


class DimensionEstimate(NamedTuple):
    slope: float
    lower: float
    upper: float
    valid: bool


def local_dimension(system: BaseSystem, z, radii_grid, samples: np.ndarray) -> DimensionEstimate:
    """
    Log-log slope of h_z: least-squares slope, with the smallest and largest two-point slopes
    as lower and upper dimension bounds.

    :raises ZeroBallMeasure: If some ball of the grid holds no sample.
    """
    radii = np.asarray(radii_grid, dtype=np.float64)
    if len(radii) < 3:
        raise ValueError("At least 3 radii are needed.")
    profile = measure_profile(system, z, radii, samples)
    if np.any(profile.values <= 0):
        raise ZeroBallMeasure("A ball of the radius grid holds no sample.")
    log_r, log_h = np.log(radii), np.log(profile.values)
    slope = float(scipy.stats.linregress(log_r, log_h).slope)
    pairwise = np.diff(log_h) / np.diff(log_r)
    return DimensionEstimate(slope, float(pairwise.min()), float(pairwise.max()), slope > 0)


def expansion_check(system: BaseSystem, grid) -> float:
    """
    The smallest |R'| over a grid of points, for systems that expose a derivative.
    """
    points = system.as_points(grid)
    points = points[~system.singular_mask(points)]
    return float(np.min(system.derivative(points)))
