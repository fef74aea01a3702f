"""
Suspension semi-flows over base systems.

A point of the flow is a pair (x, s) with 0 <= s < r(x). It moves upward at unit speed,
and (x, r(x)) is identified with (R(x), 0). The invariant measure is the product of the
base measure and Lebesgue measure in the height, normalised by E(r).
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

import montecarlo
from dynamics import ball_measure, measure_profile, orbit_block, sample_invariant, MAX_RESTARTS, MeasureProfile
from errors import ConfigError, DirtyFlowBox, EmptySample, NonIntegrableRoof, NonPositiveRoof, SingularOrbit
from montecarlo import BlockSeed, Estimate
from plugin_abstract.base_system import BaseSystem

logger = logging.getLogger(__name__)

DEFAULT_MEAN_ROOF_SAMPLES = 10 ** 6
CAUCHY_TOLERANCE = 0.02
ROOF_CAP_INFLATION = 1.1
UNBOUNDED_ROOF_QUANTILE = 1.0 - 1e-8
# Relative slack under which a height is taken to have reached the roof.
CROSSING_TOLERANCE = 1e-12


class RoofFunction(ABC):
    """
    Abstract base class for roof functions r: Ω -> (0, ∞).

    Attributes:
        NAME (str): The config name of the roof.
        DEFAULTS (dict): The default parameter record.
        bounded (bool): Whether the roof is bounded above on the domain.
    """
    NAME: str = None
    DEFAULTS: dict = {}
    bounded = True

    def __init__(self, params: dict):
        self.params = dict(params)

    def __repr__(self):
        params = ", ".join(f"{key}={value}" for key, value in self.params.items())
        return f"{self.NAME}({params})"

    @abstractmethod
    def __call__(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluates the roof on a batch of base points of shape (n, k).
        """
        pass

    def mean(self, values: np.ndarray) -> Estimate:
        return Estimate.mean(values)


class ConstantRoof(RoofFunction):
    NAME = "constant"
    DEFAULTS = {"c": 1.0}

    def __init__(self, params: dict):
        super().__init__(params)
        self.c = float(params["c"])

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.full(len(points), self.c)

    def mean(self, values: np.ndarray) -> Estimate:
        return Estimate(self.c, 0.0)


class AffineRoof(RoofFunction):
    """
    r(x) = a + b·x on interval domains (first coordinate on the square).
    """
    NAME = "affine"
    DEFAULTS = {"a": 1.0, "b": 1.0}

    def __init__(self, params: dict):
        super().__init__(params)
        self.a = float(params["a"])
        self.b = float(params["b"])

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.a + self.b * points[:, 0]


class LogLorenzRoof(RoofFunction):
    """
    r(x, y) = -ln|x|, the return time to the Lorenz cross section. Unbounded at the
    singular line.
    """
    NAME = "loglorenz"
    bounded = False

    def __call__(self, points: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log(np.abs(points[:, 0]))


ROOFS = {roof.NAME: roof for roof in (ConstantRoof, AffineRoof, LogLorenzRoof)}


def create_roof(name: str, params: dict | None = None) -> RoofFunction:
    """
    Builds a roof function from its config name and parameters.

    :raises ConfigError: If the roof or one of its parameters is unknown.
    """
    if name not in ROOFS:
        raise ConfigError(f"Unknown roof '{name}'. Available roofs: {', '.join(sorted(ROOFS))}")
    roof_class = ROOFS[name]
    params = dict(params or {})
    unknown = sorted(set(params) - set(roof_class.DEFAULTS))
    if unknown:
        raise ConfigError(f"Unknown parameters for roof '{name}': {', '.join(unknown)}")
    return roof_class(roof_class.DEFAULTS | params)


class FlowPoint(NamedTuple):
    base: np.ndarray
    height: float


@dataclass
class FlowState:
    """
    A batch of flow points: bases of shape (n, k) and heights of shape (n,).
    """
    bases: np.ndarray
    heights: np.ndarray

    def __len__(self):
        return len(self.heights)

    def __getitem__(self, i: int) -> FlowPoint:
        return FlowPoint(self.bases[i].copy(), float(self.heights[i]))


@dataclass
class SuspensionFlow:
    """
    The suspension of a base system under a roof function.

    Attributes:
        base_system (BaseSystem): The base map R.
        roof (RoofFunction): The roof r.
        mean_roof (Estimate): Monte Carlo estimate of E(r) = ∫ r dμ_Ω.
        master_seed (int): The seed the flow was built with.
        roof_cap (float): Upper bound used by rejection sampling of the r-weighted base marginal.
    """
    base_system: BaseSystem
    roof: RoofFunction
    mean_roof: Estimate
    master_seed: int
    roof_cap: float

    def __post_init__(self):
        if self.mean_roof.value <= 0:
            raise NonPositiveRoof("The mean roof must be positive.")

    def __repr__(self):
        return f"SuspensionFlow({self.base_system!r}, {self.roof!r})"

    @property
    def mean(self) -> float:
        return self.mean_roof.value

    def as_flow_point(self, p) -> FlowPoint:
        """
        Accepts a FlowPoint or a (base, height) pair and checks the canonical form.
        """
        base, height = p
        base = self.base_system.as_center(base)
        height = float(height)
        roof = float(self.roof(base.reshape(1, -1))[0])
        if not 0.0 <= height < roof:
            raise ValueError(f"Height {height} is outside [0, {roof}).")
        return FlowPoint(base, height)

    def as_state(self, p) -> FlowState:
        point = self.as_flow_point(p)
        return FlowState(point.base.reshape(1, -1), np.array([point.height]))


@dataclass(frozen=True)
class FlowBall:
    """
    The closed box-metric ball B_ρ(x) × [s - ρ, s + ρ] around a flow point (x, s).
    """
    center: FlowPoint
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("The ball radius must be positive.")

    @property
    def base(self) -> np.ndarray:
        return self.center.base

    @property
    def low(self) -> float:
        return self.center.height - self.radius

    @property
    def high(self) -> float:
        return self.center.height + self.radius


def roof_infimum(roof: RoofFunction, system: BaseSystem, center, r: float, resolution: int = 20) -> float:
    """
    Infimum of the roof over the base ball B_r(center), taken on a grid of spacing r / resolution.
    """
    grid = system.ball_grid(system.as_center(center), r, resolution)
    grid = grid[~system.singular_mask(grid)]
    return float(np.min(roof(grid)))


def is_clean(flow: SuspensionFlow, ball: FlowBall) -> bool:
    """
    Whether the ball is a flow box that stays clear of the floor and the roof.
    """
    if ball.radius >= ball.center.height:
        return False
    return ball.high < roof_infimum(flow.roof, flow.base_system, ball.base, ball.radius)


def require_clean(flow: SuspensionFlow, ball: FlowBall):
    if not is_clean(flow, ball):
        raise DirtyFlowBox(f"The ball of radius {ball.radius:.6g} at height {ball.center.height:.6g} "
                           f"is not a clean flow box.")


def _roof_values(system: BaseSystem, roof: RoofFunction, samples: np.ndarray) -> np.ndarray:
    values = roof(samples)
    if np.any(np.isnan(values)) or np.any(values <= 0):
        raise NonPositiveRoof(f"The roof {roof!r} is not positive on sampled points of {system.NAME}.")
    if np.any(np.isinf(values)):
        raise NonIntegrableRoof(f"The roof {roof!r} is infinite on sampled points of {system.NAME}.")
    return values


def check_integrable(values: np.ndarray, tolerance: float = CAUCHY_TOLERANCE):
    """
    Cauchy proxy for integrability: the mean over the full sample may not move away from
    the mean over its first half by more than the tolerance (or the statistical error).

    :raises NonIntegrableRoof: If the two means disagree.
    """
    if len(values) < 4:
        return
    half = Estimate.mean(values[:len(values) // 2])
    full = Estimate.mean(values)
    allowed = max(tolerance * abs(full.value), 3.0 * np.hypot(half.half_width, full.half_width))
    if abs(full.value - half.value) > allowed:
        raise NonIntegrableRoof(f"The roof mean did not settle: {half.value:.6g} on half the sample, "
                                f"{full.value:.6g} on all of it.")


def build_suspension(system: BaseSystem, roof: RoofFunction, seed: int,
                     mean_roof_samples: int = DEFAULT_MEAN_ROOF_SAMPLES) -> SuspensionFlow:
    """
    Builds the suspension flow and estimates E(r) once from invariant samples.

    :raises NonPositiveRoof: If the roof is not positive on the sampled points.
    :raises NonIntegrableRoof: If the Cauchy proxy fails.
    """
    if mean_roof_samples < 1:
        raise EmptySample("mean_roof_samples must be positive.")
    samples = sample_invariant(system, seed, mean_roof_samples, stream=montecarlo.STREAM_ROOF)
    values = _roof_values(system, roof, samples)
    check_integrable(values)
    mean_roof = roof.mean(values)
    if roof.bounded:
        cap = float(np.max(values))
    else:
        cap = float(np.quantile(values, UNBOUNDED_ROOF_QUANTILE))
    logger.info("E(r) for %r over %s: %.6g ± %.2g", roof, system.NAME, mean_roof.value, mean_roof.half_width)
    return SuspensionFlow(system, roof, mean_roof, seed, ROOF_CAP_INFLATION * cap)


def advance_state(flow: SuspensionFlow, bases: np.ndarray, heights: np.ndarray, t: float,
                  rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Moves a batch of flow points forward by time t, applying R at every roof crossing.
    """
    system = flow.base_system
    bases = bases.copy()
    heights = heights.astype(np.float64, copy=True)
    remaining = np.full(len(heights), float(t))
    roofs = flow.roof(bases)
    crossing = heights + remaining >= roofs * (1.0 - CROSSING_TOLERANCE)
    while crossing.any():
        remaining[crossing] = np.maximum(remaining[crossing] - (roofs[crossing] - heights[crossing]), 0.0)
        heights[crossing] = 0.0
        bases[crossing] = system.advance(bases[crossing], rng)
        roofs[crossing] = flow.roof(bases[crossing])
        crossing = heights + remaining >= roofs * (1.0 - CROSSING_TOLERANCE)
    return bases, heights + remaining


def flow_advance(flow: SuspensionFlow, p, t: float) -> FlowPoint:
    """
    X_t(p) with exact accumulation of roof values.

    :param p: A FlowPoint or a (base, height) pair.
    :param t: The elapsed time, t >= 0.
    :raises SingularOrbit: If the base orbit reaches the singular set at a crossing.
    """
    if t < 0:
        raise ValueError("The elapsed time must be nonnegative.")
    state = flow.as_state(p)
    bases, heights = advance_state(flow, state.bases, state.heights, t)
    return FlowPoint(bases[0], float(heights[0]))


def flow_ball_measure(flow: SuspensionFlow, ball: FlowBall, samples: np.ndarray, strict: bool = False,
                      flow_samples: FlowState | None = None) -> Estimate:
    """
    μ_X of a flow ball by the product formula μ_Ω(B_ρ(x))·2ρ/E(r).

    Balls that are not clean flow boxes are counted directly against μ_X samples instead,
    or rejected in strict mode.

    :param samples: Invariant samples of the base system.
    :param strict: Raise instead of falling back to direct counting.
    :param flow_samples: μ_X samples for the fallback; drawn from the flow's seed if omitted.
    :raises DirtyFlowBox: If the ball is not clean and strict is set.
    """
    if not is_clean(flow, ball):
        if strict:
            require_clean(flow, ball)
        logger.warning("Flow ball of radius %.3g is not clean; counting it directly", ball.radius)
        if flow_samples is None:
            flow_samples = sample_flow_invariant(flow, flow.master_seed, len(samples))
        return direct_flow_ball_measure(flow, ball, flow_samples)
    base = ball_measure(flow.base_system, ball.base, ball.radius, samples)
    return base.scaled(2.0 * ball.radius / flow.mean)


def direct_flow_ball_measure(flow: SuspensionFlow, ball: FlowBall, flow_samples: FlowState) -> Estimate:
    """
    Fraction of μ_X samples inside the box-metric ball.
    """
    if len(flow_samples) == 0:
        raise EmptySample("At least one flow sample is needed.")
    near = flow.base_system.distance(flow_samples.bases, ball.base) <= ball.radius
    inside = near & (np.abs(flow_samples.heights - ball.center.height) <= ball.radius)
    return Estimate.proportion(int(np.count_nonzero(inside)), len(flow_samples))


def weighted_bases(flow: SuspensionFlow, rng: np.random.Generator, count: int) -> np.ndarray:
    """
    Base points distributed by r·μ_Ω / E(r), by rejection against the roof cap.
    """
    system = flow.base_system
    if isinstance(flow.roof, ConstantRoof):
        return orbit_block(system, rng, count)
    accepted, total = [], 0
    while total < count:
        candidates = orbit_block(system, rng, count)
        keep = rng.random(len(candidates)) * flow.roof_cap < flow.roof(candidates)
        accepted.append(candidates[keep])
        total += int(np.count_nonzero(keep))
    return np.concatenate(accepted)[:count]


def flow_sample_block(flow: SuspensionFlow, rng: np.random.Generator, count: int) -> FlowState:
    bases = weighted_bases(flow, rng, count)
    heights = rng.random(count) * flow.roof(bases)
    return FlowState(bases, heights)


def _sample_flow_block(seed: BlockSeed, size: int, flow: SuspensionFlow) -> FlowState:
    for attempt in range(MAX_RESTARTS + 1):
        try:
            return flow_sample_block(flow, seed.rng(attempt), size)
        except SingularOrbit:
            logger.warning("Flow sample block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Flow sample block {seed.index} kept reaching the singular set.")


def sample_flow_invariant(flow: SuspensionFlow, seed: int, count: int,
                          stream: int = montecarlo.STREAM_FLOW) -> FlowState:
    """
    Draws count points from the normalised invariant measure μ_X.
    """
    if count < 1:
        raise EmptySample("count must be positive.")
    blocks = montecarlo.run_blocks(_sample_flow_block, count, seed, stream, args=(flow,))
    return FlowState(np.concatenate([b.bases for b in blocks]), np.concatenate([b.heights for b in blocks]))


def flow_measure_profile(flow: SuspensionFlow, center, radii_grid, samples: np.ndarray) -> MeasureProfile:
    """
    r -> μ_X(B_r(center)) on a radius grid, from the base profile and the product formula.
    """
    center = flow.as_flow_point(center)
    base_profile = measure_profile(flow.base_system, center.base, radii_grid, samples)
    radii = base_profile.radii
    if radii[-1] >= center.height or not is_clean(flow, FlowBall(center, float(radii[-1]))):
        logger.warning("Flow profile radii up to %.3g leave the clean flow-box regime", radii[-1])
    values = np.maximum.accumulate(np.minimum(base_profile.values * 2.0 * radii / flow.mean, 1.0))
    return MeasureProfile(np.append(center.base, center.height), radii, values, base_profile.sample_count)
