"""
Extreme values of observables φ(x) = g(profile argument at d(x, z)) along orbits.

Three observable types share one convention: g is decreasing with g(0) at the maximum, and
the normalizing level is u_t(y) = g(τ(y)/t), so {φ > u_t(y)} is exactly the ball around z
whose profile argument equals τ(y)/t.

    kind 1: g(x) = -log x,        τ(y) = e^{-y}      (Gumbel)
    kind 2: g(x) = x^{-1/β},      τ(y) = y^{-β}      (Fréchet, y > 0)
    kind 3: g(x) = D - x^{1/γ},   τ(y) = (-y)^γ      (Weibull, y <= 0)

The map form takes the argument μ(B_d(z)); the flow form takes μ_X(B_d(z)) / (2d).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

import montecarlo
from dynamics import MAX_RESTARTS, MeasureProfile, interpolate_profile, invert_profile
from errors import DomainError, ProfileRangeExceeded, SingularOrbit
from hitting import MapBall, draw_starts, orbit_rng, walk
from montecarlo import BlockSeed, Estimate
from plugin_abstract.base_system import BaseSystem
from suspension import FlowBall, FlowPoint, FlowState, SuspensionFlow, require_clean

logger = logging.getLogger(__name__)

KINDS = (1, 2, 3)
FORMS = ("map", "flow")


@dataclass(frozen=True)
class TailTransform:
    """
    τ_kind: the tail of the limit law in terms of y.
    """
    kind: int
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"Observable kind must be one of {KINDS}.")
        if self.kind == 2 and not self.beta > 0:
            raise DomainError("Kind 2 needs beta > 0.")
        if self.kind == 3 and not self.gamma > 0:
            raise DomainError("Kind 3 needs gamma > 0.")

    def check_domain(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.kind == 2 and np.any(y <= 0):
            raise DomainError("Kind 2 levels need y > 0.")
        if self.kind == 3 and np.any(y > 0):
            raise DomainError("Kind 3 levels need y <= 0.")
        return y

    def __call__(self, y):
        y = self.check_domain(y)
        if self.kind == 1:
            return np.exp(-y)
        if self.kind == 2:
            return np.power(y, -self.beta)
        return np.power(-y, self.gamma)


@dataclass
class ObservableSpec:
    """
    An observable of kind 1, 2 or 3 centered at z.

    Kind 1 uses g(x) = -log x; its auxiliary scale function p is identically 1 under the
    levels used here.

    Attributes:
        kind (int): 1, 2 or 3.
        system (BaseSystem): The base system, whose metric measures distances.
        center: z, a base point for the map form, a FlowPoint for the flow form.
        profile (MeasureProfile): h_z on a radius grid; μ_X of flow balls for the flow form.
        form (str): "map" or "flow".
        beta (float): Kind 2 exponent.
        gamma (float): Kind 3 exponent.
        D (float): Kind 3 maximum g(0).
    """
    kind: int
    system: BaseSystem
    center: np.ndarray | FlowPoint
    profile: MeasureProfile
    form: str = "map"
    beta: float = 1.0
    gamma: float = 1.0
    D: float = 0.0
    transform: TailTransform = field(init=False, repr=False)
    argument: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.form not in FORMS:
            raise DomainError(f"Observable form must be one of {FORMS}.")
        if self.kind == 3 and not math.isfinite(self.D):
            raise DomainError("Kind 3 needs a finite D.")
        self.transform = TailTransform(self.kind, self.beta, self.gamma)
        if self.form == "flow":
            base, height = self.center
            self.center = FlowPoint(self.system.as_center(base), float(height))
            argument = self.profile.values / (2.0 * self.profile.radii)
            self.argument = np.maximum.accumulate(argument)
        else:
            self.center = self.system.as_center(self.center)
            self.argument = self.profile.values

    @property
    def max_radius(self) -> float:
        return self.profile.max_radius

    def g(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore"):
            if self.kind == 1:
                return -np.log(x)
            if self.kind == 2:
                return np.power(x, -1.0 / self.beta)
        return self.D - np.power(x, 1.0 / self.gamma)

    def argument_at(self, d):
        return interpolate_profile(self.profile.radii, self.argument, d)

    def radius_for(self, value):
        """
        The smallest radius whose profile argument reaches value.
        """
        return invert_profile(self.profile.radii, self.argument, value)

    def distances(self, points) -> np.ndarray:
        """
        Distances to the center: d_Ω for base points, the box metric for flow states.
        """
        if isinstance(points, FlowState):
            if self.form != "flow":
                raise DomainError("Flow states need a flow-form observable.")
            base_gap = self.system.distance(points.bases, self.center.base)
            return np.maximum(base_gap, np.abs(points.heights - self.center.height))
        if self.form == "flow":
            raise DomainError("A flow-form observable needs flow points.")
        return self.system.distance(self.system.as_points(points), self.center)

    def phi(self, d, clamp: bool = False):
        """
        φ as a function of the distance to z. Distances past the profile grid raise, or are
        evaluated at the last grid radius when clamp is set.
        """
        d = np.asarray(d, dtype=np.float64)
        if np.any(d > self.max_radius):
            if not clamp:
                raise ProfileRangeExceeded(f"Distance {np.max(d):.6g} is past the profile grid "
                                           f"(max radius {self.max_radius:.6g}).")
            d = np.minimum(d, self.max_radius)
        return self.g(self.argument_at(d))


def observe(spec: ObservableSpec, x) -> float:
    """
    φ(x) for a single base point, or a single FlowPoint for the flow form. Returns +inf at z
    for kinds 1 and 2, and D for kind 3.
    """
    if spec.form == "flow":
        base, height = x
        x = FlowState(spec.system.as_points(base), np.array([float(height)]))
    return float(spec.phi(spec.distances(x))[0])


def observe_many(spec: ObservableSpec, points) -> np.ndarray:
    """
    φ over a batch of base points, or over a FlowState for the flow form.
    """
    return spec.phi(spec.distances(points))


def normalizing_level(spec: ObservableSpec, t: float, y):
    """
    u_t(y) = g(τ(y)/t).

    :raises DomainError: If y is outside the domain of the kind's tail transform.
    """
    if t <= 0:
        raise DomainError("The horizon must be positive.")
    return spec.g(spec.transform(y) / t)


def level_radius(spec: ObservableSpec, t: float, y):
    """
    The radius ρ of the ball {φ > u_t(y)}: the profile argument at ρ is τ(y)/t.

    :raises ProfileRangeExceeded: If the profile grid does not reach τ(y)/t.
    """
    if t <= 0:
        raise DomainError("The horizon must be positive.")
    return spec.radius_for(spec.transform(y) / t)


def limit_law(kind: int, y, G: Callable | None = None, beta: float = 1.0, gamma: float = 1.0):
    """
    H(y) = G(τ_kind(y)), with G(t) = e^{-t} unless given.
    """
    tail = TailTransform(kind, beta, gamma)(y)
    if G is None:
        return np.exp(-tail)
    return G(tail)


def _gap(value: float, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    return np.maximum(np.maximum(low - value, value - high), 0.0)


def orbit_min_distance(model, center, starts, t: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """
    min over 0 <= s <= t of the distance from the orbit of every start to the center.

    Maps take iterates 0..floor(t). Flows are handled segment by segment: while the base is
    frozen the box distance to z is smallest at the height of z, clipped to the segment.
    """
    if not isinstance(model, SuspensionFlow):
        points = starts.copy()
        nearest = model.distance(points, center)
        for _ in range(int(math.floor(t))):
            points = model.advance(points, rng)
            nearest = np.minimum(nearest, model.distance(points, center))
        return nearest

    flow, system = model, model.base_system
    bases = starts.bases.copy()
    heights = starts.heights
    roofs = flow.roof(bases)
    top = np.minimum(roofs, heights + t)
    nearest = np.maximum(system.distance(bases, center.base), _gap(center.height, heights, top))
    remaining = t - (roofs - heights)
    active = remaining >= 0
    while active.any():
        idx = np.flatnonzero(active)
        bases[idx] = system.advance(bases[idx], rng)
        roofs = flow.roof(bases[idx])
        top = np.minimum(roofs, remaining[idx])
        segment = np.maximum(system.distance(bases[idx], center.base), _gap(center.height, 0.0, top))
        nearest[idx] = np.minimum(nearest[idx], segment)
        remaining[idx] -= roofs
        active = remaining >= 0
    return nearest


def running_max(model, spec: ObservableSpec, start, t: float, seed: int | None = None) -> float:
    """
    M_t = sup{φ(X_s(start)): 0 <= s <= t}, or the maximum over iterates 0..floor(t) for maps.

    :param seed: Refill seed for the orbit; None follows the exact float map.
    :raises ProfileRangeExceeded: If the orbit never comes within the profile grid.
    """
    if t < 0:
        raise DomainError("The horizon must be nonnegative.")
    if isinstance(model, SuspensionFlow):
        point = model.as_flow_point(start)
        starts = FlowState(point.base.reshape(1, -1), np.array([point.height]))
    else:
        starts = model.as_points(start)
    nearest = orbit_min_distance(model, spec.center, starts, t, orbit_rng(seed))
    return float(spec.phi(nearest)[0])


def _min_distance_block(seed: BlockSeed, size: int, model, center, t: float) -> np.ndarray:
    for attempt in range(MAX_RESTARTS + 1):
        rng = seed.rng(attempt)
        try:
            return orbit_min_distance(model, center, draw_starts(model, rng, size), t, rng)
        except SingularOrbit:
            logger.warning("Maximum block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Maximum block {seed.index} kept reaching the singular set.")


def trajectory_min_distances(model, center, t: float, count: int, seed: int,
                             stream: int = montecarlo.STREAM_TRAJECTORIES) -> np.ndarray:
    blocks = montecarlo.run_blocks(_min_distance_block, count, seed, stream, args=(model, center, t))
    return np.concatenate(blocks)


def _check_model(model, spec: ObservableSpec):
    expected = "flow" if isinstance(model, SuspensionFlow) else "map"
    if spec.form != expected:
        raise DomainError(f"A {spec.form}-form observable cannot run on a {expected}.")
    if spec.profile.jumps():
        logger.warning("The measure profile jumps at radii %s; the limit law needs a continuous profile",
                       [float(spec.profile.radii[i]) for i in spec.profile.jumps()])


@dataclass
class EvlResult:
    """
    Empirical and predicted H over a y grid, with the levels and the ball radii behind them.
    """
    y: np.ndarray
    levels: np.ndarray
    radii: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    half_width: np.ndarray


def evl_empirical(model, spec: ObservableSpec, t: float, y_grid, n_samples: int, seed: int) -> EvlResult:
    """
    Fraction of invariant starts with M_t <= u_t(y), per y, against H(y) = exp(-τ(y)).
    """
    _check_model(model, spec)
    y = spec.transform.check_domain(y_grid)
    levels = normalizing_level(spec, t, y)
    radii = level_radius(spec, t, y)
    maxima = spec.phi(trajectory_min_distances(model, spec.center, t, n_samples, seed), clamp=True)
    empirical = np.array([np.count_nonzero(maxima <= u) for u in levels]) / n_samples
    half_width = montecarlo.Z_95 * np.sqrt(empirical * (1.0 - empirical) / n_samples)
    predicted = limit_law(spec.kind, y, beta=spec.beta, gamma=spec.gamma)
    return EvlResult(y, levels, radii, empirical, predicted, half_width)


def _entrance_block(seed: BlockSeed, size: int, model, target, t: float) -> np.ndarray:
    """
    Whether each start visits the target during [0, t], a start inside the target included.
    """
    for attempt in range(MAX_RESTARTS + 1):
        rng = seed.rng(attempt)
        try:
            starts = draw_starts(model, rng, size)
            batch = walk(model, starts, target, 1, t, rng)
            if isinstance(model, SuspensionFlow):
                inside = batch.exit_times > 0
            else:
                inside = model.distance(starts, target.center) <= target.radius
            return inside | np.isfinite(batch.hits[:, 0])
        except SingularOrbit:
            logger.warning("Entrance block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Entrance block {seed.index} kept reaching the singular set.")


@dataclass
class DualityResult:
    """
    P(M_t <= u_t(y)) and P(no visit to B_ρ(z) during [0, t]), measured on independent starts,
    with the gap between the two events on the maximum sample.
    """
    radius: float
    level: float
    evl: Estimate
    no_visit: Estimate
    same_sample_gap: float

    @property
    def difference(self) -> float:
        return abs(self.evl.value - self.no_visit.value)

    @property
    def combined_half_width(self) -> float:
        return math.hypot(self.evl.half_width, self.no_visit.half_width)


def evl_hitting_duality(model, spec: ObservableSpec, t: float, y: float, n_samples: int,
                        seed: int) -> DualityResult:
    """
    Measures both sides of {M_t <= u_t(y)} = {no visit to B_ρ(z) during [0, t]}.

    :raises DirtyFlowBox: If the flow ball of radius ρ is not clean.
    """
    _check_model(model, spec)
    level = float(normalizing_level(spec, t, y))
    radius = float(level_radius(spec, t, y))
    if isinstance(model, SuspensionFlow):
        target = FlowBall(spec.center, radius)
        require_clean(model, target)
    else:
        target = MapBall(spec.center, radius)

    nearest = trajectory_min_distances(model, spec.center, t, n_samples, seed)
    below = spec.phi(nearest, clamp=True) <= level
    evl = Estimate.proportion(int(np.count_nonzero(below)), n_samples)
    same_sample_gap = float(np.count_nonzero(below != (nearest > radius))) / n_samples

    blocks = montecarlo.run_blocks(_entrance_block, n_samples, seed, montecarlo.STREAM_DUALITY,
                                   args=(model, target, t))
    visited = np.concatenate(blocks)
    no_visit = Estimate.proportion(int(np.count_nonzero(~visited)), n_samples)
    return DualityResult(radius, level, evl, no_visit, same_sample_gap)
