"""
Exit times and higher-order hitting times of flow balls and base balls, the normalised
hitting-time laws built from them, Poisson counts and Kac's lemma.

Flow hits are computed segment by segment: between two roof crossings the base point is
frozen, so a clean flow ball is entered exactly when the base lies in the base ball and
the height passes s - ρ.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.stats

import montecarlo
from dynamics import ball_measure, orbit_block, sample_invariant, MAX_RESTARTS
from empirical import EmpiricalCdf
from errors import HorizonExceeded, SingularOrbit, TruncatedRecord, ZeroBallMeasure
from montecarlo import BlockSeed, Estimate
from plugin_abstract.base_system import BaseSystem
from suspension import FlowBall, FlowState, SuspensionFlow, flow_sample_block, require_clean

logger = logging.getLogger(__name__)

DEFAULT_MEASURE_SAMPLES = 10 ** 6
# Default horizon in normalised time; trajectories still out of the ball are censored.
DEFAULT_NORMALIZED_HORIZON = 50.0
DEFAULT_MAX_ITERATES = 10 ** 6


class MapBall(NamedTuple):
    """
    A closed ball B_r(center) of the base system.
    """
    center: np.ndarray
    radius: float


@dataclass
class HittingRecord:
    """
    The exit time and the ordered hits τ¹ < τ² < ... of one orbit, up to a horizon.
    """
    exit_time: float
    hits: np.ndarray
    truncated: bool

    def __post_init__(self):
        if np.any(np.diff(self.hits) <= 0):
            raise ValueError("Hits must be strictly increasing.")
        if len(self.hits) and self.hits[0] <= self.exit_time:
            raise ValueError("The first hit must come after the exit time.")


@dataclass
class HitBatch:
    """
    Hits of many trajectories: hits[i, m] is τ^{m+1} of trajectory i, or +inf past the horizon.
    """
    exit_times: np.ndarray
    hits: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.count_nonzero(np.isfinite(self.hits), axis=1)

    def __len__(self):
        return len(self.exit_times)

    def record(self, i: int) -> HittingRecord:
        hits = self.hits[i][np.isfinite(self.hits[i])]
        return HittingRecord(float(self.exit_times[i]), hits, len(hits) < self.hits.shape[1])

    @classmethod
    def concatenate(cls, batches: list["HitBatch"]) -> "HitBatch":
        return cls(np.concatenate([b.exit_times for b in batches]), np.concatenate([b.hits for b in batches]))


def _exit_times(flow: SuspensionFlow, state: FlowState, ball: FlowBall) -> np.ndarray:
    near = flow.base_system.distance(state.bases, ball.base) <= ball.radius
    inside = near & (state.heights >= ball.low) & (state.heights <= ball.high)
    return np.where(inside, ball.high - state.heights, 0.0)


def flow_walk(flow: SuspensionFlow, state: FlowState, ball: FlowBall, m_max: int, horizon: float,
              rng: np.random.Generator | None = None) -> HitBatch:
    """
    Exit times and the first m_max hits, no later than horizon, of a clean flow ball.
    """
    system = flow.base_system
    bases = state.bases.copy()
    heights = state.heights
    n = len(heights)
    hits = np.full((n, m_max), np.inf)
    counts = np.zeros(n, dtype=np.int64)

    # The start segment only hits when the start is below the ball.
    near = system.distance(bases, ball.base) <= ball.radius
    first = near & (heights < ball.low) & (ball.low - heights <= horizon)
    hits[first, 0] = ball.low - heights[first]
    counts[first] = 1

    clock = flow.roof(bases) - heights
    active = (counts < m_max) & (clock + ball.low <= horizon)
    while active.any():
        idx = np.flatnonzero(active)
        bases[idx] = system.advance(bases[idx], rng)
        hit = idx[system.distance(bases[idx], ball.base) <= ball.radius]
        hits[hit, counts[hit]] = clock[hit] + ball.low
        counts[hit] += 1
        clock[idx] += flow.roof(bases[idx])
        active = (counts < m_max) & (clock + ball.low <= horizon)
    return HitBatch(_exit_times(flow, state, ball), hits)


def map_walk(system: BaseSystem, points: np.ndarray, target: MapBall, m_max: int, n_max: int,
             rng: np.random.Generator | None = None) -> HitBatch:
    """
    The first m_max visit times k >= 1, no later than n_max, of a base ball.
    """
    points = points.copy()
    n = len(points)
    hits = np.full((n, m_max), np.inf)
    counts = np.zeros(n, dtype=np.int64)
    for k in range(1, n_max + 1):
        idx = np.flatnonzero(counts < m_max)
        if len(idx) == 0:
            break
        points[idx] = system.advance(points[idx], rng)
        hit = idx[system.distance(points[idx], target.center) <= target.radius]
        hits[hit, counts[hit]] = k
        counts[hit] += 1
    return HitBatch(np.zeros(n), hits)


def exit_time(flow: SuspensionFlow, p, ball: FlowBall, horizon: float) -> float:
    """
    E_B(p) = inf{t >= 0: X_t(p) ∉ B}, zero for starts outside the ball.

    :raises HorizonExceeded: If the exit comes after horizon.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive.")
    value = float(_exit_times(flow, flow.as_state(p), ball)[0])
    if value > horizon:
        raise HorizonExceeded(f"The exit time {value:.6g} is past the horizon {horizon:.6g}.")
    return value


def hitting_times(flow: SuspensionFlow, p, ball: FlowBall, m_max: int, horizon: float,
                  rng: np.random.Generator | None = None) -> HittingRecord:
    """
    The flow hitting times τ¹ < ... < τ^{m_max} of a clean flow ball, up to horizon.

    :raises DirtyFlowBox: If the ball is not clean.
    :raises SingularOrbit: If the base orbit reaches the singular set.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1.")
    require_clean(flow, ball)
    return flow_walk(flow, flow.as_state(p), ball, m_max, horizon, rng).record(0)


def discrete_hitting_times(system: BaseSystem, x, target, m_max: int, n_max: int,
                           rng: np.random.Generator | None = None) -> HittingRecord:
    """
    The integer hitting times τ^m = min{k > τ^{m-1}: R^k(x) ∈ target} of a base ball.

    :param target: A MapBall or a (center, radius) pair.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1.")
    center, radius = target
    target = MapBall(system.as_center(center), float(radius))
    record = map_walk(system, system.as_points(x), target, m_max, n_max, rng).record(0)
    return HittingRecord(0.0, record.hits.astype(np.int64), record.truncated)


def orbit_rng(seed: int | None) -> np.random.Generator | None:
    # Identically seeded generators replay the same refilled orbit.
    if seed is None:
        return None
    return montecarlo.block_rng(seed, montecarlo.STREAM_ORBITS, 0)


def _roof_sum(flow: SuspensionFlow, x0: np.ndarray, count: int, rng) -> float:
    """
    Σ_{0 <= i < count} r(R^i x0).
    """
    points = x0.reshape(1, -1)
    total = 0.0
    for i in range(count):
        if i:
            points = flow.base_system.advance(points, rng)
        total += float(flow.roof(points)[0])
    return total


def flow_base_consistency(flow: SuspensionFlow, p, ball: FlowBall, m: int, seed: int | None = None,
                          horizon: float | None = None) -> float:
    """
    |τ^{m,X} - reconstruction| where the reconstruction is the time to the first roof, plus
    the roofs along the base orbit up to its k-th visit of the base ball, plus s - ρ.

    :param seed: Refill seed of the base orbit; None follows the exact float map.
    :raises TruncatedRecord: If fewer than m hits occur before the horizon.
    """
    if m < 1:
        raise ValueError("m must be at least 1.")
    p = flow.as_flow_point(p)
    horizon = horizon or DEFAULT_MAX_ITERATES * flow.mean
    record = hitting_times(flow, p, ball, m, horizon, orbit_rng(seed))
    if len(record.hits) < m:
        raise TruncatedRecord(f"Only {len(record.hits)} of {m} hits occurred before the horizon.")

    system = flow.base_system
    starts_below = (system.distance(p.base.reshape(1, -1), ball.base)[0] <= ball.radius
                    and p.height < ball.low)
    visits = m - int(starts_below)
    if visits == 0:
        reconstruction = ball.low - p.height
    else:
        discrete = discrete_hitting_times(system, p.base, (ball.base, ball.radius), visits,
                                          DEFAULT_MAX_ITERATES, orbit_rng(seed))
        if discrete.truncated:
            raise TruncatedRecord(f"The base orbit made fewer than {visits} visits.")
        k = int(discrete.hits[visits - 1])
        reconstruction = _roof_sum(flow, p.base, k, orbit_rng(seed)) - p.height + ball.low
    return abs(float(record.hits[m - 1]) - reconstruction)


def birkhoff_factor(flow: SuspensionFlow, p, ball: FlowBall, m: int, seed: int | None = None) -> float:
    """
    Σ_{i < τ^{m,R}} r(R^i y) / (τ^{m,R}·E(r)) for the base y of p: the ergodic average of the
    roof up to the m-th base visit, relative to its mean.
    """
    p = flow.as_flow_point(p)
    discrete = discrete_hitting_times(flow.base_system, p.base, (ball.base, ball.radius), m,
                                      DEFAULT_MAX_ITERATES, orbit_rng(seed))
    if discrete.truncated:
        raise TruncatedRecord(f"The base orbit made fewer than {m} visits.")
    k = int(discrete.hits[m - 1])
    return _roof_sum(flow, p.base, k, orbit_rng(seed)) / (k * flow.mean)


def _target(model, center, radius: float):
    if isinstance(model, SuspensionFlow):
        ball = FlowBall(model.as_flow_point(center), float(radius))
        require_clean(model, ball)
        return ball
    return MapBall(model.as_center(center), float(radius))


def draw_starts(model, rng: np.random.Generator, count: int):
    """
    Starts distributed by μ_X for flows, by μ_Ω for base systems.
    """
    if isinstance(model, SuspensionFlow):
        return flow_sample_block(model, rng, count)
    return orbit_block(model, rng, count)


def walk(model, starts, target, m_max: int, horizon: float, rng: np.random.Generator | None = None) -> HitBatch:
    if isinstance(model, SuspensionFlow):
        return flow_walk(model, starts, target, m_max, horizon, rng)
    return map_walk(model, starts, target, m_max, int(math.floor(horizon)), rng)


def _trajectory_block(seed: BlockSeed, size: int, model, target, m_max: int, horizon: float) -> HitBatch:
    for attempt in range(MAX_RESTARTS + 1):
        rng = seed.rng(attempt)
        try:
            return walk(model, draw_starts(model, rng, size), target, m_max, horizon, rng)
        except SingularOrbit:
            logger.warning("Trajectory block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Trajectory block {seed.index} kept reaching the singular set.")


def trajectory_hits(model, target, count: int, m_max: int, horizon: float, seed: int,
                    stream: int = montecarlo.STREAM_TRAJECTORIES) -> HitBatch:
    """
    Hits of count trajectories started from the invariant measure.
    """
    blocks = montecarlo.run_blocks(_trajectory_block, count, seed, stream, args=(model, target, m_max, horizon))
    return HitBatch.concatenate(blocks)


def base_system_of(model) -> BaseSystem:
    return model.base_system if isinstance(model, SuspensionFlow) else model


def hitting_normalization(model, center, radius: float, seed: int,
                          measure_samples: int = DEFAULT_MEASURE_SAMPLES) -> Estimate:
    """
    The time scale of the exponential law: μ_Ω(B_ρ) for maps, μ_X(B_ρ)/(2ρ) = μ_Ω(B_ρ)/E(r) for flows.

    :raises ZeroBallMeasure: If no sample falls in the base ball.
    """
    system = base_system_of(model)
    base_center = center[0] if isinstance(model, SuspensionFlow) else center
    samples = sample_invariant(system, seed, measure_samples, stream=montecarlo.STREAM_MEASURE)
    measure = ball_measure(system, base_center, radius, samples)
    if measure.value == 0:
        raise ZeroBallMeasure(f"No sample fell in the ball of radius {radius:.3g}.")
    if isinstance(model, SuspensionFlow):
        return measure.scaled(1.0 / model.mean)
    return measure


@dataclass
class NormalizedLaw:
    """
    Normalised first hitting times τ¹·normalization.
    """
    normalization: Estimate
    samples: EmpiricalCdf

    def __post_init__(self):
        if self.normalization.value <= 0:
            raise ValueError("The normalization must be positive.")


@dataclass
class SurvivalCurve:
    t: np.ndarray
    survival: np.ndarray
    half_width: np.ndarray


def normalized_survival(model, center, radius: float, n_trajectories: int, t_grid, seed: int,
                        measure_samples: int = DEFAULT_MEASURE_SAMPLES,
                        horizon: float | None = None) -> tuple[NormalizedLaw, SurvivalCurve]:
    """
    Survival function of the normalised first hitting time of a ball, from starts drawn by the
    invariant measure of a SuspensionFlow or a BaseSystem.

    :param center: A flow point (base, height) for flows, a base point for maps.
    :param horizon: Horizon in normalised time; unhit trajectories are censored.
    """
    target = _target(model, center, radius)
    normalization = hitting_normalization(model, center, radius, seed, measure_samples)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    horizon = horizon or max(DEFAULT_NORMALIZED_HORIZON, float(np.max(t_grid, initial=0.0)))
    batch = trajectory_hits(model, target, n_trajectories, 1, horizon / normalization.value, seed)
    law = NormalizedLaw(normalization, EmpiricalCdf(batch.hits[:, 0] * normalization.value))
    if law.samples.censored_count:
        logger.warning("%d of %d trajectories did not hit before the horizon", law.samples.censored_count,
                       n_trajectories)
    survival = law.samples.survival(t_grid)
    half_width = montecarlo.Z_95 * np.sqrt(survival * (1.0 - survival) / n_trajectories)
    return law, SurvivalCurve(t_grid, survival, half_width)


@dataclass
class PoissonTable:
    """
    Frequencies of m hits during normalised time T; the last row collects m >= m_max.
    """
    m: np.ndarray
    frequency: np.ndarray
    predicted: np.ndarray
    half_width: np.ndarray


def poisson_prediction(t_normalized: float, m_max: int) -> np.ndarray:
    """
    e^{-T} T^m / m! for m < m_max and the remaining tail mass for m_max.
    """
    m = np.arange(m_max)
    return np.append(scipy.stats.poisson.pmf(m, t_normalized), scipy.stats.poisson.sf(m_max - 1, t_normalized))


def poisson_counts(model, center, radius: float, t_normalized: float, n_trajectories: int, m_max: int,
                   seed: int, measure_samples: int = DEFAULT_MEASURE_SAMPLES) -> PoissonTable:
    """
    Frequencies of {τ^m <= T < τ^{m+1}} over starts drawn by the invariant measure.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2.")
    target = _target(model, center, radius)
    normalization = hitting_normalization(model, center, radius, seed, measure_samples)
    batch = trajectory_hits(model, target, n_trajectories, m_max, t_normalized / normalization.value, seed)
    tallies = np.bincount(batch.counts, minlength=m_max + 1)
    frequency = tallies / n_trajectories
    half_width = montecarlo.Z_95 * np.sqrt(frequency * (1.0 - frequency) / n_trajectories)
    return PoissonTable(np.arange(m_max + 1), frequency, poisson_prediction(t_normalized, m_max), half_width)


def _return_block(seed: BlockSeed, size: int, system: BaseSystem, target: MapBall,
                  n_max: int) -> tuple[np.ndarray, int, int]:
    """
    First return times of size starts conditioned on the target, with the number of invariant
    samples drawn and accepted along the way.
    """
    for attempt in range(MAX_RESTARTS + 1):
        rng = seed.rng(attempt)
        try:
            starts, accepted, drawn = [], 0, 0
            while accepted < size:
                candidates = orbit_block(system, rng, size)
                inside = candidates[system.distance(candidates, target.center) <= target.radius]
                starts.append(inside)
                accepted += len(inside)
                drawn += len(candidates)
            batch = map_walk(system, np.concatenate(starts)[:size], target, 1, n_max, rng)
            return batch.hits[:, 0], accepted, drawn
        except SingularOrbit:
            logger.warning("Return-time block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Return-time block {seed.index} kept reaching the singular set.")


def kac_check(system: BaseSystem, target, n_starts: int, seed: int, n_max: int = DEFAULT_MAX_ITERATES) -> Estimate:
    """
    Mean first return time to the target over conditioned starts, times the target measure.
    Kac's lemma makes the product 1.

    :param target: A MapBall or a (center, radius) pair.
    :raises ZeroBallMeasure: If the target has no estimated measure.
    """
    center, radius = target
    target = MapBall(system.as_center(center), float(radius))
    pilot = sample_invariant(system, seed, min(n_starts, montecarlo.block_size()), montecarlo.STREAM_MEASURE)
    if ball_measure(system, target.center, target.radius, pilot).value == 0:
        raise ZeroBallMeasure(f"The target of radius {target.radius:.3g} has no estimated measure.")

    blocks = montecarlo.run_blocks(_return_block, n_starts, seed, montecarlo.STREAM_CONDITIONED,
                                   args=(system, target, n_max))
    returns = np.concatenate([b[0] for b in blocks])
    censored = np.isinf(returns)
    if censored.any():
        logger.warning("%d returns exceeded %d iterates and were counted at the cap",
                       int(np.count_nonzero(censored)), n_max)
        returns[censored] = n_max
    measure = Estimate.proportion(sum(b[1] for b in blocks), sum(b[2] for b in blocks))
    mean_return = Estimate.mean(returns)
    value = mean_return.value * measure.value
    relative = math.hypot(mean_return.half_width / mean_return.value, measure.half_width / measure.value)
    return Estimate(value, value * relative)
