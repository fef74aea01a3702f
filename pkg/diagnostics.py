"""
Empirical checks of the mixing and regularity hypotheses behind the limit laws: decay of
correlations, short returns, the tail of a tower's return time, and finite-n surrogates of
the D2 and D' conditions.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.optimize
import scipy.stats

import montecarlo
from dynamics import MAX_RESTARTS, orbit_block
from errors import EmptySample, SingularOrbit, ZeroBallMeasure
from hitting import MapBall
from montecarlo import BlockSeed, Estimate
from plugin_abstract.base_system import BaseSystem

logger = logging.getLogger(__name__)

GRID_RESOLUTION = 20
# Grid points handled at once by the short-return search.
GRID_CHUNK_POINTS = 2 ** 17
TAIL_FIT_MIN_N = 10
THEOREM_THRESHOLD = 8.0
PROOF_THRESHOLD = 16.0


@dataclass
class LipschitzObservable:
    """
    A Lipschitz function on the domain with its Lipschitz constant and sup-norm bound.
    """
    func: Callable[[np.ndarray], np.ndarray]
    lip_bound: float
    sup_bound: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.func(points)

    def check(self, system: BaseSystem, rng: np.random.Generator, pairs: int = 1000) -> bool:
        """
        Checks both bounds on random pairs of points.
        """
        x = system.uniform_start(rng, pairs)
        y = system.uniform_start(rng, pairs)
        fx, fy = self(x), self(y)
        gaps = system.distance(x, y)
        lipschitz = np.all(np.abs(fx - fy) <= self.lip_bound * gaps + 1e-12)
        bounded = np.all(np.abs(fx) <= self.sup_bound) and np.all(np.abs(fy) <= self.sup_bound)
        return bool(lipschitz and bounded)


def indicator(system: BaseSystem, target, points: np.ndarray) -> np.ndarray:
    """
    1_A on a batch, for A a MapBall or an interval (low, high) of the first coordinate.
    """
    if isinstance(target, MapBall):
        return (system.distance(points, target.center) <= target.radius).astype(np.float64)
    low, high = target
    return ((points[:, 0] >= low) & (points[:, 0] <= high)).astype(np.float64)


def correlation(system: BaseSystem, phi: LipschitzObservable, psi_set, j: int, samples: np.ndarray) -> Estimate:
    """
    ∫ Φ·Ψ∘T^j dμ - ∫ Φ dμ ∫ Ψ∘T^j dμ with Ψ the indicator of psi_set.
    """
    if j < 0:
        raise ValueError("The lag must be nonnegative.")
    if len(samples) == 0:
        raise EmptySample("Correlations need samples.")
    images = samples
    for _ in range(j):
        images = system.advance(images)
    a = phi(samples)
    b = indicator(system, psi_set, images)
    centered = (a - a.mean()) * (b - b.mean())
    return Estimate.mean(centered)


def short_return_flags(system: BaseSystem, r: float, j_max: int, samples: np.ndarray,
                       resolution: int = GRID_RESOLUTION) -> tuple[np.ndarray, int]:
    """
    flags[i, j-1] tells whether some grid point y of B_r(x_i) has T^j(y) in B_r(x_i).

    Grid points that reach the singular set are dropped from the search.

    :returns: The flags and the number of samples with at least one dropped grid point.
    """
    if r <= 0 or j_max < 1:
        raise ValueError("Short returns need r > 0 and j >= 1.")
    offsets = system.ball_offsets(r, resolution)
    flags = np.zeros((len(samples), j_max), dtype=bool)
    chunk = max(1, GRID_CHUNK_POINTS // len(offsets))
    touched = 0
    for start in range(0, len(samples), chunk):
        centers = samples[start:start + chunk]
        grid = system.wrap((centers[:, None, :] + offsets[None, :, :]).reshape(-1, system.DIMENSION))
        owners = np.repeat(np.arange(len(centers)), len(offsets))
        owner_centers = centers[owners]
        valid = np.ones(len(grid), dtype=bool)
        for j in range(j_max):
            valid &= ~system.singular_mask(grid)
            grid = system.map(grid)
            near = (system.distance(grid, owner_centers) <= r) & valid
            flags[start:start + len(centers), j] = np.bincount(owners, weights=near, minlength=len(centers)) > 0
        touched += int(np.count_nonzero(np.bincount(owners, weights=~valid, minlength=len(centers)) > 0))
    if touched:
        logger.warning("%d samples had grid points on the singular set; those points were skipped", touched)
    return flags, touched


def short_return_measure(system: BaseSystem, r: float, j: int, samples: np.ndarray) -> Estimate:
    """
    Estimates μ(N_r(j)), N_r(j) = {x: B_r(x) ∩ T^{-j} B_r(x) ≠ ∅}.
    """
    flags, _ = short_return_flags(system, r, j, samples)
    return Estimate.proportion(int(np.count_nonzero(flags[:, j - 1])), len(samples))


def vr_measure(system: BaseSystem, r: float, j_max: int, samples: np.ndarray) -> Estimate:
    """
    Estimates μ(V_r), the union of N_r(j) over 1 <= j <= j_max.
    """
    flags, _ = short_return_flags(system, r, j_max, samples)
    return Estimate.proportion(int(np.count_nonzero(flags.any(axis=1))), len(samples))


def _conditioned_starts(system: BaseSystem, rng: np.random.Generator, size: int,
                        accept: Callable[[np.ndarray], np.ndarray]) -> tuple[np.ndarray, int, int]:
    """
    size invariant samples conditioned on accept, with the numbers accepted and drawn.
    """
    starts, accepted, drawn = [], 0, 0
    while accepted < size:
        candidates = orbit_block(system, rng, size)
        inside = candidates[accept(candidates)]
        starts.append(inside)
        accepted += len(inside)
        drawn += len(candidates)
    return np.concatenate(starts)[:size], accepted, drawn


def _tower_block(seed: BlockSeed, size: int, system: BaseSystem, n_max: int) -> np.ndarray:
    for attempt in range(MAX_RESTARTS + 1):
        rng = seed.rng(attempt)
        try:
            points, _, _ = _conditioned_starts(system, rng, size, system.tower_base_mask)
            returns = np.full(size, np.inf)
            active = np.arange(size)
            for k in range(1, n_max + 1):
                if len(active) == 0:
                    break
                points[active] = system.advance(points[active], rng)
                back = system.tower_base_mask(points[active])
                returns[active[back]] = k
                active = active[~back]
            return returns
        except SingularOrbit:
            logger.warning("Tower block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Tower block {seed.index} kept reaching the singular set.")


@dataclass
class TowerTail:
    """
    μ(R > n) over an n grid, the log-log slope fitted to it and the implied tail degree p.
    """
    n: np.ndarray
    tail: np.ndarray
    half_width: np.ndarray
    exponent: float
    censored_fraction: float

    @property
    def degree(self) -> float:
        return -self.exponent

    @property
    def meets_theorem_threshold(self) -> bool:
        return self.degree > THEOREM_THRESHOLD

    @property
    def meets_proof_threshold(self) -> bool:
        return self.degree > PROOF_THRESHOLD


def tower_tail(system: BaseSystem, n_grid, n_samples: int, seed: int, n_max: int | None = None) -> TowerTail:
    """
    Tail of the return time R to the tower base, for starts drawn from μ restricted to the base.

    Points of the grid below TAIL_FIT_MIN_N, with zero tail, or beyond the horizon are left
    out of the fit.

    :raises NotImplementedError: If the system has no tower base.
    """
    n_grid = np.asarray(n_grid, dtype=np.int64)
    n_max = n_max or int(n_grid.max()) + 1
    blocks = montecarlo.run_blocks(_tower_block, n_samples, seed, montecarlo.STREAM_CONDITIONED,
                                   args=(system, n_max))
    returns = np.concatenate(blocks)
    censored_fraction = float(np.count_nonzero(np.isinf(returns))) / n_samples
    if censored_fraction:
        logger.warning("%.3g of the tower returns exceed %d iterates", censored_fraction, n_max)
    tail = np.array([np.count_nonzero(returns > n) for n in n_grid]) / n_samples
    half_width = montecarlo.Z_95 * np.sqrt(tail * (1.0 - tail) / n_samples)
    fit = (n_grid >= TAIL_FIT_MIN_N) & (tail > 0) & (n_grid < n_max)
    if np.count_nonzero(fit) < 2:
        logger.warning("Too few grid points to fit the tower tail")
        exponent = math.nan
    else:
        exponent = float(scipy.stats.linregress(np.log(n_grid[fit]), np.log(tail[fit])).slope)
    return TowerTail(n_grid, tail, half_width, exponent, censored_fraction)


def _visit_block(seed: BlockSeed, size: int, system: BaseSystem, target: MapBall, length: int) -> np.ndarray:
    """
    visits[i, k] tells whether iterate k of invariant start i lies in the target.
    """
    for attempt in range(MAX_RESTARTS + 1):
        rng = seed.rng(attempt)
        try:
            points = orbit_block(system, rng, size)
            visits = np.zeros((size, length), dtype=bool)
            for k in range(length):
                if k:
                    points = system.advance(points, rng)
                visits[:, k] = system.distance(points, target.center) <= target.radius
            return visits
        except SingularOrbit:
            logger.warning("Visit block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Visit block {seed.index} kept reaching the singular set.")


@dataclass
class D2Curve:
    """
    γ̂(n, t) over a t grid for a window length l, with n·γ̂(n, t_n) when n is given.
    """
    t: np.ndarray
    gap: np.ndarray
    half_width: np.ndarray
    window: int
    n_gap: float | None = None


def d2_surrogate(system: BaseSystem, center, r_n: float, l: int, t_grid, n_samples: int, seed: int,
                 n: int | None = None, t_exponent: float | None = None) -> D2Curve:
    """
    |μ(Y_0 > u_n, M_{t,l} < u_n) - μ(Y_0 > u_n)·μ(M_l < u_n)| per t, where {Y_0 > u_n} is the
    ball B_{r_n}(center) and M_{t,l} is the maximum over iterates t, ..., t + l - 1.
    """
    if l < 0:
        raise ValueError("The window length must be nonnegative.")
    t_grid = np.asarray(t_grid, dtype=np.int64)
    t_n = int(round(n ** t_exponent)) if n is not None and t_exponent is not None else None
    last = int(max(t_grid.max(initial=0), t_n or 0)) + l
    target = MapBall(system.as_center(center), float(r_n))
    blocks = montecarlo.run_blocks(_visit_block, n_samples, seed, montecarlo.STREAM_ORBITS,
                                   args=(system, target, max(last, 1)))
    visits = np.concatenate(blocks)
    prefix = np.concatenate((np.zeros((n_samples, 1), dtype=np.int64), np.cumsum(visits, axis=1)), axis=1)
    in_ball = visits[:, 0]
    p_ball = float(np.mean(in_ball))
    p_quiet = float(np.mean(prefix[:, l] == 0))

    def gap_at(t: int) -> tuple[float, float]:
        quiet = prefix[:, t + l] - prefix[:, t] == 0
        joint = float(np.mean(in_ball & quiet))
        half = montecarlo.Z_95 * math.hypot(math.sqrt(joint * (1 - joint) / n_samples),
                                            p_quiet * math.sqrt(p_ball * (1 - p_ball) / n_samples)
                                            + p_ball * math.sqrt(p_quiet * (1 - p_quiet) / n_samples))
        return abs(joint - p_ball * p_quiet), half

    values = [gap_at(int(t)) for t in t_grid]
    curve = D2Curve(t_grid, np.array([v[0] for v in values]), np.array([v[1] for v in values]), l)
    if t_n is not None:
        curve.n_gap = n * gap_at(t_n)[0]
    return curve


def isotonic_residual(values, increasing: bool = False) -> float:
    """
    max |values - monotone least-squares fit|, zero for monotone input.
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return 0.0
    fit = scipy.optimize.isotonic_regression(values, increasing=increasing).x
    return float(np.max(np.abs(values - fit)))


def shell_trend(radii, ratios, half_widths, tolerance: float) -> tuple[float, bool]:
    """
    Whether shell ratios stay bounded as r shrinks: ordered from the largest radius down they
    may not increase by more than 2 CI or tolerance times the largest ratio.

    :returns: The isotonic residual and whether it is within that slack.
    """
    order = np.argsort(np.asarray(radii, dtype=np.float64))[::-1]
    values = np.asarray(ratios, dtype=np.float64)[order]
    if len(values) == 0:
        return 0.0, True
    residual = isotonic_residual(values)
    slack = max(2.0 * float(np.max(half_widths)), tolerance * float(np.max(values)))
    return residual, residual <= slack


def _conditioned_visit_block(seed: BlockSeed, size: int, system: BaseSystem, target: MapBall,
                             length: int) -> tuple[np.ndarray, int, int]:
    for attempt in range(MAX_RESTARTS + 1):
        rng = seed.rng(attempt)
        try:
            points, accepted, drawn = _conditioned_starts(
                system, rng, size, lambda p: system.distance(p, target.center) <= target.radius)
            visits = np.zeros((size, length), dtype=bool)
            for j in range(length):
                points = system.advance(points, rng)
                visits[:, j] = system.distance(points, target.center) <= target.radius
            return visits, accepted, drawn
        except SingularOrbit:
            logger.warning("Conditioned block %d reached the singular set, restarting", seed.index)
    raise SingularOrbit(f"Conditioned block {seed.index} kept reaching the singular set.")


@dataclass
class DPrimeSums:
    """
    n·Σ_{1 <= j <= n/k} μ(Y_0 > u_n, Y_j > u_n) over a k grid.
    """
    k: np.ndarray
    sums: np.ndarray
    half_width: np.ndarray
    ball_measure: Estimate


def dprime_surrogate(system: BaseSystem, center, r_n: float, n: int, k_grid, n_samples: int,
                     seed: int) -> DPrimeSums:
    """
    Joint exceedances μ(B ∩ T^{-j} B) = μ(B)·P(T^j x ∈ B | x ∈ B), from starts conditioned on
    the ball B = B_{r_n}(center), summed up to n/k.

    :raises ZeroBallMeasure: If the ball has no estimated measure.
    """
    k_grid = np.asarray(k_grid, dtype=np.int64)
    if np.any(k_grid < 1):
        raise ValueError("k must be at least 1.")
    target = MapBall(system.as_center(center), float(r_n))
    pilot = orbit_block(system, montecarlo.block_rng(seed, montecarlo.STREAM_MEASURE, 0),
                        min(n_samples, montecarlo.block_size()))
    if not np.any(system.distance(pilot, target.center) <= target.radius):
        raise ZeroBallMeasure(f"The ball of radius {r_n:.3g} has no estimated measure.")
    length = max(n // int(k_grid.min()), 1)
    blocks = montecarlo.run_blocks(_conditioned_visit_block, n_samples, seed, montecarlo.STREAM_CONDITIONED,
                                   args=(system, target, length))
    visits = np.concatenate([b[0] for b in blocks])
    measure = Estimate.proportion(sum(b[1] for b in blocks), sum(b[2] for b in blocks))
    cumulative = np.cumsum(visits.mean(axis=0))
    per_start = np.cumsum(visits, axis=1)
    sums, half_width = [], []
    for k in k_grid:
        terms = max(n // int(k), 1)
        sums.append(n * measure.value * cumulative[terms - 1])
        spread = Estimate.mean(per_start[:, terms - 1].astype(np.float64)).half_width
        half_width.append(n * measure.value * spread)
    return DPrimeSums(k_grid, np.array(sums), np.array(half_width), measure)
