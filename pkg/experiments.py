"""
Config-driven experiments: one JSON config in, three report files out.

    <name>.data.csv      the full result table
    <name>.summary.json  the resolved config, summary statistics and pass/fail
    <name>.plot.csv      columns x, empirical, predicted, ci
"""
import os
import json
import logging
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.stats

import montecarlo
import pluginmanager
from app_util import condense_path, slugify, staged_outputs, write_csv, write_json
from diagnostics import (LipschitzObservable, correlation, d2_surrogate, dprime_surrogate, isotonic_residual,
                         shell_trend, short_return_measure, tower_tail, vr_measure, TAIL_FIT_MIN_N)
from dynamics import (annulus_ratio, expansion_check, local_dimension, measure_profile, sample_invariant,
                      shell_bound_ratio)
from empirical import ks_distance, reference_law
from errors import ConfigError, TruncatedRecord
from extremes import ObservableSpec, evl_empirical, evl_hitting_duality
from hitting import (birkhoff_factor, flow_base_consistency, hitting_times, kac_check, normalized_survival,
                     orbit_rng, poisson_counts)
from suspension import (FlowBall, FlowPoint, SuspensionFlow, build_suspension, create_roof, flow_measure_profile,
                        roof_infimum, sample_flow_invariant)

logger = logging.getLogger(__name__)

REQUIRED = object()

COMMON_KEYS = {
    "experiment": REQUIRED,
    "system": REQUIRED,
    "seed": REQUIRED,
    "name": None,
    "params": {},
    "workers": 1,
    "block_size": montecarlo.DEFAULT_BLOCK_SIZE,
    "out": "results",
    "sampler_burn_in": 1000,
    "sampler_stride": 10,
}

FLOW_KEYS = {
    "roof": None,
    "roof_params": {},
    "center_height": None,
    "mean_roof_samples": 10 ** 6,
}

OBSERVABLE_KEYS = {
    "kind": 1,
    "beta": 1.0,
    "gamma": 1.0,
    "D": 0.0,
    "profile_radii": None,
    "profile_samples": 10 ** 7,
}

EXPERIMENT_KEYS = {
    "hit-survival": FLOW_KEYS | {
        "center": REQUIRED,
        "radius": REQUIRED,
        "n_trajectories": 50000,
        "t_grid": None,
        "measure_samples": 10 ** 6,
        "horizon": None,
        "reference": "exponential",
        "reference_params": {},
        "save_samples": 0,
        "tolerance": 0.02,
    },
    "poisson": FLOW_KEYS | {
        "center": REQUIRED,
        "radius": REQUIRED,
        "t_normalized": 1.0,
        "n_trajectories": 50000,
        "m_max": 5,
        "measure_samples": 10 ** 6,
        "checked_m": 3,
        "tolerance": 0.02,
    },
    "kac": {
        "center": REQUIRED,
        "radius": REQUIRED,
        "n_starts": 100000,
        "n_max": 10 ** 6,
        "tolerance": 0.02,
    },
    "evl": FLOW_KEYS | OBSERVABLE_KEYS | {
        "center": REQUIRED,
        "horizon": 10000.0,
        "y_grid": None,
        "n_samples": 50000,
        "tolerance": 0.03,
    },
    "duality": FLOW_KEYS | OBSERVABLE_KEYS | {
        "center": REQUIRED,
        "horizons": [100.0, 1000.0],
        "y_values": [-1.0, 0.0, 1.0, 2.0],
        "n_samples": 20000,
        "ci_multiple": 3.0,
    },
    "correlation": {
        "observable": "identity",
        "psi_interval": [0.0, 0.5],
        "lags": [0, 1, 2, 3, 4, 5, 6],
        "n_samples": 10 ** 6,
        "tolerance": 0.05,
    },
    "short-returns": {
        "radii": [1e-2, 1e-3, 1e-4],
        "j": 1,
        "j_max": 5,
        "n_samples": 10 ** 5,
        "tolerance": 0.1,
    },
    "tower-tail": {
        "n_grid": None,
        "n_samples": 10 ** 5,
        "n_max": None,
        "tolerance": 0.2,
    },
    "assumptions": {
        "center": REQUIRED,
        "radii": None,
        "delta": 1.5,
        "n_samples": 10 ** 6,
        "expansion_grid": 1000,
        "d2_radius": 0.01,
        "d2_window": 5,
        "d2_t_grid": [0, 1, 2, 4, 8, 16, 32],
        "d2_n": None,
        "d2_t_exponent": 0.5,
        "dprime_n": 1000,
        "dprime_k_grid": [1, 2, 5, 10, 20, 50],
        "dimension_bounds": [0.95, 1.05],
        "shell_ratio_max": 5.0,
        "shell_trend_tolerance": 0.25,
    },
    "consistency": FLOW_KEYS | {
        "n_cases": 1000,
        "radius": 0.02,
        "m_max": 3,
        "tolerance": 1e-6,
    },
}

POSITIVE_COUNTS = ("n_trajectories", "n_samples", "n_starts", "n_cases", "measure_samples", "mean_roof_samples",
                   "profile_samples", "m_max", "workers", "block_size")


@dataclass
class ExperimentConfig:
    """
    A validated experiment config with every default filled in.

    Attributes:
        experiment (str): The experiment type, a key of EXPERIMENT_KEYS.
        system (str): The short system name of a plugin.
        seed (int): The master seed.
        settings (dict): Every resolved key, the three above included.
    """
    experiment: str
    system: str
    seed: int
    settings: dict = field(repr=False)

    def __getitem__(self, key: str):
        return self.settings[key]

    @property
    def name(self) -> str:
        return self.settings["name"]

    @property
    def is_flow(self) -> bool:
        return self.settings.get("roof") is not None

    def resolved(self) -> dict:
        return dict(self.settings)

    @classmethod
    def from_dict(cls, record: dict) -> "ExperimentConfig":
        """
        Validates a config record and fills in defaults.

        :raises ConfigError: Listing all missing keys, or all unknown keys.
        """
        if not isinstance(record, dict):
            raise ConfigError("An experiment config must be a JSON object.")
        experiment = record.get("experiment")
        if experiment is not None and experiment not in EXPERIMENT_KEYS:
            raise ConfigError(f"Unknown experiment '{experiment}'. Known experiments: {', '.join(EXPERIMENT_KEYS)}")
        schema = COMMON_KEYS | EXPERIMENT_KEYS.get(experiment, {})

        missing = [key for key, default in schema.items() if default is REQUIRED and key not in record]
        if missing:
            raise ConfigError(f"Missing required config keys: {', '.join(missing)}")
        unknown = sorted(set(record) - set(schema))
        if unknown:
            raise ConfigError(f"Unknown config keys for experiment '{experiment}': {', '.join(unknown)}")

        settings = {key: record.get(key, default) for key, default in schema.items()}
        settings["name"] = settings["name"] or experiment
        if not slugify(settings["name"]):
            raise ConfigError("The experiment name must contain letters or digits.")
        for key in POSITIVE_COUNTS:
            if key in settings and (not isinstance(settings[key], int) or settings[key] < 1):
                raise ConfigError(f"'{key}' must be a positive integer.")
        if not isinstance(settings["seed"], int) or settings["seed"] < 0:
            raise ConfigError("'seed' must be a nonnegative integer.")
        if "radius" in settings and not settings["radius"] > 0:
            raise ConfigError("'radius' must be positive.")
        if settings.get("roof") is not None and experiment not in ("consistency",) \
                and settings.get("center_height") is None:
            raise ConfigError("Flow experiments need 'center_height'.")
        if experiment == "consistency" and settings["roof"] is None:
            settings["roof"] = "affine"
        return cls(experiment, settings["system"], settings["seed"], settings)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r") as f:
                record = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"Config file {path} does not exist.")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        return cls.from_dict(record)


@dataclass
class ExperimentReport:
    data_header: list[str]
    data_rows: list
    plot_rows: list
    summary: dict
    extra_tables: dict = field(default_factory=dict)


def build_system(config: ExperimentConfig):
    system = pluginmanager.create_system(config.system, config["params"])
    system.sampler_burn_in = config["sampler_burn_in"]
    system.sampler_stride = config["sampler_stride"]
    return system


def build_model(config: ExperimentConfig):
    """
    The base system, or its suspension when the config names a roof.
    """
    system = build_system(config)
    if not config.is_flow:
        return system
    roof = create_roof(config["roof"], config["roof_params"])
    return build_suspension(system, roof, config.seed, config["mean_roof_samples"])


def model_center(config: ExperimentConfig, model):
    if isinstance(model, SuspensionFlow):
        return FlowPoint(model.base_system.as_center(config["center"]), float(config["center_height"]))
    return model.as_center(config["center"])


def _flow_summary(model) -> dict:
    if not isinstance(model, SuspensionFlow):
        return {}
    return {"mean_roof": model.mean_roof.value, "mean_roof_ci": model.mean_roof.half_width}


def run_hit_survival(config: ExperimentConfig) -> ExperimentReport:
    model = build_model(config)
    t_grid = np.linspace(0.0, 5.0, 51) if config["t_grid"] is None else np.asarray(config["t_grid"], dtype=float)
    law, curve = normalized_survival(model, model_center(config, model), config["radius"], config["n_trajectories"],
                                     t_grid, config.seed, config["measure_samples"], config["horizon"])
    reference = reference_law(config["reference"], config["reference_params"])
    predicted = reference.sf(curve.t)
    ks = ks_distance(law.samples, config["reference"], config["reference_params"])
    rows = list(zip(curve.t, curve.survival, curve.half_width, predicted))
    summary = {
        "ks": ks,
        "ci": float(np.max(curve.half_width)),
        "normalization": law.normalization.value,
        "normalization_ci": law.normalization.half_width,
        "censored_fraction": law.samples.censored_fraction,
        "passed": ks <= config["tolerance"],
    } | _flow_summary(model)
    extra = {}
    if config["save_samples"]:
        extra["samples"] = sample_rows(model, config.seed, config["save_samples"])
    return ExperimentReport(["t", "survival", "ci", "predicted"], rows,
                            list(zip(curve.t, curve.survival, predicted, curve.half_width)), summary, extra)


def sample_rows(model, seed: int, count: int) -> tuple[list[str], list]:
    """
    Invariant samples as CSV rows: base coordinates, then the height for flows.
    """
    if isinstance(model, SuspensionFlow):
        state = sample_flow_invariant(model, seed, count)
        k = state.bases.shape[1]
        header = [f"x{i}" for i in range(k)] + ["height"]
        return header, [list(b) + [h] for b, h in zip(state.bases, state.heights)]
    points = sample_invariant(model, seed, count)
    return [f"x{i}" for i in range(points.shape[1])], [list(p) for p in points]


def run_poisson(config: ExperimentConfig) -> ExperimentReport:
    model = build_model(config)
    table = poisson_counts(model, model_center(config, model), config["radius"], config["t_normalized"],
                           config["n_trajectories"], config["m_max"], config.seed, config["measure_samples"])
    checked = min(config["checked_m"], config["m_max"])
    errors = np.abs(table.frequency - table.predicted)[:checked]
    summary = {
        "max_error": float(errors.max()),
        "ci": float(table.half_width.max()),
        "frequency_sum": float(np.sum(table.frequency)),
        "passed": bool(np.all(errors <= config["tolerance"])),
    } | _flow_summary(model)
    rows = list(zip(table.m, table.frequency, table.predicted, table.half_width))
    return ExperimentReport(["m", "frequency", "predicted", "ci"], rows, rows, summary)


def run_kac(config: ExperimentConfig) -> ExperimentReport:
    system = build_system(config)
    estimate = kac_check(system, (config["center"], config["radius"]), config["n_starts"], config.seed,
                         config["n_max"])
    summary = {
        "kac_product": estimate.value,
        "ci": estimate.half_width,
        "passed": abs(estimate.value - 1.0) <= config["tolerance"],
    }
    rows = [(config["radius"], estimate.value, 1.0, estimate.half_width)]
    return ExperimentReport(["radius", "kac_product", "predicted", "ci"], rows, rows, summary)


def build_observable(config: ExperimentConfig, model) -> ObservableSpec:
    """
    The observable of an evl or duality config, on a measure profile estimated from invariant samples.
    """
    system = model.base_system if isinstance(model, SuspensionFlow) else model
    center = model_center(config, model)
    radii = config["profile_radii"]
    radii = np.geomspace(1e-7, 0.1, 400) if radii is None else np.asarray(radii, dtype=float)
    samples = sample_invariant(system, config.seed, config["profile_samples"], montecarlo.STREAM_MEASURE)
    if isinstance(model, SuspensionFlow):
        profile = flow_measure_profile(model, center, radii, samples)
        form = "flow"
    else:
        profile = measure_profile(system, center, radii, samples)
        form = "map"
    return ObservableSpec(config["kind"], system, center, profile, form, config["beta"], config["gamma"],
                          config["D"])


DEFAULT_Y_GRIDS = {
    1: np.linspace(-2.0, 5.0, 21),
    2: np.linspace(0.25, 5.0, 21),
    3: np.linspace(-3.0, 0.0, 21),
}

LAW_NAMES = {1: "gumbel", 2: "Fréchet", 3: "weibull"}


def run_evl(config: ExperimentConfig) -> ExperimentReport:
    model = build_model(config)
    spec = build_observable(config, model)
    y_grid = DEFAULT_Y_GRIDS[spec.kind] if config["y_grid"] is None else np.asarray(config["y_grid"], dtype=float)
    result = evl_empirical(model, spec, config["horizon"], y_grid, config["n_samples"], config.seed)
    reference = reference_law(LAW_NAMES[spec.kind], {"beta": spec.beta, "gamma": spec.gamma})
    reference_gap = float(np.max(np.abs(reference.cdf(result.y) - result.predicted)))
    sup_error = float(np.max(np.abs(result.empirical - result.predicted)))
    summary = {
        "ks": sup_error,
        "ci": float(np.max(result.half_width)),
        "reference": LAW_NAMES[spec.kind],
        "reference_gap": reference_gap,
        "profile_jumps": len(spec.profile.jumps()),
        "passed": sup_error <= config["tolerance"],
    } | _flow_summary(model)
    rows = list(zip(result.y, result.levels, result.radii, result.empirical, result.predicted, result.half_width))
    return ExperimentReport(["y", "level", "radius", "empirical", "predicted", "ci"], rows,
                            list(zip(result.y, result.empirical, result.predicted, result.half_width)), summary)


def run_duality(config: ExperimentConfig) -> ExperimentReport:
    model = build_model(config)
    spec = build_observable(config, model)
    rows, plot_rows, agree = [], [], []
    for i, (t, y) in enumerate(itertools.product(config["horizons"], config["y_values"])):
        result = evl_hitting_duality(model, spec, float(t), float(y), config["n_samples"], config.seed + i)
        ok = result.difference <= config["ci_multiple"] * result.combined_half_width
        agree.append(ok)
        rows.append((t, y, result.radius, result.level, result.evl.value, result.evl.half_width,
                     result.no_visit.value, result.no_visit.half_width, result.same_sample_gap, ok))
        plot_rows.append((i, result.evl.value, result.no_visit.value, result.combined_half_width))
    summary = {
        "configurations": len(rows),
        "agreeing": int(sum(agree)),
        "max_same_sample_gap": max(row[8] for row in rows),
        "passed": all(agree),
    } | _flow_summary(model)
    return ExperimentReport(["t", "y", "radius", "level", "p_max_below", "ci_max_below", "p_no_visit",
                             "ci_no_visit", "same_sample_gap", "agree"], rows, plot_rows, summary)


OBSERVABLES: dict[str, Callable[[], LipschitzObservable]] = {
    "identity": lambda: LipschitzObservable(lambda p: p[:, 0], 1.0, 1.0),
    "cosine": lambda: LipschitzObservable(lambda p: np.cos(2.0 * np.pi * p[:, 0]), 2.0 * np.pi, 1.0),
}


def doubling_covariance(j: int) -> float:
    """
    |cov(x, 1_{[0, 1/2]}∘T^j)| under Lebesgue measure for the doubling map.
    """
    return 2.0 ** -(j + 3)


def run_correlation(config: ExperimentConfig) -> ExperimentReport:
    system = build_system(config)
    if config["observable"] not in OBSERVABLES:
        raise ConfigError(f"Unknown observable '{config['observable']}'. Known: {', '.join(OBSERVABLES)}")
    phi = OBSERVABLES[config["observable"]]()
    lipschitz_ok = phi.check(system, montecarlo.block_rng(config.seed, montecarlo.STREAM_MEASURE, 0))
    samples = sample_invariant(system, config.seed, config["n_samples"])
    exact = (config.system == "doubling" and config["observable"] == "identity"
             and list(config["psi_interval"]) == [0.0, 0.5])
    rows, allowances, passed = [], [], True
    for j in config["lags"]:
        estimate = correlation(system, phi, tuple(config["psi_interval"]), int(j), samples)
        predicted = doubling_covariance(int(j)) if exact else np.nan
        if exact:
            allowed = max(config["tolerance"] * predicted, 3.0 * estimate.half_width)
            allowances.append(allowed)
            passed &= abs(abs(estimate.value) - predicted) <= allowed
        rows.append((j, abs(estimate.value), predicted, estimate.half_width))
    values = np.array([r[1] for r in rows])
    lags = np.array([r[0] for r in rows], dtype=float)
    usable = values > 0
    rate = float(scipy.stats.linregress(lags[usable], np.log(values[usable])).slope) if usable.sum() >= 2 else np.nan
    summary = {
        "log_decay_rate": rate,
        "ci": float(max(r[3] for r in rows)),
        "lipschitz_check": lipschitz_ok,
        "exact_reference": exact,
        "tolerance_rule": "max(tolerance * predicted, 3 * ci)" if exact else None,
        "effective_tolerances": allowances,
        "passed": bool(passed),
    }
    return ExperimentReport(["j", "abs_covariance", "predicted", "ci"], rows, rows, summary)


def run_short_returns(config: ExperimentConfig) -> ExperimentReport:
    system = build_system(config)
    samples = sample_invariant(system, config.seed, config["n_samples"])
    exact = config.system == "doubling" and config["j"] == 1
    rows, passed = [], True
    for r in sorted(config["radii"], reverse=True):
        short = short_return_measure(system, r, config["j"], samples)
        union = vr_measure(system, r, config["j_max"], samples)
        predicted = 6.0 * r if exact else np.nan
        if exact:
            passed &= abs(short.value - predicted) <= max(config["tolerance"] * predicted, 3.0 * short.half_width)
        rows.append((r, short.value, short.half_width, predicted, union.value, union.half_width))
    union_by_radius = np.array([row[4] for row in rows[::-1]])
    monotone_residual = isotonic_residual(union_by_radius, increasing=True)
    decreasing = monotone_residual <= 2.0 * max(row[5] for row in rows)
    summary = {
        "vr_monotone_residual": monotone_residual,
        "vr_decreasing": bool(decreasing),
        "ci": float(max(row[2] for row in rows)),
        "passed": bool(passed and decreasing),
    }
    return ExperimentReport(["r", "short_return", "ci", "predicted", "vr", "vr_ci"], rows,
                            [(row[0], row[1], row[3], row[2]) for row in rows], summary)


def run_tower_tail(config: ExperimentConfig) -> ExperimentReport:
    system = build_system(config)
    n_grid = config["n_grid"]
    n_grid = np.unique(np.geomspace(1, 1000, 40).astype(int)) if n_grid is None else np.asarray(n_grid, dtype=int)
    n_grid = np.concatenate(([0], n_grid[n_grid > 0]))
    result = tower_tail(system, n_grid, config["n_samples"], config.seed, config["n_max"])
    expected = -getattr(system, "tower_degree", np.nan)
    anchor = np.flatnonzero(n_grid >= TAIL_FIT_MIN_N)
    predicted = np.full(len(n_grid), np.nan)
    if len(anchor) and np.isfinite(expected):
        n0 = n_grid[anchor[0]]
        predicted[1:] = result.tail[anchor[0]] * (n_grid[1:] / n0) ** expected
    summary = {
        "exponent": result.exponent,
        "expected_exponent": expected,
        "degree": result.degree,
        "meets_theorem_threshold": result.meets_theorem_threshold,
        "meets_proof_threshold": result.meets_proof_threshold,
        "censored_fraction": result.censored_fraction,
        "ci": float(result.half_width.max()),
        "passed": bool(np.isfinite(expected) and abs(result.exponent - expected) <= config["tolerance"]),
    }
    rows = list(zip(result.n, result.tail, result.half_width))
    return ExperimentReport(["n", "tail", "ci"], rows, list(zip(result.n, result.tail, predicted, result.half_width)),
                            summary)


def run_assumptions(config: ExperimentConfig) -> ExperimentReport:
    system = build_system(config)
    center = system.as_center(config["center"])
    radii = config["radii"]
    radii = np.geomspace(1e-3, 1e-1, 9) if radii is None else np.sort(np.asarray(radii, dtype=float))
    samples = sample_invariant(system, config.seed, config["n_samples"])
    delta = config["delta"]
    lebesgue = config.system == "doubling"

    rows, annulus_ok = [], True
    for r in radii:
        annulus = annulus_ratio(system, center, r, delta, samples)
        shell = shell_bound_ratio(system, center, r, r ** delta, samples)
        predicted = r ** (delta - 1.0) if lebesgue else np.nan
        if lebesgue:
            annulus_ok &= abs(annulus.value - predicted) <= 3.0 * annulus.half_width
        rows.append((r, annulus.value, annulus.half_width, predicted, shell.value, shell.half_width))

    dimension = local_dimension(system, center, radii, samples)
    shells = np.array([row[4] for row in rows])
    shells = shells[shells > 0]
    shell_spread = float(shells.max() / shells.min()) if len(shells) else np.nan
    shell_residual, shell_bounded = shell_trend(radii, [row[4] for row in rows], [row[5] for row in rows],
                                                config["shell_trend_tolerance"])
    try:
        grid = system.uniform_start(montecarlo.block_rng(config.seed, montecarlo.STREAM_MEASURE, 1),
                                    config["expansion_grid"])
        expansion = expansion_check(system, grid)
    except NotImplementedError:
        expansion = None

    d2 = d2_surrogate(system, center, config["d2_radius"], config["d2_window"], config["d2_t_grid"],
                      min(config["n_samples"], 10 ** 5), config.seed, config["d2_n"], config["d2_t_exponent"])
    d2_residual = isotonic_residual(d2.gap)
    dprime = dprime_surrogate(system, center, 1.0 / config["dprime_n"], config["dprime_n"],
                              config["dprime_k_grid"], min(config["n_samples"], 10 ** 4), config.seed)

    low, high = config["dimension_bounds"]
    summary = {
        "annulus_matches_lebesgue": bool(annulus_ok) if lebesgue else None,
        "local_dimension": dimension.slope,
        "local_dimension_lower": dimension.lower,
        "local_dimension_upper": dimension.upper,
        "shell_ratio_spread": shell_spread,
        "shell_trend_residual": shell_residual,
        "shell_non_increasing": bool(shell_bounded),
        "min_expansion": expansion,
        "d2_gaps": list(d2.gap),
        "d2_isotonic_residual": d2_residual,
        "d2_non_increasing": bool(d2_residual <= 2.0 * float(d2.half_width.max())),
        "d2_n_gap": d2.n_gap,
        "dprime_k": list(dprime.k),
        "dprime_sums": list(dprime.sums),
        "ci": float(max(row[2] for row in rows)),
        "passed": bool(annulus_ok and low <= dimension.slope <= high and shell_bounded
                       and (not np.isfinite(shell_spread) or shell_spread <= config["shell_ratio_max"])
                       and (expansion is None or expansion > 1.0)),
    }
    return ExperimentReport(["r", "annulus_ratio", "ci", "predicted", "shell_ratio", "shell_ci"], rows,
                            [(row[0], row[1], row[3], row[2]) for row in rows], summary)


def run_consistency(config: ExperimentConfig) -> ExperimentReport:
    flow = build_model(config)
    system = flow.base_system
    rng = montecarlo.block_rng(config.seed, montecarlo.STREAM_MEASURE, 0)
    radius, m_max = config["radius"], config["m_max"]
    rows, plot_rows, truncated, passed = [], [], 0, True
    for case in range(config["n_cases"]):
        base = system.uniform_start(rng, 1)[0]
        ceiling = roof_infimum(flow.roof, system, base, radius)
        height = radius + (ceiling - 2.0 * radius) * (0.01 + 0.98 * rng.random())
        ball = FlowBall(FlowPoint(base, height), radius)
        start_base = system.uniform_start(rng, 1)[0]
        start = FlowPoint(start_base, float(rng.random() * flow.roof(start_base.reshape(1, -1))[0]))
        case_seed = int(rng.integers(2 ** 31))
        case_rows = []
        try:
            record = hitting_times(flow, start, ball, m_max, 1e6 * flow.mean, orbit_rng(case_seed))
            for m in range(1, m_max + 1):
                residual = flow_base_consistency(flow, start, ball, m, case_seed)
                tau = float(record.hits[m - 1])
                factor = birkhoff_factor(flow, start, ball, m, case_seed)
                case_rows.append((case, m, tau, residual, factor, residual <= config["tolerance"] * tau))
        except TruncatedRecord:
            truncated += 1
            continue
        passed &= all(row[5] for row in case_rows)
        rows.extend(case_rows)
        plot_rows.extend((row[2], row[3], 0.0, config["tolerance"] * row[2]) for row in case_rows)
    if truncated:
        logger.warning("%d consistency cases were truncated and skipped", truncated)
    residuals = np.array([row[3] for row in rows]) if rows else np.zeros(1)
    summary = {
        "cases": config["n_cases"],
        "truncated_cases": truncated,
        "max_residual": float(residuals.max()),
        "ci": 0.0,
        "passed": bool(passed and rows),
    } | _flow_summary(flow)
    return ExperimentReport(["case", "m", "tau", "residual", "birkhoff_factor", "ok"], rows, plot_rows, summary)


RUNNERS = {
    "hit-survival": run_hit_survival,
    "poisson": run_poisson,
    "kac": run_kac,
    "evl": run_evl,
    "duality": run_duality,
    "correlation": run_correlation,
    "short-returns": run_short_returns,
    "tower-tail": run_tower_tail,
    "assumptions": run_assumptions,
    "consistency": run_consistency,
}


def run_experiment(config: ExperimentConfig, out_dir: str | None = None, workers: int | None = None) -> list[str]:
    """
    Runs one experiment and writes its report files.

    :param out_dir: Overrides the config's output directory.
    :param workers: Overrides the config's worker count.
    :returns: The paths written.
    """
    out_dir = out_dir or config["out"]
    montecarlo.configure(workers=workers or config["workers"], block_size=config["block_size"])
    logger.info("Running %s experiment '%s' on %s (seed %d, %d workers)", config.experiment, config.name,
                config.system, config.seed, montecarlo.workers())
    report = RUNNERS[config.experiment](config)
    resolved = config.resolved() | {"out": out_dir, "workers": montecarlo.workers()}
    summary = {"experiment": config.experiment, "config": resolved} | report.summary
    stem = slugify(config.name)
    written = []
    with staged_outputs(out_dir) as staging:
        write_csv(os.path.join(staging, f"{stem}.data.csv"), report.data_header, report.data_rows)
        write_json(os.path.join(staging, f"{stem}.summary.json"), summary)
        write_csv(os.path.join(staging, f"{stem}.plot.csv"), ["x", "empirical", "predicted", "ci"], report.plot_rows)
        for suffix, (header, rows) in report.extra_tables.items():
            write_csv(os.path.join(staging, f"{stem}.{suffix}.csv"), header, rows)
        written = sorted(os.path.join(out_dir, name) for name in os.listdir(staging))
    for path in written:
        logger.info("Wrote %s", condense_path(os.path.abspath(path)))
    logger.info("Experiment '%s' %s", config.name, "passed" if summary["passed"] else "did not pass")
    return written
