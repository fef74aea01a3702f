"""
Empirical distribution functions, the reference limit laws, and Kolmogorov-Smirnov distances.
"""
import numpy as np
import scipy.stats
from unidecode import unidecode

from errors import EmptySample, UnknownReference


class EmpiricalCdf:
    """
    Right-continuous step CDF of a sample in which +inf marks a censored value.

    Attributes:
        sorted_samples (np.ndarray): The finite samples, ascending.
        censored_count (int): The number of censored samples.
    """
    def __init__(self, samples, censored_count: int = 0):
        values = np.asarray(samples, dtype=np.float64).ravel()
        if np.any(np.isnan(values)):
            raise ValueError("Samples may not contain NaN.")
        censored = np.isposinf(values)
        self.sorted_samples = np.sort(values[~censored])
        self.censored_count = int(censored_count) + int(np.count_nonzero(censored))

    def __len__(self):
        return len(self.sorted_samples) + self.censored_count

    def __call__(self, x):
        if len(self) == 0:
            raise EmptySample("The empirical CDF has no samples.")
        return np.searchsorted(self.sorted_samples, x, side="right") / len(self)

    def survival(self, x):
        return 1.0 - self(x)

    @property
    def censored_fraction(self) -> float:
        return self.censored_count / len(self) if len(self) else 0.0


def _exponential(params: dict):
    return scipy.stats.expon(scale=params.get("scale", 1.0))


def _gumbel(params: dict):
    return scipy.stats.gumbel_r()


def _frechet(params: dict):
    return scipy.stats.invweibull(c=params.get("beta", 1.0))


def _weibull(params: dict):
    return scipy.stats.weibull_max(c=params.get("gamma", 1.0))


def _uniform(params: dict):
    low = params.get("low", 0.0)
    return scipy.stats.uniform(loc=low, scale=params.get("high", 1.0) - low)


REFERENCE_LAWS = {
    "exponential": _exponential,
    "gumbel": _gumbel,
    "frechet": _frechet,
    "weibull": _weibull,
    "uniform": _uniform,
}


def normalize_law_name(name: str) -> str:
    """
    Folds a law name to its registry key, i.e. "Fréchet" -> "frechet".
    """
    return unidecode(name).strip().lower().replace(" ", "_").replace("-", "_")


def reference_law(name: str, params: dict | None = None):
    """
    The frozen scipy distribution of a named reference law.

    :raises UnknownReference: If the law is not one of REFERENCE_LAWS.
    """
    key = normalize_law_name(name)
    if key not in REFERENCE_LAWS:
        raise UnknownReference(f"Unknown reference law '{name}'. Known laws: {', '.join(REFERENCE_LAWS)}")
    return REFERENCE_LAWS[key](params or {})


def ks_distance(empirical: EmpiricalCdf, reference: str, params: dict | None = None) -> float:
    """
    Sup-norm distance between an empirical CDF and a reference law. Censored samples sit at
    +inf, so they only contribute the gap left below 1 at the right end.

    :raises EmptySample: If the empirical CDF has no samples.
    :raises UnknownReference: If the reference law is unknown.
    """
    law = reference_law(reference, params)
    if len(empirical) == 0:
        raise EmptySample("KS distance needs at least one sample.")
    finite = empirical.sorted_samples
    if empirical.censored_count == 0:
        return float(scipy.stats.kstest(finite, law.cdf).statistic)
    n = len(empirical)
    if len(finite) == 0:
        return 1.0
    cdf = law.cdf(finite)
    ranks = np.arange(1, len(finite) + 1)
    above = np.max(ranks / n - cdf)
    below = np.max(cdf - (ranks - 1) / n)
    return float(max(above, below, 1.0 - len(finite) / n))
