"""Order statistics of i.i.d. noise: densities, moments and reduction factors.

The variance of the ``i``-th of ``N`` order statistics, divided by the variance
of the base distribution, is the factor ``alpha`` by which an order-statistic
combiner shrinks the boundary-offset variance. Moments are computed two ways:
adaptive quadrature of the order-statistic density, and plain Monte Carlo as
an independent check.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, special

from ._random import DEFAULT_SEED, map_chunks
from .core import RankSpec, resolve_rank
from .errors import InputError, NumericalError, UnsupportedMethodError

log = logging.getLogger(__name__)

# Gaussian integrals are truncated at +-10 sd; the dropped tail mass is ~1.5e-23.
GAUSSIAN_HALF_WIDTH = 10.0
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class BaseDistribution(Enum):
    """Noise distributions with tabulated order statistics."""

    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, value) -> "BaseDistribution":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"normal": "gaussian", "uniform01": "uniform", "standardgaussian": "gaussian"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InputError(f"unknown distribution {value!r}") from None

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self is BaseDistribution.GAUSSIAN:
            return np.exp(-0.5 * x * x) / _SQRT_2PI
        return ((x >= 0.0) & (x <= 1.0)).astype(float)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self is BaseDistribution.GAUSSIAN:
            return special.ndtr(x)
        return np.clip(x, 0.0, 1.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        if self is BaseDistribution.GAUSSIAN:
            return special.ndtr(-x)
        return np.clip(1.0 - x, 0.0, 1.0)

    @property
    def mean(self) -> float:
        return 0.0 if self is BaseDistribution.GAUSSIAN else 0.5

    @property
    def variance(self) -> float:
        return 1.0 if self is BaseDistribution.GAUSSIAN else 1.0 / 12.0

    @property
    def support(self) -> tuple[float, float]:
        if self is BaseDistribution.GAUSSIAN:
            return (-GAUSSIAN_HALF_WIDTH, GAUSSIAN_HALF_WIDTH)
        return (0.0, 1.0)

    def tail_mass(self) -> float:
        """Probability mass outside :attr:`support`."""
        if self is BaseDistribution.GAUSSIAN:
            return float(2.0 * special.ndtr(-GAUSSIAN_HALF_WIDTH))
        return 0.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self is BaseDistribution.GAUSSIAN:
            return rng.standard_normal(size)
        return rng.random(size)

    def sample_standardized(self, rng: np.random.Generator, size) -> np.ndarray:
        """Zero-mean, unit-variance draws with this distribution's shape."""
        if self is BaseDistribution.GAUSSIAN:
            return rng.standard_normal(size)
        return (rng.random(size) - 0.5) * math.sqrt(12.0)


GAUSSIAN = BaseDistribution.GAUSSIAN
UNIFORM = BaseDistribution.UNIFORM


@dataclass(frozen=True)
class OsMoments:
    """Mean and variance of one order statistic (or of the even-count median).

    ``mean_shift`` is measured from the base distribution's mean, so it is
    zero for the median of a symmetric base. ``alpha`` is the variance over
    the base variance.
    """

    rank: int | str
    n: int
    mean_shift: float
    variance: float
    alpha: float
    method: str
    seed: int | None = None
    samples: int | None = None
    mean_se: float | None = None
    variance_se: float | None = None


def _check_rank(i: int, n: int) -> None:
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if not 1 <= i <= n:
        raise InputError(f"rank {i} out of range 1..{n}")


def os_density(x, i: int, n: int, dist=GAUSSIAN):
    """Density of the ``i``-th smallest of ``n`` i.i.d. draws from ``dist``."""
    _check_rank(i, n)
    dist = BaseDistribution.parse(dist)
    x = np.asarray(x, dtype=float)
    coef = n * math.comb(n - 1, i - 1)
    val = coef * np.power(dist.cdf(x), i - 1) * np.power(dist.sf(x), n - i) * dist.pdf(x)
    return val if val.ndim else float(val)


def _quad(fn, lo, hi, tol, what):
    # breakpoint at the centre helps quad on the narrow high-N densities
    mid = 0.5 * (lo + hi)
    total, err_total = 0.0, 0.0
    for a, b in ((lo, mid), (mid, hi)):
        val, err = integrate.quad(fn, a, b, epsabs=tol / 4.0, epsrel=0.0, limit=400)
        total += val
        err_total += err
    if not math.isfinite(total) or err_total > tol:
        raise NumericalError(f"quadrature for {what} missed tolerance {tol}: error estimate {err_total}")
    return total


def os_moments_quadrature(i: int, n: int, dist=GAUSSIAN, tol: float = 1e-8) -> OsMoments:
    """Moments of ``X_{i:n}`` by adaptive quadrature over the truncated support."""
    _check_rank(i, n)
    if not tol > 0:
        raise InputError("tol must be positive")
    dist = BaseDistribution.parse(dist)
    lo, hi = dist.support
    # each of the n draws contributes at most the base tail mass
    if n * dist.tail_mass() >= tol:
        raise NumericalError("truncated tail mass exceeds tolerance")

    def dens(x):
        return os_density(x, i, n, dist)

    mean = _quad(lambda x: x * dens(x), lo, hi, tol, "mean")
    var = _quad(lambda x: (x - mean) ** 2 * dens(x), lo, hi, tol, "variance")
    return OsMoments(
        rank=i,
        n=n,
        mean_shift=mean - dist.mean,
        variance=var,
        alpha=var / dist.variance,
        method="quadrature",
    )


def _mc_moments(n, dist, samples, seed, select, workers):
    """Shifted power sums of a statistic of sorted samples, merged in chunk order."""
    if samples < 1:
        raise InputError("samples must be >= 1")

    def chunk(rng, start, count):
        draws = np.sort(dist.sample(rng, (count, n)), axis=1)
        return select(draws)

    values = map_chunks(chunk, samples, seed, workers)
    shift = float(values[0][0])
    sums = [math.fsum(float(np.sum((v - shift) ** k)) for v in values) for k in (1, 2, 3, 4)]
    m = samples
    r1, r2, r3, r4 = (s / m for s in sums)
    mean = shift + r1
    c2 = r2 - r1 * r1
    c4 = r4 - 4 * r1 * r3 + 6 * r1 * r1 * r2 - 3 * r1**4
    var = c2 * m / (m - 1) if m > 1 else 0.0
    mean_se = math.sqrt(max(c2, 0.0) / m)
    var_se = math.sqrt(max(c4 - c2 * c2, 0.0) / m)
    return mean, var, mean_se, var_se


def os_moments_mc(
    i: int,
    n: int,
    dist=GAUSSIAN,
    samples: int = 1_000_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> OsMoments:
    """Monte Carlo moments of ``X_{i:n}``; reproducible for a fixed seed."""
    _check_rank(i, n)
    dist = BaseDistribution.parse(dist)
    mean, var, mean_se, var_se = _mc_moments(n, dist, samples, seed, lambda d: d[:, i - 1], workers)
    return OsMoments(
        rank=i,
        n=n,
        mean_shift=mean - dist.mean,
        variance=var,
        alpha=var / dist.variance,
        method="mc",
        seed=seed,
        samples=samples,
        mean_se=mean_se,
        variance_se=var_se,
    )


EVEN_RULES = ("average", "lower")


def median_moments(
    n: int,
    dist=GAUSSIAN,
    method: str = "quadrature",
    tol: float = 1e-8,
    samples: int = 1_000_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    even_rule: str = "average",
) -> OsMoments:
    """Moments of the median combiner's output for ``n`` draws.

    With ``even_rule="average"`` (what the median combiner computes) an even
    ``n`` averages the two central order statistics. Their joint law is needed,
    so that case is Monte Carlo only. ``even_rule="lower"`` instead returns
    the moments of ``X_{n/2:n}``, which is how the classic Gaussian
    reduction-factor tables list their even-``n`` median entries.
    """
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if even_rule not in EVEN_RULES:
        raise InputError(f"even_rule must be one of {EVEN_RULES}, got {even_rule!r}")
    if method not in ("quadrature", "mc"):
        raise InputError(f"unknown method {method!r}")
    dist = BaseDistribution.parse(dist)
    if n % 2 or even_rule == "lower":
        pos = (n + 1) // 2 if n % 2 else n // 2
        if method == "quadrature":
            m = os_moments_quadrature(pos, n, dist, tol)
        else:
            m = os_moments_mc(pos, n, dist, samples, seed, workers)
        return OsMoments(**{**m.__dict__, "rank": "median"})
    if method == "quadrature":
        raise UnsupportedMethodError("even-n median needs the joint order-statistic law; use method='mc'")
    k = n // 2
    mean, var, mean_se, var_se = _mc_moments(
        n, dist, samples, seed, lambda d: 0.5 * (d[:, k - 1] + d[:, k]), workers
    )
    return OsMoments(
        rank="median",
        n=n,
        mean_shift=mean - dist.mean,
        variance=var,
        alpha=var / dist.variance,
        method="mc",
        seed=seed,
        samples=samples,
        mean_se=mean_se,
        variance_se=var_se,
    )


def rank_moments(rank: RankSpec, n: int, dist=GAUSSIAN, method: str = "quadrature", **kw) -> OsMoments:
    """Dispatch on a combiner rank spec (``"min"``, ``"max"``, ``"median"`` or ``i``).

    An even-``n`` median in quadrature mode falls back to Monte Carlo.
    """
    pos = resolve_rank(rank, n)
    if pos is None:
        if method == "quadrature" and n % 2 == 0:
            method = "mc"
        return median_moments(n, dist, method, **kw)
    if method == "quadrature":
        return os_moments_quadrature(pos, n, dist, kw.get("tol", 1e-8))
    if method == "mc":
        kw.pop("tol", None)
        return os_moments_mc(pos, n, dist, **kw)
    raise InputError(f"unknown method {method!r}")


@dataclass(frozen=True)
class AlphaRow:
    n: int
    alpha_minmax: float
    alpha_median: float
    median_method: str


def alpha_table(
    n_max: int,
    dist=GAUSSIAN,
    method: str = "quadrature",
    tol: float = 1e-8,
    samples: int = 1_000_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    even_rule: str = "average",
) -> list[AlphaRow]:
    """Reduction factors for the min/max and median combiners, ``N = 1..n_max``.

    Min and max share a factor because both supported bases are symmetric. In
    quadrature mode, even-``N`` medians under the ``"average"`` rule fall back
    to Monte Carlo and are marked so in ``median_method``.
    """
    if n_max < 1:
        raise InputError("n_max must be >= 1")
    dist = BaseDistribution.parse(dist)
    rows = []
    for n in range(1, n_max + 1):
        if method == "quadrature":
            extreme = os_moments_quadrature(n, n, dist, tol)
        elif method == "mc":
            extreme = os_moments_mc(n, n, dist, samples, seed, workers)
        else:
            raise InputError(f"unknown method {method!r}")
        med_method = method
        if method == "quadrature" and n % 2 == 0 and even_rule == "average":
            med_method = "mc"
            log.warning("N=%d: even-N median computed by Monte Carlo (seed %d)", n, seed)
        med = median_moments(
            n, dist, med_method, tol=tol, samples=samples, seed=seed, workers=workers, even_rule=even_rule
        )
        rows.append(AlphaRow(n, extreme.alpha, med.alpha, med_method))
    return rows


ALPHA_HEADER = ("N", "alpha_minmax", "alpha_median")


def write_alpha_csv(rows: list[AlphaRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ALPHA_HEADER)
    for r in rows:
        w.writerow([r.n, f"{r.alpha_minmax:.3f}", f"{r.alpha_median:.3f}"])
