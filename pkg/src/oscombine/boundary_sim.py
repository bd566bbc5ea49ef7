"""Monte Carlo check of the added-error theory.

Each trial draws the output errors of ``N`` classifiers for the two classes
meeting at the optimal boundary ``x*``, fuses them with a combiner, locates
the boundary of the fused outputs and records its offset ``b = x_b - x*``.
The noise at the realized boundary is a single draw per (trial, class,
classifier); no spatial noise process is modelled.

Trials are processed in fixed-size chunks, each with its own substream of
``SeedSequence(seed)``, so samples are bitwise identical for any number of
workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate

from . import error_model as em
from ._random import DEFAULT_SEED, map_chunks
from .core import Average, CombinerKind, OrderStat, WeightedAverage, check_combiner, fuse
from .errors import InputError
from .order_stats import GAUSSIAN, BaseDistribution, rank_moments

REJECT_WARN_FRACTION = 0.01
WINDOW_SIGMAS = 10.0
BISECT_RTOL = 1e-12


@dataclass(frozen=True)
class LocalLinear:
    """Posteriors linear around ``x*``; only the slope difference matters."""

    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise InputError(f"s must be positive, got {self.s}")


@dataclass(frozen=True)
class TwoClassExplicit:
    """Explicit posteriors ``p_i``, ``p_j`` crossing at ``x_star``.

    ``p_j - p_i`` must be strictly increasing through the crossing. Both
    callables take and return numpy arrays. ``s`` is estimated by central
    differences when not given. ``window`` overrides the half-width of the
    root search interval.
    """

    p_i: Callable[[np.ndarray], np.ndarray]
    p_j: Callable[[np.ndarray], np.ndarray]
    x_star: float = 0.0
    s: float | None = None
    window: float | None = None

    def __post_init__(self):
        gap = float(self.gap(np.asarray(self.x_star)))
        if abs(gap) > 1e-9:
            raise InputError(f"posteriors do not cross at x_star (p_j - p_i = {gap})")
        if self.s is None:
            h = 1e-5 * max(1.0, abs(self.x_star))
            x = np.array([self.x_star - h, self.x_star + h])
            g = self.gap(x)
            object.__setattr__(self, "s", float((g[1] - g[0]) / (2 * h)))
        if not self.s > 0:
            raise InputError("p_j - p_i must increase through x_star")

    def gap(self, x):
        return np.asarray(self.p_j(x)) - np.asarray(self.p_i(x))


PosteriorModel = Union[LocalLinear, TwoClassExplicit]


def logistic_pair(steepness: float = 4.0, x_star: float = 0.0, window: float | None = None) -> TwoClassExplicit:
    """Two-class logistic posteriors with ``s = steepness / 2``."""

    def p_j(x):
        return 1.0 / (1.0 + np.exp(-steepness * (np.asarray(x) - x_star)))

    def p_i(x):
        return 1.0 - p_j(x)

    return TwoClassExplicit(p_i, p_j, x_star, s=steepness / 2.0, window=window)


@dataclass(frozen=True)
class NoiseSpec:
    """Output noise of the ensemble.

    Errors of different classifiers on the same class are equicorrelated with
    coefficient ``delta``; errors of different classes are independent. For a
    non-Gaussian base with ``delta != 0`` the correlation is exact but the
    marginal shape is no longer that of the base distribution.
    """

    sigma_eta: float
    n_classifiers: int = 1
    delta: float = 0.0
    dist: BaseDistribution = GAUSSIAN
    biases_i: tuple[float, ...] | None = None
    biases_j: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dist", BaseDistribution.parse(self.dist))
        # reuse the scenario validation for sigma, N, delta and bias lengths
        self.scenario(1.0)

    def scenario(self, s: float, bayes_error: float = 0.0) -> em.BoundaryScenario:
        return em.BoundaryScenario(
            s,
            self.sigma_eta,
            self.n_classifiers,
            self.biases_i,
            self.biases_j,
            self.delta,
            bayes_error,
        )

    def bias_matrix(self) -> np.ndarray:
        """Biases as an array of shape ``(N, 2)``: column 0 is class i, column 1 class j."""
        n = self.n_classifiers
        bi = np.asarray(self.biases_i, dtype=float) if self.biases_i is not None else np.zeros(n)
        bj = np.asarray(self.biases_j, dtype=float) if self.biases_j is not None else np.zeros(n)
        return np.stack([bi, bj], axis=1)


def _equicorrelation_root(n: int, delta: float) -> np.ndarray:
    r = np.full((n, n), delta)
    np.fill_diagonal(r, 1.0)
    w, v = np.linalg.eigh(r)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def draw_errors(rng: np.random.Generator, count: int, noise: NoiseSpec) -> np.ndarray:
    """Output errors of shape ``(count, N, 2)`` (trial, classifier, class)."""
    n = noise.n_classifiers
    z = noise.dist.sample_standardized(rng, (count, 2, n))
    d = noise.delta
    if n > 1 and d > 0:
        g = noise.dist.sample_standardized(rng, (count, 2, 1))
        z = math.sqrt(d) * g + math.sqrt(1.0 - d) * z
    elif n > 1 and d < 0:
        z = z @ _equicorrelation_root(n, d).T
    eta = noise.sigma_eta * np.swapaxes(z, 1, 2)
    return eta + noise.bias_matrix()


@dataclass(frozen=True)
class OffsetSamples:
    """Boundary offsets of the accepted trials."""

    b_values: np.ndarray
    seed: int
    requested: int
    rejected: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def trials(self) -> int:
        return int(self.b_values.size)

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["b"])
        for b in self.b_values:
            w.writerow([repr(float(b))])


def _search_window(model: TwoClassExplicit, noise: NoiseSpec) -> float:
    if model.window is not None:
        return float(model.window)
    sigma_b = math.sqrt(em.offset_variance_single(model.s, noise.sigma_eta))
    beta_max = float(np.max(np.abs(noise.bias_matrix()[:, 0] - noise.bias_matrix()[:, 1]))) / model.s
    return WINDOW_SIGMAS * sigma_b + beta_max * (1.0 + 1.0 / WINDOW_SIGMAS)


def _bisect(model: TwoClassExplicit, target: np.ndarray, half_width: float):
    """Solve ``p_j(x) - p_i(x) = target`` for every entry; returns (roots, bracketed)."""
    lo = np.full(target.shape, model.x_star - half_width)
    hi = np.full(target.shape, model.x_star + half_width)
    f_lo = model.gap(lo) - target
    f_hi = model.gap(hi) - target
    ok = (f_lo <= 0) & (f_hi >= 0)
    tol = BISECT_RTOL * 2.0 * half_width
    steps = int(math.ceil(math.log2(max(2.0 * half_width / tol, 2.0))))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = model.gap(mid) - target < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi), ok


def simulate_offsets(
    model: PosteriorModel,
    noise: NoiseSpec,
    combiner: CombinerKind,
    trials: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> OffsetSamples:
    """Draw ``trials`` boundary offsets of the fused classifier.

    The posteriors of both classes are equal at ``x*`` and every supported
    combiner commutes with adding a common constant to a class column, so the
    fused error is ``fuse(errors)``. Under :class:`LocalLinear` the offset is
    ``(e_i - e_j) / s``. Under :class:`TwoClassExplicit` the fused errors are
    held constant and ``p_i(x) + e_i = p_j(x) + e_j`` is solved by bisection;
    trials whose root is not bracketed are rejected and counted, never redrawn.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    check_combiner(combiner, noise.n_classifiers)
    window = _search_window(model, noise) if isinstance(model, TwoClassExplicit) else None

    def chunk(rng, start, count):
        fused = fuse(draw_errors(rng, count, noise), combiner)
        diff = fused[:, 0] - fused[:, 1]
        if isinstance(model, LocalLinear):
            return diff / model.s, 0
        if window == 0.0:
            return np.zeros(count), 0
        roots, ok = _bisect(model, diff, window)
        return roots[ok] - model.x_star, count - int(ok.sum())

    parts = map_chunks(chunk, trials, seed, workers)
    b = np.concatenate([p[0] for p in parts])
    rejected = sum(p[1] for p in parts)
    warnings = []
    if rejected > REJECT_WARN_FRACTION * trials:
        warnings.append(f"{rejected} of {trials} trials rejected: root not bracketed in x* +- {window:g}")
    return OffsetSamples(b, seed, trials, rejected, tuple(warnings))


@dataclass(frozen=True)
class EmpiricalMoments(em.MomentPair):
    count: int = 0
    sample_variance: float = 0.0
    m1_se: float = 0.0
    m2_se: float = 0.0


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    mean = math.fsum(x.tolist()) / n
    var = math.fsum(((x - mean) ** 2).tolist()) / (n - 1)
    return mean, math.sqrt(var / n)


def empirical_moments(samples: OffsetSamples) -> EmpiricalMoments:
    """Sample ``M1 = mean(b)`` and ``M2 = mean(b**2)`` with standard errors."""
    b = np.asarray(samples.b_values, dtype=float)
    if b.size < 2:
        raise InputError(f"need at least 2 trials for moments, got {b.size}")
    m1, m1_se = _mean_se(b)
    m2, m2_se = _mean_se(b * b)
    var = math.fsum(((b - m1) ** 2).tolist()) / (b.size - 1)
    return EmpiricalMoments(m1, m2, count=b.size, sample_variance=var, m1_se=m1_se, m2_se=m2_se)


def added_error_samples(samples: OffsetSamples, model: PosteriorModel) -> np.ndarray:
    """Added-error area ``A(b)`` of every trial."""
    b = np.asarray(samples.b_values, dtype=float)
    if isinstance(model, LocalLinear):
        return 0.5 * model.s * b * b

    def gap(x):
        return float(model.gap(np.asarray(x)))

    x0 = model.x_star
    areas = np.empty(b.size)
    for k, bk in enumerate(b):
        if bk == 0.0:
            areas[k] = 0.0
            continue
        val, _ = integrate.quad(gap, x0, x0 + bk, epsabs=1e-14, epsrel=1e-10)
        areas[k] = abs(val)
    return areas


def empirical_added_error(samples: OffsetSamples, model: PosteriorModel) -> float:
    """Mean added-error area over trials."""
    if samples.trials < 2:
        raise InputError(f"need at least 2 trials, got {samples.trials}")
    return math.fsum(added_error_samples(samples, model).tolist()) / samples.trials


@dataclass
class ErrorReport:
    predicted: em.ErrorPrediction | None
    empirical: dict
    ratio: float | None
    stderr: dict
    rejected_trials: int
    seed: int
    warnings: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "predicted": self.predicted.to_dict() if self.predicted is not None else None,
            "empirical": self.empirical,
            "ratio": self.ratio,
            "stderr": self.stderr,
            "rejected_trials": self.rejected_trials,
            "seed": self.seed,
            "warnings": list(self.warnings),
            "config": self.config,
        }


def _describe(combiner: CombinerKind) -> str:
    if isinstance(combiner, OrderStat):
        return f"os:{combiner.rank}"
    return combiner.name


def predict_for(
    model: PosteriorModel, noise: NoiseSpec, combiner: CombinerKind, seed: int = DEFAULT_SEED
) -> tuple[em.ErrorPrediction | None, str | None]:
    """Theoretical prediction for a simulator configuration, or ``(None, reason)``."""
    scn = noise.scenario(model.s)
    if noise.n_classifiers == 1:
        return em.predict_single(scn), None
    if isinstance(combiner, Average):
        return em.predict_average(scn), None
    if isinstance(combiner, WeightedAverage):
        return None, "no closed-form prediction for a weighted average"
    if noise.delta != 0.0:
        return None, "order-statistic predictions need uncorrelated errors (delta = 0)"
    moments = rank_moments(combiner.rank, noise.n_classifiers, noise.dist, "quadrature", seed=seed)
    return em.predict_os(scn, moments.alpha), None


def compare_to_theory(
    model: PosteriorModel,
    noise: NoiseSpec,
    combiner: CombinerKind,
    trials: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    samples: OffsetSamples | None = None,
) -> ErrorReport:
    """Simulate, measure the empirical added error and set it against theory.

    ``empirical["reduction_factor"]`` is the measured added error over the
    predicted single-classifier added error, and ``variance_ratio`` the sample
    offset variance over the single-classifier offset variance.
    """
    if samples is None:
        samples = simulate_offsets(model, noise, combiner, trials, seed, workers)
    moments = empirical_moments(samples)
    areas = added_error_samples(samples, model)
    e_add, e_add_se = _mean_se(areas)
    scn = noise.scenario(model.s)
    var_single = em.offset_variance_single(model.s, noise.sigma_eta)
    bias = em.bias_spec(scn)
    reference = model.s / 2.0 * (var_single + (bias.beta**2 if bias else 0.0))

    predicted, reason = predict_for(model, noise, combiner, seed)
    warnings = list(samples.warnings)
    if reason:
        warnings.append(f"prediction unavailable: {reason}")
    ratio = ratio_se = None
    if predicted is not None and predicted.e_add > 0:
        ratio = e_add / predicted.e_add
        ratio_se = e_add_se / predicted.e_add

    empirical = {
        "m1": moments.m1,
        "m2": moments.m2,
        "variance": moments.sample_variance,
        "e_add": e_add,
        "reduction_factor": e_add / reference if reference > 0 else None,
        "variance_ratio": moments.sample_variance / var_single if var_single > 0 else None,
        "trials": samples.trials,
    }
    stderr = {
        "m1": moments.m1_se,
        "m2": moments.m2_se,
        "e_add": e_add_se,
        "reduction_factor": e_add_se / reference if reference > 0 else None,
        "ratio": ratio_se,
    }
    config = {
        "model": type(model).__name__,
        "s": model.s,
        "sigma_eta": noise.sigma_eta,
        "n": noise.n_classifiers,
        "delta": noise.delta,
        "dist": noise.dist.value,
        "combiner": _describe(combiner),
        "trials": samples.requested,
    }
    return ErrorReport(predicted, empirical, ratio, stderr, samples.rejected, seed, warnings, config)
