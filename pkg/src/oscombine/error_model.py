"""Closed-form added-error predictions near a two-class decision boundary.

Locally the two dominant posteriors cross at ``x*`` with slope difference
``s``. A classifier whose outputs carry noise of standard deviation
``sigma_eta`` places its boundary at offset ``b`` from ``x*``, and the
expected error beyond Bayes is ``s * E[b**2] / 2``. Combining changes the
first two moments of ``b``; this module tracks how, for averaging (optionally
biased and correlated) and for order-statistic combiners.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

_PRIOR_SUM_TOL = 1e-9


def min_delta(n: int) -> float:
    """Smallest equicorrelation keeping an ``n x n`` correlation matrix PSD."""
    return -1.0 / (n - 1) if n > 1 else -math.inf


def check_delta(delta: float, n: int) -> None:
    if not math.isfinite(delta) or delta > 1.0:
        raise InputError(f"delta must be a finite value <= 1, got {delta}")
    if delta < min_delta(n) - 1e-12:
        raise InputError(f"delta {delta} below the bound -1/(N-1) = {min_delta(n)} for N={n}")


def correlation_factor(n: int, delta: float = 0.0) -> float:
    """Added-error ratio ``(1 + delta*(N-1)) / N`` of an average of ``N`` classifiers."""
    if n < 1:
        raise InputError(f"N must be >= 1, got {n}")
    return (1.0 + delta * (n - 1)) / n


@dataclass(frozen=True)
class MomentPair:
    m1: float
    m2: float

    @property
    def variance(self) -> float:
        return self.m2 - self.m1 * self.m1


@dataclass(frozen=True)
class BiasSpec:
    """Bias of a combined boundary.

    ``beta_bar`` is the mean boundary bias of the ensemble and ``z`` its
    reduction relative to a single classifier's bias ``beta_bar * z``.
    ``sigma2_beta`` is the spread of the individual biases, scaled to the
    offset axis. When the individual biases cancel (``beta_bar == 0``) give
    the single-classifier bias explicitly as ``beta_single``.
    """

    beta_bar: float
    z: float = 1.0
    sigma2_beta: float = 0.0
    beta_single: float | None = None

    def __post_init__(self):
        if not self.z >= 1.0:
            raise InputError(f"bias reduction factor z must be >= 1, got {self.z}")
        if not self.sigma2_beta >= 0.0:
            raise InputError("sigma2_beta must be nonnegative")
        if self.beta_single is None and not math.isfinite(self.z):
            raise InputError("infinite z needs an explicit beta_single")

    @property
    def beta(self) -> float:
        """Bias of a single classifier on the offset axis."""
        if self.beta_single is not None:
            return self.beta_single
        return self.beta_bar * self.z


@dataclass(frozen=True)
class BoundaryScenario:
    """Local boundary parameters.

    ``biases_i`` and ``biases_j`` hold each classifier's output bias for the
    two boundary classes; ``None`` means unbiased.
    """

    s: float
    sigma_eta: float
    n_classifiers: int = 1
    biases_i: tuple[float, ...] | None = None
    biases_j: tuple[float, ...] | None = None
    delta: float = 0.0
    bayes_error: float = 0.0

    def __post_init__(self):
        if not self.s > 0:
            raise InputError(f"slope difference s must be positive, got {self.s}")
        if not self.sigma_eta >= 0:
            raise InputError(f"sigma_eta must be nonnegative, got {self.sigma_eta}")
        if self.n_classifiers < 1:
            raise InputError("n_classifiers must be >= 1")
        if not self.bayes_error >= 0:
            raise InputError("bayes_error must be nonnegative")
        check_delta(self.delta, self.n_classifiers)
        for name in ("biases_i", "biases_j"):
            b = getattr(self, name)
            if b is None:
                continue
            b = tuple(float(x) for x in b)
            if len(b) != self.n_classifiers:
                raise InputError(f"{name} has {len(b)} entries for {self.n_classifiers} classifiers")
            object.__setattr__(self, name, b)

    @property
    def biased(self) -> bool:
        return any(self._bias_arrays()[0] != 0) or any(self._bias_arrays()[1] != 0)

    def _bias_arrays(self):
        zeros = np.zeros(self.n_classifiers)
        bi = np.asarray(self.biases_i) if self.biases_i is not None else zeros
        bj = np.asarray(self.biases_j) if self.biases_j is not None else zeros
        return bi, bj

    def boundary_biases(self) -> np.ndarray:
        """Per-classifier boundary bias ``(beta_i^m - beta_j^m) / s``."""
        bi, bj = self._bias_arrays()
        return (bi - bj) / self.s

    def single(self, m: int = 0) -> "BoundaryScenario":
        """The scenario seen by classifier ``m`` alone."""
        bi, bj = self._bias_arrays()
        return BoundaryScenario(
            self.s, self.sigma_eta, 1, (bi[m],), (bj[m],), 0.0, self.bayes_error
        )


def bias_spec(scn: BoundaryScenario) -> BiasSpec | None:
    """Summarise a scenario's per-classifier biases, or ``None`` if unbiased.

    The single-classifier reference bias is the root-mean-square of the
    individual boundary biases, so ``z = rms / |mean| >= 1``.
    """
    if not scn.biased:
        return None
    beta_m = scn.boundary_biases()
    beta_bar = float(np.mean(beta_m))
    rms = float(np.sqrt(np.mean(beta_m**2)))
    bi, bj = scn._bias_arrays()
    n = scn.n_classifiers
    spread = (np.var(bi, ddof=1) + np.var(bj, ddof=1)) / scn.s**2 if n > 1 else 0.0
    z = rms / abs(beta_bar) if beta_bar != 0 else math.inf
    return BiasSpec(beta_bar, max(z, 1.0), float(spread), beta_single=rms)


@dataclass(frozen=True)
class ErrorPrediction:
    e_add: float
    e_total: float
    reduction_factor: float
    moments: MomentPair
    tau_sq: float | None = None
    bound_errcobi: float | None = None
    bound_errcobi_tau_sq: float | None = None
    extremes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "e_add": self.e_add,
            "e_total": self.e_total,
            "reduction_factor": self.reduction_factor,
            "m1": self.moments.m1,
            "m2": self.moments.m2,
            "tau_sq": self.tau_sq,
            "bound_errcobi": self.bound_errcobi,
            "bound_errcobi_tau_sq": self.bound_errcobi_tau_sq,
        }
        if self.extremes:
            d["extremes"] = dict(self.extremes)
        return d


def offset_variance_single(s: float, sigma_eta: float) -> float:
    """Variance ``2 sigma_eta**2 / s**2`` of one classifier's boundary offset."""
    if not s > 0:
        raise InputError(f"s must be positive, got {s}")
    if not sigma_eta >= 0:
        raise InputError(f"sigma_eta must be nonnegative, got {sigma_eta}")
    return 2.0 * sigma_eta**2 / s**2


def added_error_from_moments(s: float, moments: MomentPair) -> float:
    """Expected added error ``s * M2 / 2`` under the linear posterior model."""
    if not s > 0:
        raise InputError(f"s must be positive, got {s}")
    if moments.m2 < moments.m1**2 * (1 - 1e-12) - 1e-300:
        raise InputError(f"invalid moments: m2={moments.m2} < m1**2={moments.m1**2}")
    return s * moments.m2 / 2.0


def _single_reference(scn: BoundaryScenario, bias: BiasSpec | None) -> float:
    var_b = offset_variance_single(scn.s, scn.sigma_eta)
    beta = bias.beta if bias is not None else 0.0
    return scn.s / 2.0 * (var_b + beta**2)


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def predict_single(scn: BoundaryScenario) -> ErrorPrediction:
    if scn.n_classifiers != 1:
        raise InputError(f"predict_single needs N=1, got N={scn.n_classifiers}")
    var_b = offset_variance_single(scn.s, scn.sigma_eta)
    beta = float(scn.boundary_biases()[0])
    moments = MomentPair(beta, var_b + beta**2)
    e_add = added_error_from_moments(scn.s, moments)
    return ErrorPrediction(e_add, scn.bayes_error + e_add, 1.0, moments)


def predict_average(scn: BoundaryScenario, bias: BiasSpec | None = None) -> ErrorPrediction:
    """Averaging combiner, with optional bias and equicorrelated errors.

    ``bias`` defaults to the summary of the scenario's own biases. Alongside the
    prediction this reports ``tau_sq = min(z**2, (1+delta(N-1))/N)`` and the
    upper bound ``E_add(beta) / tau``, plus the variant ``E_add(beta) / tau**2``.
    """
    check_delta(scn.delta, scn.n_classifiers)
    if bias is None:
        bias = bias_spec(scn)
    factor = correlation_factor(scn.n_classifiers, scn.delta)
    var_b = offset_variance_single(scn.s, scn.sigma_eta)
    beta_bar = bias.beta_bar if bias is not None else 0.0
    moments = MomentPair(beta_bar, var_b * factor + beta_bar**2)
    e_add = added_error_from_moments(scn.s, moments)
    reference = _single_reference(scn, bias)
    z = bias.z if bias is not None else 1.0
    tau_sq = min(z * z, factor)
    bound = reference / math.sqrt(tau_sq) if tau_sq > 0 else math.inf
    bound_sq = reference / tau_sq if tau_sq > 0 else math.inf
    return ErrorPrediction(
        e_add,
        scn.bayes_error + e_add,
        _ratio(e_add, reference),
        moments,
        tau_sq=tau_sq,
        bound_errcobi=bound,
        bound_errcobi_tau_sq=bound_sq,
    )


def predict_os(scn: BoundaryScenario, alpha: float, bias: BiasSpec | None = None) -> ErrorPrediction:
    """Order-statistic combiner with variance reduction factor ``alpha``.

    Only i.i.d. classifier errors are covered, so ``delta`` must be zero. For
    biased ensembles the two limiting forms (identical biases, cancelling
    biases) are returned in ``extremes``.
    """
    if not 0.0 < alpha <= 1.0:
        raise InputError(f"alpha must lie in (0, 1], got {alpha}")
    if scn.delta != 0.0:
        raise InputError("order-statistic predictions assume uncorrelated errors (delta = 0)")
    if bias is None:
        bias = bias_spec(scn)
    var_b = offset_variance_single(scn.s, scn.sigma_eta)
    reference = _single_reference(scn, bias)
    half_s = scn.s / 2.0
    if bias is None:
        moments = MomentPair(0.0, alpha * var_b)
        extremes = {}
    else:
        moments = MomentPair(bias.beta_bar, alpha * (var_b + bias.sigma2_beta) + bias.beta_bar**2)
        beta = bias.beta
        extremes = {
            "equal_biases": half_s * (alpha * var_b + beta**2),
            "cancelling_biases": alpha * reference + half_s * alpha * (bias.sigma2_beta - beta**2),
        }
    e_add = added_error_from_moments(scn.s, moments)
    return ErrorPrediction(
        e_add, scn.bayes_error + e_add, _ratio(e_add, reference), moments, extremes=extremes
    )


def overall_delta(per_class_delta, priors) -> float:
    """Prior-weighted mean of per-class correlation factors."""
    d = np.asarray(per_class_delta, dtype=float)
    p = np.asarray(priors, dtype=float)
    if d.shape != p.shape or d.ndim != 1:
        raise InputError("per_class_delta and priors must be 1-D of equal length")
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > _PRIOR_SUM_TOL:
        raise InputError(f"priors must be nonnegative and sum to 1, got sum {float(p.sum())}")
    return float(np.dot(p, d))


def reduction_curve(n_range, delta_set) -> list[tuple[int, float, float]]:
    """Rows ``(N, delta, (1 + delta(N-1))/N)``, deltas varying fastest within each N."""
    rows = []
    for n in n_range:
        n = int(n)
        if n < 1:
            raise InputError(f"N must be >= 1, got {n}")
        for d in delta_set:
            d = float(d)
            check_delta(d, n)
            rows.append((n, d, correlation_factor(n, d)))
    return rows


def write_curve_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("N", "delta", "factor"))
    for n, d, f in rows:
        w.writerow([n, repr(d), repr(f)])
