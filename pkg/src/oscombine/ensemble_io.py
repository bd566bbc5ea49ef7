"""Classifier score files: loading, fusion, accuracy and error correlation.

Score CSV grammar (UTF-8, one row per pattern and classifier)::

    pattern_id,true_label,classifier_id,score_0,...,score_{L-1}

Output errors are not observable on real data, so correlations use the
proxy ``score - one_hot(true_label)`` with Pearson correlation across
patterns. This is exact only when the posteriors are close to the targets.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import error_model as em
from ._random import DEFAULT_SEED
from .core import CombinerKind, check_combiner, decide_many, fuse
from .errors import FormatError, InputError


@dataclass(frozen=True)
class ScoreDataset:
    """Scores of ``N`` classifiers on ``P`` patterns, shape ``(P, N, L)``.

    Patterns are sorted by id and classifiers by id.
    """

    pattern_ids: tuple[str, ...]
    labels: np.ndarray
    classifier_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        p, n, L = self.scores.shape
        if len(self.pattern_ids) != p or self.labels.shape != (p,) or len(self.classifier_ids) != n:
            raise InputError("inconsistent dataset dimensions")
        if L < 2:
            raise InputError("need at least two classes")
        if np.any(self.labels < 0) or np.any(self.labels >= L):
            raise InputError("true labels out of range")

    @property
    def n_patterns(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classifiers(self) -> int:
        return self.scores.shape[1]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[2]

    @property
    def priors(self) -> np.ndarray:
        counts = np.bincount(self.labels, minlength=self.n_classes)
        return counts / counts.sum()

    def index_of(self, classifier_id: str) -> int:
        try:
            return self.classifier_ids.index(classifier_id)
        except ValueError:
            raise InputError(f"unknown classifier id {classifier_id!r}") from None

    def subset(self, classifier_ids) -> "ScoreDataset":
        ids = list(classifier_ids)
        if not ids:
            raise InputError("classifier subset is empty")
        idx = [self.index_of(c) for c in ids]
        return ScoreDataset(self.pattern_ids, self.labels, tuple(ids), self.scores[:, idx, :])


def load_scores(path, format: str = "csv") -> ScoreDataset:
    """Read and validate a score file."""
    if format != "csv":
        raise InputError(f"unsupported score format {format!r}")
    path = Path(path)
    rows: dict[tuple[str, str], list[float]] = {}
    labels: dict[str, int] = {}
    n_classes = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:3] != ["pattern_id", "true_label", "classifier_id"]:
            raise FormatError(f"{path}: header must start with pattern_id,true_label,classifier_id")
        n_classes = len(header) - 3
        expected = [f"score_{k}" for k in range(n_classes)]
        if header[3:] != expected or n_classes < 2:
            raise FormatError(f"{path}: expected score columns score_0..score_{{L-1}} with L >= 2")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            pid, label_s, cid = (c.strip() for c in row[:3])
            try:
                label = int(label_s)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: true_label {label_s!r} is not an integer") from None
            if not 0 <= label < n_classes:
                raise FormatError(f"{path}:{lineno}: true_label {label} outside [0, {n_classes})")
            try:
                scores = [float(c) for c in row[3:]]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: unparseable score") from None
            if not all(math.isfinite(x) for x in scores):
                raise FormatError(f"{path}:{lineno}: non-finite score")
            if (pid, cid) in rows:
                raise FormatError(f"{path}:{lineno}: duplicate row for pattern {pid!r}, classifier {cid!r}")
            if labels.setdefault(pid, label) != label:
                raise FormatError(f"{path}:{lineno}: conflicting true_label for pattern {pid!r}")
            rows[(pid, cid)] = scores
    if not rows:
        raise FormatError(f"{path}: no data rows")
    pids = sorted(labels)
    cids = sorted({c for _, c in rows})
    arr = np.empty((len(pids), len(cids), n_classes))
    for a, pid in enumerate(pids):
        for m, cid in enumerate(cids):
            try:
                arr[a, m] = rows[(pid, cid)]
            except KeyError:
                raise FormatError(f"{path}: pattern {pid!r} has no scores from classifier {cid!r}") from None
    return ScoreDataset(tuple(pids), np.array([labels[p] for p in pids]), tuple(cids), arr)


def write_scores(ds: ScoreDataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern_id", "true_label", "classifier_id"] + [f"score_{k}" for k in range(ds.n_classes)])
        for a, pid in enumerate(ds.pattern_ids):
            for m, cid in enumerate(ds.classifier_ids):
                w.writerow([pid, int(ds.labels[a]), cid] + [repr(float(x)) for x in ds.scores[a, m]])


@dataclass(frozen=True)
class CorrelationReport:
    per_class_delta: np.ndarray
    overall_delta: float
    pairwise: np.ndarray  # (L, N, N); NaN where undefined
    priors: np.ndarray
    classifier_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        def clean(x):
            return None if not math.isfinite(x) else float(x)

        return {
            "classifier_ids": list(self.classifier_ids),
            "per_class_delta": [clean(d) for d in self.per_class_delta],
            "overall_delta": clean(self.overall_delta),
            "priors": [float(p) for p in self.priors],
            "pairwise": [[[clean(v) for v in row] for row in mat] for mat in self.pairwise],
        }


def error_proxy(ds: ScoreDataset) -> np.ndarray:
    """``score - one_hot(label)`` for every pattern, classifier and class."""
    onehot = np.eye(ds.n_classes)[ds.labels]
    return ds.scores - onehot[:, None, :]


def estimate_correlation(ds: ScoreDataset) -> CorrelationReport:
    """Per-class average pairwise error correlation and its prior-weighted mean.

    Pairs involving a zero-variance error column have no correlation; they
    are reported as NaN and left out of the averages with a warning.
    """
    if ds.n_classifiers < 2:
        raise InputError("correlation needs at least two classifiers")
    if ds.n_patterns < 3:
        raise InputError("correlation needs at least three patterns")
    err = error_proxy(ds)
    n, L = ds.n_classifiers, ds.n_classes
    pairwise = np.full((L, n, n), np.nan)
    per_class = np.full(L, np.nan)
    off = ~np.eye(n, dtype=bool)
    for i in range(L):
        e = err[:, :, i] - err[:, :, i].mean(axis=0)
        norms = np.sqrt(np.einsum("pm,pm->m", e, e))
        cov = e.T @ e
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = cov / np.outer(norms, norms)
        dead = norms <= 1e-12 * max(1.0, float(norms.max(initial=0.0)))
        corr[dead, :] = np.nan
        corr[:, dead] = np.nan
        np.fill_diagonal(corr, 1.0)
        corr = np.clip(corr, -1.0, 1.0)
        pairwise[i] = corr
        vals = corr[off]
        good = np.isfinite(vals)
        if not good.all():
            bad = [ds.classifier_ids[m] for m in np.flatnonzero(dead)]
            warnings.warn(f"class {i}: zero-variance errors for {bad}; their pairs are excluded", RuntimeWarning)
        if good.any():
            per_class[i] = float(vals[good].mean())
    priors = ds.priors
    usable = np.isfinite(per_class)
    if usable.all():
        overall = em.overall_delta(per_class, priors)
    elif usable.any():
        w = priors[usable] / priors[usable].sum()
        overall = float(np.dot(w, per_class[usable]))
    else:
        overall = math.nan
    return CorrelationReport(per_class, overall, pairwise, priors, ds.classifier_ids)


def error_rate(ds: ScoreDataset, combiner: CombinerKind) -> float:
    """Percentage of patterns misclassified by the fused ensemble."""
    check_combiner(combiner, ds.n_classifiers)
    decided = decide_many(fuse(ds.scores, combiner))
    return 100.0 * float(np.mean(decided != ds.labels))


def expected_error_rate(ds: ScoreDataset, combiner: CombinerKind, posteriors: np.ndarray) -> float:
    """Percentage error expected from the fused decisions given the true posteriors.

    For synthetic data with known posteriors this removes the label-sampling
    noise from :func:`error_rate`.
    """
    check_combiner(combiner, ds.n_classifiers)
    decided = decide_many(fuse(ds.scores, combiner))
    return 100.0 * float(np.mean(1.0 - posteriors[np.arange(ds.n_patterns), decided]))


def evaluate_ensemble(
    ds: ScoreDataset,
    combiner: CombinerKind,
    subset=None,
    groups=None,
) -> dict:
    """Individual and combined error rates in percent.

    ``groups`` is a list of disjoint classifier-id lists (for instance one per
    training run); each is fused separately and the mean and standard
    deviation of their combined errors are reported.
    """
    if subset is not None:
        ds = ds.subset(subset)
    individual = {}
    for m, cid in enumerate(ds.classifier_ids):
        decided = decide_many(ds.scores[:, m, :])
        individual[cid] = 100.0 * float(np.mean(decided != ds.labels))
    report = {
        "combiner": _combiner_label(combiner),
        "n_patterns": ds.n_patterns,
        "n_classifiers": ds.n_classifiers,
        "classifier_ids": list(ds.classifier_ids),
        "individual_error": individual,
        "mean_individual_error": float(np.mean(list(individual.values()))),
        "combined_error": error_rate(ds, combiner),
    }
    if groups:
        seen: set[str] = set()
        errs = []
        for g in groups:
            g = list(g)
            if seen.intersection(g):
                raise InputError("classifier groups must be disjoint")
            seen.update(g)
            errs.append(error_rate(ds.subset(g), combiner))
        report["groups"] = {
            "combined_errors": errs,
            "mean": float(np.mean(errs)),
            "std": float(np.std(errs, ddof=1)) if len(errs) > 1 else 0.0,
        }
    return report


def _combiner_label(combiner: CombinerKind) -> str:
    rank = getattr(combiner, "rank", None)
    return combiner.name if rank is None else f"os:{rank}"


def mixed_subset(ds: ScoreDataset, runs_a, runs_b, n: int) -> list[str]:
    """Classifier ids for an ``n``-member ensemble drawn from two model types.

    Members alternate between the types; with odd ``n`` the type whose runs
    have the lower mean individual error gets the extra member (ties go to
    ``runs_a``).
    """
    runs_a, runs_b = list(runs_a), list(runs_b)
    if n < 1:
        raise InputError("ensemble size must be >= 1")

    def mean_err(ids):
        sub = ds.subset(ids)
        return float(np.mean([np.mean(decide_many(sub.scores[:, m, :]) != sub.labels) for m in range(len(ids))]))

    better, worse = (runs_a, runs_b) if mean_err(runs_a) <= mean_err(runs_b) else (runs_b, runs_a)
    k_better, k_worse = (n + 1) // 2, n // 2
    if k_better > len(better) or k_worse > len(worse):
        raise InputError(f"not enough runs for a mixed ensemble of {n}")
    return better[:k_better] + worse[:k_worse]


def synthetic_dataset(
    n_patterns: int,
    n_classifiers: int,
    sigma: float,
    delta: float = 0.0,
    bayes_error: float = 0.05,
    seed: int = DEFAULT_SEED,
) -> tuple[ScoreDataset, np.ndarray]:
    """Two-class patterns with known posteriors and noisy classifier scores.

    The input is ``x ~ N(+-mu, 1)`` with equal priors, where ``mu`` is chosen
    so the Bayes error equals ``bayes_error``; ``bayes_error=0`` gives
    separable classes with one-hot posteriors. Each classifier outputs the
    true posteriors plus Gaussian noise of standard deviation ``sigma``,
    equicorrelated across classifiers with ``delta`` and independent across
    classes. Returns the dataset and the true posteriors, shape ``(P, 2)``.
    """
    from scipy.special import ndtri

    if not 0.0 <= bayes_error < 0.5:
        raise InputError("bayes_error must lie in [0, 0.5)")
    em.check_delta(delta, n_classifiers)
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n_patterns)
    if bayes_error == 0.0:
        post1 = labels.astype(float)
    else:
        mu = -float(ndtri(bayes_error))
        x = rng.standard_normal(n_patterns) + np.where(labels == 1, mu, -mu)
        post1 = 1.0 / (1.0 + np.exp(-2.0 * mu * x))
    post = np.stack([1.0 - post1, post1], axis=1)
    z = rng.standard_normal((n_patterns, n_classifiers, 2))
    if n_classifiers > 1 and delta > 0:
        g = rng.standard_normal((n_patterns, 1, 2))
        z = math.sqrt(delta) * g + math.sqrt(1.0 - delta) * z
    elif n_classifiers > 1 and delta < 0:
        r = np.full((n_classifiers, n_classifiers), delta)
        np.fill_diagonal(r, 1.0)
        z = np.einsum("mk,pkl->pml", np.linalg.cholesky(r + 1e-12 * np.eye(n_classifiers)), z)
    scores = post[:, None, :] + sigma * z
    width = len(str(n_patterns - 1))
    pids = tuple(f"p{a:0{width}d}" for a in range(n_patterns))
    cwidth = len(str(n_classifiers - 1))
    cids = tuple(f"c{m:0{cwidth}d}" for m in range(n_classifiers))
    return ScoreDataset(pids, labels, cids, scores), post
