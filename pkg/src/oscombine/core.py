"""Combiner algebra over classifier score matrices.

A score matrix holds the outputs of ``N`` classifiers for ``L`` classes on a
single pattern: row ``m`` is classifier ``m``, column ``i`` is class ``i``.
Combiners reduce it column-wise to one fused score vector, and the pattern is
assigned to the class with the highest fused score.

Everything here is a pure function of its arguments. :func:`fuse` works on
arrays of shape ``(..., N, L)`` so the simulator and the dataset evaluator can
fuse many patterns in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .errors import InputError

RankName = Literal["min", "max", "median"]
RankSpec = Union[RankName, int]
"""``"min"``, ``"max"``, ``"median"`` or a 1-based rank ``i`` in ``1..N``."""

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ScoreMatrix:
    """N x L classifier outputs for one pattern.

    Rows need not sum to one; the combiners operate on raw posterior
    approximations.
    """

    scores: np.ndarray

    def __post_init__(self):
        arr = np.array(self.scores, dtype=float)
        if arr.ndim != 2:
            raise InputError(f"score matrix must be 2-D, got shape {arr.shape}")
        n, L = arr.shape
        if n < 1:
            raise InputError("score matrix needs at least one classifier")
        if L < 2:
            raise InputError("score matrix needs at least two classes")
        if not np.all(np.isfinite(arr)):
            raise InputError("score matrix contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @property
    def n_classifiers(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class Average:
    """Arithmetic mean in output space."""

    name = "ave"


@dataclass(frozen=True)
class WeightedAverage:
    weights: tuple[float, ...]
    name = "wave"

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        _check_weights(np.asarray(w))
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class OrderStat:
    rank: RankSpec = "median"
    name = "os"

    def __post_init__(self):
        r = self.rank
        if isinstance(r, str):
            if r not in ("min", "max", "median"):
                raise InputError(f"unknown rank {r!r}")
        elif isinstance(r, (int, np.integer)) and not isinstance(r, bool):
            if r < 1:
                raise InputError(f"rank must be >= 1, got {r}")
            object.__setattr__(self, "rank", int(r))
        else:
            raise InputError(f"unsupported rank specification {r!r}")


CombinerKind = Union[Average, WeightedAverage, OrderStat]


@dataclass(frozen=True)
class FusedScores:
    values: np.ndarray
    decided_class: int


def _check_weights(w: np.ndarray, n: int | None = None) -> None:
    if w.ndim != 1 or w.size == 0:
        raise InputError("weights must be a non-empty 1-D sequence")
    if n is not None and w.size != n:
        raise InputError(f"got {w.size} weights for {n} classifiers")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("weights must be finite and nonnegative")
    if abs(float(np.sum(w)) - 1.0) > _WEIGHT_SUM_TOL:
        raise InputError(f"weights must sum to 1, got {float(np.sum(w))!r}")


def resolve_rank(rank: RankSpec, n: int) -> int | None:
    """Translate a rank spec into a 1-based position, or ``None`` for the median.

    The median needs special handling for even ``n``, so it is not collapsed
    to a single position.
    """
    if rank == "min":
        return 1
    if rank == "max":
        return n
    if rank == "median":
        return None
    if not 1 <= rank <= n:
        raise InputError(f"rank {rank} out of range 1..{n}")
    return int(rank)


def order_statistic(values: np.ndarray, rank: RankSpec, axis: int = -2) -> np.ndarray:
    """Select an order statistic of ``values`` along ``axis``.

    For an even count the median is the mean of the two central order
    statistics.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    pos = resolve_rank(rank, n)
    ordered = np.sort(values, axis=axis)
    if pos is not None:
        return np.take(ordered, pos - 1, axis=axis)
    if n % 2:
        return np.take(ordered, n // 2, axis=axis)
    lo = np.take(ordered, n // 2 - 1, axis=axis)
    hi = np.take(ordered, n // 2, axis=axis)
    return 0.5 * (lo + hi)


def fuse(scores: np.ndarray, combiner: CombinerKind) -> np.ndarray:
    """Fuse classifier outputs of shape ``(..., N, L)`` into ``(..., L)``."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim < 2:
        raise InputError("scores must have a classifier axis and a class axis")
    n = scores.shape[-2]
    if isinstance(combiner, Average):
        return scores.mean(axis=-2)
    if isinstance(combiner, WeightedAverage):
        w = np.asarray(combiner.weights)
        _check_weights(w, n)
        return np.einsum("...nl,n->...l", scores, w)
    if isinstance(combiner, OrderStat):
        return order_statistic(scores, combiner.rank, axis=-2)
    raise InputError(f"unknown combiner {combiner!r}")


def decide(values) -> int:
    """Index of the largest value; ties go to the lowest index."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InputError("decide needs a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise InputError("decide got non-finite values")
    # np.argmax returns the first maximal index
    return int(np.argmax(v))


def decide_many(values: np.ndarray) -> np.ndarray:
    """Row-wise :func:`decide` for an array of shape ``(..., L)``."""
    return np.argmax(np.asarray(values, dtype=float), axis=-1)


def _as_matrix(m) -> ScoreMatrix:
    return m if isinstance(m, ScoreMatrix) else ScoreMatrix(m)


def combine_average(m, weights=None) -> FusedScores:
    """Column-wise mean, or weighted mean when ``weights`` is given.

    >>> combine_average([[0.8, 0.2], [0.6, 0.4]]).decided_class
    0
    """
    m = _as_matrix(m)
    if weights is None:
        values = fuse(m.scores, Average())
    else:
        w = np.asarray(weights, dtype=float)
        _check_weights(w, m.n_classifiers)
        values = fuse(m.scores, WeightedAverage(tuple(w)))
    return FusedScores(values, decide(values))


def combine_os(m, rank: RankSpec) -> FusedScores:
    """Per-class order statistic across classifiers."""
    m = _as_matrix(m)
    values = fuse(m.scores, OrderStat(rank))
    return FusedScores(values, decide(values))


def combine(m, combiner: CombinerKind) -> FusedScores:
    m = _as_matrix(m)
    values = fuse(m.scores, combiner)
    return FusedScores(values, decide(values))


def parse_combiner(name: str, rank: int | None = None, weights=None) -> CombinerKind:
    """Build a combiner from a short name.

    Accepted names: ``ave``, ``wave`` (needs ``weights``), ``min``, ``max``,
    ``med``/``median`` and ``rank`` (needs ``rank``).
    """
    key = name.lower()
    if key in ("ave", "average", "mean"):
        return Average()
    if key in ("wave", "weighted"):
        if weights is None:
            raise InputError("weighted average needs weights")
        return WeightedAverage(tuple(weights))
    if key in ("min", "max"):
        return OrderStat(key)
    if key in ("med", "median"):
        return OrderStat("median")
    if key == "rank":
        if rank is None:
            raise InputError("rank combiner needs a rank")
        return OrderStat(int(rank))
    raise InputError(f"unknown combiner {name!r}")


def check_combiner(combiner: CombinerKind, n: int) -> None:
    """Validate a combiner against an ensemble of ``n`` classifiers."""
    if isinstance(combiner, WeightedAverage):
        _check_weights(np.asarray(combiner.weights), n)
    elif isinstance(combiner, OrderStat):
        resolve_rank(combiner.rank, n)
