"""Impurity, gain, and importance-weighting primitives.

Everything here is a pure function of immutable inputs and safe to call
from any number of concurrent workers. All arithmetic is 64-bit floating
point; class counts are exact integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    AllZeroImportanceError,
    ChildCountsMismatchError,
    GammaOutOfRangeError,
    WeightOutOfRangeError,
)


@dataclass(frozen=True)
class ClassCounts:
    """Per-class sample counts at a tree node, indexed by class id."""

    counts: tuple[int, ...]
    total: int = field(init=False)

    def __post_init__(self):
        if len(self.counts) < 1:
            raise ValueError("at least one class is required")
        if any(c < 0 for c in self.counts):
            raise ValueError("class counts must be non-negative")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "total", int(sum(self.counts)))

    @classmethod
    def from_labels(cls, labels: Sequence[int], n_classes: int) -> "ClassCounts":
        counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes)
        return cls(tuple(int(c) for c in counts))


@dataclass(frozen=True)
class ImportanceVector:
    """Per-feature mean-decrease-in-impurity scores from a forest.

    ``raw[i]`` is the accumulated node-size-weighted gain of feature ``i``
    averaged over trees; ``max_raw`` is the largest entry and the
    denominator of the normalized form.
    """

    raw: np.ndarray
    max_raw: float = field(init=False)

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=np.float64)
        if raw.ndim != 1 or raw.size == 0:
            raise ValueError("importance must be a non-empty 1-d vector")
        if np.any(raw < 0) or not np.all(np.isfinite(raw)):
            raise ValueError("importance scores must be finite and non-negative")
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "max_raw", float(raw.max()))

    def __len__(self) -> int:
        return int(self.raw.size)


@dataclass(frozen=True)
class RegWeights:
    """Per-feature gain multipliers in [0, 1].

    ``gamma`` records the guidance strength the weights were derived with;
    weights supplied directly (custom files, constant penalties) carry
    ``gamma = 1.0`` by convention.
    """

    values: np.ndarray
    gamma: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("weights must be a non-empty 1-d vector")
        if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
            raise WeightOutOfRangeError("per-feature weights must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise GammaOutOfRangeError(f"gamma must lie in [0, 1], got {self.gamma}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    @classmethod
    def all_ones(cls, n_features: int) -> "RegWeights":
        return cls(np.ones(n_features), gamma=0.0)

    @classmethod
    def constant(cls, n_features: int, value: float) -> "RegWeights":
        return cls(np.full(n_features, float(value)), gamma=1.0)


def gini_impurity(counts: ClassCounts) -> float:
    """Gini impurity ``1 - sum_c p_c^2`` of a node; 0.0 for an empty node."""
    total = counts.total
    if total == 0:
        return 0.0
    acc = 0.0
    for c in counts.counts:
        p = c / total
        acc += p * p
    return 1.0 - acc


def gini_gain(parent: ClassCounts, left: ClassCounts, right: ClassCounts) -> float:
    """Impurity decrease of splitting ``parent`` into ``left``/``right``:
    ``impurity(parent) - (nl/np) impurity(left) - (nr/np) impurity(right)``.

    Children must sum componentwise to the parent. The value is evaluated
    in the algebraically equal form
    ``(sum(l^2)/nl + sum(r^2)/nr - sum(p^2)/np) / np`` whose integer sums
    are exact, so swapping the children never changes the result and
    distribution-preserving splits of small nodes come out exactly 0.
    Rounding residue below 0 is clamped to 0.
    """
    if len(left.counts) != len(parent.counts) or len(right.counts) != len(parent.counts):
        raise ChildCountsMismatchError("child count vectors must have the parent's class count")
    for p, l, r in zip(parent.counts, left.counts, right.counts):
        if l + r != p:
            raise ChildCountsMismatchError(
                f"children sum to {tuple(a + b for a, b in zip(left.counts, right.counts))}, "
                f"parent is {parent.counts}"
            )
    n_parent = parent.total
    score_left = sum(c * c for c in left.counts) / left.total if left.total else 0.0
    score_right = sum(c * c for c in right.counts) / right.total if right.total else 0.0
    score_parent = sum(c * c for c in parent.counts) / n_parent
    gain = ((score_left + score_right) - score_parent) / n_parent
    if gain < 0.0:
        gain = 0.0
    return gain


def normalize_importance(imp: ImportanceVector) -> np.ndarray:
    """Importance scores divided by the maximum score; the max maps to 1.

    Raises :class:`AllZeroImportanceError` when every score is zero (a
    degenerate guide forest) rather than dividing by zero.
    """
    if imp.max_raw == 0.0:
        raise AllZeroImportanceError("all importance scores are zero")
    return imp.raw / imp.max_raw


def compute_lambda(normalized_imp: Sequence[float], gamma: float) -> RegWeights:
    """Per-feature weights ``(1 - gamma) + gamma * normalized_importance``.

    ``gamma`` in [0, 1] controls how strongly low-importance features are
    penalized: 0 leaves every weight at 1 (plain random forest), 1 makes
    the weight equal to the normalized importance itself.
    """
    if not 0.0 <= gamma <= 1.0:
        raise GammaOutOfRangeError(f"gamma must lie in [0, 1], got {gamma}")
    norm = np.asarray(normalized_imp, dtype=np.float64)
    if np.any(norm < 0.0) or np.any(norm > 1.0):
        raise ValueError("normalized importance entries must lie in [0, 1]")
    return RegWeights((1.0 - gamma) + gamma * norm, gamma=float(gamma))


def weighted_gain(weight: float, gain: float) -> float:
    """Gain scaled by a per-feature weight."""
    return weight * gain
