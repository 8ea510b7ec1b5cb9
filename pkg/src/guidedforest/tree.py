"""CART-style binary tree induction with weighted-gain split selection.

Trees are grown on a bootstrap sample with a fresh random feature subset
at every node. The split search maximizes ``weight[f] * gain(f)`` where
``gain`` is the Gini impurity decrease; splits whose weighted gain is not
strictly positive are rejected, so a feature with weight 0 can never
appear in a tree.

Determinism contract: a tree is a pure function of (data, config, weights,
used-feature set). Nodes are expanded in depth-first preorder (left child
before right) and the per-tree RNG is consumed in that order, so equal
seeds give structurally identical trees regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit

from .core import ClassCounts, RegWeights
from .data import Dataset
from .errors import FeatureCountMismatchError, MtryExceedsFeaturesError


@dataclass(frozen=True)
class TreeConfig:
    """Per-tree hyperparameters; ``seed`` feeds a dedicated PCG64 stream."""

    mtry: int
    min_leaf_size: int = 1
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mtry < 1:
            raise ValueError("mtry must be at least 1")
        if self.min_leaf_size < 1:
            raise ValueError("min_leaf_size must be at least 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be at least 1 when set")


@dataclass(frozen=True)
class SplitSpec:
    """Axis-aligned split: rows with ``value <= threshold`` go left."""

    feature: int
    threshold: float


@dataclass(frozen=True)
class Leaf:
    class_counts: ClassCounts
    predicted_class: int


@dataclass(frozen=True)
class Internal:
    split: SplitSpec
    gain_recorded: float
    n_node: int
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass
class FlatTree:
    """Array form of a tree in preorder; the representation forests store.

    ``feature[i] < 0`` marks a leaf. ``counts`` rows are populated for
    leaves only. ``pred`` is the leaf majority class (ties to the lowest
    class id), -1 for internal nodes.
    """

    feature: np.ndarray
    threshold: np.ndarray
    gain: np.ndarray
    n_node: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    pred: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def internal_mask(self) -> np.ndarray:
        return self.feature >= 0

    def predict_ids(self, rows: np.ndarray) -> np.ndarray:
        """Leaf class id per row of a 2-d float64 matrix."""
        rows = np.ascontiguousarray(rows, dtype=np.float64)
        return _predict_kernel(
            self.feature, self.threshold, self.left, self.right, self.pred, rows
        )

    def to_tree_node(self) -> TreeNode:
        """Recursive node view. Children follow parents in preorder, so a
        reverse sweep builds every child before its parent."""
        nodes: list[TreeNode | None] = [None] * self.n_nodes
        for i in range(self.n_nodes - 1, -1, -1):
            if self.feature[i] < 0:
                cc = ClassCounts(tuple(int(c) for c in self.counts[i]))
                nodes[i] = Leaf(class_counts=cc, predicted_class=int(self.pred[i]))
            else:
                nodes[i] = Internal(
                    split=SplitSpec(int(self.feature[i]), float(self.threshold[i])),
                    gain_recorded=float(self.gain[i]),
                    n_node=int(self.n_node[i]),
                    left=nodes[int(self.left[i])],
                    right=nodes[int(self.right[i])],
                )
        return nodes[0]


@njit(cache=True)
def _scan_kernel(sub, ynode, parent_counts, lam_eff, min_leaf):  # pragma: no cover
    """Best weighted split over the candidate columns of one node.

    ``sub`` is the (rows x candidate features) value block, columns in
    ascending original-feature order. Thresholds are midpoints between
    consecutive distinct sorted values. The gain is the Gini impurity
    decrease, evaluated as the exact-integer score form
    ``(sum(l^2)/nl + sum(r^2)/nr - sum(p^2)/np) / np``. Ties break to the
    lowest column, then the lowest threshold, via strictly-greater
    comparisons in ascending scan order. Returns (col, threshold,
    weighted_gain, raw_gain); col is -1 when no strictly positive weighted
    gain exists.
    """
    m, k = sub.shape
    n_classes = parent_counts.size
    sum_p2 = 0
    for c in range(n_classes):
        sum_p2 += parent_counts[c] * parent_counts[c]
    score_parent = sum_p2 / m

    best_w = 0.0
    best_col = -1
    best_thr = 0.0
    best_raw = 0.0
    cl = np.zeros(n_classes, np.int64)
    for j in range(k):
        col = sub[:, j]
        order = np.argsort(col)
        for c in range(n_classes):
            cl[c] = 0
        for i in range(m - 1):
            cl[ynode[order[i]]] += 1
            a = col[order[i]]
            b = col[order[i + 1]]
            if a == b:
                continue
            nl = i + 1
            nr = m - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            sum_l2 = 0
            sum_r2 = 0
            for c in range(n_classes):
                lc = cl[c]
                rc = parent_counts[c] - lc
                sum_l2 += lc * lc
                sum_r2 += rc * rc
            g = ((sum_l2 / nl + sum_r2 / nr) - score_parent) / m
            if g < 0.0:
                g = 0.0
            w = lam_eff[j] * g
            if w > best_w:
                best_w = w
                best_col = j
                best_raw = g
                thr = (a + b) / 2.0
                if thr == b:
                    # midpoint rounded up to the larger neighbour; fall back
                    # so that `value <= threshold` splits exactly here
                    thr = a
                best_thr = thr
    return best_col, best_thr, best_w, best_raw


@njit(cache=True)
def _predict_kernel(feature, threshold, left, right, pred, rows):  # pragma: no cover
    n = rows.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if rows[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = pred[node]
    return out


def bootstrap_sample(rng: np.random.Generator, n_rows: int) -> np.ndarray:
    """``n_rows`` row indices drawn uniformly with replacement."""
    if n_rows < 1:
        raise ValueError("n_rows must be at least 1")
    return rng.integers(0, n_rows, size=n_rows)


def sample_features(rng: np.random.Generator, n_features: int, mtry: int) -> np.ndarray:
    """``mtry`` distinct feature indices, uniform without replacement, sorted."""
    if not 1 <= mtry <= n_features:
        raise MtryExceedsFeaturesError(
            f"mtry={mtry} must lie in [1, n_features={n_features}]"
        )
    return np.sort(rng.choice(n_features, size=mtry, replace=False))


def _scan(
    values: np.ndarray,
    labels: np.ndarray,
    rows: np.ndarray,
    parent_counts: np.ndarray,
    feats: np.ndarray,
    lam_eff: np.ndarray,
    min_leaf: int,
) -> Optional[tuple[int, float, float, float]]:
    sub = values[np.ix_(rows, feats)]
    col, thr, wgain, raw = _scan_kernel(
        sub, labels[rows], parent_counts, np.ascontiguousarray(lam_eff), min_leaf
    )
    if col < 0:
        return None
    return int(feats[col]), float(thr), float(wgain), float(raw)


def best_split(
    data: Dataset,
    candidate_features: Sequence[int],
    weights: RegWeights,
    rows: Sequence[int] | None = None,
    min_leaf_size: int = 1,
) -> Optional[tuple[SplitSpec, float]]:
    """Best weighted split of a node, or ``None`` when no usable split exists.

    Enumerates, per candidate feature, all midpoints between consecutive
    distinct sorted values and maximizes ``weights.values[f] * gain``.
    ``None`` is returned for pure nodes, nodes smaller than
    ``2 * min_leaf_size``, and nodes where every weighted gain is <= 0.
    """
    if rows is None:
        row_idx = np.arange(data.n_rows, dtype=np.int64)
    else:
        row_idx = np.asarray(rows, dtype=np.int64)
    if row_idx.size == 0:
        raise ValueError("row subset must be non-empty")
    if len(weights) != data.n_features:
        raise FeatureCountMismatchError(
            f"weights cover {len(weights)} features, dataset has {data.n_features}"
        )
    counts = np.bincount(data.labels[row_idx], minlength=data.n_classes)
    if counts.max() == row_idx.size or row_idx.size < 2 * min_leaf_size:
        return None
    feats = np.unique(np.asarray(list(candidate_features), dtype=np.int64))
    found = _scan(
        data.values, data.labels, row_idx, counts, feats, weights.values[feats], min_leaf_size
    )
    if found is None:
        return None
    f, thr, wgain, _ = found
    return SplitSpec(f, thr), wgain


def _grow_flat(
    values: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    mtry: int,
    min_leaf: int,
    max_depth: int | None,
    lam: np.ndarray,
    used_mask: np.ndarray | None,
    used_set: set[int] | None,
) -> tuple[FlatTree, np.ndarray]:
    """Grow one tree; returns its flat form and the bootstrap row indices.

    When ``used_mask``/``used_set`` are given the build is the sequential
    regularized variant: candidate features already in the shared used set
    keep their full gain, and every feature chosen for a split is added to
    the set immediately (affecting later nodes of this tree and all
    subsequent trees).
    """
    n_rows, n_features = values.shape
    boot = bootstrap_sample(rng, n_rows)

    feature: list[int] = []
    threshold: list[float] = []
    gain: list[float] = []
    n_node: list[int] = []
    left: list[int] = []
    right: list[int] = []
    counts_rows: list[np.ndarray] = []
    pred: list[int] = []

    # work items: (rows, depth, parent index, is right child); children are
    # pushed right-then-left so the pop order is depth-first preorder
    stack: list[tuple[np.ndarray, int, int, bool]] = [(boot, 0, -1, False)]
    while stack:
        rows, depth, parent, is_right = stack.pop()
        idx = len(feature)
        if parent >= 0:
            if is_right:
                right[parent] = idx
            else:
                left[parent] = idx
        m = rows.size
        counts = np.bincount(labels[rows], minlength=n_classes)

        found = None
        depth_ok = max_depth is None or depth < max_depth
        if depth_ok and counts.max() != m and m >= 2 * min_leaf:
            feats = sample_features(rng, n_features, mtry)
            if used_mask is None:
                lam_eff = lam[feats]
            else:
                lam_eff = np.where(used_mask[feats], 1.0, lam[feats])
            found = _scan(values, labels, rows, counts, feats, lam_eff, min_leaf)

        if found is None:
            feature.append(-1)
            threshold.append(0.0)
            gain.append(0.0)
            n_node.append(m)
            left.append(-1)
            right.append(-1)
            counts_rows.append(counts)
            pred.append(int(np.argmax(counts)))
        else:
            f, thr, _, raw = found
            feature.append(f)
            threshold.append(thr)
            gain.append(raw)
            n_node.append(m)
            left.append(-1)
            right.append(-1)
            counts_rows.append(np.zeros(n_classes, dtype=np.int64))
            pred.append(-1)
            if used_set is not None and f not in used_set:
                used_set.add(f)
                used_mask[f] = True
            go_left = values[rows, f] <= thr
            stack.append((rows[~go_left], depth + 1, idx, True))
            stack.append((rows[go_left], depth + 1, idx, False))

    flat = FlatTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        gain=np.array(gain, dtype=np.float64),
        n_node=np.array(n_node, dtype=np.int64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.vstack(counts_rows).astype(np.int64),
        pred=np.array(pred, dtype=np.int64),
    )
    return flat, boot


def build_flat_tree(
    data: Dataset,
    config: TreeConfig,
    weights: RegWeights,
    used_features: set[int] | None = None,
) -> tuple[FlatTree, np.ndarray]:
    """Grow one tree from its own seeded stream; flat form plus bootstrap rows."""
    if config.mtry > data.n_features:
        raise MtryExceedsFeaturesError(
            f"mtry={config.mtry} exceeds n_features={data.n_features}"
        )
    if len(weights) != data.n_features:
        raise FeatureCountMismatchError(
            f"weights cover {len(weights)} features, dataset has {data.n_features}"
        )
    rng = np.random.default_rng(config.seed)
    used_mask = None
    if used_features is not None:
        used_mask = np.zeros(data.n_features, dtype=bool)
        if used_features:
            used_mask[np.fromiter(used_features, dtype=np.int64)] = True
    return _grow_flat(
        data.values,
        data.labels,
        data.n_classes,
        rng,
        config.mtry,
        config.min_leaf_size,
        config.max_depth,
        weights.values,
        used_mask,
        used_features,
    )


def build_tree(
    data: Dataset,
    config: TreeConfig,
    weights: RegWeights,
    used_features: set[int] | None = None,
) -> TreeNode:
    """Bootstrap once at the root, then recursively split on fresh feature
    subsets. Passing ``used_features`` enables the sequential regularized
    mode: the shared set is mutated in place as splits are chosen."""
    flat, _ = build_flat_tree(data, config, weights, used_features)
    return flat.to_tree_node()


def predict_tree(tree: TreeNode, row: Sequence[float]) -> int:
    """Route one row to a leaf; rows go left when ``value <= threshold``."""
    row = np.asarray(row, dtype=np.float64)
    node = tree
    while isinstance(node, Internal):
        f = node.split.feature
        if f >= row.shape[0]:
            raise FeatureCountMismatchError(
                f"row has {row.shape[0]} features, split needs index {f}"
            )
        node = node.left if row[f] <= node.split.threshold else node.right
    return node.predicted_class
