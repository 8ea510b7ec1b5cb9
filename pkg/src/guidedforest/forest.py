"""Forest construction, prediction, importance, and model serialization.

Build modes
-----------
``rf``    independent unweighted trees (every gain weight is 1).
``grf``   independent trees with per-feature gain weights; guidance
          strength 0 degenerates to ``rf`` exactly and the built model is
          canonicalized to mode ``rf``.
``rrf``   sequential trees with a constant penalty for features not yet
          used anywhere in the forest.
``grrf``  sequential trees with importance-derived penalties; features
          already used escape the penalty.

Independent modes distribute trees over a process pool; tree ``t`` always
uses the stream derived from ``(master_seed, t)``, so the result is
identical for any worker count. Sequential modes share one used-feature
set and run on a single worker by contract.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ImportanceVector, RegWeights
from .data import Dataset
from .errors import (
    FeatureCountMismatchError,
    GammaOutOfRangeError,
    MissingWeightsError,
    ModelFormatError,
    MtryExceedsFeaturesError,
)
from .rng import tree_seed
from .tree import FlatTree, TreeConfig, TreeNode, build_flat_tree

MODES = ("rf", "grf", "rrf", "grrf")
_SEQUENTIAL_MODES = ("rrf", "grrf")

_MODEL_MAGIC = "guidedforest-model"
_MODEL_VERSION = "1"


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble hyperparameters.

    ``gamma`` left as ``None`` resolves per mode (grf -> 1.0, grrf -> 0.1,
    otherwise 0.0); ``mtry`` left as ``None`` resolves to
    ``floor(sqrt(n_features))`` at build time. ``rrf_penalty`` is the
    constant gain weight applied to not-yet-used features in ``rrf`` mode.
    """

    n_trees: int = 1000
    mode: str = "rf"
    gamma: float | None = None
    mtry: int | None = None
    master_seed: int = 0
    min_leaf_size: int = 1
    max_depth: int | None = None
    rrf_penalty: float = 0.8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise GammaOutOfRangeError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.rrf_penalty <= 1.0:
            raise ValueError("rrf_penalty must lie in [0, 1]")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")


@dataclass
class Forest:
    """A trained ensemble. Immutable once built; safe to share between workers.

    ``trees`` materializes the recursive node view lazily; prediction and
    importance work on the flat array form directly.
    """

    config: ForestConfig
    weights_used: RegWeights | None
    n_features: int
    n_classes: int
    label_names: tuple[str, ...] | None
    flats: list[FlatTree]
    bootstrap_indices: list[np.ndarray] | None = None
    _tree_cache: tuple[TreeNode, ...] | None = field(default=None, repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.flats)

    @property
    def trees(self) -> tuple[TreeNode, ...]:
        if self._tree_cache is None:
            self._tree_cache = tuple(f.to_tree_node() for f in self.flats)
        return self._tree_cache

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return predict(self, rows)

    def importance(self) -> ImportanceVector:
        return importance(self)

    def feature_set(self) -> tuple[int, ...]:
        return feature_set(self)

    def oob_error(self, data: Dataset) -> float:
        return oob_error(self, data)


def resolve_gamma(config: ForestConfig) -> float:
    """Mode-dependent default guidance strength."""
    if config.gamma is not None:
        return float(config.gamma)
    if config.mode == "grf":
        return 1.0
    if config.mode == "grrf":
        return 0.1
    return 0.0


def resolve_mtry(config: ForestConfig, n_features: int) -> int:
    mtry = config.mtry
    if mtry is None:
        mtry = max(1, int(math.floor(math.sqrt(n_features))))
    if not 1 <= mtry <= n_features:
        raise MtryExceedsFeaturesError(f"mtry={mtry} must lie in [1, {n_features}]")
    return int(mtry)


# module-level worker state so the dataset is shipped once per process
_WORKER: dict = {}


def _pool_init(values, labels, n_classes, mtry, min_leaf, max_depth, lam, master_seed):
    _WORKER["data"] = Dataset(values=values, labels=labels, n_classes=n_classes)
    _WORKER["mtry"] = mtry
    _WORKER["min_leaf"] = min_leaf
    _WORKER["max_depth"] = max_depth
    _WORKER["weights"] = RegWeights(lam, gamma=1.0)
    _WORKER["master_seed"] = master_seed


def _pool_build_range(bounds: tuple[int, int]):
    lo, hi = bounds
    out = []
    for t in range(lo, hi):
        cfg = TreeConfig(
            mtry=_WORKER["mtry"],
            min_leaf_size=_WORKER["min_leaf"],
            max_depth=_WORKER["max_depth"],
            seed=tree_seed(_WORKER["master_seed"], t),
        )
        flat, boot = build_flat_tree(_WORKER["data"], cfg, _WORKER["weights"])
        out.append((flat, boot))
    return out


def build_forest(
    data: Dataset,
    config: ForestConfig,
    weights: RegWeights | None = None,
    n_workers: int | None = None,
) -> Forest:
    """Train an ensemble.

    ``weights`` are required for grf/grrf (except grf with gamma 0, which
    needs none because every weight is 1); rf forces all-ones weights and
    rrf a constant ``config.rrf_penalty``. ``n_workers`` only affects
    scheduling of the independent modes, never the result; sequential
    modes always run on one worker.
    """
    gamma = resolve_gamma(config)
    mode = config.mode
    if mode == "grf" and gamma == 0.0:
        mode = "rf"  # zero guidance strength is exactly an ordinary forest

    if mode == "rf":
        weights = RegWeights.all_ones(data.n_features)
    elif mode == "rrf":
        weights = RegWeights.constant(data.n_features, config.rrf_penalty)
    elif weights is None:
        raise MissingWeightsError(f"mode {mode!r} requires regularization weights")
    if len(weights) != data.n_features:
        raise FeatureCountMismatchError(
            f"weights cover {len(weights)} features, dataset has {data.n_features}"
        )

    mtry = resolve_mtry(config, data.n_features)
    resolved = replace(config, mode=mode, gamma=gamma, mtry=mtry)

    if mode in _SEQUENTIAL_MODES:
        pairs = _build_sequential(data, resolved, weights)
    else:
        pairs = _build_independent(data, resolved, weights, n_workers)

    return Forest(
        config=resolved,
        weights_used=weights,
        n_features=data.n_features,
        n_classes=data.n_classes,
        label_names=data.label_names,
        flats=[p[0] for p in pairs],
        bootstrap_indices=[p[1] for p in pairs],
    )


def _build_sequential(data, config, weights):
    used: set[int] = set()
    pairs = []
    for t in range(config.n_trees):
        cfg = TreeConfig(
            mtry=config.mtry,
            min_leaf_size=config.min_leaf_size,
            max_depth=config.max_depth,
            seed=tree_seed(config.master_seed, t),
        )
        pairs.append(build_flat_tree(data, cfg, weights, used_features=used))
    return pairs


def _build_independent(data, config, weights, n_workers):
    n_trees = config.n_trees
    if n_workers is None:
        n_workers = os.cpu_count() or 1
    n_workers = max(1, min(n_workers, n_trees))

    if n_workers == 1 or n_trees < 8:
        _pool_init(
            data.values, data.labels, data.n_classes,
            config.mtry, config.min_leaf_size, config.max_depth,
            weights.values, config.master_seed,
        )
        return _pool_build_range((0, n_trees))

    chunk = max(1, math.ceil(n_trees / (n_workers * 4)))
    bounds = [(lo, min(lo + chunk, n_trees)) for lo in range(0, n_trees, chunk)]
    initargs = (
        data.values, data.labels, data.n_classes,
        config.mtry, config.min_leaf_size, config.max_depth,
        weights.values, config.master_seed,
    )
    pairs = []
    with ProcessPoolExecutor(max_workers=n_workers, initializer=_pool_init, initargs=initargs) as ex:
        for batch in ex.map(_pool_build_range, bounds):
            pairs.extend(batch)
    return pairs


def predict(forest: Forest, rows: np.ndarray) -> np.ndarray:
    """Majority vote over trees; vote ties go to the lowest class id."""
    rows = np.ascontiguousarray(np.atleast_2d(np.asarray(rows, dtype=np.float64)))
    if rows.shape[1] != forest.n_features:
        raise FeatureCountMismatchError(
            f"rows have {rows.shape[1]} features, model expects {forest.n_features}"
        )
    votes = np.zeros((rows.shape[0], forest.n_classes), dtype=np.int64)
    row_ix = np.arange(rows.shape[0])
    for flat in forest.flats:
        votes[row_ix, flat.predict_ids(rows)] += 1
    return np.argmax(votes, axis=1)


def importance(forest: Forest) -> ImportanceVector:
    """Mean decrease in impurity: per tree, each internal node contributes
    ``(n_node / n_bootstrap_rows) * gain`` to its split feature; summed and
    averaged over trees. Features never split on score 0."""
    raw = np.zeros(forest.n_features, dtype=np.float64)
    for flat in forest.flats:
        mask = flat.internal_mask()
        if not mask.any():
            continue
        root_rows = flat.n_node[0]
        np.add.at(raw, flat.feature[mask], (flat.n_node[mask] / root_rows) * flat.gain[mask])
    raw /= forest.n_trees
    return ImportanceVector(raw)


def feature_set(forest: Forest) -> tuple[int, ...]:
    """Sorted distinct feature indices appearing in any split of any tree."""
    used: set[int] = set()
    for flat in forest.flats:
        mask = flat.internal_mask()
        used.update(int(f) for f in np.unique(flat.feature[mask]))
    return tuple(sorted(used))


def oob_error(forest: Forest, data: Dataset) -> float:
    """Out-of-bag error over rows left out of at least one bootstrap.

    A diagnostic only; nothing in the selection or evaluation paths
    consumes it. Unavailable on deserialized models (bootstrap indices are
    not part of the model file).
    """
    if forest.bootstrap_indices is None:
        raise ValueError("out-of-bag error needs bootstrap indices; this model was loaded from a file")
    if data.n_rows and data.values.shape[1] != forest.n_features:
        raise FeatureCountMismatchError(
            f"rows have {data.values.shape[1]} features, model expects {forest.n_features}"
        )
    votes = np.zeros((data.n_rows, forest.n_classes), dtype=np.int64)
    for flat, boot in zip(forest.flats, forest.bootstrap_indices):
        in_bag = np.zeros(data.n_rows, dtype=bool)
        in_bag[boot] = True
        oob_rows = np.nonzero(~in_bag)[0]
        if oob_rows.size == 0:
            continue
        ids = flat.predict_ids(data.values[oob_rows])
        votes[oob_rows, ids] += 1
    covered = votes.sum(axis=1) > 0
    if not covered.any():
        return float("nan")
    preds = np.argmax(votes[covered], axis=1)
    return float(np.mean(preds != data.labels[covered]))


def remap_forest_features(forest: Forest, column_map: Sequence[int], n_features: int) -> Forest:
    """Rewrite split feature indices through ``column_map`` so a forest
    trained on a column subset predicts directly on full-width rows."""
    cmap = np.asarray(column_map, dtype=np.int64)
    flats = []
    for flat in forest.flats:
        feature = flat.feature.copy()
        mask = flat.internal_mask()
        feature[mask] = cmap[feature[mask]]
        flats.append(
            FlatTree(
                feature=feature,
                threshold=flat.threshold,
                gain=flat.gain,
                n_node=flat.n_node,
                left=flat.left,
                right=flat.right,
                counts=flat.counts,
                pred=flat.pred,
            )
        )
    return Forest(
        config=forest.config,
        weights_used=forest.weights_used,
        n_features=int(n_features),
        n_classes=forest.n_classes,
        label_names=forest.label_names,
        flats=flats,
        bootstrap_indices=forest.bootstrap_indices,
    )


def dump_forest(forest: Forest) -> str:
    """Serialize to the line-oriented text model format.

    Header lines carry mode, seed, gamma, tree/feature/class counts and
    (when known) the original label names. Each tree then lists one node
    per line in preorder: ``I <feature> <threshold> <gain> <n_node>`` for
    internal nodes, ``L <count...>`` for leaves. Floats are rendered with
    ``repr`` so parsing restores them bit-for-bit.
    """
    lines = [
        f"{_MODEL_MAGIC} {_MODEL_VERSION}",
        f"mode {forest.config.mode}",
        f"gamma {forest.config.gamma!r}",
        f"seed {forest.config.master_seed}",
        f"trees {forest.n_trees}",
        f"features {forest.n_features}",
        f"classes {forest.n_classes}",
    ]
    if forest.label_names is not None:
        lines.append("labels " + json.dumps(list(forest.label_names)))
    for t, flat in enumerate(forest.flats):
        lines.append(f"tree {t} {flat.n_nodes}")
        for i in range(flat.n_nodes):
            if flat.feature[i] < 0:
                lines.append("L " + " ".join(str(int(c)) for c in flat.counts[i]))
            else:
                lines.append(
                    f"I {int(flat.feature[i])} {float(flat.threshold[i])!r} "
                    f"{float(flat.gain[i])!r} {int(flat.n_node[i])}"
                )
    return "\n".join(lines) + "\n"


def save_forest(forest: Forest, path: str | Path) -> None:
    Path(path).write_text(dump_forest(forest), encoding="utf-8")


def _parse_header_line(lines: list[str], idx: int, key: str) -> str:
    if idx >= len(lines):
        raise ModelFormatError(f"unexpected end of model file, expected {key!r}")
    parts = lines[idx].split(" ", 1)
    if parts[0] != key or len(parts) != 2:
        raise ModelFormatError(f"line {idx + 1}: expected {key!r} header, got {lines[idx]!r}")
    return parts[1]


def parse_forest(text: str) -> Forest:
    lines = text.splitlines()
    if not lines or lines[0] != f"{_MODEL_MAGIC} {_MODEL_VERSION}":
        raise ModelFormatError("not a guidedforest model file")
    mode = _parse_header_line(lines, 1, "mode")
    if mode not in MODES:
        raise ModelFormatError(f"unknown mode {mode!r}")
    gamma = float(_parse_header_line(lines, 2, "gamma"))
    seed = int(_parse_header_line(lines, 3, "seed"))
    n_trees = int(_parse_header_line(lines, 4, "trees"))
    n_features = int(_parse_header_line(lines, 5, "features"))
    n_classes = int(_parse_header_line(lines, 6, "classes"))
    pos = 7
    label_names = None
    if pos < len(lines) and lines[pos].startswith("labels "):
        label_names = tuple(json.loads(lines[pos][len("labels "):]))
        pos += 1

    flats = []
    for t in range(n_trees):
        head = _parse_header_line(lines, pos, "tree").split()
        if len(head) != 2 or int(head[0]) != t:
            raise ModelFormatError(f"line {pos + 1}: expected tree {t} header")
        n_nodes = int(head[1])
        pos += 1
        feature = np.empty(n_nodes, dtype=np.int64)
        threshold = np.zeros(n_nodes, dtype=np.float64)
        gain = np.zeros(n_nodes, dtype=np.float64)
        n_node = np.zeros(n_nodes, dtype=np.int64)
        left = np.full(n_nodes, -1, dtype=np.int64)
        right = np.full(n_nodes, -1, dtype=np.int64)
        counts = np.zeros((n_nodes, n_classes), dtype=np.int64)
        pred = np.full(n_nodes, -1, dtype=np.int64)
        # parents awaiting children; each new preorder node attaches to the
        # most recent parent that still has an open child slot
        pending: list[list[int]] = []
        for i in range(n_nodes):
            if pos >= len(lines):
                raise ModelFormatError(f"tree {t}: unexpected end of file")
            parts = lines[pos].split()
            pos += 1
            if i > 0:
                if not pending:
                    raise ModelFormatError(f"tree {t}: node {i} has no open parent slot")
                parent, filled = pending[-1]
                if filled == 0:
                    left[parent] = i
                    pending[-1][1] = 1
                else:
                    right[parent] = i
                    pending.pop()
            if parts[0] == "I":
                if len(parts) != 5:
                    raise ModelFormatError(f"line {pos}: malformed internal node record")
                feature[i] = int(parts[1])
                threshold[i] = float(parts[2])
                gain[i] = float(parts[3])
                n_node[i] = int(parts[4])
                pending.append([i, 0])
            elif parts[0] == "L":
                if len(parts) != 1 + n_classes:
                    raise ModelFormatError(
                        f"line {pos}: leaf record needs {n_classes} counts, got {len(parts) - 1}"
                    )
                feature[i] = -1
                counts[i] = [int(c) for c in parts[1:]]
                n_node[i] = counts[i].sum()
                pred[i] = int(np.argmax(counts[i]))
            else:
                raise ModelFormatError(f"line {pos}: unknown node kind {parts[0]!r}")
        if pending:
            raise ModelFormatError(f"tree {t}: {len(pending)} internal nodes are missing children")
        flats.append(
            FlatTree(
                feature=feature, threshold=threshold, gain=gain, n_node=n_node,
                left=left, right=right, counts=counts, pred=pred,
            )
        )
    if pos != len(lines):
        raise ModelFormatError(f"line {pos + 1}: trailing content after last tree")

    config = ForestConfig(
        n_trees=n_trees, mode=mode, gamma=gamma, master_seed=seed,
    )
    return Forest(
        config=config,
        weights_used=None,
        n_features=n_features,
        n_classes=n_classes,
        label_names=label_names,
        flats=flats,
        bootstrap_indices=None,
    )


def load_forest(path: str | Path) -> Forest:
    return parse_forest(Path(path).read_text(encoding="utf-8"))
