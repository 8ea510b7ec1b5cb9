"""End-to-end feature selection: guide forest -> weights -> guided forest.

The standard flow trains an ordinary forest on the full data, normalizes
its importance scores by their maximum, turns them into per-feature gain
weights, trains a guided forest with those weights, and reports the set
of features that forest actually used. ``*_rf`` variants then retrain a
plain forest on the selected columns.

Each stage draws its seed from the master seed on its own named stream
(guide / selector / final), so any stage can be reproduced in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import ImportanceVector, RegWeights, compute_lambda, normalize_importance
from .data import Dataset
from .errors import (
    AllZeroImportanceError,
    EmptySelectionError,
    WeightLengthMismatchError,
    WeightOutOfRangeError,
)
from .forest import Forest, ForestConfig, build_forest, feature_set, importance, remap_forest_features
from .rng import STREAM_FINAL, STREAM_GUIDE, STREAM_SELECTOR, derive_seed


@dataclass(frozen=True)
class StageSummary:
    """Reproducibility metadata for one forest of a pipeline run."""

    mode: str
    seed: int
    n_trees: int
    gamma: float | None = None


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of a selection run.

    ``selected_features`` is the sorted set of features the selector
    forest split on; ``guide_importance`` is ``None`` when the weights were
    supplied directly instead of derived from a guide forest.
    """

    selected_features: tuple[int, ...]
    guide_importance: ImportanceVector | None
    weights: RegWeights
    guide_summary: StageSummary | None
    selector_summary: StageSummary


def _guided_fit(
    data: Dataset,
    gamma: float,
    config: ForestConfig,
    sequential: bool,
    n_workers: int | None,
) -> tuple[SelectionResult, Forest]:
    master = config.master_seed
    guide_seed = derive_seed(master, STREAM_GUIDE)
    guide_cfg = replace(config, mode="rf", gamma=None, master_seed=guide_seed)
    guide = build_forest(data, guide_cfg, n_workers=n_workers)

    imp = importance(guide)
    if imp.max_raw == 0.0:
        raise AllZeroImportanceError(
            "guide forest produced all-zero importance scores; "
            "increase n_trees so at least one split is found"
        )
    weights = compute_lambda(normalize_importance(imp), gamma)

    selector_seed = derive_seed(master, STREAM_SELECTOR)
    mode = "grrf" if sequential else "grf"
    sel_cfg = replace(config, mode=mode, gamma=gamma, master_seed=selector_seed)
    selector = build_forest(data, sel_cfg, weights=weights, n_workers=n_workers)

    result = SelectionResult(
        selected_features=feature_set(selector),
        guide_importance=imp,
        weights=weights,
        guide_summary=StageSummary("rf", guide_seed, guide.config.n_trees),
        selector_summary=StageSummary(
            selector.config.mode, selector_seed, selector.config.n_trees, selector.config.gamma
        ),
    )
    return result, selector


def grf_fit(
    data: Dataset,
    gamma: float = 1.0,
    config: ForestConfig = ForestConfig(),
    n_workers: int | None = None,
) -> tuple[SelectionResult, Forest]:
    """Run guided selection and also return the guided forest itself."""
    return _guided_fit(data, gamma, config, sequential=False, n_workers=n_workers)


def grf_select(
    data: Dataset,
    gamma: float = 1.0,
    config: ForestConfig = ForestConfig(),
    n_workers: int | None = None,
) -> SelectionResult:
    """Guide forest -> normalized importance -> weights -> guided forest ->
    the set of features it used."""
    result, _ = grf_fit(data, gamma, config, n_workers)
    return result


def grrf_fit(
    data: Dataset,
    gamma: float = 0.1,
    config: ForestConfig = ForestConfig(),
    n_workers: int | None = None,
) -> tuple[SelectionResult, Forest]:
    """Sequential-regularized analogue of :func:`grf_fit`."""
    return _guided_fit(data, gamma, config, sequential=True, n_workers=n_workers)


def _final_rf(
    data: Dataset,
    selected: tuple[int, ...],
    config: ForestConfig,
    n_workers: int | None,
) -> Forest:
    if not selected:
        raise EmptySelectionError("selection is empty; refusing to train a final forest")
    reduced = data.select_features(selected)
    final_seed = derive_seed(config.master_seed, STREAM_FINAL)
    # mtry is recomputed from the reduced width, as a fresh training run
    # on the restricted matrix would do
    final_cfg = replace(config, mode="rf", gamma=None, mtry=None, master_seed=final_seed)
    forest = build_forest(reduced, final_cfg, n_workers=n_workers)
    return remap_forest_features(forest, selected, data.n_features)


def grf_rf(
    data: Dataset,
    gamma: float = 1.0,
    config: ForestConfig = ForestConfig(),
    n_workers: int | None = None,
) -> tuple[SelectionResult, Forest]:
    """Guided selection, then a plain forest retrained on the selected
    columns. The returned forest predicts on full-width rows; its splits
    are remapped to original feature indices."""
    result, _ = grf_fit(data, gamma, config, n_workers)
    return result, _final_rf(data, result.selected_features, config, n_workers)


def grrf_rf(
    data: Dataset,
    gamma: float = 0.1,
    config: ForestConfig = ForestConfig(),
    n_workers: int | None = None,
) -> tuple[SelectionResult, Forest]:
    """Sequential-regularized selection, then a plain forest on the subset."""
    result, _ = grrf_fit(data, gamma, config, n_workers)
    return result, _final_rf(data, result.selected_features, config, n_workers)


def select_with_custom_weights(
    data: Dataset,
    weights: RegWeights,
    config: ForestConfig = ForestConfig(),
    n_workers: int | None = None,
) -> SelectionResult:
    """Build the guided forest directly from supplied weights, skipping the
    guide stage. Uses the same selector-stream seed as the guided flow, so
    all-ones weights reproduce a plain forest's feature set exactly."""
    if len(weights) != data.n_features:
        raise WeightLengthMismatchError(
            f"{len(weights)} weights for {data.n_features} features"
        )
    selector_seed = derive_seed(config.master_seed, STREAM_SELECTOR)
    sel_cfg = replace(config, mode="grf", gamma=weights.gamma, master_seed=selector_seed)
    selector = build_forest(data, sel_cfg, weights=weights, n_workers=n_workers)
    return SelectionResult(
        selected_features=feature_set(selector),
        guide_importance=None,
        weights=weights,
        guide_summary=None,
        selector_summary=StageSummary(
            selector.config.mode, selector_seed, selector.config.n_trees, selector.config.gamma
        ),
    )


def read_weights_file(path: str | Path, n_features: int | None = None) -> RegWeights:
    """Read a per-feature weight file: one real in [0, 1] per line, ordered
    by feature index. Blank lines are ignored."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        text = line.strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            raise WeightOutOfRangeError(
                f"{path}: line {lineno}: {text!r} is not a number"
            ) from None
        if not 0.0 <= v <= 1.0:
            raise WeightOutOfRangeError(f"{path}: line {lineno}: {v} is outside [0, 1]")
        entries.append(v)
    if n_features is not None and len(entries) != n_features:
        raise WeightLengthMismatchError(
            f"{path}: {len(entries)} weights for {n_features} features"
        )
    return RegWeights(np.asarray(entries, dtype=np.float64), gamma=1.0)
