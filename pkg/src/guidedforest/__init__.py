"""Decision forests with importance-guided feature selection.

Train ordinary random forests, guided forests whose split gains are
weighted by per-feature importance scores, and their sequential
regularized variants; select the features a guided forest actually uses;
benchmark the resulting models with paired significance tests.
"""

__version__ = "0.1.0"

from .core import (
    ClassCounts,
    ImportanceVector,
    RegWeights,
    compute_lambda,
    gini_gain,
    gini_impurity,
    normalize_importance,
    weighted_gain,
)
from .data import (
    CsvSchema,
    Dataset,
    SyntheticSpec,
    load_csv,
    load_feature_matrix,
    simulate_dataset,
    write_csv,
)
from .evaluate import (
    EvalReport,
    EvalSettings,
    SplitPlan,
    error_rate,
    paired_t_test,
    render_report_text,
    run_benchmark,
    split_train_test,
    write_report_csv,
)
from .forest import (
    Forest,
    ForestConfig,
    build_forest,
    dump_forest,
    feature_set,
    importance,
    load_forest,
    oob_error,
    parse_forest,
    predict,
    remap_forest_features,
    save_forest,
)
from .pipeline import (
    SelectionResult,
    StageSummary,
    grf_fit,
    grf_rf,
    grf_select,
    grrf_fit,
    grrf_rf,
    read_weights_file,
    select_with_custom_weights,
)
from .tree import (
    FlatTree,
    Internal,
    Leaf,
    SplitSpec,
    TreeConfig,
    TreeNode,
    best_split,
    bootstrap_sample,
    build_tree,
    predict_tree,
    sample_features,
)

__all__ = [
    "ClassCounts",
    "ImportanceVector",
    "RegWeights",
    "compute_lambda",
    "gini_gain",
    "gini_impurity",
    "normalize_importance",
    "weighted_gain",
    "CsvSchema",
    "Dataset",
    "SyntheticSpec",
    "load_csv",
    "load_feature_matrix",
    "simulate_dataset",
    "write_csv",
    "EvalReport",
    "EvalSettings",
    "SplitPlan",
    "error_rate",
    "paired_t_test",
    "render_report_text",
    "run_benchmark",
    "split_train_test",
    "write_report_csv",
    "Forest",
    "ForestConfig",
    "build_forest",
    "dump_forest",
    "feature_set",
    "importance",
    "load_forest",
    "oob_error",
    "parse_forest",
    "predict",
    "remap_forest_features",
    "save_forest",
    "SelectionResult",
    "StageSummary",
    "grf_fit",
    "grf_rf",
    "grf_select",
    "grrf_fit",
    "grrf_rf",
    "read_weights_file",
    "select_with_custom_weights",
    "FlatTree",
    "Internal",
    "Leaf",
    "SplitSpec",
    "TreeConfig",
    "TreeNode",
    "best_split",
    "bootstrap_sample",
    "build_tree",
    "predict_tree",
    "sample_features",
]
