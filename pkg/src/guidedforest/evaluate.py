"""Replicated train/test benchmarking with paired significance testing.

Every method in a replicate trains on the identical train split and is
scored on the identical test split; replicates are independent and may
run concurrently, with the report assembled only after all of them have
finished. Significance versus the baseline method uses a two-sided paired
t-test at the 0.05 level.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ClassTooSmallError, GuidedForestError
from .forest import ForestConfig, build_forest, feature_set, predict
from .pipeline import grf_fit, grf_rf, grrf_fit, grrf_rf
from .rng import STREAM_METHOD, STREAM_SPLIT, derive_seed, derived_rng

METHODS = ("rf", "grf", "grf-rf", "rrf", "grrf", "grrf-rf")
_METHOD_IDS = {name: i for i, name in enumerate(METHODS)}

SIGNIFICANCE_LEVEL = 0.05
MARK_HIGHER = "∘"  # method error significantly above baseline
MARK_LOWER = "•"  # method error significantly below baseline


@dataclass(frozen=True)
class SplitPlan:
    """Replicated train/test split protocol."""

    replicate_count: int = 100
    train_fraction: float = 2.0 / 3.0
    stratified: bool = True
    base_seed: int = 0

    def __post_init__(self):
        if self.replicate_count < 1:
            raise ValueError("replicate_count must be at least 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class EvalSettings:
    """Forest hyperparameters shared by every method in a benchmark run."""

    n_trees: int = 1000
    gamma: float = 1.0
    grrf_gamma: float = 0.1
    mtry: int | None = None
    min_leaf_size: int = 1
    max_depth: int | None = None
    rrf_penalty: float = 0.8


def split_train_test(
    data: Dataset,
    plan: SplitPlan,
    replicate_index: int,
    dataset_index: int = 0,
) -> tuple[Dataset, Dataset]:
    """Deterministic train/test partition for one replicate.

    Stratified splits keep each class's train share within one row of
    ``train_fraction`` and guarantee at least one train and one test row
    per class. Row order is preserved within each side.
    """
    if not 0 <= replicate_index < plan.replicate_count:
        raise ValueError(f"replicate_index must lie in [0, {plan.replicate_count})")
    class_sizes = np.bincount(data.labels, minlength=data.n_classes)
    small = np.nonzero((class_sizes > 0) & (class_sizes < 2))[0]
    if small.size:
        raise ClassTooSmallError(
            f"class id {int(small[0])} has {int(class_sizes[small[0]])} row(s); need at least 2"
        )
    rng = derived_rng(plan.base_seed, STREAM_SPLIT, dataset_index, replicate_index)
    frac = plan.train_fraction

    def take_train(count: int) -> int:
        # round half up, but always leave at least one row on each side
        return min(count - 1, max(1, int(math.floor(frac * count + 0.5))))

    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    if plan.stratified:
        for c in range(data.n_classes):
            rows = np.nonzero(data.labels == c)[0]
            if rows.size == 0:
                continue
            perm = rng.permutation(rows)
            k = take_train(rows.size)
            train_idx.append(perm[:k])
            test_idx.append(perm[k:])
    else:
        perm = rng.permutation(data.n_rows)
        k = take_train(data.n_rows)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])

    train_rows = np.sort(np.concatenate(train_idx))
    test_rows = np.sort(np.concatenate(test_idx))
    return data.take(train_rows), data.take(test_rows)


def error_rate(predicted: Sequence[int], actual: Sequence[int]) -> float:
    """Fraction of mismatching labels."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise ValueError("cannot score empty prediction vectors")
    return float(np.mean(predicted != actual))


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_cont_frac(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta, evaluated by
    the modified Lentz method: even and odd coefficients

        d_{2m}   =  m (b - m) x / ((a + 2m - 1)(a + 2m))
        d_{2m+1} = -(a + m)(a + b + m) x / ((a + 2m)(a + 2m + 1))

    are folded in pairwise until the running product stabilizes."""
    max_iter = 300
    eps = 1e-15
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, using the symmetry
    ``I_x(a, b) = 1 - I_{1-x}(b, a)`` to stay in the fast-converging
    region."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_frac(a, b, x) / a
    return 1.0 - front * _beta_cont_frac(b, a, 1.0 - x) / b


def paired_t_test(errors_a: Sequence[float], errors_b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test on the componentwise differences.

    Returns ``(t, p)`` with ``n - 1`` degrees of freedom; the p-value is
    ``I_x(df/2, 1/2)`` at ``x = df / (df + t^2)``. Degenerate inputs use
    fixed conventions: zero variance with zero mean difference gives
    ``(0.0, 1.0)`` (no evidence), zero variance with nonzero mean gives
    ``(+/-inf, 0.0)``.
    """
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError("need at least two paired observations")
    d = a - b
    mean = float(d.mean())
    var = float(np.sum((d - mean) ** 2) / (n - 1))
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / math.sqrt(var / n)
    df = n - 1
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return t, min(max(p, 0.0), 1.0)


@dataclass
class MethodStats:
    """Per-dataset outcome of one method across all replicates."""

    method: str
    errors: np.ndarray
    features_used: np.ndarray
    features_selected: np.ndarray
    seeds: np.ndarray
    t_vs_baseline: float | None = None
    p_vs_baseline: float | None = None
    mark: str = ""

    @property
    def mean_error(self) -> float:
        return float(self.errors.mean())

    @property
    def mean_features_used(self) -> float:
        return float(self.features_used.mean())

    @property
    def mean_features_selected(self) -> float:
        return float(self.features_selected.mean())


@dataclass
class DatasetResult:
    name: str
    n_rows: int
    n_classes: int
    n_features: int
    methods: dict[str, MethodStats] = field(default_factory=dict)
    failure: str | None = None


@dataclass
class EvalReport:
    plan: SplitPlan
    settings: EvalSettings
    methods: list[str]
    baseline: str
    datasets: list[DatasetResult]
    win_lose_tie: dict[str, tuple[int, int, int]]


def _run_method(
    method: str, train: Dataset, test: Dataset, seed: int, s: EvalSettings
) -> tuple[float, int, int]:
    cfg = ForestConfig(
        n_trees=s.n_trees,
        master_seed=seed,
        mtry=s.mtry,
        min_leaf_size=s.min_leaf_size,
        max_depth=s.max_depth,
        rrf_penalty=s.rrf_penalty,
    )
    selection = None
    if method == "rf":
        model = build_forest(train, replace(cfg, mode="rf"), n_workers=1)
    elif method == "rrf":
        model = build_forest(train, replace(cfg, mode="rrf"), n_workers=1)
    elif method == "grf":
        selection, model = grf_fit(train, s.gamma, cfg, n_workers=1)
    elif method == "grf-rf":
        selection, model = grf_rf(train, s.gamma, cfg, n_workers=1)
    elif method == "grrf":
        selection, model = grrf_fit(train, s.grrf_gamma, cfg, n_workers=1)
    elif method == "grrf-rf":
        selection, model = grrf_rf(train, s.grrf_gamma, cfg, n_workers=1)
    else:
        raise ValueError(f"unknown method {method!r}")
    err = error_rate(predict(model, test.values), test.labels)
    used = len(feature_set(model))
    selected = len(selection.selected_features) if selection is not None else used
    return err, used, selected


_BENCH: dict = {}


def _bench_init(datasets, methods, plan, settings):
    _BENCH["datasets"] = datasets
    _BENCH["methods"] = methods
    _BENCH["plan"] = plan
    _BENCH["settings"] = settings


def _bench_task(job: tuple[int, int]):
    d_idx, rep = job
    data = _BENCH["datasets"][d_idx]
    plan: SplitPlan = _BENCH["plan"]
    settings: EvalSettings = _BENCH["settings"]
    train, test = split_train_test(data, plan, rep, dataset_index=d_idx)
    rows = []
    for method in _BENCH["methods"]:
        seed = derive_seed(plan.base_seed, STREAM_METHOD, d_idx, rep, _METHOD_IDS[method])
        err, used, selected = _run_method(method, train, test, seed, settings)
        rows.append((method, err, used, selected, seed))
    return d_idx, rep, rows


def run_benchmark(
    datasets: Sequence[tuple[str, Dataset]],
    methods: Sequence[str],
    plan: SplitPlan = SplitPlan(),
    baseline: str = "grf-rf",
    settings: EvalSettings = EvalSettings(),
    n_workers: int | None = None,
) -> EvalReport:
    """Train and score every method on identical splits of every dataset.

    A dataset whose splits or training raise a domain error is flagged as
    failed in the report without aborting the remaining datasets.
    Replicates are distributed over ``n_workers`` processes; scheduling
    never changes any number in the report.
    """
    if not datasets:
        raise ValueError("need at least one dataset")
    methods = list(dict.fromkeys(methods))  # dedupe, keep order
    if not methods:
        raise ValueError("need at least one method")
    for m in methods:
        if m not in _METHOD_IDS:
            raise ValueError(f"unknown method {m!r}; known: {', '.join(METHODS)}")
    if baseline not in methods:
        raise ValueError(f"baseline {baseline!r} must be one of the methods")

    names = [name for name, _ in datasets]
    data_objs = [d for _, d in datasets]
    results = [
        DatasetResult(name=name, n_rows=d.n_rows, n_classes=d.n_classes, n_features=d.n_features)
        for name, d in datasets
    ]

    jobs = [(d_idx, rep) for d_idx in range(len(datasets)) for rep in range(plan.replicate_count)]
    raw: dict[int, dict[int, list]] = {i: {} for i in range(len(datasets))}
    failed: dict[int, str] = {}

    if n_workers is None:
        n_workers = os.cpu_count() or 1
    n_workers = max(1, min(n_workers, len(jobs)))

    if n_workers == 1:
        _bench_init(data_objs, methods, plan, settings)
        for job in jobs:
            d_idx = job[0]
            if d_idx in failed:
                continue
            try:
                _, rep, rows = _bench_task(job)
            except GuidedForestError as exc:
                failed[d_idx] = str(exc)
                continue
            raw[d_idx][rep] = rows
    else:
        with ProcessPoolExecutor(
            max_workers=n_workers,
            initializer=_bench_init,
            initargs=(data_objs, methods, plan, settings),
        ) as ex:
            futures = {ex.submit(_bench_task, job): job for job in jobs}
            for fut, job in futures.items():
                d_idx = job[0]
                try:
                    _, rep, rows = fut.result()
                except GuidedForestError as exc:
                    failed[d_idx] = str(exc)
                    continue
                raw[d_idx][rep] = rows

    for d_idx, result in enumerate(results):
        if d_idx in failed:
            result.failure = failed[d_idx]
            continue
        per_method: dict[str, dict[str, list]] = {
            m: {"errors": [], "used": [], "selected": [], "seeds": []} for m in methods
        }
        for rep in range(plan.replicate_count):
            for method, err, used, selected, seed in raw[d_idx][rep]:
                per_method[method]["errors"].append(err)
                per_method[method]["used"].append(used)
                per_method[method]["selected"].append(selected)
                per_method[method]["seeds"].append(seed)
        for m in methods:
            result.methods[m] = MethodStats(
                method=m,
                errors=np.asarray(per_method[m]["errors"], dtype=np.float64),
                features_used=np.asarray(per_method[m]["used"], dtype=np.int64),
                features_selected=np.asarray(per_method[m]["selected"], dtype=np.int64),
                seeds=np.asarray(per_method[m]["seeds"], dtype=np.uint64),
            )
        base_stats = result.methods[baseline]
        for m in methods:
            stats = result.methods[m]
            t, p = paired_t_test(stats.errors, base_stats.errors)
            stats.t_vs_baseline = t
            stats.p_vs_baseline = p
            if m != baseline and p < SIGNIFICANCE_LEVEL:
                if stats.mean_error > base_stats.mean_error:
                    stats.mark = MARK_HIGHER
                elif stats.mean_error < base_stats.mean_error:
                    stats.mark = MARK_LOWER

    win_lose_tie = {}
    for m in methods:
        w = l = t_ = 0
        for result in results:
            if result.failure is not None:
                continue
            diff = result.methods[m].mean_error - result.methods[baseline].mean_error
            if diff < 0:
                w += 1
            elif diff > 0:
                l += 1
            else:
                t_ += 1
        win_lose_tie[m] = (w, l, t_)

    return EvalReport(
        plan=plan,
        settings=settings,
        methods=methods,
        baseline=baseline,
        datasets=results,
        win_lose_tie=win_lose_tie,
    )


def _format_table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]


def render_report_text(report: EvalReport) -> str:
    """Aligned plain-text report: an error-rate table with significance
    marks against the baseline, a feature-count table, and the underlying
    t statistics."""
    plan = report.plan
    out: list[str] = []
    out.append(
        f"benchmark over {plan.replicate_count} replicates "
        f"(train fraction {plan.train_fraction:.4g}, "
        f"{'stratified' if plan.stratified else 'unstratified'}, base seed {plan.base_seed})"
    )
    out.append(
        f"baseline: {report.baseline}; marks at the {SIGNIFICANCE_LEVEL} level "
        f"({MARK_HIGHER} higher error than baseline, {MARK_LOWER} lower)"
    )
    out.append("")

    out.append("error rates (mean over replicates)")
    header = ["dataset"] + report.methods
    rows = [header]
    for ds in report.datasets:
        if ds.failure is not None:
            rows.append([ds.name] + [f"failed: {ds.failure}"] + [""] * (len(report.methods) - 1))
            continue
        row = [ds.name]
        for m in report.methods:
            stats = ds.methods[m]
            cell = f"{stats.mean_error:.4f}"
            if m != report.baseline and stats.mark:
                cell += f" {stats.mark}"
            row.append(cell)
        rows.append(row)
    tally = ["win-lose-tie"]
    for m in report.methods:
        if m == report.baseline:
            tally.append("-")
        else:
            w, l, t = report.win_lose_tie[m]
            tally.append(f"{w}-{l}-{t}")
    rows.append(tally)
    out.extend(_format_table(rows))
    out.append("")

    out.append("features used (mean per trained model)")
    rows = [["dataset", "instances", "classes", "features"] + report.methods]
    for ds in report.datasets:
        row = [ds.name, str(ds.n_rows), str(ds.n_classes), str(ds.n_features)]
        if ds.failure is not None:
            row += ["-"] * len(report.methods)
        else:
            row += [f"{ds.methods[m].mean_features_used:.1f}" for m in report.methods]
        rows.append(row)
    out.extend(_format_table(rows))
    out.append("")

    out.append(f"paired t-test vs {report.baseline} (two-sided)")
    rows = [["dataset", "method", "t", "p"]]
    for ds in report.datasets:
        if ds.failure is not None:
            continue
        for m in report.methods:
            if m == report.baseline:
                continue
            stats = ds.methods[m]
            rows.append([ds.name, m, f"{stats.t_vs_baseline:.4f}", f"{stats.p_vs_baseline:.4g}"])
    if len(rows) > 1:
        out.extend(_format_table(rows))
    out.append("")
    return "\n".join(out)


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    """Machine-readable per-replicate rows:
    dataset, method, replicate, error, n_features_used, seed."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "method", "replicate", "error", "n_features_used", "seed"])
        for ds in report.datasets:
            if ds.failure is not None:
                continue
            for m in report.methods:
                stats = ds.methods[m]
                for rep in range(report.plan.replicate_count):
                    writer.writerow(
                        [
                            ds.name,
                            m,
                            rep,
                            repr(float(stats.errors[rep])),
                            int(stats.features_used[rep]),
                            int(stats.seeds[rep]),
                        ]
                    )
