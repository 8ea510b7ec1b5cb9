import numpy as np
import pytest

from guidedforest import Dataset, SyntheticSpec, simulate_dataset


def make_dataset(values, labels, n_classes=None, **kw) -> Dataset:
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = max(2, int(labels.max()) + 1)
    return Dataset(values=np.asarray(values, dtype=np.float64), labels=labels,
                   n_classes=n_classes, **kw)


def small_synthetic(seed: int, n_rows: int = 250, n_features: int = 60) -> Dataset:
    """Reduced-scale variant of the 500x500 synthetic spec (same relevant
    feature indices) for tests where the full protocol would be too slow;
    the acceptance suite runs the pinned full-scale versions."""
    return simulate_dataset(
        SyntheticSpec(n_rows=n_rows, n_features=n_features, relevant_features=(0, 20), seed=seed)
    )


@pytest.fixture
def tiny_dataset() -> Dataset:
    """12 rows, 4 features; feature 1 carries the class, the rest are noise."""
    rng = np.random.default_rng(42)
    values = rng.uniform(-1.0, 1.0, size=(12, 4))
    labels = (values[:, 1] > 0.0).astype(np.int64)
    labels[0] = 1 - labels[0]  # one flipped row so the data is not separable
    return make_dataset(values, labels)


@pytest.fixture
def easy_dataset() -> Dataset:
    """80 rows, 10 features, two informative columns."""
    return simulate_dataset(
        SyntheticSpec(n_rows=80, n_features=10, relevant_features=(0, 3), seed=7)
    )
