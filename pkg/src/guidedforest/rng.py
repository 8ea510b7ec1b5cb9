"""Deterministic seed derivation.

All randomness in the package flows from 64-bit master seeds through
numpy's ``SeedSequence`` (feeding PCG64). A derived stream is identified
by a tuple of small integer tags used as the ``spawn_key``, so any stage
can be reproduced in isolation from the master seed alone:

* tree ``t`` of a forest          -> ``(STREAM_TREE, t)``
* guide forest of a pipeline      -> ``(STREAM_GUIDE,)``
* selector forest of a pipeline   -> ``(STREAM_SELECTOR,)``
* final restricted forest         -> ``(STREAM_FINAL,)``
* train/test split ``r`` of dataset ``d``     -> ``(STREAM_SPLIT, d, r)``
* method ``m`` training seed for replicate    -> ``(STREAM_METHOD, d, r, m)``

Derived seeds are plain unsigned 64-bit integers, so every log line and
serialized model can state the exact seed that reproduces it.
"""

from __future__ import annotations

import numpy as np

STREAM_TREE = 0
STREAM_GUIDE = 1
STREAM_SELECTOR = 2
STREAM_FINAL = 3
STREAM_SPLIT = 4
STREAM_METHOD = 5


def derive_seed(base_seed: int, *key: int) -> int:
    """Derive a 64-bit child seed from ``base_seed`` and an integer tag tuple."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derived_rng(base_seed: int, *key: int) -> np.random.Generator:
    """A fresh PCG64 generator on the stream named by ``key``."""
    return np.random.default_rng(derive_seed(base_seed, *key))


def tree_seed(master_seed: int, tree_index: int) -> int:
    """Seed for tree ``tree_index``; independent of build scheduling."""
    return derive_seed(master_seed, STREAM_TREE, tree_index)
