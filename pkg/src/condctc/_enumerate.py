"""Exhaustive alignment-path enumeration backing the brute-force oracles.

Enumeration is deliberately independent of the dynamic-programming code: it
lists every path in V'^T in lexicographic order and groups paths by their
collapsed label sequence. Groupings depend only on (K, T) and are cached.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from condctc.core import LabelSequence, collapse
from condctc.errors import SearchSpaceError

MAX_PATHS = 10_000_000


def check_guard(k: int, t: int) -> None:
    if k**t > MAX_PATHS:
        raise SearchSpaceError(
            f"enumeration of {k}^{t} paths exceeds the {MAX_PATHS} guard"
        )


@lru_cache(maxsize=64)
def all_paths(k: int, t: int) -> np.ndarray:
    """All K^T frame-level paths as an int array, rows in lexicographic order."""
    grids = np.meshgrid(*([np.arange(k, dtype=np.int64)] * t), indexing="ij")
    paths = np.stack(grids, axis=-1).reshape(-1, t)
    paths.flags.writeable = False
    return paths


@lru_cache(maxsize=64)
def paths_by_collapse(k: int, t: int) -> dict[LabelSequence, np.ndarray]:
    """Row indices of ``all_paths(k, t)`` grouped by collapsed sequence."""
    paths = all_paths(k, t)
    groups: dict[LabelSequence, list[int]] = {}
    for i in range(paths.shape[0]):
        key = collapse(tuple(int(v) for v in paths[i]))
        groups.setdefault(key, []).append(i)
    return {y: np.asarray(ix, dtype=np.int64) for y, ix in groups.items()}


def path_products(probs: np.ndarray, paths: np.ndarray) -> np.ndarray:
    """Per-path probability products for every row of ``paths``."""
    t = probs.shape[0]
    return probs[np.arange(t), paths].prod(axis=1)


def path_log_sums(probs: np.ndarray, paths: np.ndarray) -> np.ndarray:
    """Per-path sums of log-probabilities (frames in time order)."""
    t = probs.shape[0]
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    return logp[np.arange(t), paths].sum(axis=1)
