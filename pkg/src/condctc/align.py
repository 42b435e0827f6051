"""Viterbi forced alignment of a label sequence onto a posterior lattice.

The alignment is the highest-probability path among all paths that collapse
to the target; ties resolve to the lexicographically smallest path (blanks
as early as possible), which both the DP and the brute-force oracle share.
"""

from __future__ import annotations

import numpy as np

from condctc import _enumerate, _kernels
from condctc.core import (
    AlignmentPath,
    LabelSequence,
    PosteriorLattice,
    check_labels,
    min_frames,
)
from condctc.ctc import as_probs, extended_target, _log_probs
from condctc.errors import InfeasibleTargetError


def viterbi_align(
    target: LabelSequence, lattice: PosteriorLattice | np.ndarray
) -> tuple[AlignmentPath, float]:
    """Best alignment path for ``target`` and its log-probability."""
    probs = as_probs(lattice)
    T, K = probs.shape
    check_labels(target, K)
    if min_frames(target) > T:
        raise InfeasibleTargetError(
            f"target needs at least {min_frames(target)} frames, lattice has {T}"
        )
    ext = extended_target(target)
    score, states = _kernels.viterbi_states(_log_probs(probs), ext)
    if score == -np.inf:
        raise InfeasibleTargetError(
            "no alignment path has positive probability for this target"
        )
    path = tuple(int(ext[s]) for s in states)
    return path, float(score)


def brute_force_align(
    target: LabelSequence, lattice: PosteriorLattice | np.ndarray
) -> tuple[AlignmentPath, float]:
    """Oracle alignment: filter all paths by collapse, take the max.

    Paths are scanned in lexicographic order with a strict comparison, so
    ties land on the lexicographically smallest maximizer, matching
    ``viterbi_align``.
    """
    probs = as_probs(lattice)
    T, K = probs.shape
    check_labels(target, K)
    _enumerate.check_guard(K, T)
    groups = _enumerate.paths_by_collapse(K, T)
    idx = groups.get(tuple(target))
    if idx is None:
        raise InfeasibleTargetError(
            f"no length-{T} path collapses to the target"
        )
    paths = _enumerate.all_paths(K, T)[idx]
    scores = _enumerate.path_log_sums(probs, paths)
    best = int(np.argmax(scores))
    if scores[best] == -np.inf:
        raise InfeasibleTargetError(
            "no alignment path has positive probability for this target"
        )
    return tuple(int(v) for v in paths[best]), float(scores[best])
