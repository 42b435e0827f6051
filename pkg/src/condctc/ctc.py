"""CTC probability computations: path products, label marginals, loss, gradient.

The forward and forward-backward recursions run in log-space over the
blank-interleaved extended target, so sequence lengths in the thousands do
not underflow. Brute-force oracles enumerate every alignment path and are
the reference for all of it at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from condctc import _enumerate, _kernels
from condctc.core import (
    AlignmentPath,
    LabelSequence,
    PosteriorLattice,
    check_labels,
    check_path,
)
from condctc.errors import InfeasibleTargetError


@dataclass(frozen=True)
class CtcLossResult:
    """Negative log-likelihood in nats plus its gradient.

    ``grad`` matches the shape of the input matrix; it is with respect to
    probabilities for ``ctc_loss`` and to logits for ``ctc_loss_logits``.
    """

    loss: float
    grad: np.ndarray


def as_probs(lattice: PosteriorLattice | np.ndarray) -> np.ndarray:
    """Extract the (T, K) probability matrix from a lattice or raw array."""
    if isinstance(lattice, PosteriorLattice):
        return lattice.probs
    probs = np.ascontiguousarray(lattice, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {probs.shape}")
    return probs


def extended_target(target: LabelSequence) -> np.ndarray:
    """Blank-interleaved state labels [-, y1, -, y2, ..., yL, -]."""
    ext = np.zeros(2 * len(target) + 1, dtype=np.int64)
    ext[1::2] = target
    return ext


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax_rows(logits))


def _log_probs(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(probs)


def path_prob(lattice: PosteriorLattice | np.ndarray, path: AlignmentPath) -> float:
    """Probability of one alignment path: the product of its per-frame entries."""
    probs = as_probs(lattice)
    T, K = probs.shape
    if len(path) != T:
        raise ValueError(f"path has {len(path)} frames, lattice has {T}")
    check_path(path, K)
    return float(probs[np.arange(T), np.asarray(path)].prod())


def label_log_prob(lattice: PosteriorLattice | np.ndarray, target: LabelSequence) -> float:
    """Log marginal probability of ``target`` over all alignment paths.

    Returns -inf when the target is unreachable within the available frames.
    """
    probs = as_probs(lattice)
    check_labels(target, probs.shape[1])
    return float(
        _kernels.forward_log_prob(_log_probs(probs), extended_target(target))
    )


def label_prob(lattice: PosteriorLattice | np.ndarray, target: LabelSequence) -> float:
    """Marginal probability of ``target``; 0 when unreachable."""
    return float(np.exp(label_log_prob(lattice, target)))


def brute_force_label_prob(
    lattice: PosteriorLattice | np.ndarray, target: LabelSequence
) -> float:
    """Oracle marginal: enumerate V'^T, filter by collapse, sum path products."""
    probs = as_probs(lattice)
    T, K = probs.shape
    check_labels(target, K)
    _enumerate.check_guard(K, T)
    groups = _enumerate.paths_by_collapse(K, T)
    idx = groups.get(tuple(target))
    if idx is None:
        return 0.0
    paths = _enumerate.all_paths(K, T)[idx]
    return float(_enumerate.path_products(probs, paths).sum())


def ctc_loss(
    lattice: PosteriorLattice | np.ndarray, target: LabelSequence
) -> CtcLossResult:
    """Negative log marginal likelihood with gradient w.r.t. probabilities.

    Raises InfeasibleTargetError when no alignment path exists, so callers
    decide whether to skip or fail the offending utterance.
    """
    probs = as_probs(lattice)
    check_labels(target, probs.shape[1])
    log_p, coeff = _kernels.loss_grad_coeff(_log_probs(probs), extended_target(target))
    if log_p == -np.inf:
        raise InfeasibleTargetError(
            f"target of length {len(target)} unreachable in {probs.shape[0]} frames"
        )
    return CtcLossResult(loss=float(-log_p), grad=-coeff)


def ctc_loss_logits(logits: np.ndarray, target: LabelSequence) -> CtcLossResult:
    """CTC loss on pre-softmax scores with gradient w.r.t. the logits."""
    logits = np.ascontiguousarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError(f"expected (T, K) logits, got shape {logits.shape}")
    check_labels(target, logits.shape[1])
    log_z = log_softmax_rows(logits)
    z = np.exp(log_z)
    log_p, coeff = _kernels.loss_grad_coeff(log_z, extended_target(target))
    if log_p == -np.inf:
        raise InfeasibleTargetError(
            f"target of length {len(target)} unreachable in {logits.shape[0]} frames"
        )
    return CtcLossResult(loss=float(-log_p), grad=z * (1.0 - coeff))


def inter_ctc_loss(
    final: CtcLossResult, inters: list[CtcLossResult], mix_weight: float
) -> float:
    """Mix the final-head loss with the mean of the intermediate-head losses:
    (1 - w) * final + (w / n) * sum(inters)."""
    if not 0.0 < mix_weight < 1.0:
        raise ValueError(f"mix weight must lie in (0, 1), got {mix_weight}")
    if not inters:
        raise ValueError("at least one intermediate loss is required")
    inter_mean = sum(r.loss for r in inters) / len(inters)
    return (1.0 - mix_weight) * final.loss + mix_weight * inter_mean
