"""Text-domain search over a posterior lattice.

Greedy best-path, CTC prefix beam search with optional shallow LM fusion,
and an exhaustive enumeration oracle. Rankings share one scoring rule,
log p_ctc + lm_weight * log p_lm + length_bonus * |Y|, and one tie-break
(lower token index first, then shorter prefix), so beam and oracle results
are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from condctc import _enumerate
from condctc.core import (
    AlignmentPath,
    LabelSequence,
    PosteriorLattice,
    collapse,
)
from condctc.lm import NGramModel, score_next, sequence_logprob

NEG_INF = -math.inf


@dataclass(frozen=True)
class BeamConfig:
    """Search knobs: beam width, fusion weights, optional pruning floor.

    ``prune_threshold`` (a negative log value) drops, at every frame, the
    hypotheses scoring more than that far below the frame's best one; None
    disables timestep-level pruning.
    """

    width: int = 8
    lm_weight: float = 0.3
    length_bonus: float = 0.3
    prune_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError(f"beam width must be >= 1, got {self.width}")
        if self.lm_weight < 0:
            raise ValueError(f"lm weight must be >= 0, got {self.lm_weight}")


@dataclass
class Hypothesis:
    """A collapsed prefix with its blank/non-blank probability split."""

    prefix: LabelSequence
    log_p_blank: float
    log_p_nonblank: float
    score: float = NEG_INF

    @property
    def total(self) -> float:
        return _lse(self.log_p_blank, self.log_p_nonblank)


def _lse(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + math.log1p(math.exp(b - a))


def best_path_decode(
    lattice: PosteriorLattice,
) -> tuple[LabelSequence, AlignmentPath]:
    """Per-frame argmax path and its collapse; ties pick the lowest index."""
    path = tuple(int(k) for k in np.argmax(lattice.probs, axis=1))
    return collapse(path), path


def _check_lm(lattice: PosteriorLattice, lm: NGramModel | None) -> None:
    if lm is not None and lm.vocab.size != lattice.K:
        raise ValueError(
            f"LM vocabulary size {lm.vocab.size} does not match lattice K={lattice.K}"
        )


def prefix_beam_search(
    lattice: PosteriorLattice,
    lm: NGramModel | None = None,
    cfg: BeamConfig = BeamConfig(),
) -> list[tuple[LabelSequence, float]]:
    """CTC prefix beam search, optionally fused with an n-gram LM.

    Each live prefix keeps separate mass for "ends in blank" and "ends in
    its last label"; LM scores accumulate incrementally whenever a prefix
    grows by one label. Returns the top ``cfg.width`` prefixes with their
    fused scores, best first.
    """
    _check_lm(lattice, lm)
    probs = lattice.probs
    T, K = probs.shape
    use_lm = lm is not None and cfg.lm_weight > 0
    lm_scores: dict[LabelSequence, float] = {(): 0.0}

    def fused(prefix: LabelSequence, total_ctc: float) -> float:
        score = total_ctc + cfg.length_bonus * len(prefix)
        if use_lm:
            score += cfg.lm_weight * lm_scores[prefix]
        return score

    beam: dict[LabelSequence, list[float]] = {(): [0.0, NEG_INF]}
    for t in range(T):
        with np.errstate(divide="ignore"):
            logz = np.log(probs[t])
        step: dict[LabelSequence, list[float]] = {}

        def bucket(prefix: LabelSequence) -> list[float]:
            entry = step.get(prefix)
            if entry is None:
                entry = [NEG_INF, NEG_INF]
                step[prefix] = entry
                if use_lm and prefix not in lm_scores:
                    parent = prefix[:-1]
                    lm_scores[prefix] = lm_scores[parent] + score_next(
                        lm, parent, prefix[-1]
                    )
            return entry

        for prefix, (pb, pnb) in beam.items():
            total = _lse(pb, pnb)
            lz_blank = float(logz[0])
            if total > NEG_INF and lz_blank > NEG_INF:
                entry = bucket(prefix)
                entry[0] = _lse(entry[0], total + lz_blank)
            last = prefix[-1] if prefix else -1
            for c in range(1, K):
                lz = float(logz[c])
                if lz == NEG_INF:
                    continue
                if c == last:
                    if pnb > NEG_INF:  # extends the current run, prefix unchanged
                        entry = bucket(prefix)
                        entry[1] = _lse(entry[1], pnb + lz)
                    if pb > NEG_INF:  # repeat after a blank starts a new label
                        entry = bucket(prefix + (c,))
                        entry[1] = _lse(entry[1], pb + lz)
                else:
                    if total > NEG_INF:
                        entry = bucket(prefix + (c,))
                        entry[1] = _lse(entry[1], total + lz)

        ranked = sorted(
            step.items(),
            key=lambda kv: (-fused(kv[0], _lse(kv[1][0], kv[1][1])), kv[0]),
        )
        if cfg.prune_threshold is not None and ranked:
            floor = fused(ranked[0][0], _lse(*ranked[0][1])) + cfg.prune_threshold
            ranked = [kv for kv in ranked if fused(kv[0], _lse(*kv[1])) >= floor]
        beam = dict(ranked[: cfg.width])

    results = [
        Hypothesis(prefix, pb, pnb, fused(prefix, _lse(pb, pnb)))
        for prefix, (pb, pnb) in beam.items()
    ]
    results.sort(key=lambda h: (-h.score, h.prefix))
    return [(h.prefix, h.score) for h in results]


def exhaustive_search(
    lattice: PosteriorLattice,
    lm: NGramModel | None = None,
    lm_weight: float = 0.0,
    length_bonus: float = 0.0,
) -> list[tuple[LabelSequence, float]]:
    """Oracle ranking: enumerate all paths, marginalize exactly per collapsed
    sequence, then apply the same fusion score as the beam search."""
    _check_lm(lattice, lm)
    probs = lattice.probs
    T, K = probs.shape
    _enumerate.check_guard(K, T)
    paths = _enumerate.all_paths(K, T)
    products = _enumerate.path_products(probs, paths)
    scored: list[tuple[LabelSequence, float]] = []
    for labels, idx in _enumerate.paths_by_collapse(K, T).items():
        p = float(products[idx].sum())
        if p <= 0.0:
            continue
        score = math.log(p) + length_bonus * len(labels)
        if lm is not None and lm_weight > 0:
            score += lm_weight * sequence_logprob(lm, labels)
        scored.append((labels, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored
