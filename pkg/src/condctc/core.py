"""Vocabulary, sequence types, the collapsing function, and error metrics.

Sequences are plain tuples of token indices. A label sequence lives in the
text domain and never contains the blank index; an alignment path is a
frame-level sequence over the extended vocabulary (blank included) whose
length equals the lattice it was produced from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLANK_ID = 0
BLANK_TOKEN = "-"

LabelSequence = tuple[int, ...]
AlignmentPath = tuple[int, ...]

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Vocabulary:
    """Ordered label set with the blank token fixed at index 0.

    ``tokens`` includes the blank, so ``len(tokens)`` is the extended size
    |V'| = |V| + 1 used by lattices and decoders.
    """

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) < 2:
            raise ValueError("vocabulary needs the blank plus at least one label")
        if self.tokens[0] != BLANK_TOKEN:
            raise ValueError(f"token 0 must be the blank {BLANK_TOKEN!r}")
        if any(not t for t in self.tokens):
            raise ValueError("tokens must be non-empty strings")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("tokens must be unique")

    @classmethod
    def from_labels(cls, labels: list[str] | tuple[str, ...]) -> "Vocabulary":
        """Build a vocabulary from non-blank label strings."""
        return cls((BLANK_TOKEN, *labels))

    @property
    def blank_id(self) -> int:
        return BLANK_ID

    @property
    def size(self) -> int:
        """Extended size |V'| including the blank."""
        return len(self.tokens)

    @property
    def num_labels(self) -> int:
        """Number of real labels |V| (blank excluded)."""
        return len(self.tokens) - 1

    def index(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise ValueError(f"unknown token {token!r}") from None

    def encode(self, tokens: list[str] | str) -> LabelSequence:
        """Map label token strings to indices; blanks are not allowed."""
        if isinstance(tokens, str):
            tokens = tokens.split()
        ids = tuple(self.index(t) for t in tokens)
        if BLANK_ID in ids:
            raise ValueError("label sequences must not contain the blank token")
        return ids

    def decode(self, labels: LabelSequence) -> list[str]:
        """Map label indices back to token strings."""
        check_labels(labels, self.size)
        return [self.tokens[i] for i in labels]


@dataclass(frozen=True)
class PosteriorLattice:
    """Per-frame label distributions: a T x K matrix of probabilities.

    Rows must sum to 1 within 1e-6. The array is frozen after construction,
    so lattices are safe to share across threads.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if probs.ndim != 2:
            raise ValueError(f"lattice must be 2-D, got shape {probs.shape}")
        T, K = probs.shape
        if T < 1 or K < 2:
            raise ValueError(f"lattice needs T >= 1 and K >= 2, got {T}x{K}")
        if np.any(probs < 0.0) or not np.all(np.isfinite(probs)):
            raise ValueError("lattice probabilities must be finite and non-negative")
        row_sums = probs.sum(axis=1)
        bad = np.abs(row_sums - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            t = int(np.argmax(bad))
            raise ValueError(
                f"lattice row {t} sums to {row_sums[t]:.9f}, expected 1 within {ROW_SUM_TOL}"
            )
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def T(self) -> int:
        return self.probs.shape[0]

    @property
    def K(self) -> int:
        return self.probs.shape[1]


def check_labels(labels: LabelSequence, k: int) -> None:
    """Validate a text-domain sequence against extended vocab size ``k``."""
    for idx in labels:
        if not 0 < idx < k:
            raise ValueError(f"label index {idx} outside [1, {k})")


def check_path(path: AlignmentPath, k: int) -> None:
    """Validate a frame-level path against extended vocab size ``k``."""
    for idx in path:
        if not 0 <= idx < k:
            raise ValueError(f"path index {idx} outside [0, {k})")


def collapse(path: AlignmentPath, k: int | None = None) -> LabelSequence:
    """Collapse an alignment path: merge repeated labels, then drop blanks.

    ``k`` optionally enables index validation against an extended vocab size.
    """
    if k is not None:
        check_path(path, k)
    out: list[int] = []
    prev = -1
    for idx in path:
        if idx != prev:
            if idx != BLANK_ID:
                out.append(idx)
            prev = idx
    return tuple(out)


def min_frames(labels: LabelSequence) -> int:
    """Minimum lattice length that can align ``labels``: L plus one frame
    per adjacent repeat (the separating blank)."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def edit_distance(ref: LabelSequence, hyp: LabelSequence) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(ref) < len(hyp):
        ref, hyp = hyp, ref
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i]
        for j, h in enumerate(hyp, start=1):
            if r == h:
                cur.append(prev[j - 1])
            else:
                cur.append(1 + min(prev[j - 1], prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def error_rate(refs: list[LabelSequence], hyps: list[LabelSequence]) -> float:
    """Sum of edit distances over sum of reference lengths.

    Returns 0.0 when both sums are zero (all-empty refs matched exactly).
    """
    if len(refs) != len(hyps):
        raise ValueError(f"got {len(refs)} references but {len(hyps)} hypotheses")
    total_edits = sum(edit_distance(r, h) for r, h in zip(refs, hyps))
    total_len = sum(len(r) for r in refs)
    if total_len == 0:
        return 0.0 if total_edits == 0 else float("inf")
    return total_edits / total_len
