"""Count-based n-gram language model with additive smoothing.

Events are label tokens plus a single end-of-sequence event; the blank never
appears. Contexts are padded with a begin marker, so every position of a
sequence conditions on exactly order-1 symbols. Probabilities are
(count + delta) / (context_total + delta * (|V| + 1)), the +1 reserving
smoothing mass for the end event, which keeps every conditional distribution
normalized in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import math

from condctc.core import LabelSequence, Vocabulary, check_labels
from condctc.errors import DataError

BOS_ID = -1
END = -2  # sentinel accepted by score_next for the end-of-sequence event

_BOS_TOKEN = "<s>"

Context = tuple[int, ...]


@dataclass
class NGramModel:
    order: int
    vocab: Vocabulary
    delta: float
    counts: dict[Context, dict[int, int]] = field(default_factory=dict)
    totals: dict[Context, int] = field(default_factory=dict)

    def context_of(self, prefix: LabelSequence) -> Context:
        if self.order == 1:
            return ()
        padded = (BOS_ID,) * (self.order - 1) + tuple(prefix)
        return padded[-(self.order - 1):]


def train_ngram(
    corpus: list[LabelSequence],
    vocab: Vocabulary,
    order: int = 4,
    delta: float = 1.0,
) -> NGramModel:
    """Count n-grams over ``corpus`` with begin padding."""
    if not corpus:
        raise ValueError("training corpus is empty")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if delta <= 0:
        raise ValueError(f"smoothing delta must be > 0, got {delta}")
    model = NGramModel(order=order, vocab=vocab, delta=delta)
    for seq in corpus:
        check_labels(seq, vocab.size)
        for i, tok in enumerate(seq):
            ctx = model.context_of(seq[:i])
            table = model.counts.setdefault(ctx, {})
            table[tok] = table.get(tok, 0) + 1
            model.totals[ctx] = model.totals.get(ctx, 0) + 1
    return model


def score_next(model: NGramModel, prefix: LabelSequence, token: int) -> float:
    """Log conditional probability of ``token`` (or END) after ``prefix``."""
    if token == END:
        count = 0
    elif 0 < token < model.vocab.size:
        ctx = model.context_of(prefix)
        count = model.counts.get(ctx, {}).get(token, 0)
    else:
        raise ValueError(f"token {token} not in vocabulary (and not END)")
    ctx = model.context_of(prefix)
    total = model.totals.get(ctx, 0)
    denom = total + model.delta * (model.vocab.num_labels + 1)
    return math.log((count + model.delta) / denom)


def sequence_logprob(
    model: NGramModel, labels: LabelSequence, include_end: bool = False
) -> float:
    """Chain-rule log-probability of a full sequence (optionally with END)."""
    total = 0.0
    for i, tok in enumerate(labels):
        total += score_next(model, labels[:i], tok)
    if include_end:
        total += score_next(model, labels, END)
    return total


def save_lm(model: NGramModel, path: str | Path) -> None:
    """Serialize to the versioned text format with sorted contexts."""
    for tok in model.vocab.tokens:
        if ":" in tok or any(c.isspace() for c in tok):
            raise ValueError(f"token {tok!r} cannot be serialized")

    def fmt(idx: int) -> str:
        return _BOS_TOKEN if idx == BOS_ID else model.vocab.tokens[idx]

    lines = [f"NGRAM v1 order={model.order} delta={model.delta!r}"]
    for ctx in sorted(model.counts):
        table = model.counts[ctx]
        pairs = " ".join(f"{fmt(tok)}:{table[tok]}" for tok in sorted(table))
        lines.append(f"{' '.join(fmt(i) for i in ctx)}\t{pairs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_lm(path: str | Path, vocab: Vocabulary) -> NGramModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty LM file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "NGRAM" or header[1] != "v1":
        raise DataError(f"{path}: bad header {lines[0]!r}")
    try:
        order = int(header[2].removeprefix("order="))
        delta = float(header[3].removeprefix("delta="))
    except ValueError as exc:
        raise DataError(f"{path}: bad header {lines[0]!r}") from exc

    def parse_tok(text: str) -> int:
        if text == _BOS_TOKEN:
            return BOS_ID
        try:
            return vocab.index(text)
        except ValueError as exc:
            raise DataError(f"{path}: unknown token {text!r}") from exc

    model = NGramModel(order=order, vocab=vocab, delta=delta)
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        ctx_text, _, pairs_text = line.partition("\t")
        ctx = tuple(parse_tok(t) for t in ctx_text.split())
        table: dict[int, int] = {}
        for pair in pairs_text.split():
            tok_text, _, count_text = pair.rpartition(":")
            try:
                table[parse_tok(tok_text)] = int(count_text)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad pair {pair!r}") from exc
        model.counts[ctx] = table
        model.totals[ctx] = sum(table.values())
    return model
