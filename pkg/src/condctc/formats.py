"""On-disk formats: vocab text files, binary matrix files, transcript TSVs.

Binary layout (lattices and feature matrices share it, distinguished by the
4-byte magic): magic, uint32-LE row count, uint32-LE column count, then
row-major float32-LE payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from condctc.core import BLANK_TOKEN, LabelSequence, Vocabulary
from condctc.errors import DataError

LATTICE_MAGIC = b"CTCL"
FEATURE_MAGIC = b"FEAT"

_HEADER = struct.Struct("<4sII")


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    Path(path).write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tokens = [ln for ln in lines if ln != ""]
    if not tokens or tokens[0] != BLANK_TOKEN:
        raise DataError(f"{path}: first vocab line must be {BLANK_TOKEN!r}")
    try:
        return Vocabulary(tuple(tokens))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def save_matrix(matrix: np.ndarray, path: str | Path, magic: bytes = LATTICE_MAGIC) -> None:
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {matrix.shape}")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, rows, cols))
        fh.write(matrix.astype("<f4").tobytes(order="C"))


def load_matrix(path: str | Path, magic: bytes = LATTICE_MAGIC) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    got_magic, rows, cols = _HEADER.unpack_from(raw)
    if got_magic != magic:
        raise DataError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    payload = raw[_HEADER.size:]
    expected = rows * cols * 4
    if len(payload) != expected:
        raise DataError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return data.astype(np.float64)


def save_transcripts(entries: dict[str, LabelSequence], vocab: Vocabulary, path: str | Path) -> None:
    """Write ``id TAB space-joined tokens`` lines, sorted by id."""
    lines = []
    for utt_id in sorted(entries):
        tokens = vocab.decode(entries[utt_id])
        lines.append(f"{utt_id}\t{' '.join(tokens)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_transcripts(path: str | Path, vocab: Vocabulary) -> dict[str, LabelSequence]:
    entries: dict[str, LabelSequence] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'id<TAB>tokens'")
        utt_id, text = parts
        try:
            entries[utt_id] = vocab.encode(text.split()) if text.strip() else ()
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return entries
