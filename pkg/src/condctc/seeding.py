"""Deterministic RNG streams: one user-facing seed, named sub-streams."""

from __future__ import annotations

import numpy as np

_STREAMS = {
    "task": 0,
    "acoustic": 1,
    "lm": 2,
    "init": 3,
    "train": 4,
}


def stream_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for the named sub-stream of ``seed``.

    Streams are disjoint by construction, so e.g. the LM corpus never
    replays the acoustic corpus transcripts.
    """
    try:
        stream_id = _STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown rng stream {name!r}") from None
    return np.random.default_rng([stream_id, int(seed)])
