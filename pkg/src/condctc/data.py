"""Synthetic sequence-labeling task: Markov-chain transcripts over noisy
prototype features.

Labels are emitted as short runs of a per-label prototype vector plus
Gaussian noise. Designated confusable pairs share nearly identical
prototypes, so frame-level evidence alone cannot separate them; the chain's
sparse successor structure is what makes language modeling and conditioning
informative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from condctc import formats
from condctc.core import LabelSequence, Vocabulary, min_frames
from condctc.errors import DataError
from condctc.seeding import stream_rng

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class TaskSpec:
    """Generator parameters; invariants are checked at construction."""

    vocab_size: int
    input_dim: int
    prototypes: np.ndarray  # (V, input_dim), row i is label i+1
    confusable_pairs: tuple[tuple[int, int], ...]  # 1-based label pairs
    duration_range: tuple[int, int]  # frames per label, inclusive
    noise_sigma: float
    transition: np.ndarray  # (V, V) Markov chain over labels
    length_range: tuple[int, int]  # labels per utterance, inclusive
    seed: int = 0

    def __post_init__(self) -> None:
        v, d = self.vocab_size, self.input_dim
        protos = np.asarray(self.prototypes, dtype=np.float64)
        trans = np.asarray(self.transition, dtype=np.float64)
        if v < 2 or d < 1:
            raise ValueError("need at least 2 labels and 1 feature dimension")
        if protos.shape != (v, d):
            raise ValueError(f"prototypes must be {(v, d)}, got {protos.shape}")
        if trans.shape != (v, v):
            raise ValueError(f"transition must be {(v, v)}, got {trans.shape}")
        if np.any(trans < 0) or np.any(np.abs(trans.sum(axis=1) - 1.0) > _PROB_TOL):
            raise ValueError("transition rows must be distributions")
        d_min, d_max = self.duration_range
        if not 2 <= d_min <= d_max:
            raise ValueError("duration range needs 2 <= d_min <= d_max")
        l_min, l_max = self.length_range
        if not 1 <= l_min <= l_max:
            raise ValueError("length range needs 1 <= l_min <= l_max")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        paired = set()
        for a, b in self.confusable_pairs:
            if not (1 <= a <= v and 1 <= b <= v and a != b):
                raise ValueError(f"bad confusable pair ({a}, {b})")
            paired.add(frozenset((a, b)))
        sigma = self.noise_sigma
        if sigma > 0:
            for a in range(1, v + 1):
                for b in range(a + 1, v + 1):
                    dist = float(np.linalg.norm(protos[a - 1] - protos[b - 1]))
                    if frozenset((a, b)) in paired:
                        if dist >= sigma:
                            raise ValueError(
                                f"confusable pair ({a}, {b}) is {dist:.3f} apart, "
                                f"needs < sigma {sigma}"
                            )
                    elif dist <= 4 * sigma:
                        raise ValueError(
                            f"labels ({a}, {b}) are {dist:.3f} apart, "
                            f"needs > 4*sigma {4 * sigma}"
                        )
        protos.flags.writeable = False
        trans.flags.writeable = False
        object.__setattr__(self, "prototypes", protos)
        object.__setattr__(self, "transition", trans)


def default_task(
    seed: int = 0,
    vocab_size: int = 6,
    input_dim: int = 8,
    confusable_pairs: tuple[tuple[int, int], ...] = ((1, 2), (3, 4)),
    duration_range: tuple[int, int] = (2, 4),
    noise_sigma: float = 0.6,
    length_range: tuple[int, int] = (3, 10),
) -> TaskSpec:
    """Build the standard task for ``seed``.

    Prototype geometry: one orthogonal center per confusable pair plus one
    per unpaired label, scaled so distinct centers sit clearly apart; pair
    members straddle their center along a further orthogonal direction,
    well inside one noise standard deviation. The Markov chain gives every
    label 2-3 likely successors (never itself, and never both members of a
    confusable pair) with zero mass elsewhere, so the preceding label pins
    which pair member is plausible: sequence context genuinely resolves
    what frame acoustics cannot.
    """
    rng = stream_rng(seed, "task")
    n_pairs = len(confusable_pairs)
    n_centers = vocab_size - n_pairs
    if n_centers + 1 > input_dim:
        raise ValueError("input_dim too small for the requested label geometry")

    q, _ = np.linalg.qr(rng.normal(size=(input_dim, input_dim)))
    directions = q.T
    center_scale = 3.2 * noise_sigma if noise_sigma > 0 else 3.0
    centers = directions[:n_centers] * center_scale
    offset_dir = directions[n_centers]
    pair_offset = 0.85 * noise_sigma

    prototypes = np.zeros((vocab_size, input_dim))
    paired_labels = set()
    for i, (a, b) in enumerate(confusable_pairs):
        prototypes[a - 1] = centers[i] + 0.5 * pair_offset * offset_dir
        prototypes[b - 1] = centers[i] - 0.5 * pair_offset * offset_dir
        paired_labels.update((a, b))
    next_center = n_pairs
    for label in range(1, vocab_size + 1):
        if label not in paired_labels:
            prototypes[label - 1] = centers[next_center]
            next_center += 1

    partner = {}
    for a, b in confusable_pairs:
        partner[a - 1] = b - 1
        partner[b - 1] = a - 1
    floor = 0.2
    while True:
        transition = np.zeros((vocab_size, vocab_size))
        for i in range(vocab_size):
            n_succ = int(rng.integers(2, 4))
            candidates = [j for j in range(vocab_size) if j != i]
            rng.shuffle(candidates)
            succs: list[int] = []
            for j in candidates:
                if partner.get(j) in succs:
                    continue
                succs.append(j)
                if len(succs) == n_succ:
                    break
            raw = rng.dirichlet(np.ones(len(succs)))
            transition[i, succs] = floor + raw * (1.0 - floor * len(succs))
        if np.all(transition.sum(axis=0) > 0):  # keep every label reachable
            break

    return TaskSpec(
        vocab_size=vocab_size,
        input_dim=input_dim,
        prototypes=prototypes,
        confusable_pairs=confusable_pairs,
        duration_range=duration_range,
        noise_sigma=noise_sigma,
        transition=transition,
        length_range=length_range,
        seed=seed,
    )


def vocab_for(task: TaskSpec) -> Vocabulary:
    if task.vocab_size > 26:
        raise ValueError("letter vocabulary supports at most 26 labels")
    return Vocabulary.from_labels([chr(ord("a") + i) for i in range(task.vocab_size)])


def _sample_labels(task: TaskSpec, rng: np.random.Generator) -> LabelSequence:
    l_min, l_max = task.length_range
    length = int(rng.integers(l_min, l_max + 1))
    labels = [int(rng.integers(0, task.vocab_size))]
    for _ in range(length - 1):
        labels.append(int(rng.choice(task.vocab_size, p=task.transition[labels[-1]])))
    return tuple(l + 1 for l in labels)


def generate(
    task: TaskSpec, count: int
) -> list[tuple[np.ndarray, LabelSequence]]:
    """Sample (features, transcript) pairs, deterministic per task seed."""
    rng = stream_rng(task.seed, "acoustic")
    d_min, d_max = task.duration_range
    out = []
    for _ in range(count):
        labels = _sample_labels(task, rng)
        blocks = []
        for label in labels:
            dur = int(rng.integers(d_min, d_max + 1))
            noise = rng.normal(0.0, task.noise_sigma, size=(dur, task.input_dim))
            blocks.append(task.prototypes[label - 1] + noise)
        features = np.concatenate(blocks, axis=0)
        assert features.shape[0] >= min_frames(labels)
        out.append((features, labels))
    return out


def lm_corpus(task: TaskSpec, count: int) -> list[LabelSequence]:
    """Transcript-only corpus from an independent seed stream (no overlap
    with the acoustic corpus)."""
    rng = stream_rng(task.seed, "lm")
    return [_sample_labels(task, rng) for _ in range(count)]


def task_to_dict(task: TaskSpec) -> dict:
    return {
        "vocab_size": task.vocab_size,
        "input_dim": task.input_dim,
        "prototypes": task.prototypes.tolist(),
        "confusable_pairs": [list(p) for p in task.confusable_pairs],
        "duration_range": list(task.duration_range),
        "noise_sigma": task.noise_sigma,
        "transition": task.transition.tolist(),
        "length_range": list(task.length_range),
        "seed": task.seed,
    }


def task_from_dict(payload: dict) -> TaskSpec:
    try:
        return TaskSpec(
            vocab_size=int(payload["vocab_size"]),
            input_dim=int(payload["input_dim"]),
            prototypes=np.asarray(payload["prototypes"], dtype=np.float64),
            confusable_pairs=tuple(
                (int(a), int(b)) for a, b in payload["confusable_pairs"]
            ),
            duration_range=tuple(int(v) for v in payload["duration_range"]),
            noise_sigma=float(payload["noise_sigma"]),
            transition=np.asarray(payload["transition"], dtype=np.float64),
            length_range=tuple(int(v) for v in payload["length_range"]),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad task definition: {exc}") from exc


@dataclass
class Dataset:
    """A dataset directory opened for reading."""

    root: Path
    vocab: Vocabulary
    task: TaskSpec
    splits: dict[str, list[str]]
    transcripts: dict[str, LabelSequence]

    def features(self, utt_id: str) -> np.ndarray:
        path = self.root / "features" / f"{utt_id}.bin"
        if not path.exists():
            raise DataError(f"missing feature file {path}")
        return formats.load_matrix(path, magic=formats.FEATURE_MAGIC)


def build_dataset(
    root: str | Path,
    task: TaskSpec,
    n_train: int = 2000,
    n_dev: int = 200,
    n_test: int = 200,
) -> Dataset:
    """Generate and write the on-disk dataset layout under ``root``."""
    root = Path(root)
    (root / "features").mkdir(parents=True, exist_ok=True)
    vocab = vocab_for(task)
    formats.save_vocab(vocab, root / "vocab.txt")

    sizes = {"train": n_train, "dev": n_dev, "test": n_test}
    utts = generate(task, sum(sizes.values()))
    splits: dict[str, list[str]] = {}
    transcripts: dict[str, LabelSequence] = {}
    cursor = 0
    for split, n in sizes.items():
        ids = [f"{split}-{i:04d}" for i in range(n)]
        splits[split] = ids
        for utt_id in ids:
            features, labels = utts[cursor]
            cursor += 1
            transcripts[utt_id] = labels
            formats.save_matrix(
                features, root / "features" / f"{utt_id}.bin", magic=formats.FEATURE_MAGIC
            )
    formats.save_transcripts(transcripts, vocab, root / "transcripts.tsv")
    manifest = {
        "format_version": 1,
        "task": task_to_dict(task),
        "splits": splits,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return Dataset(root=root, vocab=vocab, task=task, splits=splits, transcripts=transcripts)


def load_dataset(root: str | Path) -> Dataset:
    root = Path(root)
    manifest_path = root / "manifest.json"
    missing = [
        str(p)
        for p in (manifest_path, root / "vocab.txt", root / "transcripts.tsv")
        if not p.exists()
    ]
    if missing:
        raise DataError(f"dataset at {root} is missing: {', '.join(missing)}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != 1:
        raise DataError(f"{manifest_path}: unsupported format_version")
    vocab = formats.load_vocab(root / "vocab.txt")
    task = task_from_dict(manifest["task"])
    transcripts = formats.load_transcripts(root / "transcripts.tsv", vocab)
    splits = {k: list(v) for k, v in manifest["splits"].items()}
    return Dataset(root=root, vocab=vocab, task=task, splits=splits, transcripts=transcripts)
