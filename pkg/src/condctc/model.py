"""Toy layered encoder with intermediate heads and conditioning.

Each layer applies a linear map over a (2r+1)-frame context window, a tanh,
and a residual connection, so sequence length is preserved end to end. At
every conditioning layer the current representation is projected to a label
posterior; a conditioning feature derived from that posterior (its expected
label embedding, or the embedding of a committed alignment path) is added
back to the representation before the next layer.

The back-projection matrix doubles as the label embedding table (column k
embeds label k), so a model trained with expectation conditioning runs
unchanged under best-path, searched, oracle, or multi-pass conditioning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from condctc.align import viterbi_align
from condctc.core import (
    AlignmentPath,
    LabelSequence,
    PosteriorLattice,
    Vocabulary,
    collapse,
)
from condctc.ctc import softmax_rows
from condctc.decode import BeamConfig, best_path_decode, prefix_beam_search
from condctc.errors import DataError, InfeasibleTargetError, NumericError
from condctc.lm import NGramModel
from condctc.seeding import stream_rng

MODEL_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    vocab_size: int  # extended size |V'|, blank included
    dim: int = 16
    num_layers: int = 6
    context_radius: int = 2
    cond_layers: tuple[int, ...] = (2, 4)
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.input_dim, self.dim, self.num_layers) < 1:
            raise ValueError("dimensions and layer count must be positive")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must include blank plus labels")
        if self.context_radius < 0:
            raise ValueError("context radius must be >= 0")
        layers = tuple(self.cond_layers)
        if len(set(layers)) != len(layers) or list(layers) != sorted(layers):
            raise ValueError("conditioning layers must be sorted and unique")
        if any(not 1 <= n < self.num_layers for n in layers):
            raise ValueError(
                "conditioning layers must lie strictly inside 1..num_layers-1"
            )
        object.__setattr__(self, "cond_layers", layers)


def _param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    window = cfg.dim * (2 * cfg.context_radius + 1)
    shapes: dict[str, tuple[int, ...]] = {
        "input.w": (cfg.dim, cfg.input_dim),
        "input.b": (cfg.dim,),
        "head_final.w": (cfg.vocab_size, cfg.dim),
        "head_final.b": (cfg.vocab_size,),
    }
    for l in range(1, cfg.num_layers + 1):
        shapes[f"layer{l}.w"] = (cfg.dim, window)
        shapes[f"layer{l}.b"] = (cfg.dim,)
    for n in cfg.cond_layers:
        shapes[f"head{n}.w"] = (cfg.vocab_size, cfg.dim)
        shapes[f"head{n}.b"] = (cfg.vocab_size,)
        shapes[f"cond{n}.w"] = (cfg.dim, cfg.vocab_size)
    return shapes


@dataclass
class EncoderModel:
    config: ModelConfig
    vocab: Vocabulary
    params: dict[str, np.ndarray]


def new_model(config: ModelConfig, vocab: Vocabulary) -> EncoderModel:
    """Fresh parameters, deterministic in the config seed."""
    if vocab.size != config.vocab_size:
        raise ValueError(
            f"vocabulary size {vocab.size} does not match config {config.vocab_size}"
        )
    rng = stream_rng(config.seed, "init")
    params: dict[str, np.ndarray] = {}
    for name, shape in _param_shapes(config).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[-1]
            params[name] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
    return EncoderModel(config=config, vocab=vocab, params=params)


# --- conditioning modes -----------------------------------------------------


@dataclass(frozen=True)
class NoConditioning:
    """Compute intermediate posteriors but leave the representation alone."""


@dataclass(frozen=True)
class ExpectationConditioning:
    """Add the posterior-weighted mean of the label embeddings (the
    training-time mode)."""


@dataclass(frozen=True)
class BestPathConditioning:
    """Commit to the per-frame argmax path and embed it."""


@dataclass(frozen=True)
class SearchedConditioning:
    """Beam-search the intermediate posterior (optionally LM-fused), force-
    align the winner back onto it, and embed that alignment."""

    beam: BeamConfig = BeamConfig()
    lm: NGramModel | None = None

    def __post_init__(self) -> None:
        if self.lm is None and self.beam.lm_weight > 0:
            raise ValueError("searched conditioning needs an LM or lm_weight == 0")


@dataclass(frozen=True)
class OracleConditioning:
    """Condition on the forced alignment of the reference transcript."""

    reference: LabelSequence


@dataclass(frozen=True)
class InjectedConditioning:
    """Condition on a fixed text, e.g. the previous pass's final output."""

    text: LabelSequence


ConditioningMode = Union[
    NoConditioning,
    ExpectationConditioning,
    BestPathConditioning,
    SearchedConditioning,
    OracleConditioning,
    InjectedConditioning,
]


@dataclass
class Tape:
    """Every activation needed to backpropagate one utterance."""

    features: np.ndarray
    layer_in: list[np.ndarray] = field(default_factory=list)
    concat: list[np.ndarray] = field(default_factory=list)
    act: list[np.ndarray] = field(default_factory=list)
    layer_out: list[np.ndarray] = field(default_factory=list)
    cond_logits: dict[int, np.ndarray] = field(default_factory=dict)
    cond_probs: dict[int, np.ndarray] = field(default_factory=dict)
    final_input: np.ndarray | None = None
    final_logits: np.ndarray | None = None


@dataclass
class ForwardTrace:
    """Outputs of one forward pass: the final posterior lattice, every
    intermediate lattice, and what each conditioning layer conditioned on."""

    final: PosteriorLattice
    intermediates: dict[int, PosteriorLattice]
    alignments: dict[int, AlignmentPath | None]
    cond_texts: dict[int, LabelSequence | None]
    fallback_layers: tuple[int, ...]
    tape: Tape | None = None


def window_concat(x: np.ndarray, radius: int) -> np.ndarray:
    """Stack each frame with its +-radius neighbours (zero padded)."""
    t, d = x.shape
    if radius == 0:
        return x
    padded = np.zeros((t + 2 * radius, d))
    padded[radius : radius + t] = x
    return np.concatenate([padded[o : o + t] for o in range(2 * radius + 1)], axis=1)


def window_adjoint(grad: np.ndarray, radius: int) -> np.ndarray:
    """Adjoint of ``window_concat``: scatter window gradients back to frames."""
    if radius == 0:
        return grad
    t = grad.shape[0]
    d = grad.shape[1] // (2 * radius + 1)
    acc = np.zeros((t + 2 * radius, d))
    for o in range(2 * radius + 1):
        acc[o : o + t] += grad[:, o * d : (o + 1) * d]
    return acc[radius : radius + t]


def condition_expectation(lattice: PosteriorLattice, weights: np.ndarray) -> np.ndarray:
    """h_t = W z_t: the expected label embedding under the frame posterior."""
    return lattice.probs @ weights.T


def embed_path(path: AlignmentPath, weights: np.ndarray) -> np.ndarray:
    """Embed a frame-level path; column k of ``weights`` embeds label k."""
    return weights.T[np.asarray(path, dtype=np.int64)]


def condition_best_path(
    lattice: PosteriorLattice, weights: np.ndarray
) -> tuple[np.ndarray, AlignmentPath]:
    """Commit to the per-frame argmax path (ties pick the lowest index)."""
    path = tuple(int(k) for k in np.argmax(lattice.probs, axis=1))
    return embed_path(path, weights), path


def condition_searched(
    lattice: PosteriorLattice,
    weights: np.ndarray,
    lm: NGramModel | None,
    beam: BeamConfig,
) -> tuple[np.ndarray, AlignmentPath, LabelSequence]:
    """Refine the intermediate text by beam search, then align it back.

    A beam winner is always alignable against the lattice it came from; if
    alignment fails anyway the conditioning degrades to the best path, which
    callers can detect because collapse(path) != text.
    """
    text = prefix_beam_search(lattice, lm, beam)[0][0]
    try:
        path, _ = viterbi_align(text, lattice)
    except InfeasibleTargetError:
        h, path = condition_best_path(lattice, weights)
        return h, path, text
    return embed_path(path, weights), path, text


def condition_oracle(
    reference: LabelSequence, lattice: PosteriorLattice, weights: np.ndarray
) -> tuple[np.ndarray, AlignmentPath]:
    """Condition on the reference transcript's forced alignment."""
    path, _ = viterbi_align(reference, lattice)
    return embed_path(path, weights), path


def _apply_conditioning(
    mode: ConditioningMode, lattice: PosteriorLattice, weights: np.ndarray
) -> tuple[np.ndarray | None, AlignmentPath | None, LabelSequence | None, bool]:
    """Returns (feature, alignment, text, fell_back) for one layer."""
    if isinstance(mode, NoConditioning):
        return None, None, None, False
    if isinstance(mode, ExpectationConditioning):
        return condition_expectation(lattice, weights), None, None, False
    if isinstance(mode, BestPathConditioning):
        h, path = condition_best_path(lattice, weights)
        return h, path, None, False
    if isinstance(mode, SearchedConditioning):
        h, path, text = condition_searched(lattice, weights, mode.lm, mode.beam)
        return h, path, text, collapse(path) != text
    if isinstance(mode, OracleConditioning):
        h, path = condition_oracle(mode.reference, lattice, weights)
        return h, path, mode.reference, False
    if isinstance(mode, InjectedConditioning):
        try:
            path, _ = viterbi_align(mode.text, lattice)
        except InfeasibleTargetError:
            h, path = condition_best_path(lattice, weights)
            return h, path, mode.text, True
        return embed_path(path, weights), path, mode.text, False
    raise TypeError(f"unknown conditioning mode {mode!r}")


def forward(
    model: EncoderModel,
    features: np.ndarray,
    mode: ConditioningMode = ExpectationConditioning(),
    want_tape: bool = False,
) -> ForwardTrace:
    """Run all layers, conditioning at each configured intermediate layer."""
    cfg = model.config
    p = model.params
    feats = np.ascontiguousarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != cfg.input_dim:
        raise ValueError(
            f"features must be (T, {cfg.input_dim}), got {feats.shape}"
        )
    if feats.shape[0] < 1:
        raise ValueError("need at least one frame")
    if not np.all(np.isfinite(feats)):
        raise ValueError("features must be finite")

    tape = Tape(features=feats) if want_tape else None
    intermediates: dict[int, PosteriorLattice] = {}
    alignments: dict[int, AlignmentPath | None] = {}
    cond_texts: dict[int, LabelSequence | None] = {}
    fallbacks: list[int] = []

    x = feats @ p["input.w"].T + p["input.b"]
    for l in range(1, cfg.num_layers + 1):
        inp = x
        c = window_concat(inp, cfg.context_radius)
        act = np.tanh(c @ p[f"layer{l}.w"].T + p[f"layer{l}.b"])
        out = inp + act
        if not np.all(np.isfinite(out)):
            raise NumericError(f"non-finite activations at layer {l}")
        if tape is not None:
            tape.layer_in.append(inp)
            tape.concat.append(c)
            tape.act.append(act)
            tape.layer_out.append(out)
        x = out
        if l in cfg.cond_layers:
            logits = out @ p[f"head{l}.w"].T + p[f"head{l}.b"]
            z = softmax_rows(logits)
            lattice = PosteriorLattice(z)
            intermediates[l] = lattice
            if tape is not None:
                tape.cond_logits[l] = logits
                tape.cond_probs[l] = z
            h, path, text, fell_back = _apply_conditioning(
                mode, lattice, p[f"cond{l}.w"]
            )
            alignments[l] = path
            cond_texts[l] = text
            if fell_back:
                fallbacks.append(l)
            if h is not None:
                x = out + h

    final_logits = x @ p["head_final.w"].T + p["head_final.b"]
    if not np.all(np.isfinite(final_logits)):
        raise NumericError(f"non-finite activations at the final head")
    final = PosteriorLattice(softmax_rows(final_logits))
    if tape is not None:
        tape.final_input = x
        tape.final_logits = final_logits
    return ForwardTrace(
        final=final,
        intermediates=intermediates,
        alignments=alignments,
        cond_texts=cond_texts,
        fallback_layers=tuple(fallbacks),
        tape=tape,
    )


def decode_output(
    lattice: PosteriorLattice,
    lm: NGramModel | None = None,
    beam: BeamConfig | None = None,
) -> LabelSequence:
    """Final-output decoder: greedy when ``beam`` is None, else beam top-1."""
    if beam is None:
        return best_path_decode(lattice)[0]
    return prefix_beam_search(lattice, lm, beam)[0][0]


def multipass_decode(
    model: EncoderModel,
    features: np.ndarray,
    passes: int,
    base_mode: ConditioningMode = ExpectationConditioning(),
    lm: NGramModel | None = None,
    output_beam: BeamConfig | None = None,
) -> list[tuple[LabelSequence, ForwardTrace]]:
    """Repeat inference, conditioning each pass on the previous final output.

    Pass 1 runs under ``base_mode``; every later pass aligns the previous
    decoded text against freshly computed intermediate lattices. Returns the
    per-pass (decoded text, trace) list.
    """
    if passes < 1:
        raise ValueError(f"passes must be >= 1, got {passes}")
    results: list[tuple[LabelSequence, ForwardTrace]] = []
    mode = base_mode
    for _ in range(passes):
        trace = forward(model, features, mode)
        decoded = decode_output(trace.final, lm, output_beam)
        results.append((decoded, trace))
        mode = InjectedConditioning(decoded)
    return results


# --- checkpoint io ----------------------------------------------------------


def save_model(model: EncoderModel, path: str | Path) -> None:
    cfg = model.config
    payload = {
        "model_version": MODEL_VERSION,
        "config": {
            "input_dim": cfg.input_dim,
            "vocab_size": cfg.vocab_size,
            "dim": cfg.dim,
            "num_layers": cfg.num_layers,
            "context_radius": cfg.context_radius,
            "cond_layers": list(cfg.cond_layers),
            "seed": cfg.seed,
        },
        "vocab": list(model.vocab.tokens),
        "params": {name: model.params[name].tolist() for name in sorted(model.params)},
    }
    Path(path).write_text(
        json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path) -> EncoderModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing checkpoint {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if payload.get("model_version") != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model_version")
    try:
        raw = payload["config"]
        config = ModelConfig(
            input_dim=int(raw["input_dim"]),
            vocab_size=int(raw["vocab_size"]),
            dim=int(raw["dim"]),
            num_layers=int(raw["num_layers"]),
            context_radius=int(raw["context_radius"]),
            cond_layers=tuple(int(n) for n in raw["cond_layers"]),
            seed=int(raw["seed"]),
        )
        vocab = Vocabulary(tuple(payload["vocab"]))
        params = {
            name: np.asarray(values, dtype=np.float64)
            for name, values in payload["params"].items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed checkpoint: {exc}") from exc
    expected = _param_shapes(config)
    if set(params) != set(expected):
        raise DataError(f"{path}: parameter names do not match the config")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise DataError(
                f"{path}: parameter {name} has shape {params[name].shape}, expected {shape}"
            )
    if vocab.size != config.vocab_size:
        raise DataError(f"{path}: vocabulary does not match config")
    return EncoderModel(config=config, vocab=vocab, params=params)
