"""Experiment runner: decode grids over conditioning modes and output
decoders, multi-pass sweeps, and machine-readable WER reports.

Reports are deterministic byte for byte given the same artifacts: cell
values are recomputed from the hypothesis TSV files the run just wrote, so
an external re-scoring of those files reproduces the table exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from condctc import formats
from condctc.core import LabelSequence, error_rate
from condctc.data import Dataset, load_dataset
from condctc.decode import BeamConfig
from condctc.errors import DataError
from condctc.lm import NGramModel, load_lm
from condctc.model import (
    BestPathConditioning,
    ConditioningMode,
    EncoderModel,
    ExpectationConditioning,
    InjectedConditioning,
    NoConditioning,
    OracleConditioning,
    SearchedConditioning,
    decode_output,
    forward,
    load_model,
    multipass_decode,
)

REPORT_VERSION = 1

COND_NAMES = ("none", "selfcond", "bestpath", "searched", "oracle")
DECODER_NAMES = ("greedy", "beam")


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: str
    model_path: str
    out_dir: str
    lm_path: str | None = None
    conds: tuple[str, ...] = COND_NAMES
    decoders: tuple[str, ...] = ("greedy",)
    splits: tuple[str, ...] = ("dev", "test")
    passes: int = 4
    multipass_split: str = "test"
    multipass_decoder: str = "greedy"
    beam_width: int = 8
    lm_weight: float = 0.3
    length_bonus: float = 0.3

    def beam(self) -> BeamConfig:
        return BeamConfig(
            width=self.beam_width,
            lm_weight=self.lm_weight,
            length_bonus=self.length_bonus,
        )


def make_mode(
    cond: str,
    reference: LabelSequence | None,
    lm: NGramModel | None,
    beam: BeamConfig,
) -> ConditioningMode:
    """Map a conditioning name to a mode instance for one utterance."""
    if cond == "none":
        return NoConditioning()
    if cond == "selfcond":
        return ExpectationConditioning()
    if cond == "bestpath":
        return BestPathConditioning()
    if cond == "searched":
        if lm is None:
            beam = BeamConfig(
                width=beam.width, lm_weight=0.0, length_bonus=beam.length_bonus,
                prune_threshold=beam.prune_threshold,
            )
        return SearchedConditioning(beam=beam, lm=lm)
    if cond == "oracle":
        if reference is None:
            raise ValueError("oracle conditioning needs a reference transcript")
        return OracleConditioning(reference)
    raise ValueError(f"unknown conditioning mode {cond!r}")


def decode_split(
    model: EncoderModel,
    dataset: Dataset,
    split: str,
    cond: str,
    decoder: str,
    lm: NGramModel | None,
    beam: BeamConfig,
) -> dict[str, LabelSequence]:
    """Decode every utterance of a split; output ordering is by utterance id."""
    if split not in dataset.splits:
        raise DataError(f"dataset has no split {split!r}")
    if decoder not in DECODER_NAMES:
        raise ValueError(f"unknown output decoder {decoder!r}")
    out_beam = beam if decoder == "beam" else None
    hyps: dict[str, LabelSequence] = {}
    for utt_id in sorted(dataset.splits[split]):
        features = dataset.features(utt_id)
        mode = make_mode(cond, dataset.transcripts.get(utt_id), lm, beam)
        trace = forward(model, features, mode)
        hyps[utt_id] = decode_output(trace.final, lm, out_beam)
    return hyps


def multipass_split_decode(
    model: EncoderModel,
    dataset: Dataset,
    split: str,
    passes: int,
    decoder: str,
    lm: NGramModel | None,
    beam: BeamConfig,
) -> list[dict[str, LabelSequence]]:
    """Per-pass hypotheses for a whole split (pass 1 is plain self-conditioning)."""
    if split not in dataset.splits:
        raise DataError(f"dataset has no split {split!r}")
    out_beam = beam if decoder == "beam" else None
    per_pass: list[dict[str, LabelSequence]] = [dict() for _ in range(passes)]
    for utt_id in sorted(dataset.splits[split]):
        features = dataset.features(utt_id)
        results = multipass_decode(
            model, features, passes, ExpectationConditioning(), lm, out_beam
        )
        for m, (decoded, _) in enumerate(results):
            per_pass[m][utt_id] = decoded
    return per_pass


def score_against_dataset(
    dataset: Dataset, split: str, hyp_path: Path
) -> tuple[float, int]:
    """WER in percent for a hypothesis TSV, re-read from disk."""
    hyps = formats.load_transcripts(hyp_path, dataset.vocab)
    ids = sorted(dataset.splits[split])
    missing = [u for u in ids if u not in hyps]
    if missing:
        raise DataError(f"{hyp_path}: missing hypotheses for {missing[:3]}...")
    refs = [dataset.transcripts[u] for u in ids]
    ordered = [hyps[u] for u in ids]
    return 100.0 * error_rate(refs, ordered), len(ids)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Produce the full conditioning-mode grid plus the multi-pass sweep.

    Writes hypothesis TSVs, ``report.json``, and ``report.txt`` under
    ``cfg.out_dir`` and returns the report dictionary.
    """
    missing = [p for p in (cfg.data_dir, cfg.model_path) if not Path(p).exists()]
    if cfg.lm_path is not None and not Path(cfg.lm_path).exists():
        missing.append(cfg.lm_path)
    if missing:
        raise DataError(f"missing artifacts: {', '.join(str(m) for m in missing)}")

    dataset = load_dataset(cfg.data_dir)
    model = load_model(cfg.model_path)
    lm = load_lm(cfg.lm_path, dataset.vocab) if cfg.lm_path is not None else None
    beam = cfg.beam()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    grid = []
    for cond in cfg.conds:
        for decoder in cfg.decoders:
            for split in cfg.splits:
                hyps = decode_split(model, dataset, split, cond, decoder, lm, beam)
                hyp_path = out_dir / f"hyp_{cond}_{decoder}_{split}.tsv"
                formats.save_transcripts(hyps, dataset.vocab, hyp_path)
                wer, num = score_against_dataset(dataset, split, hyp_path)
                grid.append(
                    {
                        "cond": cond,
                        "decode": decoder,
                        "split": split,
                        "wer": wer,
                        "num_utts": num,
                    }
                )

    passes: list[float] = []
    if cfg.passes > 0:
        per_pass = multipass_split_decode(
            model,
            dataset,
            cfg.multipass_split,
            cfg.passes,
            cfg.multipass_decoder,
            lm,
            beam,
        )
        for m, hyps in enumerate(per_pass, start=1):
            hyp_path = out_dir / f"hyp_multipass_pass{m}_{cfg.multipass_split}.tsv"
            formats.save_transcripts(hyps, dataset.vocab, hyp_path)
            wer, _ = score_against_dataset(dataset, cfg.multipass_split, hyp_path)
            passes.append(wer)

    report = {
        "report_version": REPORT_VERSION,
        "config_echo": {
            "data_dir": str(cfg.data_dir),
            "model_path": str(cfg.model_path),
            "lm_path": None if cfg.lm_path is None else str(cfg.lm_path),
            "conds": list(cfg.conds),
            "decoders": list(cfg.decoders),
            "splits": list(cfg.splits),
            "passes": cfg.passes,
            "multipass_split": cfg.multipass_split,
            "multipass_decoder": cfg.multipass_decoder,
            "beam_width": cfg.beam_width,
            "lm_weight": cfg.lm_weight,
            "length_bonus": cfg.length_bonus,
        },
        "grid": grid,
        "passes": passes,
    }
    write_report(report, out_dir / "report.json", out_dir / "report.txt")
    return report


def write_report(report: dict, json_path: Path, text_path: Path) -> None:
    json_path.write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    text_path.write_text(render_report(report), encoding="utf-8")


def render_report(report: dict) -> str:
    """Fixed-width table: rows are cond x decoder, columns are splits."""
    splits = list(dict.fromkeys(entry["split"] for entry in report["grid"]))
    rows: dict[tuple[str, str], dict[str, float]] = {}
    for entry in report["grid"]:
        rows.setdefault((entry["cond"], entry["decode"]), {})[entry["split"]] = entry[
            "wer"
        ]
    lines = []
    header = f"{'cond':<12}{'decode':<10}" + "".join(f"{s:>10}" for s in splits)
    lines.append(header)
    lines.append("-" * len(header))
    for (cond, decoder), cells in rows.items():
        line = f"{cond:<12}{decoder:<10}"
        for s in splits:
            value = cells.get(s)
            line += f"{value:>10.3f}" if value is not None else f"{'-':>10}"
        lines.append(line)
    if report["passes"]:
        lines.append("")
        lines.append(
            "multipass WER by pass: "
            + "  ".join(f"{m}:{w:.3f}" for m, w in enumerate(report["passes"], 1))
        )
    return "\n".join(lines) + "\n"
