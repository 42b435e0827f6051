"""Command-line surface tying the toolkit together.

Exit codes: 0 success, 1 usage or configuration error, 2 missing or
malformed data/model artifacts, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from condctc import formats
from condctc.align import viterbi_align
from condctc.core import error_rate
from condctc.data import build_dataset, default_task, load_dataset, lm_corpus
from condctc.decode import BeamConfig
from condctc.errors import (
    DataError,
    InfeasibleTargetError,
    NumericError,
    SearchSpaceError,
)
from condctc.harness import (
    COND_NAMES,
    DECODER_NAMES,
    REPORT_VERSION,
    decode_split,
    multipass_split_decode,
    score_against_dataset,
    write_report,
)
from condctc.lm import load_lm, save_lm, train_ngram
from condctc.model import (
    ExpectationConditioning,
    ModelConfig,
    forward,
    load_model,
    new_model,
    save_model,
)
from condctc.train import TrainConfig, train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); we map usage to 1
        raise _UsageError(message)


def _read_json(path: str, what: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"missing {what} file {path}")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataError(f"{path}: expected a JSON object")
    return payload


def cmd_gen_data(args: argparse.Namespace) -> int:
    payload = _read_json(args.spec, "task spec") if args.spec else {}
    known = {
        "seed",
        "vocab_size",
        "input_dim",
        "confusable_pairs",
        "duration_range",
        "noise_sigma",
        "length_range",
        "n_train",
        "n_dev",
        "n_test",
    }
    unknown = set(payload) - known
    if unknown:
        raise DataError(f"unknown task spec keys: {sorted(unknown)}")
    counts = {
        "n_train": int(payload.get("n_train", 2000)),
        "n_dev": int(payload.get("n_dev", 200)),
        "n_test": int(payload.get("n_test", 200)),
    }
    task_kwargs = {}
    for key in ("vocab_size", "input_dim", "noise_sigma"):
        if key in payload:
            task_kwargs[key] = payload[key]
    for key in ("duration_range", "length_range"):
        if key in payload:
            task_kwargs[key] = tuple(int(v) for v in payload[key])
    if "confusable_pairs" in payload:
        task_kwargs["confusable_pairs"] = tuple(
            (int(a), int(b)) for a, b in payload["confusable_pairs"]
        )
    seed = args.seed if args.seed is not None else int(payload.get("seed", 0))
    task = default_task(seed=seed, **task_kwargs)
    build_dataset(args.out, task, counts["n_train"], counts["n_dev"], counts["n_test"])
    total = sum(counts.values())
    print(f"wrote {total} utterances to {args.out} (seed {seed})")
    return 0


def cmd_train_lm(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    corpus = lm_corpus(dataset.task, args.count)
    model = train_ngram(corpus, dataset.vocab, order=args.order, delta=args.delta)
    save_lm(model, args.out)
    print(
        f"trained order-{args.order} LM on {len(corpus)} sequences "
        f"({len(model.counts)} contexts) -> {args.out}"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    payload = _read_json(args.config, "train config") if args.config else {}
    known = {
        "epochs",
        "batch_size",
        "learning_rate",
        "mix_weight",
        "dim",
        "num_layers",
        "context_radius",
        "cond_layers",
    }
    unknown = set(payload) - known
    if unknown:
        raise DataError(f"unknown train config keys: {sorted(unknown)}")
    dataset = load_dataset(args.data)
    seed = args.seed if args.seed is not None else 0
    model_cfg = ModelConfig(
        input_dim=dataset.task.input_dim,
        vocab_size=dataset.vocab.size,
        dim=int(payload.get("dim", 16)),
        num_layers=int(payload.get("num_layers", 6)),
        context_radius=int(payload.get("context_radius", 2)),
        cond_layers=tuple(int(n) for n in payload.get("cond_layers", (2, 4))),
        seed=seed,
    )
    train_cfg = TrainConfig(
        epochs=int(payload.get("epochs", 20)),
        batch_size=int(payload.get("batch_size", 16)),
        learning_rate=float(payload.get("learning_rate", 2e-3)),
        mix_weight=float(payload.get("mix_weight", 0.5)),
        seed=seed,
    )
    train_ids = dataset.splits.get("train", [])
    if not train_ids:
        raise DataError(f"dataset {args.data} has no train split")
    samples = [
        (dataset.features(utt_id), dataset.transcripts[utt_id])
        for utt_id in sorted(train_ids)
    ]
    model = new_model(model_cfg, dataset.vocab)
    losses = train(model, samples, train_cfg)
    for epoch, loss in enumerate(losses, 1):
        print(f"epoch {epoch:3d} mean loss {loss:.6f}")
    save_model(model, args.out)
    print(f"saved checkpoint -> {args.out}")
    return 0


def _beam_from_args(args: argparse.Namespace) -> BeamConfig:
    return BeamConfig(
        width=args.beam_width,
        lm_weight=args.lm_weight,
        length_bonus=args.len_bonus,
    )


def cmd_decode(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    model = load_model(args.model)
    lm = load_lm(args.lm, dataset.vocab) if args.lm else None
    if args.cond == "searched" and lm is None and args.lm_weight > 0:
        raise _UsageError("--cond searched needs --lm (or --lm-weight 0)")
    if args.output_decode == "beam" and lm is None and args.lm_weight > 0:
        raise _UsageError("--output-decode beam needs --lm (or --lm-weight 0)")
    beam = _beam_from_args(args)
    hyps = decode_split(
        model, dataset, args.split, args.cond, args.output_decode, lm, beam
    )
    hyp_path = Path(args.hyp) if args.hyp else Path(str(args.report) + ".hyp.tsv")
    formats.save_transcripts(hyps, dataset.vocab, hyp_path)
    wer, num = score_against_dataset(dataset, args.split, hyp_path)
    report = {
        "report_version": REPORT_VERSION,
        "config_echo": {
            "model_path": str(args.model),
            "data_dir": str(args.data),
            "lm_path": args.lm,
            "beam_width": args.beam_width,
            "lm_weight": args.lm_weight,
            "length_bonus": args.len_bonus,
        },
        "grid": [
            {
                "cond": args.cond,
                "decode": args.output_decode,
                "split": args.split,
                "wer": wer,
                "num_utts": num,
            }
        ],
        "passes": [],
    }
    write_report(report, Path(args.report), Path(str(args.report) + ".txt"))
    print(f"{args.cond}/{args.output_decode} {args.split} WER {wer:.3f}")
    return 0


def cmd_multipass(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    model = load_model(args.model)
    lm = load_lm(args.lm, dataset.vocab) if args.lm else None
    if args.output_decode == "beam" and lm is None and args.lm_weight > 0:
        raise _UsageError("--output-decode beam needs --lm (or --lm-weight 0)")
    beam = _beam_from_args(args)
    per_pass = multipass_split_decode(
        model, dataset, args.split, args.passes, args.output_decode, lm, beam
    )
    passes = []
    for m, hyps in enumerate(per_pass, start=1):
        hyp_path = Path(str(args.report) + f".pass{m}.hyp.tsv")
        formats.save_transcripts(hyps, dataset.vocab, hyp_path)
        wer, _ = score_against_dataset(dataset, args.split, hyp_path)
        passes.append(wer)
    report = {
        "report_version": REPORT_VERSION,
        "config_echo": {
            "model_path": str(args.model),
            "data_dir": str(args.data),
            "lm_path": args.lm,
            "passes": args.passes,
            "split": args.split,
            "output_decode": args.output_decode,
            "beam_width": args.beam_width,
            "lm_weight": args.lm_weight,
            "length_bonus": args.len_bonus,
        },
        "grid": [],
        "passes": passes,
    }
    write_report(report, Path(args.report), Path(str(args.report) + ".txt"))
    print(
        f"multipass {args.split} WER by pass: "
        + "  ".join(f"{m}:{w:.3f}" for m, w in enumerate(passes, 1))
    )
    return 0


def cmd_align(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    model = load_model(args.model)
    features = dataset.features(args.utt)
    target = dataset.vocab.encode(args.text.split())
    trace = forward(model, features, ExpectationConditioning())
    path, logp = viterbi_align(target, trace.final)
    tokens = " ".join(dataset.vocab.tokens[i] for i in path)
    print(f"utt {args.utt} frames {len(path)} log_prob {logp:.6f}")
    print(tokens)
    return 0


def _read_hyp_tsv(path: str) -> dict[str, tuple[str, ...]]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"missing transcript file {path}")
    entries: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'id<TAB>tokens'")
        entries[parts[0]] = tuple(parts[1].split())
    return entries


def cmd_eval(args: argparse.Namespace) -> int:
    refs = _read_hyp_tsv(args.ref)
    hyps = _read_hyp_tsv(args.hyp)
    if set(refs) != set(hyps):
        raise DataError("reference and hypothesis files list different utterances")
    ids = sorted(refs)
    wer = 100.0 * error_rate([refs[u] for u in ids], [hyps[u] for u in ids])
    print(f"WER {wer:.3f}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="condctc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset directory")
    p.add_argument("--spec", required=True, help="JSON task spec (may be {})")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="overrides the spec seed")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-lm", help="train the n-gram LM for a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--count", type=int, default=10000, help="LM corpus size")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("train", help="train the encoder on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="JSON train config (may be {})")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    def add_decode_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--split", default="test")
        p.add_argument("--output-decode", choices=DECODER_NAMES, default="greedy")
        p.add_argument("--lm", default=None)
        p.add_argument("--beam-width", type=int, default=8)
        p.add_argument("--lm-weight", type=float, default=0.3)
        p.add_argument("--len-bonus", type=float, default=0.3)
        p.add_argument("--report", required=True, help="report JSON path")

    p = sub.add_parser("decode", help="decode a split under one conditioning mode")
    add_decode_flags(p)
    p.add_argument("--cond", choices=COND_NAMES, required=True)
    p.add_argument("--hyp", default=None, help="hypothesis TSV path")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("multipass", help="multi-pass conditioned decoding")
    add_decode_flags(p)
    p.add_argument("--passes", type=int, required=True)
    p.set_defaults(func=cmd_multipass)

    p = sub.add_parser("align", help="force-align a text against an utterance")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--utt", required=True)
    p.add_argument("--text", required=True, help="space-joined label tokens")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="score a hypothesis TSV against a reference TSV")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, SearchSpaceError, InfeasibleTargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
