"""Command-line front end for the whole pipeline.

Subcommands: stats, convert-2024, train, predict, evaluate, baseline,
llm-baseline, gen-synthetic. Exit codes: 0 success, 1 usage error, 2 data
error, 3 runtime failure. Every run writes a ``run-manifest.json`` with the
effective configuration, seed, binary version and input checksums so results
can be reproduced from the manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import subprocess
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .corpus import (
    Dataset,
    compute_stats,
    convert_paragraph_dataset,
    format_stats_table,
    load_dataset,
    split_train_val,
    write_dataset,
)
from .errors import DataError, SspcError, UsageError
from .evaluation import (
    baseline_predict,
    evaluate_dataset,
    format_report_table,
    read_solutions,
    score_predictions,
    write_solutions,
)
from .featurize import EmbeddingStore, FeatureConfig, featurize_problem, load_embedding_file
from .llm import LlmConfig, run_llm_baseline
from .model import ModelConfig
from .synth import SynthConfig, make_synthetic_dataset
from .train import TrainConfig, load_model_from_checkpoint


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage errors to 1
        raise UsageError(message)


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.TimeoutExpired):
        pass
    return f"sspc-{__version__}"


def _checksum_path(path: Path) -> str:
    digest = hashlib.sha256()
    if path.is_file():
        digest.update(path.read_bytes())
    elif path.is_dir():
        for entry in sorted(path.rglob("*")):
            if entry.is_file():
                digest.update(str(entry.relative_to(path)).encode("utf-8"))
                digest.update(entry.read_bytes())
    else:
        return "missing"
    return digest.hexdigest()


def write_manifest(out_dir: Path, command: str, argv: list[str], config: dict, inputs: list[str]):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": argv,
        "effective_config": config,
        "version": _git_describe(),
        "input_checksums": {p: _checksum_path(Path(p)) for p in inputs},
    }
    (out_dir / "run-manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def _load_toml(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file not found: {path}")
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def parse_feature_spec(spec: str, dim: int, seed: int, ngram_range: tuple[int, int],
                       normalize: bool) -> tuple[FeatureConfig, Optional[EmbeddingStore]]:
    """Turn a ``--features`` value into a config and optional embedding store."""
    if spec == "ngram":
        return FeatureConfig("hashed_char_ngram", dim, ngram_range, seed, normalize), None
    if spec == "stylo":
        return FeatureConfig("stylometric", dim, ngram_range, seed, normalize), None
    if spec.startswith("emb:"):
        store = load_embedding_file(spec[4:])
        return (
            FeatureConfig("external_embeddings", store.dim, ngram_range, seed, normalize),
            store,
        )
    raise UsageError(f"unknown --features value {spec!r}; expected ngram, stylo or emb:<path>")


def _add_feature_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--features", default="ngram", help="ngram | stylo | emb:<path>")
    parser.add_argument("--feature-dim", type=int, default=256)
    parser.add_argument("--ngram-range", default="1,3", help="min,max character n-gram orders")
    parser.add_argument("--hash-seed", type=int, default=0)
    parser.add_argument("--no-normalize", action="store_true")


def _features_from_args(args) -> tuple[FeatureConfig, Optional[EmbeddingStore]]:
    lo, _, hi = args.ngram_range.partition(",")
    try:
        ngram_range = (int(lo), int(hi or lo))
    except ValueError:
        raise UsageError(f"bad --ngram-range {args.ngram_range!r}")
    return parse_feature_spec(
        args.features, args.feature_dim, args.hash_seed, ngram_range, not args.no_normalize
    )


def _model_config_from(args, input_dim: int) -> ModelConfig:
    file_cfg = _load_toml(getattr(args, "model_config", None)).get("model", {})
    payload = {
        "input_dim": input_dim,
        "hidden_dim": 256,
        "bilstm_layers": 5,
        "bilstm_dropout": 0.2,
        "mlp_hidden_dims": (512, 128),
        "mlp_dropout": 0.2,
        "seed": args.seed,
    }
    payload.update(file_cfg)
    for flag in ("hidden_dim", "bilstm_layers"):
        value = getattr(args, flag, None)
        if value is not None:  # explicit flags beat file values
            payload[flag] = value
    payload["mlp_hidden_dims"] = tuple(payload["mlp_hidden_dims"])
    return ModelConfig(**payload)


def _train_config_from(args) -> TrainConfig:
    file_cfg = _load_toml(getattr(args, "train_config", None)).get("train", {})
    payload = {
        "batch_size": 4,
        "total_steps": 30000,
        "warmup_steps": 2600,
        "peak_lr": 5e-4,
        "min_lr": 5e-5,
        "seed": args.seed,
        "val_every": 500,
    }
    payload.update(file_cfg)
    for flag in ("total_steps", "warmup_steps", "batch_size", "val_every"):
        value = getattr(args, flag, None)
        if value is not None:
            payload[flag] = value
    payload["checkpoint_dir"] = str(Path(args.out) / "checkpoints")
    payload["history_path"] = str(Path(args.out) / "history.jsonl")
    return TrainConfig(**payload)


def build_parser() -> _Parser:
    parser = _Parser(prog="sspc", description=__doc__)
    parser.add_argument("--format", choices=("json", "table"), default="table")
    parser.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[], help="corpus summary statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="custom")
    p.add_argument("--out", default=None)

    p = sub.add_parser("convert-2024", help="paragraph-grouped JSON to sentence-level dataset")
    p.add_argument("--input", required=True, help="JSON: [{id, paragraphs: [[sent,...],...]}]")
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-synthetic", help="write a synthetic two-author corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-problems", type=int, default=100)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--duplicate-rate", type=float, default=0.0)
    p.add_argument("--switch-prob", type=float, default=0.5)
    p.add_argument("--sentence-words", default="4,9")
    p.add_argument("--doc-sentences", default="8,16")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train the classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--val-data", default=None)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-config", default=None, help="TOML with a [model] table")
    p.add_argument("--train-config", default=None, help="TOML with a [train] table")
    p.add_argument("--hidden-dim", type=int, default=None, dest="hidden_dim")
    p.add_argument("--bilstm-layers", type=int, default=None, dest="bilstm_layers")
    p.add_argument("--total-steps", type=int, default=None, dest="total_steps")
    p.add_argument("--warmup-steps", type=int, default=None, dest="warmup_steps")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--val-every", type=int, default=None, dest="val_every")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    _add_feature_flags(p)

    p = sub.add_parser("predict", help="write solution files for a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_feature_flags(p)

    p = sub.add_parser("evaluate", help="score a checkpoint or solution files")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--solutions", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_feature_flags(p)

    p = sub.add_parser("baseline", help="trivial baselines: random, predict1, predict0")
    p.add_argument("--kind", required=True, choices=("random", "predict1", "predict0", "all"))
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("llm-baseline", help="zero-shot chat-model baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="TOML with an [llm] table")
    p.add_argument("--out", default=None)
    return parser


def _emit(args, payload: dict, table: str):
    print(table if args.format == "table" else json.dumps(payload, indent=2, sort_keys=True))


def _cmd_stats(args, argv) -> int:
    dataset = load_dataset(args.data, args.split)
    stats = compute_stats(dataset)
    payload = stats.to_dict()
    _emit(args, payload, format_stats_table(stats, name=args.split))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
        (out / "stats.txt").write_text(format_stats_table(stats, name=args.split), encoding="utf-8")
        write_manifest(out, "stats", argv, {"data": args.data, "split": args.split}, [args.data])
    return 0


def _cmd_convert(args, argv) -> int:
    try:
        payload = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {args.input}: {exc}") from exc
    if not isinstance(payload, list):
        raise DataError("expected a JSON list of {id, paragraphs} objects")
    converted = convert_paragraph_dataset(
        [(entry["id"], entry["paragraphs"]) for entry in payload]
    )
    write_dataset(converted, args.out)
    write_manifest(Path(args.out), "convert-2024", argv, {"input": args.input}, [args.input])
    print(f"wrote {len(converted)} problems to {args.out}")
    return 0


def _cmd_gen_synthetic(args, argv) -> int:
    def _pair(text: str) -> tuple[int, int]:
        lo, _, hi = text.partition(",")
        return (int(lo), int(hi or lo))

    config = SynthConfig(
        n_problems=args.n_problems,
        words_per_sentence=_pair(args.sentence_words),
        sentences_per_doc=_pair(args.doc_sentences),
        separation=args.separation,
        switch_prob=args.switch_prob,
        duplicate_rate=args.duplicate_rate,
        seed=args.seed,
    )
    dataset = make_synthetic_dataset(config)
    write_dataset(dataset, args.out)
    write_manifest(Path(args.out), "gen-synthetic", argv, asdict(config), [])
    print(f"wrote {len(dataset)} synthetic problems to {args.out}")
    return 0


def _cmd_train(args, argv) -> int:
    from .train import train

    feature_config, store = _features_from_args(args)
    train_set = load_dataset(args.data, "train")
    if args.val_data:
        val_set = load_dataset(args.val_data, "val")
    else:
        train_set, val_set = split_train_val(train_set, args.val_fraction, args.seed)

    model_cfg = _model_config_from(args, feature_config.dim)
    train_cfg = _train_config_from(args)
    out = Path(args.out)
    write_manifest(
        out,
        "train",
        argv,
        {
            "model": model_cfg.to_dict(),
            "train": train_cfg.to_dict(),
            "features": asdict(feature_config),
        },
        [args.data] + ([args.val_data] if args.val_data else []),
    )
    params, history = train(
        model_cfg,
        train_cfg,
        train_set,
        val_set,
        feature_config,
        store,
        resume_from=args.resume,
    )
    val_records = [r for r in history.records if r.val_macro_f1 is not None]
    summary = {
        "final_checkpoint": str(Path(train_cfg.checkpoint_dir) / "final.ckpt"),
        "history": train_cfg.history_path,
        "final_train_loss": history.records[-1].train_loss if history.records else None,
        "final_val_macro_f1": val_records[-1].val_macro_f1 if val_records else None,
        "param_checksum": params.checksum(),
    }
    (out / "train-summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    _emit(args, summary, "\n".join(f"{k}: {v}" for k, v in summary.items()))
    return 0


def _predictions_for(args, dataset: Dataset):
    feature_config, store = _features_from_args(args)
    params = load_model_from_checkpoint(args.checkpoint)
    if params.config.input_dim != feature_config.dim:
        raise DataError(
            f"checkpoint expects input dim {params.config.input_dim}, "
            f"features produce {feature_config.dim}"
        )
    from .model import predict as model_predict

    out = []
    for problem in dataset.problems:
        matrix = featurize_problem(problem, feature_config, store)
        out.append((problem.id, model_predict(params, matrix)))
    return out


def _cmd_predict(args, argv) -> int:
    dataset = load_dataset(args.data)
    predictions = _predictions_for(args, dataset)
    write_solutions(predictions, args.out)
    write_manifest(
        Path(args.out),
        "predict",
        argv,
        {"checkpoint": args.checkpoint, "features": args.features},
        [args.data, args.checkpoint],
    )
    print(f"wrote {len(predictions)} solution files to {args.out}")
    return 0


def _cmd_evaluate(args, argv) -> int:
    dataset = load_dataset(args.data)
    if (args.checkpoint is None) == (args.solutions is None):
        raise UsageError("evaluate needs exactly one of --checkpoint or --solutions")
    if args.solutions:
        predictions = read_solutions(args.solutions, dataset)
        pred_ids = {pid for pid, _ in predictions}
        missing = [p.id for p in dataset.problems if p.id not in pred_ids]
        if missing:
            raise DataError(
                f"solutions missing for {len(missing)} problems: {missing[:5]}"
            )
        report = score_predictions(dataset, predictions, dataset_name=dataset.split_name)
        model_name = "solutions"
    else:
        feature_config, store = _features_from_args(args)
        params = load_model_from_checkpoint(args.checkpoint)
        report = evaluate_dataset(params, dataset, feature_config, store, threads=args.threads)
        model_name = "classifier"
    payload = report.to_dict()
    _emit(args, payload, format_report_table([(model_name, report.dataset_name, report.macro_f1)]))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
        )
        (out / "report.txt").write_text(
            format_report_table([(model_name, report.dataset_name, report.macro_f1)]),
            encoding="utf-8",
        )
        write_manifest(out, "evaluate", argv, {"data": args.data}, [args.data])
    return 0


def _cmd_baseline(args, argv) -> int:
    dataset = load_dataset(args.data)
    kinds = ("random", "predict1", "predict0") if args.kind == "all" else (args.kind,)
    rows = []
    payloads = {}
    for kind in kinds:
        predictions = [
            (p.id, baseline_predict(kind, p, args.seed)) for p in dataset.problems
        ]
        report = score_predictions(dataset, predictions, dataset_name=dataset.split_name)
        rows.append((kind.upper(), report.dataset_name, report.macro_f1))
        payloads[kind] = report.to_dict()
    _emit(args, payloads, format_report_table(rows))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "baselines.json").write_text(
            json.dumps(payloads, indent=2, sort_keys=True), encoding="utf-8"
        )
        write_manifest(out, "baseline", argv, {"kinds": list(kinds), "seed": args.seed}, [args.data])
    return 0


def _cmd_llm_baseline(args, argv) -> int:
    llm_table = _load_toml(args.config).get("llm", {})
    if "endpoint" not in llm_table or "model" not in llm_table:
        raise DataError("llm config must provide endpoint and model in the [llm] table")
    cfg = LlmConfig(**llm_table)
    dataset = load_dataset(args.data)
    report, stats = run_llm_baseline(cfg, dataset)
    payload = {
        "report": report.to_dict(),
        "requests": stats.n_requests,
        "cache_hits": stats.cache_hits,
        "parse_failures": stats.parse_failures,
        "parse_failure_rate": stats.parse_failures / max(1, len(dataset)),
        "fallback_ids": stats.fallback_ids,
    }
    _emit(
        args,
        payload,
        format_report_table([(cfg.model, report.dataset_name, report.macro_f1)])
        + f"\nparse failures: {stats.parse_failures}/{len(dataset)}",
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "llm-report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
        )
        write_manifest(out, "llm-baseline", argv, {"config": args.config}, [args.data, args.config])
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "convert-2024": _cmd_convert,
    "gen-synthetic": _cmd_gen_synthetic,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "baseline": _cmd_baseline,
    "llm-baseline": _cmd_llm_baseline,
}


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SspcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
