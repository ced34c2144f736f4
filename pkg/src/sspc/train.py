"""Deterministic training loop: seeded epoch shuffles, per-boundary BCE
averaged over each batch, Adam under a warmup-then-cosine schedule,
checkpointing and bit-exact resumption.

Problems are never padded; each one in a batch is unrolled at its own length
and gradients are accumulated in problem-id order so the update is invariant
to how the batch happened to be sampled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint, validate_tensor_shapes
from .corpus import Dataset
from .errors import DataError, ShapeError
from .evaluation import score_predictions
from .featurize import EmbeddingStore, FeatureConfig, SentenceMatrix, featurize_problem
from .model import ModelConfig, ModelParams, backward, expected_shapes, forward, init_model, predict
from .numerics import AdamState, LrSchedule, adam_step, lr_at, masked_bce_with_logits


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    total_steps: int = 30000
    warmup_steps: int = 2600
    peak_lr: float = 5e-4
    min_lr: float = 5e-5
    seed: int = 0
    val_every: int = 500
    checkpoint_dir: Optional[str] = None
    checkpoint_every: Optional[int] = None  # also write step-stamped checkpoints
    history_path: Optional[str] = None
    grad_clip: Optional[float] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.total_steps < 0:
            raise DataError("total_steps must be >= 0")
        if self.total_steps > 0 and not (0 <= self.warmup_steps < self.total_steps):
            raise DataError("need 0 <= warmup_steps < total_steps")
        if not (0.0 < self.min_lr <= self.peak_lr):
            raise DataError("need 0 < min_lr <= peak_lr")
        if self.val_every < 1:
            raise DataError("val_every must be >= 1")

    def schedule(self) -> LrSchedule:
        return LrSchedule(
            peak=self.peak_lr,
            min_lr=self.min_lr,
            warmup=self.warmup_steps,
            total=max(self.total_steps, 1),
        )

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "total_steps": self.total_steps,
            "warmup_steps": self.warmup_steps,
            "peak_lr": self.peak_lr,
            "min_lr": self.min_lr,
            "seed": self.seed,
            "val_every": self.val_every,
            "checkpoint_dir": self.checkpoint_dir,
            "checkpoint_every": self.checkpoint_every,
            "history_path": self.history_path,
            "grad_clip": self.grad_clip,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        return cls(**payload)


@dataclass
class HistoryRecord:
    step: int
    lr: float
    train_loss: float
    val_macro_f1: Optional[float] = None

    def to_dict(self) -> dict:
        record = {"step": self.step, "lr": self.lr, "train_loss": self.train_loss}
        if self.val_macro_f1 is not None:
            record["val_macro_f1"] = self.val_macro_f1
        return record


@dataclass
class TrainHistory:
    records: list[HistoryRecord] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def _prefeaturize(
    dataset: Dataset, feature_config: FeatureConfig, store: Optional[EmbeddingStore]
) -> dict[str, SentenceMatrix]:
    return {
        problem.id: featurize_problem(problem, feature_config, store)
        for problem in dataset.problems
    }


def accumulate_batch(
    params: ModelParams,
    batch: list[tuple[str, SentenceMatrix, tuple[int, ...]]],
    dropout_rng: Optional[np.random.Generator],
    mode: str = "train",
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and summed parameter gradients for one batch of problems.

    The batch is processed in problem-id order regardless of input order;
    the loss is the mean BCE over every adjacency in the batch.
    """
    batch = sorted(batch, key=lambda item: item[0])
    forwards = []
    all_logits = []
    all_targets = []
    for problem_id, matrix, labels in batch:
        if len(labels) == 0:
            continue
        boundary, cache = forward(params, matrix, mode=mode, rng=dropout_rng)
        forwards.append((cache, len(labels)))
        all_logits.append(boundary.logits)
        all_targets.append(np.asarray(labels, dtype=np.float64))
    if not all_logits:
        raise DataError("batch contains no adjacencies to train on")

    logits = np.concatenate(all_logits)
    targets = np.concatenate(all_targets)
    loss, dlogits = masked_bce_with_logits(logits, targets, np.ones_like(logits))

    grads: dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    offset = 0
    for cache, width in forwards:
        problem_grads = backward(params, cache, dlogits[offset : offset + width])
        for key, value in problem_grads.items():
            grads[key] += value
        offset += width
    return loss, grads


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g**2)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def _validate_on(
    params: ModelParams,
    val_items: list[tuple[str, SentenceMatrix, tuple[int, ...]]],
    val_set: Dataset,
) -> float:
    predictions = [(pid, predict(params, matrix)) for pid, matrix, _ in val_items]
    return score_predictions(val_set, predictions).macro_f1


def _rng_from_state(state: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = state
    return rng


def make_checkpoint(
    params: ModelParams,
    train_cfg: TrainConfig,
    adam: AdamState,
    step: int,
    shuffle_rng: np.random.Generator,
    dropout_rng: np.random.Generator,
    queue: list[str],
    best: Optional[dict],
) -> Checkpoint:
    tensors: dict[str, np.ndarray] = {}
    for key, value in params.tensors.items():
        tensors[f"param.{key}"] = value
        tensors[f"adam.m.{key}"] = adam.m[key]
        tensors[f"adam.v.{key}"] = adam.v[key]
    meta = {
        "model_config": params.config.to_dict(),
        "train_config": train_cfg.to_dict(),
        "step": step,
        "adam_t": adam.t,
        "rng_shuffle": shuffle_rng.bit_generator.state,
        "rng_dropout": dropout_rng.bit_generator.state,
        "queue": list(queue),
        "best": best,
    }
    return Checkpoint(meta=meta, tensors=tensors)


def _restore_checkpoint(
    ckpt: Checkpoint, model_cfg: ModelConfig, train_cfg: TrainConfig
) -> tuple[ModelParams, AdamState, int, np.random.Generator, np.random.Generator, list[str], Optional[dict]]:
    stored_model_cfg = ModelConfig.from_dict(ckpt.meta["model_config"])
    if stored_model_cfg != model_cfg:
        raise ShapeError(
            f"checkpoint was trained with {stored_model_cfg}, cannot resume into {model_cfg}"
        )
    # Output paths do not affect the trajectory; everything else must match
    # for the resumed run to reproduce the uninterrupted one.
    def trajectory_fields(cfg_dict: dict) -> dict:
        return {
            k: v
            for k, v in cfg_dict.items()
            if k not in ("checkpoint_dir", "checkpoint_every", "history_path")
        }

    if trajectory_fields(ckpt.meta["train_config"]) != trajectory_fields(train_cfg.to_dict()):
        raise DataError("checkpoint train config differs from the requested one")

    shapes = expected_shapes(model_cfg)
    prefixed = {}
    for prefix in ("param", "adam.m", "adam.v"):
        subset = {
            key[len(prefix) + 1 :]: value
            for key, value in ckpt.tensors.items()
            if key.startswith(prefix + ".")
        }
        validate_tensor_shapes(subset, shapes, context=f"checkpoint[{prefix}]")
        prefixed[prefix] = subset
    params = ModelParams(model_cfg, prefixed["param"])
    adam = AdamState(m=prefixed["adam.m"], v=prefixed["adam.v"], t=int(ckpt.meta["adam_t"]))
    step = int(ckpt.meta["step"])
    shuffle_rng = _rng_from_state(ckpt.meta["rng_shuffle"])
    dropout_rng = _rng_from_state(ckpt.meta["rng_dropout"])
    queue = [str(pid) for pid in ckpt.meta["queue"]]
    return params, adam, step, shuffle_rng, dropout_rng, queue, ckpt.meta.get("best")


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    train_set: Dataset,
    val_set: Optional[Dataset] = None,
    feature_config: FeatureConfig = FeatureConfig(),
    store: Optional[EmbeddingStore] = None,
    resume_from: Optional[str | Path | Checkpoint] = None,
) -> tuple[ModelParams, TrainHistory]:
    """Run the full regimen and return (final params, history).

    Each optimizer step samples ``batch_size`` problems from seeded epoch
    shuffles, averages BCE over every adjacency in the batch and applies one
    Adam update at the scheduled rate. Validation macro-F1 is recorded every
    ``val_every`` steps; the best-validation and final checkpoints are written
    when a checkpoint directory is configured.
    """
    labeled = train_set.labeled_items()
    if not labeled:
        raise DataError("training set is empty or unlabeled")
    labeled = [(p, c) for p, c in labeled if p.n_boundaries > 0]
    if not labeled:
        raise DataError("training set has no problem with at least two sentences")

    features = {
        p.id: featurize_problem(p, feature_config, store) for p, _ in labeled
    }
    train_items = {p.id: (features[p.id], c) for p, c in labeled}
    ids_sorted = sorted(train_items)

    val_items: list[tuple[str, SentenceMatrix, tuple[int, ...]]] = []
    if val_set is not None:
        if any(c is None for _, c in val_set.items):
            raise DataError("validation set must be labeled")
        for problem, labels in val_set.items:
            val_items.append(
                (problem.id, featurize_problem(problem, feature_config, store), labels)
            )

    if resume_from is not None:
        ckpt = resume_from if isinstance(resume_from, Checkpoint) else load_checkpoint(resume_from)
        params, adam, start_step, shuffle_rng, dropout_rng, queue, best = _restore_checkpoint(
            ckpt, model_cfg, train_cfg
        )
    else:
        seeds = np.random.SeedSequence(train_cfg.seed).spawn(2)
        shuffle_rng = np.random.default_rng(seeds[0])
        dropout_rng = np.random.default_rng(seeds[1])
        params = init_model(model_cfg)
        adam = AdamState.for_params(params.tensors)
        start_step = 0
        queue = []
        best = None

    schedule = train_cfg.schedule()
    history = TrainHistory()
    ckpt_dir = Path(train_cfg.checkpoint_dir) if train_cfg.checkpoint_dir else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    for step in range(start_step + 1, train_cfg.total_steps + 1):
        while len(queue) < train_cfg.batch_size:
            order = shuffle_rng.permutation(len(ids_sorted))
            queue.extend(ids_sorted[i] for i in order)
        batch_ids = queue[: train_cfg.batch_size]
        del queue[: train_cfg.batch_size]

        batch = [(pid,) + train_items[pid] for pid in batch_ids]
        loss, grads = accumulate_batch(params, batch, dropout_rng)
        if train_cfg.grad_clip is not None:
            _clip_gradients(grads, train_cfg.grad_clip)
        lr = lr_at(step, schedule)
        new_tensors, adam = adam_step(params.tensors, grads, adam, lr)
        params = ModelParams(model_cfg, new_tensors)

        if (
            ckpt_dir is not None
            and train_cfg.checkpoint_every
            and step % train_cfg.checkpoint_every == 0
        ):
            save_checkpoint(
                make_checkpoint(
                    params, train_cfg, adam, step, shuffle_rng, dropout_rng, queue, best
                ),
                ckpt_dir / f"step-{step:06d}.ckpt",
            )

        record = HistoryRecord(step=step, lr=lr, train_loss=loss)
        if val_items and (step % train_cfg.val_every == 0 or step == train_cfg.total_steps):
            val_f1 = _validate_on(params, val_items, val_set)
            record.val_macro_f1 = val_f1
            if best is None or val_f1 > best["val_macro_f1"]:
                best = {"step": step, "val_macro_f1": val_f1}
                if ckpt_dir is not None:
                    save_checkpoint(
                        make_checkpoint(
                            params, train_cfg, adam, step, shuffle_rng, dropout_rng, queue, best
                        ),
                        ckpt_dir / "best.ckpt",
                    )
        history.records.append(record)

    if ckpt_dir is not None:
        save_checkpoint(
            make_checkpoint(
                params,
                train_cfg,
                adam,
                train_cfg.total_steps if train_cfg.total_steps > 0 else start_step,
                shuffle_rng,
                dropout_rng,
                queue,
                best,
            ),
            ckpt_dir / "final.ckpt",
        )
    if train_cfg.history_path:
        history.write(train_cfg.history_path)
    return params, history


def load_model_from_checkpoint(path: str | Path) -> ModelParams:
    """Pull just the model parameters out of a checkpoint file."""
    ckpt = load_checkpoint(path)
    model_cfg = ModelConfig.from_dict(ckpt.meta["model_config"])
    tensors = {
        key[len("param.") :]: value
        for key, value in ckpt.tensors.items()
        if key.startswith("param.")
    }
    validate_tensor_shapes(tensors, expected_shapes(model_cfg), context="checkpoint[param]")
    return ModelParams(model_cfg, tensors)
