"""Macro-F1 scoring over boundary labels, trivial baselines, solution files.

Scoring pools every adjacency across the dataset, computes per-class F1 for
the change and no-change classes, and averages them unweighted. A class with
no support in either predictions or truths counts as perfectly solved (F1 1);
a class present on exactly one side scores 0. Per-problem averaging is also
reported, but the pooled number is the primary metric.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Dataset, Problem, validate_labels
from .errors import DataError
from .featurize import EmbeddingStore, FeatureConfig, featurize_problem
from .model import ModelParams, predict

BASELINE_KINDS = ("random", "predict1", "predict0")


@dataclass
class EvalReport:
    dataset_name: str
    macro_f1: float
    f1_class0: float
    f1_class1: float
    confusion: tuple[int, int, int, int]  # (tp, fp, tn, fn) w.r.t. class 1
    n_problems: int
    n_adjacencies: int
    per_problem: list[tuple[str, tuple[int, ...]]] = field(default_factory=list)
    macro_f1_per_problem: Optional[float] = None  # mean of per-problem macro F1

    def to_dict(self) -> dict:
        tp, fp, tn, fn = self.confusion
        return {
            "dataset": self.dataset_name,
            "macro_f1": self.macro_f1,
            "f1_class0": self.f1_class0,
            "f1_class1": self.f1_class1,
            "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
            "n_problems": self.n_problems,
            "n_adjacencies": self.n_adjacencies,
            "macro_f1_per_problem": self.macro_f1_per_problem,
            "per_problem": {pid: list(labels) for pid, labels in self.per_problem},
        }


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    if tp + fp + fn == 0:
        return 1.0  # class absent everywhere: vacuously perfect
    return 2.0 * tp / (2.0 * tp + fp + fn)


def confusion_counts(
    preds: Sequence[Sequence[int]], truths: Sequence[Sequence[int]]
) -> tuple[int, int, int, int]:
    """Pooled (tp, fp, tn, fn) with class 1 as the positive class."""
    if len(preds) != len(truths):
        raise DataError(f"prediction/truth misalignment: {len(preds)} vs {len(truths)} problems")
    tp = fp = tn = fn = 0
    for i, (p, t) in enumerate(zip(preds, truths)):
        if len(p) != len(t):
            raise DataError(f"problem {i}: length mismatch: {len(p)} preds vs {len(t)} truths")
        for pv, tv in zip(p, t):
            if pv == 1 and tv == 1:
                tp += 1
            elif pv == 1 and tv == 0:
                fp += 1
            elif pv == 0 and tv == 0:
                tn += 1
            else:
                fn += 1
    return tp, fp, tn, fn


def macro_f1(
    preds: Sequence[Sequence[int]],
    truths: Sequence[Sequence[int]],
) -> tuple[float, float, float, tuple[int, int, int, int]]:
    """Pooled macro F1. Returns (macro, f1_class0, f1_class1, confusion)."""
    tp, fp, tn, fn = confusion_counts(preds, truths)
    f1_1 = _f1_from_counts(tp, fp, fn)
    # For class 0 the roles flip: tn are its true positives.
    f1_0 = _f1_from_counts(tn, fn, fp)
    return (f1_0 + f1_1) / 2.0, f1_0, f1_1, (tp, fp, tn, fn)


def per_problem_macro_f1(
    preds: Sequence[Sequence[int]], truths: Sequence[Sequence[int]]
) -> Optional[float]:
    """Mean of per-problem macro F1; problems without adjacencies are skipped."""
    scores = []
    for p, t in zip(preds, truths):
        if len(t) == 0:
            continue
        score, _, _, _ = macro_f1([p], [t])
        scores.append(score)
    return float(np.mean(scores)) if scores else None


def _problem_rng(seed: int, problem_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}|{problem_id}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def baseline_predict(kind: str, problem: Problem, seed: int = 0) -> tuple[int, ...]:
    """Trivial baselines: all ones, all zeros, or a seeded fair coin per boundary."""
    if kind not in BASELINE_KINDS:
        raise DataError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    n_boundaries = problem.n_boundaries
    if kind == "predict1":
        return (1,) * n_boundaries
    if kind == "predict0":
        return (0,) * n_boundaries
    rng = _problem_rng(seed, problem.id)
    return tuple(int(v) for v in rng.integers(0, 2, size=n_boundaries))


def score_predictions(
    dataset: Dataset,
    per_problem: Sequence[tuple[str, Sequence[int]]],
    dataset_name: Optional[str] = None,
) -> EvalReport:
    """Score a full set of per-problem predictions against dataset truths."""
    truths_by_id = {p.id: labels for p, labels in dataset.items}
    if any(v is None for v in truths_by_id.values()):
        raise DataError("cannot score an unlabeled dataset")
    pred_by_id = {pid: tuple(int(v) for v in labels) for pid, labels in per_problem}
    missing = sorted(set(truths_by_id) - set(pred_by_id))
    if missing:
        raise DataError(f"missing predictions for {len(missing)} problems, e.g. {missing[:3]}")

    ordered_ids = [p.id for p in dataset.problems]
    preds = [pred_by_id[pid] for pid in ordered_ids]
    truths = [truths_by_id[pid] for pid in ordered_ids]
    macro, f1_0, f1_1, confusion = macro_f1(preds, truths)
    return EvalReport(
        dataset_name=dataset_name or dataset.split_name,
        macro_f1=macro,
        f1_class0=f1_0,
        f1_class1=f1_1,
        confusion=confusion,
        n_problems=len(dataset),
        n_adjacencies=sum(len(t) for t in truths),
        per_problem=[(pid, pred_by_id[pid]) for pid in ordered_ids],
        macro_f1_per_problem=per_problem_macro_f1(preds, truths),
    )


def evaluate_dataset(
    params: ModelParams,
    dataset: Dataset,
    feature_config: FeatureConfig,
    store: Optional[EmbeddingStore] = None,
    threads: int = 1,
) -> EvalReport:
    """Predict every problem in eval mode and score against the truths."""
    problems = dataset.problems

    def run_one(problem: Problem) -> tuple[str, tuple[int, ...]]:
        matrix = featurize_problem(problem, feature_config, store)
        return problem.id, predict(params, matrix)

    if threads > 1 and len(problems) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            predictions = list(pool.map(run_one, problems))
    else:
        predictions = [run_one(p) for p in problems]
    return score_predictions(dataset, predictions)


def write_solutions(
    per_problem: Sequence[tuple[str, Sequence[int]]], out_dir: str | Path
) -> None:
    """One ``solution-<problem-id>.json`` per problem, `{"changes": [...]}`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for problem_id, labels in per_problem:
        payload = {"changes": [int(v) for v in labels]}
        (out / f"solution-{problem_id}.json").write_text(json.dumps(payload), encoding="utf-8")


_SOLUTION_RE = re.compile(r"^solution-(problem-\d+)\.json$")


def read_solutions(solutions_dir: str | Path, dataset: Dataset) -> list[tuple[str, tuple[int, ...]]]:
    """Load solution files back, validated against the dataset's problems."""
    root = Path(solutions_dir)
    if not root.is_dir():
        raise DataError(f"solutions directory not found: {root}")
    problems_by_id = {p.id: p for p in dataset.problems}
    found: list[tuple[str, tuple[int, ...]]] = []
    for entry in sorted(root.iterdir()):
        m = _SOLUTION_RE.match(entry.name)
        if not m:
            continue
        problem_id = m.group(1)
        problem = problems_by_id.get(problem_id)
        if problem is None:
            continue
        try:
            payload = json.loads(entry.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{entry.name}: malformed JSON: {exc}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("changes"), list):
            raise DataError(f"{entry.name}: expected an object with a 'changes' list")
        found.append((problem_id, validate_labels(problem, payload["changes"])))
    return found


def format_report_table(rows: Sequence[tuple[str, str, float]]) -> str:
    """Aligned text table of (model, dataset, macro-F1) result rows."""
    header = ("Model", "Dataset", "F1 (macro)")
    widths = [
        max(len(header[0]), *(len(r[0]) for r in rows)) if rows else len(header[0]),
        max(len(header[1]), *(len(r[1]) for r in rows)) if rows else len(header[1]),
        len(header[2]),
    ]
    lines = [
        f"{header[0].ljust(widths[0])}  {header[1].ljust(widths[1])}  {header[2]}",
        f"{'-' * widths[0]}  {'-' * widths[1]}  {'-' * widths[2]}",
    ]
    for model_name, dataset_name, score in rows:
        lines.append(
            f"{model_name.ljust(widths[0])}  {dataset_name.ljust(widths[1])}  {score:10.3f}"
        )
    return "\n".join(lines)
