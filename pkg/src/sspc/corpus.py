"""Loading, validation, conversion and summary statistics for
sentence-per-line style change datasets.

A dataset directory contains ``problem-<k>.txt`` files (UTF-8, one sentence
per line) and, for labeled splits, ``truth-problem-<k>.json`` files of the
form ``{"changes": [0, 1, ...]}`` with one label per adjacent sentence pair.
"""

from __future__ import annotations

import json
import re
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

_PROBLEM_RE = re.compile(r"^problem-(\d+)\.txt$")
_ALNUM_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class Problem:
    """One document: an ordered, immutable sequence of sentences."""

    id: str
    sentences: tuple[str, ...]

    def __post_init__(self):
        if len(self.sentences) < 1:
            raise DataError(f"{self.id}: a problem needs at least one sentence")

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    @property
    def n_boundaries(self) -> int:
        return len(self.sentences) - 1


# A label vector has one entry in {0, 1} per adjacent sentence pair.
ChangeLabels = tuple[int, ...]


def validate_labels(problem: Problem, changes: Sequence[int]) -> ChangeLabels:
    """Check a label vector against its problem and freeze it as a tuple."""
    if len(changes) != problem.n_boundaries:
        raise DataError(
            f"{problem.id}: label length mismatch: {len(changes)} labels for "
            f"{problem.n_sentences} sentences (expected {problem.n_boundaries})"
        )
    for value in changes:
        if not (isinstance(value, int) and not isinstance(value, bool)) or value not in (0, 1):
            raise DataError(f"{problem.id}: labels must be integers 0 or 1, got {value!r}")
    return tuple(int(v) for v in changes)


@dataclass
class Dataset:
    """A named split: problems paired with optional truth labels."""

    split_name: str
    items: list[tuple[Problem, Optional[ChangeLabels]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def problems(self) -> list[Problem]:
        return [p for p, _ in self.items]

    def labeled_items(self) -> list[tuple[Problem, ChangeLabels]]:
        return [(p, c) for p, c in self.items if c is not None]


@dataclass
class CorpusStats:
    n_problems: int
    n_sentences: int
    mean_words_per_sentence: float
    median_words_per_sentence: float
    mean_sentences_per_doc: float
    median_sentences_per_doc: float
    # Alternative tokenization (\w+ runs) reported alongside the whitespace
    # count; published per-word figures do not pin down a tokenizer.
    mean_alnum_tokens_per_sentence: float
    duplicate_table: list[tuple[str, int]]

    def to_dict(self) -> dict:
        return {
            "n_problems": self.n_problems,
            "n_sentences": self.n_sentences,
            "mean_words_per_sentence": self.mean_words_per_sentence,
            "median_words_per_sentence": self.median_words_per_sentence,
            "mean_sentences_per_doc": self.mean_sentences_per_doc,
            "median_sentences_per_doc": self.median_sentences_per_doc,
            "mean_alnum_tokens_per_sentence": self.mean_alnum_tokens_per_sentence,
            "duplicate_table": [list(row) for row in self.duplicate_table],
        }


def split_problem_text(text: str, problem_id: str) -> tuple[str, ...]:
    """Split raw problem file content into sentences.

    One sentence per line; CRLF tolerated; the newline terminating the final
    line does not open an extra empty sentence. Interior blank lines are kept
    as empty-string sentences. A file with no content at all is an error.
    """
    if text == "":
        raise DataError(f"{problem_id}: empty problem file")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]  # trailing newline, not an empty sentence
    lines = [line[:-1] if line.endswith("\r") else line for line in lines]
    if not lines:
        raise DataError(f"{problem_id}: empty problem file")
    return tuple(lines)


def _read_truth_file(path: Path, problem: Problem) -> ChangeLabels:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"{path.name}: malformed JSON: {exc}") from exc
    if not isinstance(payload, dict) or "changes" not in payload:
        raise DataError(f"{path.name}: truth file must be an object with a 'changes' key")
    changes = payload["changes"]
    if not isinstance(changes, list):
        raise DataError(f"{path.name}: 'changes' must be a list")
    return validate_labels(problem, changes)


def load_dataset(root_path: str | Path, split_name: str = "custom") -> Dataset:
    """Load every ``problem-<k>.txt`` under ``root_path``, sorted by k.

    Truth files are paired when present; a truth vector whose length does not
    match its problem is rejected rather than truncated.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")

    numbered = []
    for entry in root.iterdir():
        m = _PROBLEM_RE.match(entry.name)
        if m:
            numbered.append((int(m.group(1)), entry))
    numbered.sort(key=lambda pair: pair[0])

    items: list[tuple[Problem, Optional[ChangeLabels]]] = []
    for k, path in numbered:
        problem_id = f"problem-{k}"
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path.name}: not valid UTF-8: {exc}") from exc
        problem = Problem(problem_id, split_problem_text(text, problem_id))
        truth_path = root / f"truth-problem-{k}.json"
        labels = _read_truth_file(truth_path, problem) if truth_path.exists() else None
        items.append((problem, labels))
    return Dataset(split_name, items)


def convert_paragraph_dataset(
    paragraph_problems: Sequence[tuple[str, Sequence[Sequence[str]]]],
    split_name: str = "converted",
) -> Dataset:
    """Turn paragraph-grouped documents into sentence-level labeled problems.

    Sentences are flattened in order. A transition inside a paragraph is
    labeled 0; the first sentence of each new paragraph is labeled 1.
    """
    items: list[tuple[Problem, Optional[ChangeLabels]]] = []
    for problem_id, paragraphs in paragraph_problems:
        if len(paragraphs) == 0:
            raise DataError(f"{problem_id}: empty paragraph list")
        sentences: list[str] = []
        changes: list[int] = []
        for p_index, paragraph in enumerate(paragraphs):
            if len(paragraph) == 0:
                raise DataError(f"{problem_id}: paragraph {p_index} has zero sentences")
            for s_index, sentence in enumerate(paragraph):
                if sentences:  # labeling the boundary we just crossed
                    changes.append(1 if s_index == 0 else 0)
                sentences.append(sentence)
        problem = Problem(problem_id, tuple(sentences))
        items.append((problem, validate_labels(problem, changes)))
    return Dataset(split_name, items)


def count_words(sentence: str) -> int:
    """Whitespace-token count used for per-sentence word statistics."""
    return len(sentence.split())


def compute_stats(dataset: Dataset) -> CorpusStats:
    """Corpus summary: word/sentence means and medians plus exact-duplicate table."""
    if len(dataset) == 0:
        raise DataError("cannot compute statistics of an empty dataset")

    words_per_sentence: list[int] = []
    alnum_per_sentence: list[int] = []
    sentences_per_doc: list[int] = []
    counts: Counter[str] = Counter()
    for problem in dataset.problems:
        sentences_per_doc.append(problem.n_sentences)
        for sentence in problem.sentences:
            words_per_sentence.append(count_words(sentence))
            alnum_per_sentence.append(len(_ALNUM_TOKEN_RE.findall(sentence)))
            counts[sentence] += 1

    duplicates = [(s, c) for s, c in counts.items() if c >= 2]
    duplicates.sort(key=lambda row: (-row[1], row[0]))

    return CorpusStats(
        n_problems=len(dataset),
        n_sentences=len(words_per_sentence),
        mean_words_per_sentence=float(np.mean(words_per_sentence)),
        median_words_per_sentence=float(statistics.median(words_per_sentence)),
        mean_sentences_per_doc=float(np.mean(sentences_per_doc)),
        median_sentences_per_doc=float(statistics.median(sentences_per_doc)),
        mean_alnum_tokens_per_sentence=float(np.mean(alnum_per_sentence)),
        duplicate_table=duplicates,
    )


def format_stats_table(stats: CorpusStats, name: str = "dataset", top_duplicates: int = 5) -> str:
    """Plain-text rendering of a CorpusStats record."""
    rows = [
        ("Problems", f"{stats.n_problems}"),
        ("Sentences", f"{stats.n_sentences}"),
        ("Avg words/sent. (whitespace)", f"{stats.mean_words_per_sentence:.1f}"),
        ("Avg tokens/sent. (alnum)", f"{stats.mean_alnum_tokens_per_sentence:.1f}"),
        ("Median words/sent.", f"{stats.median_words_per_sentence:.1f}"),
        ("Avg sent./doc", f"{stats.mean_sentences_per_doc:.1f}"),
        ("Median sent./doc", f"{stats.median_sentences_per_doc:.1f}"),
    ]
    width = max(len(label) for label, _ in rows)
    lines = [f"[{name}]"]
    lines += [f"  {label.ljust(width)}  {value}" for label, value in rows]
    if stats.duplicate_table:
        lines.append(f"  Top duplicated sentences (of {len(stats.duplicate_table)} groups):")
        for sentence, count in stats.duplicate_table[:top_duplicates]:
            shown = sentence if len(sentence) <= 60 else sentence[:57] + "..."
            lines.append(f"    {count:>6}  {shown}")
    else:
        lines.append("  No duplicated sentences.")
    return "\n".join(lines)


def split_train_val(
    dataset: Dataset, val_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Deterministically partition a labeled dataset into train and validation.

    The validation side gets ``floor(n * val_fraction)`` problems of a seeded
    shuffle; both sides must end up non-empty.
    """
    if not (0.0 < val_fraction < 1.0):
        raise DataError(f"val_fraction must be in (0, 1), got {val_fraction}")
    if any(labels is None for _, labels in dataset.items):
        raise DataError("split_train_val requires every problem to be labeled")
    n = len(dataset)
    if n < 2:
        raise DataError(f"need at least 2 labeled problems to split, got {n}")
    n_val = int(np.floor(n * val_fraction))
    if n_val == 0 or n_val == n:
        raise DataError(
            f"too few problems ({n}) for val_fraction={val_fraction}: one split would be empty"
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    val_idx = sorted(int(i) for i in order[:n_val])
    train_idx = sorted(int(i) for i in order[n_val:])
    train = Dataset(f"{dataset.split_name}-train", [dataset.items[i] for i in train_idx])
    val = Dataset(f"{dataset.split_name}-val", [dataset.items[i] for i in val_idx])
    return train, val


def write_dataset(dataset: Dataset, out_dir: str | Path) -> None:
    """Write a dataset back to disk in the problem/truth file convention."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for problem, labels in dataset.items:
        m = re.match(r"^problem-(\d+)$", problem.id)
        if not m:
            raise DataError(f"cannot write problem with non-standard id {problem.id!r}")
        k = m.group(1)
        (out / f"problem-{k}.txt").write_text(
            "\n".join(problem.sentences) + "\n", encoding="utf-8"
        )
        if labels is not None:
            (out / f"truth-problem-{k}.json").write_text(
                json.dumps({"changes": list(labels)}), encoding="utf-8"
            )
