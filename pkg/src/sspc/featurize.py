"""Fixed-length sentence vectors from three interchangeable backends.

``hashed_char_ngram`` and ``stylometric`` are self-contained; the
``external_embeddings`` backend reads rows from a precomputed embedding file,
which is how a frozen pretrained encoder plugs into the pipeline without the
pipeline ever running one.
"""

from __future__ import annotations

import json
import string
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .corpus import Problem
from .errors import DataError, ShapeError

BACKENDS = ("hashed_char_ngram", "stylometric", "external_embeddings")

EMB_MAGIC = b"SSPCEMB1"
EMB_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF

_PUNCTUATION = set(string.punctuation)


@dataclass(frozen=True)
class FeatureConfig:
    backend: str = "hashed_char_ngram"
    dim: int = 256
    ngram_range: tuple[int, int] = (1, 3)
    hash_seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise DataError(f"unknown feature backend {self.backend!r}")
        if self.dim < 1:
            raise DataError(f"feature dim must be >= 1, got {self.dim}")
        lo, hi = self.ngram_range
        if not (1 <= lo <= hi):
            raise DataError(f"invalid ngram_range {self.ngram_range}")


@dataclass(frozen=True)
class SentenceMatrix:
    """Per-problem feature matrix, one row per sentence."""

    problem_id: str
    rows: np.ndarray  # (n, d) float64

    def __post_init__(self):
        if self.rows.ndim != 2:
            raise ShapeError(f"{self.problem_id}: feature matrix must be 2-D")
        if not np.all(np.isfinite(self.rows)):
            raise DataError(f"{self.problem_id}: non-finite feature values")


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """FNV-1a 64-bit over ``data``, with the seed XOR-ed into the offset basis."""
    state = _FNV_OFFSET ^ (seed & _U64)
    for byte in data:
        state ^= byte
        state = (state * _FNV_PRIME) & _U64
    return state


def _hashed_ngram_row(sentence: str, config: FeatureConfig, bucket_cache: dict) -> np.ndarray:
    row = np.zeros(config.dim, dtype=np.float64)
    lo, hi = config.ngram_range
    for order in range(lo, hi + 1):
        for i in range(len(sentence) - order + 1):
            ngram = sentence[i : i + order]
            bucket = bucket_cache.get(ngram)
            if bucket is None:
                bucket = fnv1a64(ngram.encode("utf-8"), config.hash_seed) % config.dim
                bucket_cache[ngram] = bucket
            row[bucket] += 1.0
    return row


def stylometric_counts(sentence: str) -> np.ndarray:
    """Five surface statistics: length, punctuation, case, digits, word length."""
    n_chars = len(sentence)
    n_punct = sum(1 for ch in sentence if ch in _PUNCTUATION)
    upper_ratio = sum(1 for ch in sentence if ch.isupper()) / n_chars if n_chars else 0.0
    digit_ratio = sum(1 for ch in sentence if ch.isdigit()) / n_chars if n_chars else 0.0
    words = sentence.split()
    mean_word_len = float(np.mean([len(w) for w in words])) if words else 0.0
    return np.array([n_chars, n_punct, upper_ratio, digit_ratio, mean_word_len], dtype=np.float64)


def _stylometric_row(sentence: str, config: FeatureConfig) -> np.ndarray:
    counts = stylometric_counts(sentence)
    row = np.zeros(config.dim, dtype=np.float64)
    keep = min(config.dim, counts.shape[0])
    row[:keep] = counts[:keep]
    return row


def l2_normalize_rows(rows: np.ndarray) -> np.ndarray:
    """Scale each row to unit norm; all-zero rows stay exactly zero."""
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return rows / safe


def featurize_problem(
    problem: Problem,
    config: FeatureConfig,
    store: Optional["EmbeddingStore"] = None,
) -> SentenceMatrix:
    """Build the (n x d) feature matrix for one problem.

    Deterministic for a fixed config (and store); the external backend copies
    rows out of the store so callers own the result.
    """
    if config.backend == "external_embeddings":
        if store is None:
            raise DataError(f"{problem.id}: external backend requires an embedding store")
        if store.dim != config.dim:
            raise ShapeError(
                f"{problem.id}: store dim {store.dim} != config dim {config.dim}"
            )
        rows = store.get(problem.id)
        if rows.shape[0] != problem.n_sentences:
            raise DataError(
                f"{problem.id}: store has {rows.shape[0]} rows, "
                f"problem has {problem.n_sentences} sentences"
            )
        return SentenceMatrix(problem.id, rows.astype(np.float64))

    rows = np.zeros((problem.n_sentences, config.dim), dtype=np.float64)
    if config.backend == "hashed_char_ngram":
        bucket_cache: dict[str, int] = {}
        for i, sentence in enumerate(problem.sentences):
            rows[i] = _hashed_ngram_row(sentence, config, bucket_cache)
    else:
        for i, sentence in enumerate(problem.sentences):
            rows[i] = _stylometric_row(sentence, config)
    if config.normalize:
        rows = l2_normalize_rows(rows)
    return SentenceMatrix(problem.id, rows)


@dataclass
class EmbeddingStore:
    """In-memory image of an embedding file: float32 rows indexed by problem."""

    dim: int
    index: dict[str, tuple[int, int]]  # problem_id -> (row_offset, n_sentences)
    data: np.ndarray  # (total_rows, dim) float32

    def __contains__(self, problem_id: str) -> bool:
        return problem_id in self.index

    def get(self, problem_id: str) -> np.ndarray:
        entry = self.index.get(problem_id)
        if entry is None:
            raise DataError(f"embedding store has no rows for {problem_id!r}")
        offset, n = entry
        return self.data[offset : offset + n]


def write_embedding_file(
    path: str | Path, problems: Iterable[tuple[str, np.ndarray]], dim: int
) -> None:
    """Write per-problem float32 row blocks in the portable binary layout.

    Layout (little-endian): 8-byte magic, u32 version, u32 dim, u64 problem
    count, then per problem a u16 id length, the UTF-8 id and a u32 sentence
    count, followed by one contiguous float32 row block in problem order.
    A JSON manifest sidecar duplicates the index for human inspection.
    """
    entries = []
    blocks = []
    for problem_id, rows in problems:
        rows = np.asarray(rows, dtype="<f4")
        if rows.ndim != 2 or rows.shape[1] != dim:
            raise ShapeError(f"{problem_id}: rows must be (n, {dim}), got {rows.shape}")
        entries.append((problem_id, rows.shape[0]))
        blocks.append(rows)

    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<II", EMB_VERSION, dim))
        fh.write(struct.pack("<Q", len(entries)))
        for problem_id, n in entries:
            encoded = problem_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise DataError(f"problem id too long: {problem_id[:32]}...")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", n))
        for rows in blocks:
            fh.write(rows.tobytes(order="C"))

    manifest = {
        "format": EMB_MAGIC.decode("ascii"),
        "version": EMB_VERSION,
        "dim": dim,
        "total_rows": int(sum(n for _, n in entries)),
        "problems": [{"id": pid, "n_sentences": n} for pid, n in entries],
    }
    Path(str(path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )


def load_embedding_file(path: str | Path) -> EmbeddingStore:
    """Read an embedding file into memory, validating the header and length."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embedding file not found: {path}")
    raw = path.read_bytes()
    view = memoryview(raw)
    if len(raw) < 24:
        raise DataError(f"{path.name}: truncated header")
    if bytes(view[:8]) != EMB_MAGIC:
        raise DataError(f"{path.name}: bad magic {bytes(view[:8])!r}")
    version, dim = struct.unpack_from("<II", view, 8)
    if version != EMB_VERSION:
        raise DataError(f"{path.name}: unsupported version {version}")
    if dim < 1:
        raise DataError(f"{path.name}: invalid dim {dim}")
    (problem_count,) = struct.unpack_from("<Q", view, 16)

    offset = 24
    index: dict[str, tuple[int, int]] = {}
    order: list[tuple[str, int]] = []
    total_rows = 0
    for _ in range(problem_count):
        if offset + 2 > len(raw):
            raise DataError(f"{path.name}: truncated index")
        (id_len,) = struct.unpack_from("<H", view, offset)
        offset += 2
        if offset + id_len + 4 > len(raw):
            raise DataError(f"{path.name}: truncated index")
        problem_id = bytes(view[offset : offset + id_len]).decode("utf-8")
        offset += id_len
        (n,) = struct.unpack_from("<I", view, offset)
        offset += 4
        if problem_id in index:
            raise DataError(f"{path.name}: duplicate problem id {problem_id!r}")
        index[problem_id] = (total_rows, n)
        order.append((problem_id, n))
        total_rows += n

    expected_bytes = total_rows * dim * 4
    remaining = len(raw) - offset
    if remaining < expected_bytes:
        raise DataError(
            f"{path.name}: truncated data section: need {expected_bytes} bytes, have {remaining}"
        )
    if remaining > expected_bytes:
        raise DataError(
            f"{path.name}: trailing garbage: {remaining - expected_bytes} extra bytes"
        )
    data = np.frombuffer(raw, dtype="<f4", count=total_rows * dim, offset=offset)
    data = data.reshape(total_rows, dim).copy()
    return EmbeddingStore(dim=dim, index=index, data=data)
