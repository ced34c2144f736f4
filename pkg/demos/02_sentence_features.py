"""Sentence featurization backends and the portable embedding file format.

Run from the repository root: python demos/02_sentence_features.py
"""

import tempfile
from pathlib import Path

import numpy as np

from sspc.corpus import Problem
from sspc.featurize import (
    FeatureConfig,
    featurize_problem,
    load_embedding_file,
    write_embedding_file,
)

problem = Problem("problem-1", ("The quick brown fox.", "the quick brown fox", "!!!"))

# Hashed character n-grams: order-1..3 substrings hashed into d buckets.
ngram = FeatureConfig("hashed_char_ngram", dim=64, ngram_range=(1, 3))
matrix = featurize_problem(problem, ngram)
print("hashed n-gram matrix:", matrix.rows.shape)
print("row norms (L2-normalized):", np.linalg.norm(matrix.rows, axis=1))

# Surface statistics: length, punctuation, case, digits, mean word length.
stylo = FeatureConfig("stylometric", dim=8, normalize=False)
print("\nstylometric rows:")
print(featurize_problem(problem, stylo).rows[:, :5])

# Precomputed embeddings travel in a small binary container with a JSON
# manifest sidecar; the loader validates magic, version, dim and length.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "vectors.emb"
    rows = np.random.default_rng(0).normal(size=(3, 16)).astype(np.float32)
    write_embedding_file(path, [("problem-1", rows)], dim=16)
    store = load_embedding_file(path)
    print("\nembedding store dim:", store.dim, "index:", dict(store.index))
    external = FeatureConfig("external_embeddings", dim=16)
    loaded = featurize_problem(problem, external, store)
    print("external rows equal written rows:",
          bool(np.array_equal(loaded.rows, rows.astype(np.float64))))
