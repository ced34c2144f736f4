"""Corpus handling: loading problem files, summary statistics, and turning
paragraph-grouped documents into sentence-level boundary labels.

Run from the repository root: python demos/01_corpus_and_stats.py
"""

from pathlib import Path

from sspc.corpus import (
    compute_stats,
    convert_paragraph_dataset,
    format_stats_table,
    load_dataset,
    split_train_val,
)

FIXTURE = Path(__file__).parent.parent / "tests" / "fixtures" / "pan20"

# A dataset directory holds problem-<k>.txt (one sentence per line) and
# truth-problem-<k>.json ({"changes": [0|1, ...]}, one label per adjacency).
dataset = load_dataset(FIXTURE, split_name="fixture")
print(f"loaded {len(dataset)} problems")
problem, labels = dataset.items[0]
print(f"first problem {problem.id}: {problem.n_sentences} sentences, labels {labels}")

print()
print(format_stats_table(compute_stats(dataset), name="fixture"))

# Paragraph-grouped documents become sentence-level problems: transitions
# inside a paragraph are 0, the first sentence of each new paragraph is 1.
print()
converted = convert_paragraph_dataset(
    [("problem-1", [["one", "two"], ["three"], ["four", "five"]])]
)
cp, cl = converted.items[0]
print("converted sentences:", cp.sentences)
print("converted labels:   ", cl)

# Deterministic train/validation split.
train, val = split_train_val(dataset, val_fraction=0.2, seed=7)
print()
print(f"split: {len(train)} train / {len(val)} val problems")
print("val ids:", [p.id for p in val.problems])
