"""Synthetic two-author corpora with a controllable style gap.

Each author is a character-distribution generator over half of the alphabet.
At separation 1.0 the two alphabets are disjoint; at 0.0 the second author
samples exactly like the first, leaving boundary labels with no signal at
all. An optional duplicate injector replaces sentences with entries from a
small shared boilerplate pool to mimic the repeated-sentence regime of forum
scrapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, Problem, validate_labels
from .errors import DataError

_ALPHABET_A = "abcdefghijklm"
_ALPHABET_B = "nopqrstuvwxyz"

DUPLICATE_POOL = (
    "please read the rules before posting.",
    "this thread is now locked.",
    "i am a bot, and this action was performed automatically.",
)


@dataclass(frozen=True)
class SynthConfig:
    n_problems: int = 100
    words_per_sentence: tuple[int, int] = (4, 9)
    sentences_per_doc: tuple[int, int] = (8, 16)
    word_length: tuple[int, int] = (2, 7)
    separation: float = 1.0
    switch_prob: float = 0.5
    duplicate_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_problems < 1:
            raise DataError("n_problems must be >= 1")
        for name, (lo, hi) in (
            ("words_per_sentence", self.words_per_sentence),
            ("sentences_per_doc", self.sentences_per_doc),
            ("word_length", self.word_length),
        ):
            if not (1 <= lo <= hi):
                raise DataError(f"invalid {name} range ({lo}, {hi})")
        if not (0.0 <= self.separation <= 1.0):
            raise DataError("separation must be in [0, 1]")
        if not (0.0 < self.switch_prob < 1.0):
            raise DataError("switch_prob must be in (0, 1)")
        if not (0.0 <= self.duplicate_rate < 1.0):
            raise DataError("duplicate_rate must be in [0, 1)")


def _sample_word(rng: np.random.Generator, author: int, config: SynthConfig) -> str:
    lo, hi = config.word_length
    length = int(rng.integers(lo, hi + 1))
    chars = []
    for _ in range(length):
        # Author 1 leans on the second alphabet proportionally to separation.
        if author == 1 and rng.random() < config.separation:
            chars.append(_ALPHABET_B[int(rng.integers(0, len(_ALPHABET_B)))])
        else:
            chars.append(_ALPHABET_A[int(rng.integers(0, len(_ALPHABET_A)))])
    return "".join(chars)


def _sample_sentence(rng: np.random.Generator, author: int, config: SynthConfig) -> str:
    lo, hi = config.words_per_sentence
    n_words = int(rng.integers(lo, hi + 1))
    words = [_sample_word(rng, author, config) for _ in range(n_words)]
    return " ".join(words) + "."


def make_synthetic_dataset(config: SynthConfig, split_name: str = "synthetic") -> Dataset:
    """Generate a labeled dataset: label 1 exactly where the author flips."""
    rng = np.random.default_rng(config.seed)
    items = []
    for k in range(1, config.n_problems + 1):
        lo, hi = config.sentences_per_doc
        n_sentences = int(rng.integers(lo, hi + 1))
        author = int(rng.integers(0, 2))
        sentences = []
        changes = []
        for position in range(n_sentences):
            if position > 0:
                switched = rng.random() < config.switch_prob
                if switched:
                    author = 1 - author
                changes.append(1 if switched else 0)
            text = _sample_sentence(rng, author, config)
            if config.duplicate_rate > 0.0 and rng.random() < config.duplicate_rate:
                text = DUPLICATE_POOL[int(rng.integers(0, len(DUPLICATE_POOL)))]
            sentences.append(text)
        problem = Problem(f"problem-{k}", tuple(sentences))
        items.append((problem, validate_labels(problem, changes)))
    return Dataset(split_name, items)
