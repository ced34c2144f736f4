import numpy as np
import pytest

from sspc.corpus import compute_stats
from sspc.errors import DataError
from sspc.synth import _ALPHABET_A, _ALPHABET_B, DUPLICATE_POOL, SynthConfig, make_synthetic_dataset


def test_generator_is_deterministic():
    a = make_synthetic_dataset(SynthConfig(n_problems=5, seed=4))
    b = make_synthetic_dataset(SynthConfig(n_problems=5, seed=4))
    assert [p.sentences for p in a.problems] == [p.sentences for p in b.problems]
    assert [labels for _, labels in a.items] == [labels for _, labels in b.items]


def test_labels_align_with_problem_lengths():
    dataset = make_synthetic_dataset(SynthConfig(n_problems=20, seed=0))
    for problem, labels in dataset.items:
        assert len(labels) == problem.n_boundaries
        assert set(labels) <= {0, 1}


def test_full_separation_uses_disjoint_alphabets():
    dataset = make_synthetic_dataset(SynthConfig(n_problems=10, seed=1, separation=1.0))
    set_a, set_b = set(_ALPHABET_A), set(_ALPHABET_B)
    for problem, labels in dataset.items:
        kinds = []
        for sentence in problem.sentences:
            letters = {ch for ch in sentence if ch.isalpha()}
            assert letters <= set_a or letters <= set_b  # never mixed
            kinds.append(letters <= set_a)
        # a label of 1 must coincide exactly with an alphabet flip
        for i, label in enumerate(labels):
            assert label == (1 if kinds[i] != kinds[i + 1] else 0)


def test_zero_separation_single_alphabet():
    dataset = make_synthetic_dataset(SynthConfig(n_problems=5, seed=2, separation=0.0))
    for problem in dataset.problems:
        for sentence in problem.sentences:
            assert {ch for ch in sentence if ch.isalpha()} <= set(_ALPHABET_A)


def test_switch_probability_shapes_label_rate():
    dataset = make_synthetic_dataset(
        SynthConfig(n_problems=200, seed=3, switch_prob=0.5, sentences_per_doc=(10, 14))
    )
    labels = [v for _, ls in dataset.items for v in ls]
    rate = sum(labels) / len(labels)
    assert 0.45 <= rate <= 0.55


def test_duplicate_injection_rate_shows_in_stats():
    dataset = make_synthetic_dataset(
        SynthConfig(n_problems=100, seed=5, duplicate_rate=0.1, sentences_per_doc=(9, 12))
    )
    stats = compute_stats(dataset)
    assert stats.n_sentences >= 900
    duplicated = sum(count for _, count in stats.duplicate_table)
    rate = duplicated / stats.n_sentences
    assert 0.06 <= rate <= 0.15
    duplicate_texts = {text for text, _ in stats.duplicate_table}
    assert duplicate_texts <= set(DUPLICATE_POOL)


def test_no_duplicates_by_default():
    dataset = make_synthetic_dataset(SynthConfig(n_problems=50, seed=6))
    stats = compute_stats(dataset)
    assert stats.duplicate_table == []


def test_config_validation():
    with pytest.raises(DataError):
        SynthConfig(n_problems=0)
    with pytest.raises(DataError):
        SynthConfig(separation=1.5)
    with pytest.raises(DataError):
        SynthConfig(switch_prob=0.0)
    with pytest.raises(DataError):
        SynthConfig(duplicate_rate=1.0)
    with pytest.raises(DataError):
        SynthConfig(words_per_sentence=(0, 3))
