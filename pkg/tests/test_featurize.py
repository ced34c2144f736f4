import numpy as np
import pytest

from sspc.corpus import Problem
from sspc.errors import DataError, ShapeError
from sspc.featurize import (
    EmbeddingStore,
    FeatureConfig,
    featurize_problem,
    l2_normalize_rows,
    load_embedding_file,
    stylometric_counts,
    write_embedding_file,
)


def reference_fnv1a64(data: bytes, seed: int) -> int:
    """Independent scalar re-implementation of the hash used by the library."""
    state = 0xCBF29CE484222325 ^ (seed & 0xFFFFFFFFFFFFFFFF)
    for byte in data:
        state = state ^ byte
        state = (state * 0x100000001B3) % (1 << 64)
    return state


def reference_hashed_row(sentence: str, dim: int, ngram_range, seed: int) -> np.ndarray:
    """Brute-force n-gram enumeration against the reference hash."""
    row = np.zeros(dim)
    lo, hi = ngram_range
    for order in range(lo, hi + 1):
        for i in range(len(sentence) - order + 1):
            ngram = sentence[i : i + order]
            row[reference_fnv1a64(ngram.encode("utf-8"), seed) % dim] += 1.0
    return row


# ---------------------------------------------------------------------------
# Hashed n-gram backend
# ---------------------------------------------------------------------------

def test_empty_sentence_gives_zero_row():
    config = FeatureConfig("hashed_char_ngram", dim=16, ngram_range=(1, 2), normalize=True)
    matrix = featurize_problem(Problem("p", ("",)), config)
    np.testing.assert_array_equal(matrix.rows, np.zeros((1, 16)))


def test_identical_sentences_identical_rows():
    config = FeatureConfig("hashed_char_ngram", dim=32)
    matrix = featurize_problem(Problem("p", ("same text", "same text")), config)
    np.testing.assert_array_equal(matrix.rows[0], matrix.rows[1])


def test_hashed_backend_matches_reference_enumeration():
    config = FeatureConfig("hashed_char_ngram", dim=8, ngram_range=(1, 2), hash_seed=0,
                           normalize=False)
    matrix = featurize_problem(Problem("p", ("ab",)), config)
    expected = reference_hashed_row("ab", 8, (1, 2), 0)
    np.testing.assert_array_equal(matrix.rows[0], expected)
    assert expected.sum() == 3.0  # n-grams: "a", "b", "ab"


@pytest.mark.parametrize("seed", [0, 1, 12345])
def test_hashed_backend_matches_reference_on_varied_text(seed):
    sentences = ("The quick brown fox.", "Punctuation, too!", "digits 123", "")
    config = FeatureConfig("hashed_char_ngram", dim=64, ngram_range=(1, 3), hash_seed=seed,
                           normalize=False)
    matrix = featurize_problem(Problem("p", sentences), config)
    for row, sentence in zip(matrix.rows, sentences):
        np.testing.assert_array_equal(row, reference_hashed_row(sentence, 64, (1, 3), seed))


def test_featurize_is_deterministic():
    config = FeatureConfig("hashed_char_ngram", dim=64)
    problem = Problem("p", ("some sentence", "another one"))
    a = featurize_problem(problem, config)
    b = featurize_problem(problem, config)
    np.testing.assert_array_equal(a.rows, b.rows)


def test_rows_independent_of_surrounding_problems():
    # Per-sentence locality: the same sentence featurizes identically anywhere.
    config = FeatureConfig("hashed_char_ngram", dim=32)
    alone = featurize_problem(Problem("a", ("shared sentence",)), config)
    packed = featurize_problem(Problem("b", ("other", "shared sentence", "more")), config)
    np.testing.assert_array_equal(alone.rows[0], packed.rows[1])


def test_normalized_rows_have_unit_or_zero_norm():
    config = FeatureConfig("hashed_char_ngram", dim=32, normalize=True)
    matrix = featurize_problem(Problem("p", ("hello there", "", "x")), config)
    norms = np.linalg.norm(matrix.rows, axis=1)
    for norm in norms:
        assert norm == 0.0 or abs(norm - 1.0) < 1e-12


def test_l2_normalize_keeps_zero_rows_zero():
    rows = np.array([[0.0, 0.0], [3.0, 4.0]])
    out = l2_normalize_rows(rows)
    np.testing.assert_array_equal(out[0], np.zeros(2))
    np.testing.assert_allclose(out[1], [0.6, 0.8])


# ---------------------------------------------------------------------------
# Stylometric backend
# ---------------------------------------------------------------------------

def test_stylometric_counts_by_hand():
    # "Ab1, cd!" -> 8 chars, 2 punctuation, 1 upper, 1 digit, words "Ab1," "cd!"
    counts = stylometric_counts("Ab1, cd!")
    assert counts[0] == 8.0
    assert counts[1] == 2.0
    assert counts[2] == pytest.approx(1 / 8)
    assert counts[3] == pytest.approx(1 / 8)
    assert counts[4] == pytest.approx((4 + 3) / 2)


def test_stylometric_backend_pads_to_dim():
    config = FeatureConfig("stylometric", dim=8, normalize=False)
    matrix = featurize_problem(Problem("p", ("Hi there",)), config)
    assert matrix.rows.shape == (1, 8)
    np.testing.assert_array_equal(matrix.rows[0][5:], np.zeros(3))


def test_stylometric_backend_truncates_to_small_dim():
    config = FeatureConfig("stylometric", dim=2, normalize=False)
    matrix = featurize_problem(Problem("p", ("Hi there!",)), config)
    assert matrix.rows.shape == (1, 2)
    assert matrix.rows[0][0] == 9.0  # char count survives truncation


# ---------------------------------------------------------------------------
# Embedding file format
# ---------------------------------------------------------------------------

def _sample_store_payload(rng):
    return [
        ("problem-1", rng.normal(size=(3, 4)).astype(np.float32)),
        ("problem-2", rng.normal(size=(1, 4)).astype(np.float32)),
    ]


def test_embedding_file_header_arithmetic(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "vectors.emb"
    write_embedding_file(path, _sample_store_payload(rng), dim=4)
    store = load_embedding_file(path)
    assert store.dim == 4
    assert store.data.shape == (4, 4)
    assert store.index["problem-1"] == (0, 3)
    assert store.index["problem-2"] == (3, 1)


def test_embedding_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    payload = _sample_store_payload(rng)
    path = tmp_path / "vectors.emb"
    write_embedding_file(path, payload, dim=4)
    store = load_embedding_file(path)
    for problem_id, rows in payload:
        np.testing.assert_array_equal(store.get(problem_id), rows)


def test_embedding_manifest_sidecar(tmp_path):
    import json

    rng = np.random.default_rng(2)
    path = tmp_path / "vectors.emb"
    write_embedding_file(path, _sample_store_payload(rng), dim=4)
    manifest = json.loads((tmp_path / "vectors.emb.manifest.json").read_text())
    assert manifest["dim"] == 4
    assert manifest["total_rows"] == 4
    assert [p["id"] for p in manifest["problems"]] == ["problem-1", "problem-2"]


def test_truncated_data_section_rejected(tmp_path):
    rng = np.random.default_rng(3)
    path = tmp_path / "vectors.emb"
    write_embedding_file(path, _sample_store_payload(rng), dim=4)
    raw = path.read_bytes()
    path.write_bytes(raw[:-10])  # cut mid-row
    with pytest.raises(DataError, match="truncated data"):
        load_embedding_file(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "vectors.emb"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(DataError, match="bad magic"):
        load_embedding_file(path)


def test_trailing_garbage_rejected(tmp_path):
    rng = np.random.default_rng(4)
    path = tmp_path / "vectors.emb"
    write_embedding_file(path, _sample_store_payload(rng), dim=4)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(DataError, match="trailing garbage"):
        load_embedding_file(path)


def test_duplicate_problem_id_rejected(tmp_path):
    rng = np.random.default_rng(5)
    path = tmp_path / "vectors.emb"
    rows = rng.normal(size=(2, 4)).astype(np.float32)
    write_embedding_file(path, [("problem-1", rows), ("problem-1", rows)], dim=4)
    with pytest.raises(DataError, match="duplicate problem id"):
        load_embedding_file(path)


# ---------------------------------------------------------------------------
# External backend wiring
# ---------------------------------------------------------------------------

def _store_for(problem_id, n, dim, rng):
    data = rng.normal(size=(n, dim)).astype(np.float32)
    return EmbeddingStore(dim=dim, index={problem_id: (0, n)}, data=data)


def test_external_backend_returns_store_rows():
    rng = np.random.default_rng(6)
    store = _store_for("p", 2, 4, rng)
    config = FeatureConfig("external_embeddings", dim=4)
    matrix = featurize_problem(Problem("p", ("a", "b")), config, store)
    np.testing.assert_allclose(matrix.rows, store.data.astype(np.float64))


def test_external_backend_requires_store():
    config = FeatureConfig("external_embeddings", dim=4)
    with pytest.raises(DataError, match="requires an embedding store"):
        featurize_problem(Problem("p", ("a",)), config)


def test_external_backend_rejects_missing_problem():
    rng = np.random.default_rng(7)
    store = _store_for("other", 1, 4, rng)
    config = FeatureConfig("external_embeddings", dim=4)
    with pytest.raises(DataError, match="no rows"):
        featurize_problem(Problem("p", ("a",)), config, store)


def test_external_backend_rejects_dim_mismatch():
    rng = np.random.default_rng(8)
    store = _store_for("p", 1, 8, rng)
    config = FeatureConfig("external_embeddings", dim=4)
    with pytest.raises(ShapeError, match="dim"):
        featurize_problem(Problem("p", ("a",)), config, store)


def test_external_backend_rejects_sentence_count_mismatch():
    rng = np.random.default_rng(9)
    store = _store_for("p", 1, 4, rng)
    config = FeatureConfig("external_embeddings", dim=4)
    with pytest.raises(DataError, match="sentences"):
        featurize_problem(Problem("p", ("a", "b")), config, store)


def test_feature_config_validation():
    with pytest.raises(DataError):
        FeatureConfig("nope")
    with pytest.raises(DataError):
        FeatureConfig("hashed_char_ngram", dim=0)
    with pytest.raises(DataError):
        FeatureConfig("hashed_char_ngram", ngram_range=(3, 1))
