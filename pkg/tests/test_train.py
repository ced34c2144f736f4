import numpy as np
import pytest

from sspc.checkpoint import Checkpoint, crc64, load_checkpoint, save_checkpoint
from sspc.corpus import Dataset, Problem
from sspc.errors import DataError, ShapeError
from sspc.featurize import FeatureConfig
from sspc.model import ModelConfig, init_model
from sspc.numerics import AdamState, lr_at
from sspc.synth import SynthConfig, make_synthetic_dataset
from sspc.train import (
    TrainConfig,
    accumulate_batch,
    load_model_from_checkpoint,
    make_checkpoint,
    train,
)

FEATURES = FeatureConfig("hashed_char_ngram", dim=32)
MODEL = ModelConfig(
    input_dim=32, hidden_dim=8, bilstm_layers=2, bilstm_dropout=0.0,
    mlp_hidden_dims=(16, 8), mlp_dropout=0.0, seed=0,
)


def _synth(n=8, seed=3):
    return make_synthetic_dataset(
        SynthConfig(n_problems=n, seed=seed, sentences_per_doc=(4, 6),
                    words_per_sentence=(3, 5))
    )


def _cfg(**kwargs):
    defaults = dict(batch_size=4, total_steps=20, warmup_steps=2, peak_lr=1e-3,
                    min_lr=1e-4, seed=1, val_every=10)
    defaults.update(kwargs)
    return TrainConfig(**defaults)


# ---------------------------------------------------------------------------
# The loop itself
# ---------------------------------------------------------------------------

def test_zero_steps_returns_initial_params():
    params, history = train(MODEL, _cfg(total_steps=0, warmup_steps=0), _synth(), None, FEATURES)
    assert history.records == []
    assert params.checksum() == init_model(MODEL).checksum()


def test_training_reduces_loss():
    data = _synth(n=10, seed=5)
    cfg = _cfg(total_steps=120, warmup_steps=5)
    _, history = train(MODEL, cfg, data, None, FEATURES)
    losses = [r.train_loss for r in history.records]
    assert np.mean(losses[:20]) > np.mean(losses[-20:])


def test_history_matches_schedule_closed_form():
    cfg = _cfg(total_steps=30, warmup_steps=4)
    _, history = train(MODEL, cfg, _synth(), None, FEATURES)
    schedule = cfg.schedule()
    steps = [r.step for r in history.records]
    assert steps == sorted(set(steps))  # strictly increasing
    for record in history.records:
        assert record.lr == lr_at(record.step, schedule)


def test_two_identical_runs_are_bit_identical(tmp_path):
    data = _synth(n=6, seed=9)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cfg_a = _cfg(total_steps=40, history_path=str(out_a / "h.jsonl"), checkpoint_dir=str(out_a))
    cfg_b = _cfg(total_steps=40, history_path=str(out_b / "h.jsonl"), checkpoint_dir=str(out_b))
    out_a.mkdir(); out_b.mkdir()
    params_a, _ = train(MODEL, cfg_a, data, _synth(n=4, seed=2), FEATURES)
    params_b, _ = train(MODEL, cfg_b, data, _synth(n=4, seed=2), FEATURES)
    assert params_a.checksum() == params_b.checksum()
    assert (out_a / "h.jsonl").read_bytes() == (out_b / "h.jsonl").read_bytes()


def test_validation_recorded_at_cadence():
    data = _synth(n=6, seed=1)
    val = _synth(n=4, seed=2)
    _, history = train(MODEL, _cfg(total_steps=20, val_every=5), data, val, FEATURES)
    val_steps = [r.step for r in history.records if r.val_macro_f1 is not None]
    assert val_steps == [5, 10, 15, 20]


def test_rejects_unlabeled_or_empty_training_sets():
    with pytest.raises(DataError):
        train(MODEL, _cfg(), Dataset("empty", []), None, FEATURES)
    unlabeled = Dataset("u", [(Problem("problem-1", ("a", "b")), None)])
    with pytest.raises(DataError):
        train(MODEL, _cfg(), unlabeled, None, FEATURES)
    only_singletons = Dataset("s", [(Problem("problem-1", ("a",)), ())])
    with pytest.raises(DataError):
        train(MODEL, _cfg(), only_singletons, None, FEATURES)


def test_unfeaturizable_problem_rejected():
    config = FeatureConfig("external_embeddings", dim=32)
    with pytest.raises(DataError):
        train(MODEL, _cfg(), _synth(), None, config, store=None)


# ---------------------------------------------------------------------------
# Batch-order invariance
# ---------------------------------------------------------------------------

def test_batch_order_does_not_change_the_gradient():
    from sspc.featurize import featurize_problem

    data = _synth(n=4, seed=11)
    params = init_model(MODEL)
    batch = [
        (p.id, featurize_problem(p, FEATURES), labels) for p, labels in data.items
    ]
    loss_a, grads_a = accumulate_batch(params, batch, dropout_rng=None, mode="eval")
    shuffled = [batch[2], batch[0], batch[3], batch[1]]
    loss_b, grads_b = accumulate_batch(params, shuffled, dropout_rng=None, mode="eval")
    assert loss_a == loss_b
    for key in grads_a:
        np.testing.assert_array_equal(grads_a[key], grads_b[key])


def test_batch_order_invariance_with_dropout_rng():
    from sspc.featurize import featurize_problem

    model = ModelConfig(**{**MODEL.to_dict(), "bilstm_dropout": 0.3,
                           "mlp_dropout": 0.2, "mlp_hidden_dims": (16, 8)})
    data = _synth(n=4, seed=12)
    params = init_model(model)
    batch = [(p.id, featurize_problem(p, FEATURES), labels) for p, labels in data.items]
    rng_state = np.random.default_rng(77).bit_generator.state

    def run(order):
        rng = np.random.default_rng(0)
        rng.bit_generator.state = rng_state
        return accumulate_batch(params, order, dropout_rng=rng)

    loss_a, grads_a = run(batch)
    loss_b, grads_b = run(list(reversed(batch)))
    assert loss_a == loss_b
    for key in grads_a:
        np.testing.assert_array_equal(grads_a[key], grads_b[key])


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

def test_checkpoint_round_trip_is_bitwise(tmp_path):
    params = init_model(MODEL)
    adam = AdamState.for_params(params.tensors)
    rng_a, rng_b = np.random.default_rng(1), np.random.default_rng(2)
    ckpt = make_checkpoint(params, _cfg(), adam, 7, rng_a, rng_b, ["problem-1"], None)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    assert loaded.meta == ckpt.meta
    assert set(loaded.tensors) == set(ckpt.tensors)
    for key, value in ckpt.tensors.items():
        np.testing.assert_array_equal(loaded.tensors[key], value)


def test_truncated_checkpoint_fails_checksum(tmp_path):
    params = init_model(MODEL)
    adam = AdamState.for_params(params.tensors)
    ckpt = make_checkpoint(params, _cfg(), adam, 0, np.random.default_rng(1),
                           np.random.default_rng(2), [], None)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-20])
    with pytest.raises(DataError, match="checksum"):
        load_checkpoint(path)


def test_flipped_byte_fails_checksum(tmp_path):
    params = init_model(MODEL)
    adam = AdamState.for_params(params.tensors)
    ckpt = make_checkpoint(params, _cfg(), adam, 0, np.random.default_rng(1),
                           np.random.default_rng(2), [], None)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    raw = bytearray(path.read_bytes())
    raw[100] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(DataError, match="checksum"):
        load_checkpoint(path)


def test_checkpoint_shape_mismatch_rejected(tmp_path):
    data = _synth(n=4, seed=1)
    cfg = _cfg(total_steps=2, warmup_steps=0, checkpoint_dir=str(tmp_path))
    train(MODEL, cfg, data, None, FEATURES)
    smaller = ModelConfig(**{**MODEL.to_dict(), "hidden_dim": 4})
    with pytest.raises(ShapeError):
        train(smaller, cfg, data, None, FEATURES, resume_from=tmp_path / "final.ckpt")


def test_crc64_known_vector():
    # CRC-64/XZ check value for the ASCII digits "123456789".
    assert crc64(b"123456789") == 0x995DC9BBDF1939FA


def test_load_model_from_checkpoint(tmp_path):
    data = _synth(n=4, seed=1)
    cfg = _cfg(total_steps=3, warmup_steps=0, checkpoint_dir=str(tmp_path))
    params, _ = train(MODEL, cfg, data, None, FEATURES)
    loaded = load_model_from_checkpoint(tmp_path / "final.ckpt")
    assert loaded.checksum() == params.checksum()
    assert loaded.config == MODEL


# ---------------------------------------------------------------------------
# Resume
# ---------------------------------------------------------------------------

def test_resume_reproduces_uninterrupted_run(tmp_path):
    data = _synth(n=6, seed=21)
    val = _synth(n=3, seed=22)
    full_dir = tmp_path / "full"
    cfg = _cfg(total_steps=24, val_every=6, checkpoint_dir=str(full_dir),
               checkpoint_every=12)
    params_full, history_full = train(MODEL, cfg, data, val, FEATURES)

    resumed_dir = tmp_path / "resumed"
    cfg_resume = _cfg(total_steps=24, val_every=6, checkpoint_dir=str(resumed_dir),
                      checkpoint_every=12)
    params_resumed, history_resumed = train(
        MODEL, cfg_resume, data, val, FEATURES,
        resume_from=full_dir / "step-000012.ckpt",
    )
    assert params_resumed.checksum() == params_full.checksum()
    tail = [r.to_dict() for r in history_full.records if r.step > 12]
    resumed = [r.to_dict() for r in history_resumed.records]
    assert resumed == tail  # losses, lrs and val scores all match exactly


def test_resume_rejects_different_train_config(tmp_path):
    data = _synth(n=4, seed=1)
    cfg = _cfg(total_steps=4, warmup_steps=0, checkpoint_dir=str(tmp_path))
    train(MODEL, cfg, data, None, FEATURES)
    different = _cfg(total_steps=4, warmup_steps=0, peak_lr=5e-4, min_lr=5e-5,
                     checkpoint_dir=str(tmp_path))
    with pytest.raises(DataError, match="train config"):
        train(MODEL, different, data, None, FEATURES, resume_from=tmp_path / "final.ckpt")


def test_best_checkpoint_written_with_validation(tmp_path):
    data = _synth(n=6, seed=30)
    val = _synth(n=3, seed=31)
    cfg = _cfg(total_steps=10, val_every=5, checkpoint_dir=str(tmp_path))
    train(MODEL, cfg, data, val, FEATURES)
    assert (tmp_path / "best.ckpt").exists()
    assert (tmp_path / "final.ckpt").exists()
    best = load_checkpoint(tmp_path / "best.ckpt")
    assert best.meta["best"]["step"] in (5, 10)
