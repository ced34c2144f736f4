"""End to end on a synthetic two-author corpus: generate, train, evaluate,
and compare against the trivial baselines. Takes ~half a minute on a CPU.

Run from the repository root: python demos/04_train_and_evaluate.py
"""

import tempfile
from pathlib import Path

from sspc.evaluation import baseline_predict, evaluate_dataset, format_report_table, score_predictions
from sspc.featurize import FeatureConfig
from sspc.model import ModelConfig
from sspc.synth import SynthConfig, make_synthetic_dataset
from sspc.train import TrainConfig, load_model_from_checkpoint, train

# Two synthetic "authors" write with disjoint halves of the alphabet;
# label 1 marks every boundary where the author flips.
train_set = make_synthetic_dataset(SynthConfig(n_problems=200, separation=1.0, seed=1), "demo-train")
val_set = make_synthetic_dataset(SynthConfig(n_problems=50, separation=1.0, seed=2), "demo-val")

features = FeatureConfig("hashed_char_ngram", dim=256)
model_cfg = ModelConfig(input_dim=256, hidden_dim=32, bilstm_layers=2,
                        bilstm_dropout=0.1, mlp_hidden_dims=(64, 32),
                        mlp_dropout=0.1, seed=7)

with tempfile.TemporaryDirectory() as tmp:
    train_cfg = TrainConfig(batch_size=4, total_steps=600, warmup_steps=50,
                            peak_lr=2e-3, min_lr=4e-4, seed=7, val_every=100,
                            checkpoint_dir=tmp)
    params, history = train(model_cfg, train_cfg, train_set, val_set, features)
    for record in history.records:
        if record.val_macro_f1 is not None:
            print(f"step {record.step:4d}  lr {record.lr:.2e}  "
                  f"loss {record.train_loss:.4f}  val macro-F1 {record.val_macro_f1:.4f}")
    best = load_model_from_checkpoint(Path(tmp) / "best.ckpt")

rows = []
report = evaluate_dataset(best, val_set, features)
rows.append(("classifier", "demo-val", report.macro_f1))
for kind in ("random", "predict1", "predict0"):
    preds = [(p.id, baseline_predict(kind, p, seed=7)) for p in val_set.problems]
    rows.append((kind.upper(), "demo-val", score_predictions(val_set, preds).macro_f1))

print()
print(format_report_table(rows))
