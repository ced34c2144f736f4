"""Sentence-level style change detection.

Feature vectors per sentence (hashed character n-grams, surface statistics,
or precomputed embedding files), a stacked bidirectional LSTM that
contextualizes each sentence within its document, and a pair classifier that
emits one change/no-change decision per adjacent sentence pair, together with
the training loop, baselines and macro-F1 evaluation harness around them.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    CorpusStats,
    Dataset,
    Problem,
    compute_stats,
    convert_paragraph_dataset,
    load_dataset,
    split_train_val,
)
from .errors import DataError, ShapeError, SspcError, UsageError  # noqa: F401
from .featurize import (  # noqa: F401
    EmbeddingStore,
    FeatureConfig,
    SentenceMatrix,
    featurize_problem,
    load_embedding_file,
    write_embedding_file,
)
from .model import BoundaryLogits, ModelConfig, ModelParams, init_model, predict  # noqa: F401
from .train import TrainConfig, TrainHistory, train  # noqa: F401
from .evaluation import EvalReport, baseline_predict, evaluate_dataset, macro_f1  # noqa: F401
