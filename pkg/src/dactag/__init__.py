"""CNN + CRF dialog-act tagging from scratch in numpy."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .corpus import (
    ContextWindow,
    Conversation,
    CorpusSplit,
    LabelSet,
    Utterance,
    Vocabulary,
    build_vocab,
    load_corpus,
    make_windows,
    split_conversations,
    strip_punctuation,
)
from .evaluation import EvalReport, MatrixSpec, VariantSpec, accuracy, evaluate, majority_baseline, run_matrix
from .model import DialogActModel, WindowBatch, predict_label
from .trainer import fit

__version__ = "0.1.0"
