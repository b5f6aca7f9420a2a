"""Neural emoji prediction for tweets, built from scratch on a gradient tape."""

from .corpus import Example, LabelSet, SplitCorpus, load_corpus, make_batches
from .losses_optim import (
    FocalConfig, OptimConfig, Optimizer, balanced_class_weights, cross_entropy,
    focal_loss,
)
from .metrics import confusion_matrix, predict_labels, report_from_confusion
from .models import ModelConfig, build_model
from .tokenizer import Vocabulary, build_vocab, encode, tokenize
from .training import overfit_probe, train

__version__ = "0.1.0"

__all__ = [
    "Example", "FocalConfig", "LabelSet", "ModelConfig", "OptimConfig",
    "Optimizer", "SplitCorpus", "Vocabulary", "balanced_class_weights",
    "build_model", "build_vocab", "confusion_matrix", "cross_entropy",
    "encode", "focal_loss", "load_corpus", "make_batches", "overfit_probe",
    "predict_labels", "report_from_confusion", "tokenize", "train",
]
