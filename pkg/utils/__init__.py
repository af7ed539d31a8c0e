"""Utilities package for QBERT: files, checkpoints, tokenizer and data pipeline."""

from .checkpoint import Checkpoint, check_config, load_checkpoint, restore_parameters, save_checkpoint
from .data_pipeline import (
    LabeledText,
    classification_batches,
    encode_classification,
    load_corpus,
    load_labeled_tsv,
    mask_tokens,
    tokenize_and_mask,
)
from .file_manager import RunFileManager
from .tokenizer import Vocab

__all__ = [
    "Checkpoint",
    "check_config",
    "load_checkpoint",
    "restore_parameters",
    "save_checkpoint",
    "LabeledText",
    "classification_batches",
    "encode_classification",
    "load_corpus",
    "load_labeled_tsv",
    "mask_tokens",
    "tokenize_and_mask",
    "RunFileManager",
    "Vocab",
]
