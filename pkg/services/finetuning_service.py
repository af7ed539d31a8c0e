"""Classification fine-tuning for QBERT and the two QCLS baselines."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from architectures import Model, build_model
from config import RunConfig
from constants import VOCAB_FILENAME, Architecture, RunMode
from ctensor import unitarity_defect
from exceptions import CheckpointError, ConfigurationError
from models import FINETUNE_MUTABLE_KEYS, FinetuneBatch
from optim import build_optimizer
from services.evaluation_service import EvalResult, EvaluationService
from services.pretraining_service import train_step
from utils.checkpoint import check_config, load_checkpoint, restore_parameters, save_checkpoint
from utils.data_pipeline import LabeledText, classification_batches, encode_classification
from utils.file_manager import RunFileManager
from utils.tokenizer import Vocab

logger = logging.getLogger(__name__)

FINETUNE_COLUMNS = ["epoch", "split", "loss", "accuracy"]


@dataclass
class FinetuneResult:
    model: Model
    vocab: Vocab
    train: EvalResult
    dev: EvalResult
    metrics: List[Dict[str, object]] = field(default_factory=list, repr=False)
    max_unitarity_defect: float = 0.0


def head_unitarity_defect(model: Model) -> float:
    """||U^H U - I||_F of the classification head's current unitary."""
    u, _ = model.cls_head.unitary.unitary()
    return unitarity_defect(u)


class FinetuningService:
    """Trains a measurement-head classifier, optionally from a pretrained encoder.

    ``ckpt=None`` trains QBERT's fine-tuning graph from random weights (the
    QCLS-transformer baseline); ``qcls-end2end`` never loads a checkpoint.
    """

    def __init__(self, config: RunConfig, file_manager: RunFileManager,
                 architecture: Optional[Architecture] = None):
        self.config = config
        self.file_manager = file_manager
        self.architecture = architecture or config.training.architecture

    def _resolve_architecture(self, ckpt: Optional[Path]) -> Architecture:
        arch = self.architecture
        if arch is Architecture.QCLS_END2END and ckpt is not None:
            raise ConfigurationError("qcls-end2end trains from scratch and takes no checkpoint")
        if arch is Architecture.QBERT and ckpt is None:
            logger.info("No checkpoint given, training the qcls-transformer baseline")
            return Architecture.QCLS_TRANSFORMER
        if arch is Architecture.QCLS_TRANSFORMER and ckpt is not None:
            raise ConfigurationError("qcls-transformer starts from random weights; use --arch qbert with --ckpt")
        return arch

    def _prepare(self, train_rows: Sequence[LabeledText], ckpt: Optional[Path]):
        cfg = self.config
        arch = self._resolve_architecture(ckpt)
        if ckpt is None:
            vocab = Vocab.build((row.text for row in train_rows), max_size=cfg.model.vocab_size)
            return build_model(cfg.model, arch, RunMode.FINETUNE), vocab

        checkpoint = load_checkpoint(ckpt)
        if checkpoint.architecture is not Architecture.QBERT:
            raise CheckpointError(f"{ckpt}: expected a qbert checkpoint, got {checkpoint.architecture.value}")
        check_config(checkpoint.config, cfg.model, ignore=FINETUNE_MUTABLE_KEYS)
        vocab_path = Path(ckpt).parent / VOCAB_FILENAME
        if not vocab_path.exists():
            raise CheckpointError(f"vocabulary {vocab_path} not found next to checkpoint {ckpt}")
        vocab = Vocab.load(vocab_path)
        model = build_model(cfg.model, arch, RunMode.FINETUNE)
        restored = restore_parameters(model.named_parameters(), checkpoint, prefix="encoder.")
        logger.info(f"Restored {len(restored)} encoder parameters from {ckpt} (step {checkpoint.step})")
        return model, vocab

    def run(self, train_rows: Sequence[LabeledText], dev_rows: Sequence[LabeledText],
            ckpt: Optional[Union[str, Path]] = None) -> FinetuneResult:
        cfg = self.config
        ckpt = Path(ckpt) if ckpt is not None else None
        model, vocab = self._prepare(train_rows, ckpt)
        train: FinetuneBatch = encode_classification(train_rows, vocab, cfg.model.max_seq_len)
        dev: FinetuneBatch = encode_classification(dev_rows, vocab, cfg.model.max_seq_len)
        optimizer = build_optimizer(cfg.training.optimizer, model.parameters(), cfg.optim)
        evaluator = EvaluationService(cfg.training.batch_size)
        shuffle_rng = np.random.default_rng([cfg.model.seed, 3])
        logger.info(f"Fine-tuning {model.architecture.value} for {cfg.training.epochs} epochs on "
                    f"{len(train_rows)} rows (dev {len(dev_rows)}), seed {cfg.model.seed}")

        metrics: List[Dict[str, object]] = []
        worst_defect = 0.0
        train_eval = dev_eval = None
        for epoch in range(1, cfg.training.epochs + 1):
            for batch in classification_batches(train, cfg.training.batch_size, shuffle_rng):
                train_step(model, optimizer, batch)
            train_eval = evaluator.evaluate(model, train)
            dev_eval = evaluator.evaluate(model, dev)
            for split, result in (("train", train_eval), ("dev", dev_eval)):
                metrics.append({"epoch": epoch, "split": split, "loss": result.loss,
                                "accuracy": result.accuracy if model.config.n_classes > 1 else result.mse})
            defect = head_unitarity_defect(model)
            worst_defect = max(worst_defect, defect)
            if epoch % cfg.training.log_every == 0 or epoch == cfg.training.epochs:
                logger.info(f"epoch {epoch}: train loss={train_eval.loss:.4f} acc={train_eval.accuracy:.4f}, "
                            f"dev loss={dev_eval.loss:.4f} acc={dev_eval.accuracy:.4f}, unitarity={defect:.2e}")

        save_checkpoint(self.file_manager.checkpoint_path, model.named_parameters(), model.config,
                        cfg.training.epochs, model.architecture, RunMode.FINETUNE)
        vocab.save(self.file_manager.vocab_path)
        self.file_manager.save_metrics(metrics, FINETUNE_COLUMNS)
        return FinetuneResult(model, vocab, train_eval, dev_eval, metrics, worst_defect)
