"""Classification metrics and model evaluation on labeled data."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from architectures import Model, build_model
from constants import FINETUNE_BATCH_SIZE, VOCAB_FILENAME, RunMode
from exceptions import CheckpointError
from models import FinetuneBatch
from utils.checkpoint import load_checkpoint, restore_parameters
from utils.data_pipeline import classification_batches
from utils.tokenizer import Vocab

logger = logging.getLogger(__name__)


def confusion_matrix(labels: np.ndarray, predictions: np.ndarray, n_classes: int) -> np.ndarray:
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (np.asarray(labels, dtype=np.int64), np.asarray(predictions, dtype=np.int64)), 1)
    return matrix


def accuracy(labels: np.ndarray, predictions: np.ndarray) -> float:
    labels = np.asarray(labels)
    return float(np.mean(labels == np.asarray(predictions))) if labels.size else 0.0


def f1_score(labels: np.ndarray, predictions: np.ndarray, n_classes: int = 2) -> float:
    """Binary F1 of class 1; macro-averaged over classes when n_classes > 2."""
    matrix = confusion_matrix(labels, predictions, n_classes)
    classes = [1] if n_classes == 2 else range(n_classes)
    scores = []
    for c in classes:
        tp = matrix[c, c]
        fp = matrix[:, c].sum() - tp
        fn = matrix[c, :].sum() - tp
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def matthews_corrcoef(labels: np.ndarray, predictions: np.ndarray, n_classes: int = 2) -> float:
    """Multiclass Matthews correlation from the confusion matrix; 0 when undefined."""
    c = confusion_matrix(labels, predictions, n_classes).astype(np.float64)
    total = c.sum()
    correct = np.trace(c)
    pred_totals, true_totals = c.sum(axis=0), c.sum(axis=1)
    cov_ytyp = correct * total - pred_totals @ true_totals
    cov_ypyp = total ** 2 - pred_totals @ pred_totals
    cov_ytyt = total ** 2 - true_totals @ true_totals
    denom = math.sqrt(cov_ypyp * cov_ytyt)
    return float(cov_ytyp / denom) if denom else 0.0


@dataclass
class EvalResult:
    n: int
    loss: float
    accuracy: float = float("nan")
    f1: float = float("nan")
    mcc: float = float("nan")
    mse: float = float("nan")
    predictions: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, float]:
        out = {"n": self.n, "loss": self.loss}
        if math.isnan(self.mse):
            out.update(accuracy=self.accuracy, f1=self.f1, mcc=self.mcc)
        else:
            out["mse"] = self.mse
        return out


class EvaluationService:
    """Runs a fine-tuned model over labeled data in eval mode."""

    def __init__(self, batch_size: int = FINETUNE_BATCH_SIZE):
        self.batch_size = batch_size

    def evaluate(self, model: Model, data: FinetuneBatch, split: Optional[str] = None) -> EvalResult:
        n_classes = model.config.n_classes
        losses, weights, logits = [], [], []
        for batch in classification_batches(data, self.batch_size):
            out = model.forward(batch, training=False)
            losses.append(out.loss)
            weights.append(batch.token_ids.shape[0])
            logits.append(out.logits["cls"])
        logits = np.concatenate(logits, axis=0)
        loss = float(np.average(losses, weights=weights))
        labels = np.asarray(data.class_labels)
        if n_classes == 1:
            preds = logits[:, 0]
            result = EvalResult(len(labels), loss, mse=float(np.mean((preds - labels) ** 2)), predictions=preds)
        else:
            preds = np.argmax(logits, axis=-1)
            result = EvalResult(len(labels), loss, accuracy(labels, preds), f1_score(labels, preds, n_classes),
                                matthews_corrcoef(labels, preds, n_classes), predictions=preds)
        if split:
            logger.info(f"{split}: " + ", ".join(f"{k}={v:.4f}" for k, v in result.to_dict().items() if k != "n"))
        return result


def load_finetuned(ckpt: Union[str, Path]) -> Tuple[Model, Vocab]:
    """Rebuild a fine-tuned model and its vocabulary from a run directory checkpoint."""
    checkpoint = load_checkpoint(ckpt)
    if checkpoint.mode is not RunMode.FINETUNE:
        raise CheckpointError(f"{ckpt}: evaluation needs a finetune checkpoint, got {checkpoint.mode.value}")
    vocab_path = Path(ckpt).parent / VOCAB_FILENAME
    if not vocab_path.exists():
        raise CheckpointError(f"vocabulary {vocab_path} not found next to checkpoint {ckpt}")
    model = build_model(checkpoint.config, checkpoint.architecture, RunMode.FINETUNE)
    restore_parameters(model.named_parameters(), checkpoint)
    return model, Vocab.load(vocab_path)
