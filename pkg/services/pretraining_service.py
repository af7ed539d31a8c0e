"""MLM + NSP pretraining loop."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence

import numpy as np

from architectures import QBertModel
from config import RunConfig
from constants import RunMode
from models import ModelOutput, PretrainBatch
from optim import ComplexAdamWBase, build_optimizer
from utils.checkpoint import save_checkpoint
from utils.data_pipeline import Document, tokenize_and_mask
from utils.file_manager import RunFileManager
from utils.tokenizer import Vocab

logger = logging.getLogger(__name__)

PRETRAIN_COLUMNS = ["step", "loss_mlm", "loss_nsp", "loss_total"]


def train_step(model, optimizer: ComplexAdamWBase, batch) -> ModelOutput:
    """zero_grad -> forward (training) -> backward -> optimizer step."""
    optimizer.zero_grad()
    output = model.forward(batch, training=True)
    model.backward(output)
    optimizer.step()
    return output


@dataclass
class PretrainResult:
    model: QBertModel
    vocab: Vocab
    metrics: List[Dict[str, float]] = field(default_factory=list, repr=False)

    def mean_loss(self, key: str, first: int, last: int) -> float:
        """Mean of ``key`` over steps in [first, last]."""
        values = [row[key] for row in self.metrics if first <= row["step"] <= last]
        return float(np.mean(values))


class PretrainingService:
    """Builds the vocabulary and model, then trains for ``training.steps`` steps."""

    def __init__(self, config: RunConfig, file_manager: RunFileManager):
        self.config = config
        self.file_manager = file_manager

    def _batches(self, documents: Sequence[Document], vocab: Vocab, rng: np.random.Generator) -> Iterator[PretrainBatch]:
        cfg = self.config
        epoch = 0
        while True:
            epoch += 1
            logger.debug(f"pretraining data pass {epoch}")
            yield from tokenize_and_mask(documents, vocab, rng, cfg.model.max_seq_len,
                                         cfg.training.batch_size, cfg.training.mask_prob)

    def run(self, documents: Sequence[Document]) -> PretrainResult:
        cfg = self.config
        vocab = Vocab.build((s for doc in documents for s in doc), max_size=cfg.model.vocab_size)
        model = QBertModel(cfg.model, RunMode.PRETRAIN)
        optimizer = build_optimizer(cfg.training.optimizer, model.parameters(), cfg.optim)
        data_rng = np.random.default_rng([cfg.model.seed, 2])
        logger.info(f"Pretraining for {cfg.training.steps} steps, batch {cfg.training.batch_size}, "
                    f"seed {cfg.model.seed}, vocab {len(vocab)}")

        metrics: List[Dict[str, float]] = []
        batches = self._batches(documents, vocab, data_rng)
        for step in range(1, cfg.training.steps + 1):
            output = train_step(model, optimizer, next(batches))
            metrics.append({
                "step": step,
                "loss_mlm": output.losses["mlm"],
                "loss_nsp": output.losses["nsp"],
                "loss_total": output.loss,
            })
            if step % cfg.training.log_every == 0 or step == 1:
                logger.info(f"step {step}: mlm={output.losses['mlm']:.4f} nsp={output.losses['nsp']:.4f} "
                            f"total={output.loss:.4f} lr_mult={optimizer.current_multiplier:.3f}")
            if cfg.training.checkpoint_every and step % cfg.training.checkpoint_every == 0:
                save_checkpoint(self.file_manager.step_checkpoint_path(step), model.named_parameters(),
                                cfg.model, step, model.architecture, RunMode.PRETRAIN)
                self.file_manager.cleanup_old_files()

        save_checkpoint(self.file_manager.checkpoint_path, model.named_parameters(), cfg.model,
                        cfg.training.steps, model.architecture, RunMode.PRETRAIN)
        vocab.save(self.file_manager.vocab_path)
        self.file_manager.save_metrics(metrics, PRETRAIN_COLUMNS)
        return PretrainResult(model, vocab, metrics)
