"""Model assemblies: QBERT, the QCLS-transformer baseline and the bag-of-words QCLS-end2end baseline."""

import logging
from typing import Dict, List, Optional, Union

import numpy as np

from autodiff import Module
from constants import CLS_POSITION, IGNORE_INDEX, Architecture, NormKind, NSPHead, RunMode
from encoder import Encoder
from exceptions import ConfigurationError, DomainError, NonFiniteError
from layers.embedding import TokenEmbedding
from layers.heads import MeasurementClassificationHead, MLMHead, NSPDenseHead, NSPMeasurementHead
from layers.normalization import unit_normalize, unit_normalize_backward
from layers.regularizers import RegConfig, ortho_regularizers
from models import FinetuneBatch, ModelConfig, ModelOutput, PretrainBatch, init_weights

logger = logging.getLogger(__name__)

Batch = Union[PretrainBatch, FinetuneBatch]


def _check_loss(losses: Dict[str, float]) -> None:
    bad = [name for name, value in losses.items() if not np.isfinite(value)]
    if bad:
        raise NonFiniteError("non-finite loss", bad)


class QBertModel(Module):
    """Complex encoder with MLM + NSP heads (pretrain) or the measurement classifier (finetune).

    A model is built for one ``mode``; calling ``forward`` with the other mode
    raises ``ConfigurationError``. Parameter names are rooted at ``encoder.``,
    ``mlm.``, ``nsp.`` and ``cls_head.``.
    """

    architecture = Architecture.QBERT

    def __init__(self, config: ModelConfig, mode: RunMode = RunMode.PRETRAIN):
        super().__init__("")
        if config.norm_kind is not NormKind.MIXED_LN:
            raise ConfigurationError(
                f"{self.architecture.value} needs norm_kind=mixed_ln so the [CLS] state is a unit vector, "
                f"got {config.norm_kind.value}")
        if config.n_layers < 1:
            raise ConfigurationError(f"{self.architecture.value} needs at least one encoder layer")
        self.config = config
        self.mode = mode
        init_rng, dropout_rng = np.random.default_rng(config.seed).spawn(2)
        self.encoder = self.add_child("encoder", Encoder("encoder", config, dropout_rng))
        self.reg = RegConfig(config.reg_kind, config.reg_lambda)
        self.mlm: Optional[MLMHead] = None
        self.nsp: Optional[Union[NSPMeasurementHead, NSPDenseHead]] = None
        self.cls_head: Optional[MeasurementClassificationHead] = None
        if mode is RunMode.PRETRAIN:
            tied = self.encoder.embedding.token if config.tie_mlm_embeddings else None
            self.mlm = self.add_child("mlm", MLMHead("mlm", config.d_model, config.vocab_size,
                                                     config.hidden_activation, config.mlm_output, tied,
                                                     **config.activation_kwargs()))
            if config.nsp_head is NSPHead.MEASUREMENT:
                self.nsp = self.add_child("nsp", NSPMeasurementHead("nsp", config.d_model))
            else:
                self.nsp = self.add_child("nsp", NSPDenseHead("nsp", config.d_model, config.nsp_head))
        else:
            self.cls_head = self.add_child("cls_head", MeasurementClassificationHead(
                "cls_head", config.d_model, config.n_classes, config.cls_use_bias))
        init_weights(self.parameters(), config.init_scheme, init_rng, config.init_std, config.head_init_std,
                     config.projection_init_std, config.class_state_jitter, config.embedding_init)
        logger.info(f"Built {self.architecture.value} ({mode.value}): {config.n_layers} layers, "
                    f"d_model={config.d_model}, {self.num_parameters()} complex parameters")

    def _check_mode(self, mode: Optional[RunMode]) -> RunMode:
        mode = mode or self.mode
        if mode is not self.mode:
            raise ConfigurationError(f"model was built for {self.mode.value}, cannot run {mode.value}")
        return mode

    def _regularize(self, enc_ctx: dict, batch_size: int):
        if not (self.reg.uses_attention or self.reg.uses_dense):
            return 0.0, []
        attn_ctxs = [layer_ctx["attn"] for layer_ctx in enc_ctx["layers"]]
        dense = self.encoder.dense_layers()
        total, att_grads, dense_grads = ortho_regularizers(
            [c["attn"]["weights"] for c in attn_ctxs], [d.weight.value for d in dense], self.reg, batch_size)
        if self.reg.uses_attention:
            for c, g in zip(attn_ctxs, att_grads):
                c["grad_weights"] = g
        return total, list(zip(dense, dense_grads)) if self.reg.uses_dense else []

    def forward(self, batch: Batch, mode: Optional[RunMode] = None, training: bool = False) -> ModelOutput:
        mode = self._check_mode(mode)
        batch.validate(self.config)
        key_mask = np.asarray(batch.attention_mask).astype(bool)
        hidden, enc_ctx = self.encoder.forward((batch.token_ids, batch.position_ids, batch.segment_ids),
                                               training=training, key_mask=key_mask)
        reg_loss, dense_grads = self._regularize(enc_ctx, hidden.shape[0])
        cls_state = hidden[:, CLS_POSITION, :]
        ctx = {"encoder": enc_ctx, "hidden": hidden, "dense_grads": dense_grads}
        losses: Dict[str, float] = {}
        logits: Dict[str, np.ndarray] = {}

        if mode is RunMode.PRETRAIN:
            selected = np.asarray(batch.mlm_labels) != IGNORE_INDEX
            mlm_logits, mlm_ctx = self.mlm.forward(hidden[selected])
            losses["mlm"], g_mlm = self.mlm.loss(mlm_logits, np.asarray(batch.mlm_labels)[selected])
            nsp_out, nsp_ctx = self.nsp.forward(cls_state)
            losses["nsp"], g_nsp = self.nsp.loss(nsp_out, np.asarray(batch.nsp_labels))
            logits["mlm"], logits["nsp"] = mlm_logits, nsp_out
            ctx.update(selected=selected, mlm=(g_mlm, mlm_ctx), nsp=(g_nsp, nsp_ctx))
        else:
            cls_logits, cls_ctx = self.cls_head.forward(cls_state)
            losses["cls"], g_cls = self.cls_head.loss(cls_logits, np.asarray(batch.class_labels))
            logits["cls"] = cls_logits
            ctx["cls"] = (g_cls, cls_ctx)
        if reg_loss:
            losses["reg"] = reg_loss
        _check_loss(losses)
        return ModelOutput(float(sum(losses.values())), losses, logits, cls_state, ctx)

    def backward(self, output: ModelOutput) -> None:
        """Accumulate parameter cotangents of ``output.loss``."""
        ctx = output.context
        g_hidden = np.zeros_like(ctx["hidden"])
        if self.mode is RunMode.PRETRAIN:
            g_mlm, mlm_ctx = ctx["mlm"]
            g_hidden[ctx["selected"]] += self.mlm.backward(g_mlm, mlm_ctx)
            g_nsp, nsp_ctx = ctx["nsp"]
            g_hidden[:, CLS_POSITION, :] += self.nsp.backward(g_nsp, nsp_ctx)
        else:
            g_cls, cls_ctx = ctx["cls"]
            g_hidden[:, CLS_POSITION, :] += self.cls_head.backward(g_cls, cls_ctx)
        for dense, grad in ctx["dense_grads"]:
            dense.weight.accumulate(grad)
        self.encoder.backward(g_hidden, ctx["encoder"])

    def encoder_parameters(self) -> List:
        return self.encoder.parameters()


class QCLSTransformer(QBertModel):
    """QBERT's fine-tuning graph trained from random token embeddings."""

    architecture = Architecture.QCLS_TRANSFORMER

    def __init__(self, config: ModelConfig, mode: RunMode = RunMode.FINETUNE):
        if mode is not RunMode.FINETUNE:
            raise ConfigurationError("qcls-transformer has no pretraining heads")
        super().__init__(config, mode)


class QCLSEnd2End(Module):
    """psi = unit_normalize(mean of token embeddings over non-padding positions) -> measurement head."""

    architecture = Architecture.QCLS_END2END

    def __init__(self, config: ModelConfig, mode: RunMode = RunMode.FINETUNE):
        super().__init__("")
        if mode is not RunMode.FINETUNE:
            raise ConfigurationError("qcls-end2end has no pretraining heads")
        self.config = config
        self.mode = mode
        self.embedding = self.add_child("embedding", TokenEmbedding("embedding", config.vocab_size, config.d_model))
        self.cls_head = self.add_child("cls_head", MeasurementClassificationHead(
            "cls_head", config.d_model, config.n_classes, config.cls_use_bias))
        init_weights(self.parameters(), config.init_scheme, np.random.default_rng(config.seed), config.init_std,
                     config.head_init_std, config.projection_init_std, config.class_state_jitter, config.embedding_init)
        logger.info(f"Built qcls-end2end: d_model={config.d_model}, {self.num_parameters()} complex parameters")

    def forward(self, batch: FinetuneBatch, mode: Optional[RunMode] = None, training: bool = False) -> ModelOutput:
        if mode is not None and mode is not RunMode.FINETUNE:
            raise ConfigurationError(f"qcls-end2end cannot run {mode.value}")
        batch.validate(self.config)
        mask = np.asarray(batch.attention_mask).astype(np.float64)
        counts = mask.sum(axis=-1, keepdims=True)
        if np.any(counts == 0):
            raise DomainError("qcls-end2end: empty sequence in batch")
        weights = mask / counts
        embedded, e_ctx = self.embedding.forward(batch.token_ids)
        mean = np.einsum("bs,bsd->bd", weights, embedded)
        psi, norm = unit_normalize(mean)
        cls_logits, cls_ctx = self.cls_head.forward(psi)
        loss, g_cls = self.cls_head.loss(cls_logits, np.asarray(batch.class_labels))
        _check_loss({"cls": loss})
        ctx = {"weights": weights, "embedding": e_ctx, "psi": psi, "norm": norm, "cls": (g_cls, cls_ctx)}
        return ModelOutput(loss, {"cls": loss}, {"cls": cls_logits}, psi, ctx)

    def backward(self, output: ModelOutput) -> None:
        ctx = output.context
        g_cls, cls_ctx = ctx["cls"]
        g_psi = self.cls_head.backward(g_cls, cls_ctx)
        g_mean = unit_normalize_backward(g_psi, ctx["psi"], ctx["norm"])
        self.embedding.backward(ctx["weights"][:, :, None] * g_mean[:, None, :], ctx["embedding"])

    def encoder_parameters(self) -> List:
        return self.embedding.parameters()


Model = Union[QBertModel, QCLSEnd2End]


def build_model(config: ModelConfig, architecture: Architecture = Architecture.QBERT,
                mode: RunMode = RunMode.PRETRAIN) -> Model:
    if architecture is Architecture.QBERT:
        return QBertModel(config, mode)
    if architecture is Architecture.QCLS_TRANSFORMER:
        return QCLSTransformer(config, mode)
    if architecture is Architecture.QCLS_END2END:
        return QCLSEnd2End(config, mode)
    raise ConfigurationError(f"unknown architecture {architecture}")
