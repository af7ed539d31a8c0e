"""Finite-difference gradient suite over the whole layer zoo."""

import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff import GradCheckReport, Layer, Parameter, Sequential, grad_check
from constants import (
    GRADCHECK_SEEDS,
    GRADCHECK_STEP,
    GRADCHECK_TOL,
    GRADCHECK_UNITARY_TOL,
    AttentionActivation,
    HiddenActivation,
    MLMOutput,
    NormKind,
    NSPHead,
)
from encoder import EncoderLayer
from exceptions import ConfigurationError
from layers.activations import ComplexActivation
from layers.attention import MultiHeadAttention
from layers.dense import ComplexDense, UnitaryLayer
from layers.embedding import SplitEmbedding
from layers.heads import MeasurementClassificationHead, MLMHead, NSPDenseHead, NSPMeasurementHead
from layers.normalization import Normalization
from models import ModelConfig

logger = logging.getLogger(__name__)

DIM = 4
SEQ = 3
BATCH = 2
HEADS = 2
VOCAB = 7


@dataclass
class GradCase:
    layer: Layer
    inputs: Any
    tolerance: float = GRADCHECK_TOL
    check_inputs: bool = True
    forward_kwargs: Optional[Dict[str, Any]] = None


def _complex(rng: np.random.Generator, *shape, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    z = _complex(rng, n, d)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def randomize_parameters(layer: Layer, rng: np.random.Generator, scale: float = 0.5) -> None:
    """Random values for every parameter so gains, biases and heads are off their neutral init."""
    for p in layer.parameters():
        if p.role == "attn_bias":
            continue
        value = _complex(rng, *p.shape, scale=scale)
        p.assign(p.project(value) if p.project is not None else value)
        p.zero_grad()


class GradCheckService:
    """Builds every layer at small sizes and grad-checks it on several seeds."""

    def __init__(self, model_config: Optional[ModelConfig] = None, step: float = GRADCHECK_STEP,
                 seeds: Sequence[int] = GRADCHECK_SEEDS):
        # variant selectors come from the given config, sizes are fixed small
        self.model_config = replace(model_config or ModelConfig(), vocab_size=VOCAB + 1, d_model=DIM, d_hidden=6,
                                    n_layers=1, n_heads=HEADS, max_seq_len=SEQ, dropout_p=0.0)
        self.step = step
        self.seeds = list(seeds)
        self.cases = self._build_cases()

    def _build_cases(self) -> Dict[str, Callable[[np.random.Generator], GradCase]]:
        act_kwargs = self.model_config.activation_kwargs()
        key_mask = np.array([[1, 1, 1], [1, 1, 0]], dtype=bool)
        cases: Dict[str, Callable[[np.random.Generator], GradCase]] = {
            "dense": lambda rng: GradCase(ComplexDense("dense", DIM, 3), _complex(rng, BATCH, SEQ, DIM)),
            "unitary": lambda rng: GradCase(UnitaryLayer("unitary", DIM), _complex(rng, BATCH, DIM),
                                            GRADCHECK_UNITARY_TOL),
            "composite": lambda rng: GradCase(Sequential("composite", [
                ComplexDense("composite.in", DIM, 5),
                ComplexActivation("composite.act", HiddenActivation.SPLIT_GELU),
                ComplexDense("composite.out", 5, DIM)]), _complex(rng, BATCH, SEQ, DIM)),
            "embedding": lambda rng: GradCase(
                SplitEmbedding("embedding", VOCAB, SEQ, DIM),
                (rng.integers(VOCAB, size=(BATCH, SEQ)), np.tile(np.arange(SEQ), (BATCH, 1)),
                 rng.integers(2, size=(BATCH, SEQ))), check_inputs=False),
        }
        for act in AttentionActivation:
            cases[f"attention.{act.value}"] = (
                lambda rng, act=act: GradCase(MultiHeadAttention(f"attention.{act.value}", DIM, HEADS, act,
                                                                 attn_bias=0.3 + 0.2j),
                                              _complex(rng, BATCH, SEQ, DIM), forward_kwargs={"key_mask": key_mask}))
        cases["attention.no_qo"] = lambda rng: GradCase(
            MultiHeadAttention("attention.no_qo", DIM, HEADS, AttentionActivation.MOD_SOFTMAX, True),
            _complex(rng, BATCH, SEQ, DIM))
        for kind in HiddenActivation:
            cases[f"activation.{kind.value}"] = (
                lambda rng, kind=kind: GradCase(ComplexActivation(f"activation.{kind.value}", kind, **act_kwargs),
                                                _complex(rng, BATCH, 5)))
        for kind in NormKind:
            cases[f"norm.{kind.value}"] = (
                lambda rng, kind=kind: GradCase(Normalization(f"norm.{kind.value}", kind, DIM),
                                                _complex(rng, BATCH, SEQ, DIM)))
        cases["mlm_head"] = lambda rng: GradCase(
            MLMHead("mlm_head", DIM, VOCAB, HiddenActivation.SPLIT_GELU, MLMOutput.MODULUS), _complex(rng, SEQ, DIM))
        cases["mlm_head.real"] = lambda rng: GradCase(
            MLMHead("mlm_head.real", DIM, VOCAB, HiddenActivation.MODGELU, MLMOutput.REAL), _complex(rng, SEQ, DIM))
        cases["mlm_head.tied"] = lambda rng: GradCase(
            MLMHead("mlm_head.tied", DIM, VOCAB, HiddenActivation.SPLIT_GELU, MLMOutput.MODULUS,
                    tied_table=Parameter("mlm_head.tied.table", np.zeros((VOCAB, DIM)), role="embedding")),
            _complex(rng, SEQ, DIM))
        cases["nsp_head"] = lambda rng: GradCase(NSPMeasurementHead("nsp_head", DIM), _complex(rng, SEQ, DIM))
        cases["nsp_head.modulus"] = lambda rng: GradCase(NSPDenseHead("nsp_head.modulus", DIM, NSPHead.MODULUS),
                                                         _complex(rng, SEQ, DIM))
        cases["cls_head"] = lambda rng: GradCase(
            MeasurementClassificationHead("cls_head", DIM, 3, use_bias=True), _unit_rows(rng, SEQ, DIM),
            GRADCHECK_UNITARY_TOL, check_inputs=False)
        cases["cls_head.chain"] = lambda rng: GradCase(Sequential("cls_head.chain", [
            Normalization("cls_head.chain.unit", NormKind.UNIT_NORM, DIM),
            MeasurementClassificationHead("cls_head.chain.head", DIM, 2)]), _complex(rng, SEQ, DIM),
            GRADCHECK_UNITARY_TOL)
        cases["encoder_layer"] = lambda rng: GradCase(
            EncoderLayer("encoder_layer", self.model_config, rng), _complex(rng, BATCH, SEQ, DIM),
            forward_kwargs={"key_mask": key_mask})
        return cases

    def select(self, layer: Optional[str] = None) -> List[str]:
        """Case names equal to ``layer`` or starting with ``layer.``; all cases when None."""
        if layer is None:
            return list(self.cases)
        chosen = [name for name in self.cases if name == layer or name.startswith(f"{layer}.")]
        if not chosen:
            raise ConfigurationError(f"unknown layer '{layer}'; available: {', '.join(self.cases)}")
        return chosen

    def run_case(self, name: str, seed: int) -> GradCheckReport:
        rng = np.random.default_rng(seed)
        case = self.cases[name](rng)
        randomize_parameters(case.layer, rng)
        report = grad_check(case.layer, case.inputs, self.step, case.tolerance, seed,
                            case.check_inputs, case.forward_kwargs)
        report.layer = name
        return report

    def run(self, layer: Optional[str] = None) -> List[GradCheckReport]:
        names = self.select(layer)
        logger.info(f"Running gradient checks: {len(names)} layers x {len(self.seeds)} seeds")
        reports = [self.run_case(name, seed) for name in names for seed in self.seeds]
        failed = [f"{r.layer}@{r.seed}" for r in reports if not r.passed]
        if failed:
            logger.warning(f"{len(failed)} gradient checks failed: {', '.join(failed)}")
        else:
            logger.info(f"All {len(reports)} gradient checks passed")
        return reports


def summarize(reports: Sequence[GradCheckReport]) -> List[Tuple[str, int, float, float, bool]]:
    return [(r.layer, r.seed, r.max_error, r.tolerance, r.passed) for r in reports]
