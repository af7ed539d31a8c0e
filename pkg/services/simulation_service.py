"""Circuit-equivalence runs on random or trained measurement heads."""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from constants import DEFAULT_SHOTS, EQUIVALENCE_CLASSES, EQUIVALENCE_QUBITS, EQUIVALENCE_STATES, PROJECTION_INIT_STD
from qsim import EquivalenceReport, default_harness, equivalence_harness
from services.evaluation_service import load_finetuned

logger = logging.getLogger(__name__)


class SimulationService:
    def __init__(self, n_states: int = EQUIVALENCE_STATES, shots: int = DEFAULT_SHOTS, seed: int = 0):
        self.n_states = n_states
        self.shots = shots
        self.seed = seed

    def random_head(self, n_qubits: int = EQUIVALENCE_QUBITS, n_classes: int = EQUIVALENCE_CLASSES,
                    projection_std: float = PROJECTION_INIT_STD) -> EquivalenceReport:
        logger.info(f"Simulating a random {n_classes}-class head on {n_qubits} qubits, seed {self.seed}")
        return default_harness(n_qubits, n_classes, self.n_states, self.shots, self.seed, projection_std)

    def trained_head(self, ckpt: Union[str, Path], n_qubits: Optional[int] = None) -> EquivalenceReport:
        """Export the classification head of a fine-tuned checkpoint and compare it with its circuit."""
        model, _ = load_finetuned(ckpt)
        head = model.cls_head
        bias = head.bias.value.real if head.bias is not None else None
        logger.info(f"Simulating the {head.n_classes}-class head of {ckpt} (dim {head.dim})")
        return equivalence_harness(head.unitary.weight.value, np.asarray(head.projection.value.real), n_qubits,
                                   self.n_states, self.shots, self.seed, bias)
