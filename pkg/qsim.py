"""Statevector simulator and the classical-head / quantum-circuit equivalence harness.

Basis index j encodes |b_{n-1} ... b_0> with qubit 0 the least significant
bit. The head's unitary is applied as one dense 2^n x 2^n gate.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from constants import (
    DEFAULT_SHOTS,
    EQUIVALENCE_CLASSES,
    EQUIVALENCE_QUBITS,
    EQUIVALENCE_STATES,
    PROJECTION_INIT_STD,
    RENORMALIZE_TOL,
    SHOT_CHUNK_SIZE,
    UNITARY_TOL,
)
from ctensor import CTensor, as_ctensor, modulus_sq, unitarity_defect, unitary_exp
from exceptions import DomainError
from layers.heads import measurement_cls_head

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Unit-norm amplitudes over the 2^n computational basis states."""
    n_qubits: int
    amplitudes: CTensor = field(repr=False)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


@dataclass(frozen=True, eq=False)
class CircuitSpec:
    """State preparation target, one unitary gate, basis measurement and a real projection."""
    n_qubits: int
    unitary: CTensor = field(repr=False)
    projection: np.ndarray = field(repr=False)
    bias: Optional[np.ndarray] = field(default=None, repr=False)
    padded_from: int = 0

    def __post_init__(self):
        dim = 1 << self.n_qubits
        if self.unitary.shape != (dim, dim) or self.projection.shape[-1] != dim:
            raise DomainError(f"circuit on {self.n_qubits} qubits needs a {dim}x{dim} unitary and "
                              f"[classes, {dim}] projection, got {self.unitary.shape} / {self.projection.shape}")
        defect = unitarity_defect(self.unitary)
        if defect >= UNITARY_TOL:
            raise DomainError(f"circuit gate is not unitary: ||U^H U - I||_F = {defect:.3e}")


@dataclass
class ShotResult:
    counts: Dict[int, int]
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise DomainError(f"counts sum {sum(self.counts.values())} != shots {self.shots}")

    def frequencies(self, dim: int) -> np.ndarray:
        freq = np.zeros(dim)
        for index, count in self.counts.items():
            freq[index] = count
        return freq / self.shots

    def bitstrings(self, n_qubits: int) -> Dict[str, int]:
        return {format(index, f"0{n_qubits}b"): count for index, count in sorted(self.counts.items())}


@dataclass
class EquivalenceReport:
    n_qubits: int
    n_classes: int
    n_states: int
    shots: int
    seed: int
    mse_analytic: float
    mse_sampled: float
    unitarity_defect: float
    head_dim: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "n_qubits": self.n_qubits,
            "n_classes": self.n_classes,
            "n_states": self.n_states,
            "shots": self.shots,
            "seed": self.seed,
            "head_dim": self.head_dim,
            "mse_analytic": self.mse_analytic,
            "mse_sampled": self.mse_sampled,
            "unitarity_defect": self.unitarity_defect,
        }


def _qubits_for(length: int) -> int:
    if length < 2 or length & (length - 1):
        raise DomainError(f"state length must be a power of two >= 2, got {length}")
    return length.bit_length() - 1


def qubits_needed(dim: int) -> int:
    """Smallest n with 2^n >= dim (at least one qubit)."""
    if dim < 1:
        raise DomainError(f"dimension must be positive, got {dim}")
    return max(1, math.ceil(math.log2(dim)))


def prepare_state(amplitudes) -> QuantumState:
    """Validate amplitudes as a pure state, renormalizing small norm drift.

    Raises:
        DomainError: for a non power-of-two length or a norm more than
            RENORMALIZE_TOL away from 1.
    """
    amps = as_ctensor(amplitudes).reshape(-1)
    n_qubits = _qubits_for(amps.size)
    norm = math.sqrt(float(modulus_sq(amps).sum()))
    if abs(norm - 1.0) > RENORMALIZE_TOL:
        raise DomainError(f"state norm {norm:.9f} deviates from 1 by more than {RENORMALIZE_TOL}")
    return QuantumState(n_qubits, amps / norm)


def apply_unitary(state: QuantumState, unitary) -> QuantumState:
    u = as_ctensor(unitary)
    if u.shape != (state.dim, state.dim):
        raise DomainError(f"gate shape {u.shape} does not act on {state.n_qubits} qubits")
    defect = unitarity_defect(u)
    if defect >= UNITARY_TOL:
        raise DomainError(f"gate is not unitary: ||U^H U - I||_F = {defect:.3e}")
    return QuantumState(state.n_qubits, u @ state.amplitudes)


def measure_analytic(state: QuantumState) -> np.ndarray:
    """Born-rule probabilities of every basis state."""
    return modulus_sq(state.amplitudes)


def _sample_indices(cdf: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    draws = rng.random(n)
    return np.minimum(np.searchsorted(cdf, draws, side="right"), cdf.size - 1)


def measure_shots(state: QuantumState, shots: int, rng: np.random.Generator,
                  chunk_size: int = SHOT_CHUNK_SIZE) -> ShotResult:
    """Sample ``shots`` basis outcomes by inverse CDF.

    Shots are drawn in chunks from independent streams spawned off ``rng``
    and merged by count addition in chunk order.
    """
    if shots < 1:
        raise DomainError(f"shots must be >= 1, got {shots}")
    probs = measure_analytic(state)
    cdf = np.cumsum(probs)
    cdf = cdf / cdf[-1]
    n_chunks = -(-shots // chunk_size)
    totals = np.zeros(state.dim, dtype=np.int64)
    for i, stream in enumerate(rng.spawn(n_chunks)):
        n = min(chunk_size, shots - i * chunk_size)
        totals += np.bincount(_sample_indices(cdf, n, stream), minlength=state.dim)
    counts = {int(j): int(c) for j, c in enumerate(totals) if c}
    return ShotResult(counts, shots)


def pad_state(psi: CTensor, dim: int) -> CTensor:
    psi = as_ctensor(psi)
    if psi.shape[-1] > dim:
        raise DomainError(f"state dimension {psi.shape[-1]} exceeds register size {dim}")
    out = np.zeros(psi.shape[:-1] + (dim,), dtype=np.complex128)
    out[..., :psi.shape[-1]] = psi
    return out


def export_circuit(weight, projection, bias: Optional[np.ndarray] = None,
                   n_qubits: Optional[int] = None) -> CircuitSpec:
    """Export a measurement head as a circuit.

    Heads whose dimension is not a power of two are zero-padded: the unitary
    is extended with the identity and the projection with zero columns.
    """
    w = as_ctensor(weight)
    projection = np.asarray(projection, dtype=np.float64)
    if projection.ndim != 2:
        raise DomainError(f"projection must be [classes, dim], got shape {projection.shape}")
    d = w.shape[0]
    if w.shape != (d, d) or projection.shape[1] != d:
        raise DomainError(f"head weight {w.shape} and projection {projection.shape} disagree")
    needed = qubits_needed(d)
    n_qubits = needed if n_qubits is None else n_qubits
    if n_qubits < needed:
        raise DomainError(f"a {d}-dimensional head needs at least {needed} qubits, got {n_qubits}")
    dim = 1 << n_qubits
    u = np.eye(dim, dtype=np.complex128)
    u[:d, :d] = unitary_exp(0.5 * (w + w.conj().T))
    padded_projection = np.zeros((projection.shape[0], dim))
    padded_projection[:, :d] = projection
    if dim != d:
        logger.info(f"padding {d}-dimensional head to {n_qubits} qubits ({dim} amplitudes)")
    return CircuitSpec(n_qubits, u, padded_projection,
                       None if bias is None else np.asarray(bias, dtype=np.float64), padded_from=d)


def run_circuit(circuit: CircuitSpec, psi, shots: Optional[int] = None,
                rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Logits and outcome distribution of one state, analytic when ``shots`` is None."""
    state = apply_unitary(prepare_state(pad_state(psi, 1 << circuit.n_qubits)), circuit.unitary)
    if shots is None:
        probs = measure_analytic(state)
    else:
        probs = measure_shots(state, shots, rng).frequencies(state.dim)
    logits = circuit.projection @ probs
    if circuit.bias is not None:
        logits = logits + circuit.bias
    return logits, probs


def random_pure_states(rng: np.random.Generator, n_states: int, dim: int) -> CTensor:
    z = rng.normal(size=(n_states, dim)) + 1j * rng.normal(size=(n_states, dim))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def random_head(rng: np.random.Generator, dim: int, n_classes: int,
                projection_std: float = PROJECTION_INIT_STD) -> Tuple[CTensor, np.ndarray]:
    """Random free weight W and real projection drawn N(0, projection_std^2)."""
    w = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return w, rng.normal(0.0, projection_std, size=(n_classes, dim))


def equivalence_harness(weight, projection, n_qubits: Optional[int] = None,
                        n_states: int = EQUIVALENCE_STATES, shots: int = DEFAULT_SHOTS, seed: int = 0,
                        bias: Optional[np.ndarray] = None,
                        states: Optional[Sequence[np.ndarray]] = None) -> EquivalenceReport:
    """Compare classical head logits with analytic and shot-sampled circuit logits.

    Random pure states (or ``states``) are fed through the classical
    measurement head and through the exported circuit; the report holds the
    mean squared error between the logit sets for both circuit paths.
    """
    rng = np.random.default_rng(seed)
    state_rng, shot_rng = rng.spawn(2)
    w = as_ctensor(weight)
    d = w.shape[0]
    circuit = export_circuit(w, projection, bias, n_qubits)
    psis = as_ctensor(states) if states is not None else random_pure_states(state_rng, n_states, d)
    if psis.ndim != 2 or psis.shape[1] != d:
        raise DomainError(f"states must be [M, {d}], got {psis.shape}")

    classical, _ = measurement_cls_head(psis, w, projection, bias)
    analytic = np.stack([run_circuit(circuit, psi)[0] for psi in psis])
    sampled = np.stack([run_circuit(circuit, psi, shots, stream)[0]
                        for psi, stream in zip(psis, shot_rng.spawn(len(psis)))])
    report = EquivalenceReport(
        n_qubits=circuit.n_qubits,
        n_classes=np.asarray(projection).shape[0],
        n_states=len(psis),
        shots=shots,
        seed=seed,
        mse_analytic=float(np.mean((classical - analytic) ** 2)),
        mse_sampled=float(np.mean((classical - sampled) ** 2)),
        unitarity_defect=unitarity_defect(circuit.unitary),
        head_dim=d,
    )
    logger.info(f"equivalence on {report.n_qubits} qubits, {report.n_states} states, {shots} shots: "
                f"mse_analytic={report.mse_analytic:.3e}, mse_sampled={report.mse_sampled:.3e}")
    return report


def default_harness(n_qubits: int = EQUIVALENCE_QUBITS, n_classes: int = EQUIVALENCE_CLASSES,
                    n_states: int = EQUIVALENCE_STATES, shots: int = DEFAULT_SHOTS, seed: int = 0,
                    projection_std: float = PROJECTION_INIT_STD) -> EquivalenceReport:
    """Harness on a random head that fills the whole register."""
    head_rng = np.random.default_rng([seed, 1])
    w, projection = random_head(head_rng, 1 << n_qubits, n_classes, projection_std)
    return equivalence_harness(w, projection, n_qubits, n_states, shots, seed)
