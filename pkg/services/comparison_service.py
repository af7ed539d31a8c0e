"""CAdamW vs RAdamW on a stochastic complex least-squares problem."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from autodiff import Parameter
from constants import OptimizerKind
from exceptions import ConfigurationError
from optim import AdamWConfig, build_optimizer

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = ["step", "optimizer", "seed", "loss"]
LSQ_ROWS_PER_DIM = 4
LSQ_LR = 1e-2
LSQ_BATCH_ROWS = 8
LSQ_RECORD_EVERY = 10
TRAILING_FRACTION = 0.25


@dataclass
class LeastSquaresProblem:
    """L(theta) = ||A theta - b||^2 with complex A [rows, d] and b [rows]."""
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> "LeastSquaresProblem":
        rows = LSQ_ROWS_PER_DIM * dim
        std = np.sqrt(0.5 / rows)
        a = std * (rng.normal(size=(rows, dim)) + 1j * rng.normal(size=(rows, dim)))
        b = np.sqrt(0.5) * (rng.normal(size=rows) + 1j * rng.normal(size=rows))
        return cls(a, b)

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    def loss(self, theta: np.ndarray) -> float:
        r = self.a @ theta - self.b
        return float(np.vdot(r, r).real)

    def cotangent(self, theta: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Unbiased estimate of dL/dconj(theta) from a subset of rows."""
        a = self.a[rows]
        scale = self.a.shape[0] / len(rows)
        return scale * (a.conj().T @ (a @ theta - self.b[rows]))


@dataclass
class ComparisonResult:
    rows: List[Dict[str, object]] = field(default_factory=list, repr=False)
    final: Dict[str, Dict[int, float]] = field(default_factory=dict)

    def wins(self, winner: str = OptimizerKind.CADAMW.value, loser: str = OptimizerKind.RADAMW.value) -> List[int]:
        """Seeds on which ``winner`` ends at a loss no higher than ``loser``."""
        return [s for s, v in self.final[winner].items() if v <= self.final[loser][s]]


def final_loss(losses: Sequence[float], fraction: float = TRAILING_FRACTION) -> float:
    """Mean over the trailing ``fraction`` of recorded losses."""
    n = max(1, int(round(len(losses) * fraction)))
    return float(np.mean(losses[-n:]))


class ComparisonService:
    """Runs both optimizers from the same start and row sequence on every seed."""

    def __init__(self, dim: int = 32, steps: int = 2000, seeds: int = 3, lr: float = LSQ_LR,
                 batch_rows: int = LSQ_BATCH_ROWS, record_every: int = LSQ_RECORD_EVERY):
        if dim < 1 or steps < 1 or seeds < 1 or batch_rows < 1 or record_every < 1:
            raise ConfigurationError("dim, steps, seeds, batch_rows and record_every must be positive")
        self.dim = dim
        self.steps = steps
        self.seeds = list(range(seeds))
        self.lr = lr
        self.batch_rows = batch_rows
        self.record_every = record_every

    def _run_one(self, problem: LeastSquaresProblem, kind: OptimizerKind, theta0: np.ndarray,
                 row_draws: np.ndarray) -> List[float]:
        theta = Parameter("theta", theta0.copy())
        optimizer = build_optimizer(kind, [theta], AdamWConfig(alpha=self.lr))
        losses = [problem.loss(theta.value)]
        for step in range(1, self.steps + 1):
            optimizer.zero_grad()
            theta.accumulate(problem.cotangent(theta.value, row_draws[step - 1]))
            optimizer.step()
            if step % self.record_every == 0:
                losses.append(problem.loss(theta.value))
        return losses

    def run(self) -> ComparisonResult:
        result = ComparisonResult(final={k.value: {} for k in OptimizerKind})
        for seed in self.seeds:
            problem_rng, data_rng = np.random.default_rng(seed).spawn(2)
            problem = LeastSquaresProblem.random(self.dim, problem_rng)
            theta0 = np.zeros(self.dim, dtype=np.complex128)
            n_rows = problem.a.shape[0]
            batch = min(self.batch_rows, n_rows)
            row_draws = np.stack([data_rng.choice(n_rows, size=batch, replace=False) for _ in range(self.steps)])
            for kind in OptimizerKind:
                losses = self._run_one(problem, kind, theta0, row_draws)
                steps = [0] + list(range(self.record_every, self.steps + 1, self.record_every))
                result.rows.extend({"step": s, "optimizer": kind.value, "seed": seed, "loss": v}
                                   for s, v in zip(steps, losses))
                result.final[kind.value][seed] = final_loss(losses)
            logger.info(f"seed {seed}: final loss " + ", ".join(
                f"{k}={v[seed]:.6g}" for k, v in result.final.items()))
        return result
