"""AdamW for complex parameters.

CAdamW keeps a real second moment built from g * conj(g); RAdamW treats the
real and imaginary channels as independent real parameters. Both consume
Wirtinger cotangents and apply decoupled weight decay exactly once:

    m_t = b1 m + (1 - b1) g
    v_t = b2 v + (1 - b2) |g|^2            (CAdamW)
    v_t = b2 v + (1 - b2) (g_re^2, g_im^2)  (RAdamW, per channel)
    theta <- theta - eta_t (alpha m_hat / (sqrt(v_hat) + eps) + lambda theta)
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from autodiff import Parameter
from constants import OptimizerKind, ScheduleKind
from exceptions import ConfigurationError, NonFiniteError

logger = logging.getLogger(__name__)


@dataclass
class AdamWConfig:
    """Optimizer hyperparameters."""
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    schedule: ScheduleKind = ScheduleKind.CONSTANT
    warmup_steps: int = 0
    total_steps: int = 0
    max_grad_norm: Optional[float] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"Invalid learning rate: {self.alpha}")
        if not 0.0 <= self.beta1 < 1.0:
            raise ConfigurationError(f"Invalid beta1: {self.beta1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise ConfigurationError(f"Invalid beta2: {self.beta2}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"Invalid epsilon: {self.epsilon}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"Invalid weight decay: {self.weight_decay}")
        if self.max_grad_norm is not None and self.max_grad_norm <= 0:
            raise ConfigurationError(f"Invalid max_grad_norm: {self.max_grad_norm}")
        if self.schedule is ScheduleKind.LINEAR_WARMUP_DECAY:
            if self.total_steps <= 0 or not 0 <= self.warmup_steps < self.total_steps:
                raise ConfigurationError(
                    f"linear_warmup_decay needs 0 <= warmup_steps < total_steps, got {self.warmup_steps}/{self.total_steps}")


def schedule_multiplier(cfg: AdamWConfig, step: int) -> float:
    """eta_t for a 1-based step."""
    if cfg.schedule is ScheduleKind.CONSTANT:
        return 1.0
    if cfg.warmup_steps > 0 and step <= cfg.warmup_steps:
        return step / cfg.warmup_steps
    return max(0.0, (cfg.total_steps - step) / (cfg.total_steps - cfg.warmup_steps))


def global_grad_norm(params: Iterable[Parameter]) -> float:
    return float(np.sqrt(sum(np.sum(p.cotangent.real ** 2 + p.cotangent.imag ** 2) for p in params)))


class ComplexAdamWBase(ABC):
    """Shared first-moment, bias-correction, decay and projection logic."""

    kind: OptimizerKind

    def __init__(self, params: Iterable[Parameter], cfg: AdamWConfig):
        self.params: List[Parameter] = list(params)
        self.cfg = cfg
        self.t = 0
        for p in self.params:
            p.slots["m"] = np.zeros_like(p.value)
            p.slots["v"] = self._init_second_moment(p)
        logger.info(f"Initialized {self.kind.value}: alpha={cfg.alpha}, beta1={cfg.beta1}, beta2={cfg.beta2}, "
                    f"weight_decay={cfg.weight_decay}, schedule={cfg.schedule.value}, params={len(self.params)}")

    @abstractmethod
    def _init_second_moment(self, p: Parameter) -> np.ndarray:
        ...

    @abstractmethod
    def _update_second_moment(self, v: np.ndarray, g: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _direction(self, m_hat: np.ndarray, v_hat: np.ndarray) -> np.ndarray:
        ...

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    @property
    def current_multiplier(self) -> float:
        return schedule_multiplier(self.cfg, max(self.t, 1))

    def step(self) -> None:
        """Apply one update from the accumulated cotangents.

        Raises:
            NonFiniteError: if any cotangent holds NaN/inf; no parameter or
                slot is modified in that case.
        """
        bad = [p.name for p in self.params if not np.all(np.isfinite(p.cotangent))]
        if bad:
            raise NonFiniteError("non-finite gradient, optimizer step aborted", bad)

        clip = 1.0
        if self.cfg.max_grad_norm is not None:
            norm = global_grad_norm(self.params)
            if norm > self.cfg.max_grad_norm:
                clip = self.cfg.max_grad_norm / norm

        self.t += 1
        cfg = self.cfg
        eta = schedule_multiplier(cfg, self.t)
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for p in self.params:
            g = p.cotangent * clip if clip != 1.0 else p.cotangent
            m = cfg.beta1 * p.slots["m"] + (1.0 - cfg.beta1) * g
            v = self._update_second_moment(p.slots["v"], g)
            p.slots["m"], p.slots["v"] = m, v
            direction = self._direction(m / bc1, v / bc2)
            decay = cfg.weight_decay if p.decay else 0.0
            theta = p.value
            new_re = theta.real - eta * (cfg.alpha * direction.real + decay * theta.real)
            new_im = theta.imag - eta * (cfg.alpha * direction.imag + decay * theta.imag)
            updated = new_re + 1j * new_im
            if p.real:
                updated = new_re + 0j
            if p.project is not None:
                updated = p.project(updated)
            p.value = updated
        p_count = len(self.params)
        logger.debug(f"{self.kind.value} step {self.t}: eta={eta:.4f}, clip={clip:.4f}, params={p_count}")


class CAdamW(ComplexAdamWBase):
    """Second moment g * conj(g): real, non-negative, shared by both channels."""

    kind = OptimizerKind.CADAMW

    def _init_second_moment(self, p):
        return np.zeros(p.value.shape, dtype=np.float64)

    def _update_second_moment(self, v, g):
        return self.cfg.beta2 * v + (1.0 - self.cfg.beta2) * (g.real * g.real + g.imag * g.imag)

    def _direction(self, m_hat, v_hat):
        denom = np.sqrt(v_hat) + self.cfg.epsilon
        return m_hat.real / denom + 1j * (m_hat.imag / denom)


class RAdamW(ComplexAdamWBase):
    """Real AdamW on the split channels: v holds (g_re^2, g_im^2) as re/im."""

    kind = OptimizerKind.RADAMW

    def _init_second_moment(self, p):
        return np.zeros_like(p.value)

    def _update_second_moment(self, v, g):
        b2 = self.cfg.beta2
        return (b2 * v.real + (1.0 - b2) * (g.real * g.real)) + 1j * (b2 * v.imag + (1.0 - b2) * (g.imag * g.imag))

    def _direction(self, m_hat, v_hat):
        eps = self.cfg.epsilon
        return m_hat.real / (np.sqrt(v_hat.real) + eps) + 1j * (m_hat.imag / (np.sqrt(v_hat.imag) + eps))


def build_optimizer(kind: OptimizerKind, params: Iterable[Parameter], cfg: AdamWConfig) -> ComplexAdamWBase:
    if kind is OptimizerKind.CADAMW:
        return CAdamW(params, cfg)
    if kind is OptimizerKind.RADAMW:
        return RAdamW(params, cfg)
    raise ConfigurationError(f"unknown optimizer {kind}")
