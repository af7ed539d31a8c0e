"""Wirtinger-calculus gradient bookkeeping.

Convention: the cotangent of a complex tensor z is dL/d(conj z) =
(dL/da + i dL/db) / 2 for z = a + ib, so steepest descent moves along
-cotangent. Real-valued intermediate tensors (probabilities, logits) carry
the ordinary derivative dL/dr instead. Real-valued parameters store
(dL/dr) / 2, the Wirtinger cotangent with a dead imaginary channel.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from constants import DEGENERATE_EIG_TOL, GRADCHECK_STEP, GRADCHECK_TOL
from ctensor import CTensor, HermEig, as_ctensor
from exceptions import ConfigurationError, NonFiniteError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Parameter:
    """A named trainable tensor with its cotangent and optimizer slots."""
    name: str
    value: CTensor
    cotangent: CTensor = field(init=False)
    slots: Dict[str, np.ndarray] = field(default_factory=dict)
    real: bool = False
    decay: bool = True
    project: Optional[Callable[[CTensor], CTensor]] = None
    role: str = "weight"

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.complex128)
        if self.real:
            self.value = self.value.real.astype(np.complex128)
        self.cotangent = np.zeros_like(self.value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def accumulate(self, grad: np.ndarray) -> None:
        grad = np.asarray(grad)
        if grad.shape != self.value.shape:
            raise ValueError(f"cotangent shape {grad.shape} does not match parameter {self.name} {self.value.shape}")
        if self.real:
            self.cotangent += grad.real
        else:
            self.cotangent += grad

    def zero_grad(self) -> None:
        self.cotangent = np.zeros_like(self.value)

    def assign(self, value: np.ndarray) -> None:
        value = np.array(value, dtype=np.complex128)
        if value.shape != self.value.shape:
            raise ValueError(f"cannot assign shape {value.shape} to parameter {self.name} {self.value.shape}")
        self.value = value.real.astype(np.complex128) if self.real else value


class Module:
    """Parameter registry shared by layers and whole models."""

    def __init__(self, name: str):
        self.name = name
        self._parameters: Dict[str, Parameter] = {}
        self._children: Dict[str, "Module"] = {}

    def _child_name(self, local: str) -> str:
        return f"{self.name}.{local}" if self.name else local

    def add_parameter(self, local: str, value: np.ndarray, **flags) -> Parameter:
        param = Parameter(self._child_name(local), value, **flags)
        self._parameters[local] = param
        return param

    def share_parameter(self, local: str, param: Parameter) -> Parameter:
        """Register a parameter owned elsewhere (e.g. a tied embedding table)."""
        self._parameters[local] = param
        return param

    def add_child(self, local: str, module: "Module") -> "Module":
        self._children[local] = module
        return module

    def child_name(self, local: str) -> str:
        return self._child_name(local)

    def parameters(self) -> List[Parameter]:
        seen, ordered = set(), []
        for param in self._iter_parameters():
            if id(param) not in seen:
                seen.add(id(param))
                ordered.append(param)
        return ordered

    def _iter_parameters(self) -> Iterator[Parameter]:
        yield from self._parameters.values()
        for child in self._children.values():
            yield from child._iter_parameters()

    def named_parameters(self) -> Dict[str, Parameter]:
        registry: Dict[str, Parameter] = {}
        for param in self.parameters():
            if param.name in registry:
                raise ConfigurationError(f"duplicate parameter name {param.name}")
            registry[param.name] = param
        return registry

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


class Layer(Module, ABC):
    """Hand-written forward/backward contract.

    ``forward`` returns the output and an opaque context; ``backward`` takes
    the output cotangent and exactly that context, accumulates parameter
    cotangents and returns the input cotangent.
    """

    @abstractmethod
    def forward(self, x: Any, training: bool = False, **kwargs) -> Tuple[Any, Any]:
        raise NotImplementedError

    @abstractmethod
    def backward(self, grad: Any, ctx: Any) -> Any:
        raise NotImplementedError

    def __call__(self, x: Any, training: bool = False, **kwargs) -> Any:
        return self.forward(x, training=training, **kwargs)[0]


class Sequential(Layer):
    """Composition of layers applied in order."""

    def __init__(self, name: str, layers: Sequence[Layer]):
        super().__init__(name)
        self.layers = list(layers)
        for i, layer in enumerate(self.layers):
            self.add_child(str(i), layer)

    def forward(self, x, training: bool = False, **kwargs):
        contexts = []
        for layer in self.layers:
            x, ctx = layer.forward(x, training=training)
            contexts.append(ctx)
        return x, contexts

    def backward(self, grad, ctx):
        for layer, layer_ctx in zip(reversed(self.layers), reversed(ctx)):
            grad = layer.backward(grad, layer_ctx)
        return grad


def wirtinger_cotangent(loss_fn: Callable[[CTensor], float], theta: np.ndarray, step: float = GRADCHECK_STEP) -> CTensor:
    """Numerical dL/d(conj theta) by central differences on both channels."""
    theta = as_ctensor(theta).copy()
    out = np.zeros_like(theta)
    flat, grad = theta.reshape(-1), out.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        channels = []
        for direction in (1.0, 1j):
            flat[k] = original + step * direction
            plus = float(loss_fn(theta))
            flat[k] = original - step * direction
            minus = float(loss_fn(theta))
            flat[k] = original
            channels.append((plus - minus) / (2.0 * step))
        grad[k] = 0.5 * (channels[0] + 1j * channels[1])
    return out


def real_to_complex_grad(d_real: np.ndarray) -> CTensor:
    """Cotangent of z = r (r real) given dL/dr."""
    return 0.5 * np.asarray(d_real, dtype=np.float64).astype(np.complex128)


def eig_divided_differences(eigenvalues: np.ndarray) -> CTensor:
    """F_jk = (e^{i l_j} - e^{i l_k}) / (l_j - l_k), with F_jj = i e^{i l_j}.

    Evaluated as i e^{i (l_j + l_k)/2} sinc((l_j - l_k)/2), which is exact
    algebraically and free of cancellation; pairs closer than the degeneracy
    tolerance take the diagonal limit.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    delta = lam[:, None] - lam[None, :]
    mean = 0.5 * (lam[:, None] + lam[None, :])
    f = 1j * np.exp(1j * mean) * np.sinc(delta / (2.0 * np.pi))
    limit = 1j * np.exp(1j * np.broadcast_to(lam[:, None], delta.shape))
    return np.where(np.abs(delta) < DEGENERATE_EIG_TOL, limit, f)


def unitary_exp_backward(grad_u: CTensor, eig: HermEig) -> CTensor:
    """Cotangent of W for U = exp(i (W + W^H)/2), given the cotangent of U."""
    q = eig.eigenvectors
    qh = q.conj().T
    g_hat = qh @ grad_u @ q
    k = q @ (np.conj(eig_divided_differences(eig.eigenvalues)) * g_hat) @ qh
    return 0.5 * (k + k.conj().T)


@dataclass
class GradCheckReport:
    """Max relative error between analytic and finite-difference cotangents."""
    layer: str
    seed: int
    tolerance: float
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return all(np.isfinite(e) and e < self.tolerance for e in self.errors.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), float(np.max(np.abs(analytic), initial=0.0)), 1e-12)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def _reduction_weights(output: Any, rng: np.random.Generator) -> Any:
    if isinstance(output, tuple):
        return tuple(_reduction_weights(o, rng) for o in output)
    return rng.uniform(0.5, 1.5, size=np.shape(output))


def _reduction_loss(output: Any, weights: Any) -> float:
    """L = sum w |out|^2 (complex) or sum w out^2 (real), with fixed random w."""
    if isinstance(output, tuple):
        return sum(_reduction_loss(o, w) for o, w in zip(output, weights))
    out = np.asarray(output)
    if np.iscomplexobj(out):
        return float(np.sum(weights * (out.real ** 2 + out.imag ** 2)))
    return float(np.sum(weights * out ** 2))


def _reduction_grad(output: Any, weights: Any) -> Any:
    if isinstance(output, tuple):
        return tuple(_reduction_grad(o, w) for o, w in zip(output, weights))
    out = np.asarray(output)
    if np.iscomplexobj(out):
        return weights * out
    return 2.0 * weights * out


def grad_check(
    layer: Layer,
    inputs: Any,
    step: float = GRADCHECK_STEP,
    tolerance: float = GRADCHECK_TOL,
    seed: int = 0,
    check_inputs: bool = True,
    forward_kwargs: Optional[Dict[str, Any]] = None,
) -> GradCheckReport:
    """Compare analytic cotangents of ``layer`` with central finite differences.

    The output is reduced by a fixed positively weighted sum of squared moduli;
    unweighted, that reduction is constant for norm-preserving layers. Runs in eval
    mode. Complex input tensors are checked alongside every parameter.
    """
    if step <= 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    kwargs = forward_kwargs or {}
    rng = np.random.default_rng(seed)
    report = GradCheckReport(layer=layer.name, seed=seed, tolerance=tolerance)

    output, ctx = layer.forward(inputs, training=False, **kwargs)
    weights = _reduction_weights(output, rng)
    base = _reduction_loss(output, weights)
    if not np.isfinite(base):
        raise NonFiniteError(f"grad_check reduced loss is not finite for {layer.name}")

    layer.zero_grad()
    grad_in = layer.backward(_reduction_grad(output, weights), ctx)

    def loss_at() -> float:
        return _reduction_loss(layer.forward(inputs, training=False, **kwargs)[0], weights)

    for param in layer.parameters():
        analytic = param.cotangent.copy()
        numeric = np.zeros_like(param.value)
        flat_value, flat_numeric = param.value.reshape(-1), numeric.reshape(-1)
        directions = (1.0,) if param.real else (1.0, 1j)
        for k in range(flat_value.size):
            original = flat_value[k]
            channels = []
            for direction in directions:
                flat_value[k] = original + step * direction
                plus = loss_at()
                flat_value[k] = original - step * direction
                minus = loss_at()
                flat_value[k] = original
                channels.append((plus - minus) / (2.0 * step))
            flat_numeric[k] = 0.5 * channels[0] + (0.5j * channels[1] if len(channels) > 1 else 0.0)
        report.errors[param.name] = relative_error(analytic, numeric)

    if check_inputs:
        flat_inputs = inputs if isinstance(inputs, tuple) else (inputs,)
        flat_grads = grad_in if isinstance(grad_in, tuple) else (grad_in,)
        for i, (x, g) in enumerate(zip(flat_inputs, flat_grads)):
            if not (isinstance(x, np.ndarray) and np.iscomplexobj(x)) or g is None:
                continue

            def loss_for(value, index=i):
                patched = list(flat_inputs)
                patched[index] = value
                arg = tuple(patched) if isinstance(inputs, tuple) else patched[0]
                return _reduction_loss(layer.forward(arg, training=False, **kwargs)[0], weights)

            numeric = wirtinger_cotangent(loss_for, x, step)
            report.errors[f"input{i}"] = relative_error(np.asarray(g), numeric)

    layer.zero_grad()
    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"grad_check {layer.name} seed={seed}: max rel err {report.max_error:.2e} (tol {tolerance:.0e})")
    return report
