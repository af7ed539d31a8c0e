"""Complex tensor arithmetic, statistics and spectral routines.

A CTensor is a ``numpy.ndarray`` of dtype complex128 (row-major, interleaved
re/im per element). Every function here is pure: inputs are never mutated.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from constants import (
    HERMITIAN_TOL,
    JACOBI_MAX_SWEEPS,
    JACOBI_REL_TOL,
)
from exceptions import DomainError

logger = logging.getLogger(__name__)

CTensor = np.ndarray
ArrayLike = Union[np.ndarray, complex, float, list, tuple]


def as_ctensor(values: ArrayLike) -> CTensor:
    """Return ``values`` as a complex128 array (copying only when needed)."""
    return np.asarray(values, dtype=np.complex128)


def from_polar(modulus: ArrayLike, argument: ArrayLike) -> CTensor:
    return np.asarray(modulus, dtype=np.float64) * np.exp(1j * np.asarray(argument, dtype=np.float64))


def argument(z: ArrayLike) -> np.ndarray:
    return np.angle(as_ctensor(z))


def conj(z: ArrayLike) -> CTensor:
    return np.conj(as_ctensor(z))


def modulus(z: ArrayLike) -> np.ndarray:
    return np.abs(as_ctensor(z))


def modulus_sq(z: ArrayLike) -> np.ndarray:
    """|z|^2 computed channelwise so the result is exactly real and non-negative."""
    z = as_ctensor(z)
    return z.real * z.real + z.imag * z.imag


def _require_same_shape(a: CTensor, b: CTensor, op: str) -> None:
    if a.shape != b.shape:
        raise DomainError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: ArrayLike, b: ArrayLike) -> CTensor:
    a, b = as_ctensor(a), as_ctensor(b)
    _require_same_shape(a, b, "add")
    return a + b


def mul(a: ArrayLike, b: ArrayLike) -> CTensor:
    a, b = as_ctensor(a), as_ctensor(b)
    _require_same_shape(a, b, "mul")
    return a * b


def hermitian_transpose(a: ArrayLike) -> CTensor:
    """Conjugate transpose over the last two axes."""
    a = as_ctensor(a)
    if a.ndim < 2:
        raise DomainError(f"hermitian_transpose needs at least 2 axes, got shape {a.shape}")
    return np.conj(np.swapaxes(a, -1, -2))


def matmul(a: ArrayLike, b: ArrayLike) -> CTensor:
    a, b = as_ctensor(a), as_ctensor(b)
    if a.ndim < 1 or b.ndim < 1:
        raise DomainError("matmul requires tensors of rank >= 1")
    inner_b = b.shape[-2] if b.ndim >= 2 else b.shape[0]
    if a.shape[-1] != inner_b:
        raise DomainError(f"matmul: inner extents disagree {a.shape} @ {b.shape}")
    return a @ b


def frobenius_norm(a: ArrayLike) -> float:
    return float(np.sqrt(np.sum(modulus_sq(a))))


def complex_stats(zs: ArrayLike, axis: int = -1) -> Tuple[CTensor, np.ndarray]:
    """Complex mean and (real, non-negative) variance along ``axis``.

    variance = mean((z - mean) * conj(z - mean)), i.e. the mean squared modulus
    of the deviations.
    """
    zs = as_ctensor(zs)
    if zs.ndim == 0 or zs.shape[axis] == 0:
        raise DomainError(f"complex_stats: empty axis {axis} for shape {zs.shape}")
    mean = np.mean(zs, axis=axis, keepdims=True)
    variance = np.mean(modulus_sq(zs - mean), axis=axis)
    return np.squeeze(mean, axis=axis), variance


def is_hermitian(h: ArrayLike, tol: float = HERMITIAN_TOL) -> bool:
    h = as_ctensor(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    scale = max(1.0, frobenius_norm(h))
    return frobenius_norm(h - h.conj().T) <= tol * scale


@dataclass(frozen=True)
class HermEig:
    """Eigendecomposition H = Q diag(eigenvalues) Q^H with ascending eigenvalues."""
    eigenvalues: np.ndarray
    eigenvectors: CTensor

    def reconstruct(self) -> CTensor:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def _off_diagonal_norm(a: CTensor) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(modulus_sq(off))))


def hermitian_eig(h: ArrayLike) -> HermEig:
    """Cyclic complex Jacobi eigendecomposition of a Hermitian matrix.

    Each rotation first removes the phase of the pivot with a diagonal unitary
    and then applies a real Givens rotation, so A stays Hermitian with a real
    diagonal throughout.

    Raises:
        DomainError: if ``h`` is not square or not Hermitian within tolerance.
    """
    h = as_ctensor(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] == 0:
        raise DomainError(f"hermitian_eig expects a non-empty square matrix, got shape {h.shape}")
    if not is_hermitian(h):
        raise DomainError("hermitian_eig: input is not Hermitian within tolerance")

    d = h.shape[0]
    a = 0.5 * (h + h.conj().T)
    v = np.eye(d, dtype=np.complex128)
    threshold = JACOBI_REL_TOL * d * frobenius_norm(a)

    sweeps = 0
    while _off_diagonal_norm(a) > threshold:
        if sweeps >= JACOBI_MAX_SWEEPS:
            logger.warning(f"Jacobi stopped after {sweeps} sweeps, off-diagonal norm {_off_diagonal_norm(a):.3e}")
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                pivot = a[p, q]
                r = abs(pivot)
                if r == 0.0:
                    continue
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * np.arctan2(2.0 * r, aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                phase = np.conj(pivot / r)
                g = np.array([[c, s], [-s * phase, c * phase]], dtype=np.complex128)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ g
        sweeps += 1

    eigenvalues = np.diag(a).real.copy()
    order = np.argsort(eigenvalues, kind="stable")
    return HermEig(eigenvalues=eigenvalues[order], eigenvectors=v[:, order])


def unitary_exp(h: ArrayLike) -> CTensor:
    """U = exp(iH) computed spectrally, unitary by construction."""
    return unitary_exp_with_eig(h)[0]


def unitary_exp_with_eig(h: ArrayLike) -> Tuple[CTensor, HermEig]:
    eig = hermitian_eig(h)
    q = eig.eigenvectors
    u = (q * np.exp(1j * eig.eigenvalues)) @ q.conj().T
    return u, eig


def unitarity_defect(u: ArrayLike) -> float:
    """||U^H U - I||_F."""
    u = as_ctensor(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DomainError(f"unitarity_defect expects a square matrix, got shape {u.shape}")
    return frobenius_norm(u.conj().T @ u - np.eye(u.shape[0]))
