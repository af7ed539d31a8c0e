"""Tests for complex arithmetic, statistics and the spectral routines."""

import numpy as np
import pytest
from scipy.linalg import expm

from ctensor import (
    add,
    complex_stats,
    from_polar,
    hermitian_eig,
    hermitian_transpose,
    is_hermitian,
    matmul,
    modulus_sq,
    mul,
    unitarity_defect,
    unitary_exp,
)
from exceptions import DomainError


def random_hermitian(rng, d, scale=1.0):
    a = scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return 0.5 * (a + a.conj().T)


class TestArithmetic:

    def test_mul_matches_channel_formula(self):
        a, b = np.array([1 + 2j, -0.5j]), np.array([3 - 1j, 2 + 2j])
        out = mul(a, b)
        expected = (a.real * b.real - a.imag * b.imag) + 1j * (a.real * b.imag + a.imag * b.real)
        np.testing.assert_allclose(out, expected)

    def test_shape_mismatch_raises(self):
        with pytest.raises(DomainError):
            add(np.zeros(3), np.zeros(4))
        with pytest.raises(DomainError):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_hermitian_transpose_last_two_axes(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(2, 3, 4)) + 1j * rng.normal(size=(2, 3, 4))
        out = hermitian_transpose(a)
        assert out.shape == (2, 4, 3)
        np.testing.assert_array_equal(out[1], a[1].conj().T)

    def test_modulus_sq_real_nonnegative(self):
        z = from_polar([2.0, 0.5], [0.3, -2.0])
        m = modulus_sq(z)
        assert m.dtype == np.float64
        np.testing.assert_allclose(m, [4.0, 0.25])

    def test_inputs_not_mutated(self):
        a = np.array([1 + 1j, 2 - 1j])
        before = a.copy()
        mul(a, a)
        np.testing.assert_array_equal(a, before)


class TestComplexStats:

    def test_mean_and_variance(self):
        z = np.array([1 + 1j, 3 - 1j, 2 + 0j])
        mean, var = complex_stats(z)
        assert mean == pytest.approx(2 + 0j)
        # |(-1+1j)|^2 + |(1-1j)|^2 + 0 over 3
        assert var == pytest.approx(4.0 / 3.0)

    def test_constant_input_has_zero_variance(self):
        _, var = complex_stats(np.full(5, 2 - 3j))
        assert var == pytest.approx(0.0)

    def test_variance_ignores_complex_shift(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(3, 7)) + 1j * rng.normal(size=(3, 7))
        mean, var = complex_stats(z)
        shifted_mean, shifted_var = complex_stats(z + (2.5 - 4.0j))
        np.testing.assert_allclose(shifted_var, var, atol=1e-12)
        np.testing.assert_allclose(shifted_mean, mean + (2.5 - 4.0j), atol=1e-12)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(6)
        z = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
        mean, var = complex_stats(z, axis=0)
        for j in range(5):
            column = [complex(v) for v in z[:, j]]
            m = sum(column) / len(column)
            v = sum(((c - m) * (c - m).conjugate()).real for c in column) / len(column)
            assert mean[j] == pytest.approx(m, abs=1e-12)
            assert var[j] == pytest.approx(v, abs=1e-12)

    def test_empty_axis_raises(self):
        with pytest.raises(DomainError):
            complex_stats(np.zeros((2, 0)))


class TestHermitianEig:

    @pytest.mark.parametrize("d", [1, 2, 4, 8, 16])
    def test_reconstruction(self, d):
        rng = np.random.default_rng(d)
        h = random_hermitian(rng, d)
        eig = hermitian_eig(h)
        np.testing.assert_allclose(eig.reconstruct(), h, atol=1e-12)
        assert np.all(np.diff(eig.eigenvalues) >= 0)
        q = eig.eigenvectors
        np.testing.assert_allclose(q.conj().T @ q, np.eye(d), atol=1e-12)

    def test_matches_numpy_eigenvalues(self):
        rng = np.random.default_rng(7)
        h = random_hermitian(rng, 6)
        np.testing.assert_allclose(hermitian_eig(h).eigenvalues, np.linalg.eigvalsh(h), atol=1e-12)

    def test_diagonal_input_is_already_converged(self):
        h = np.diag([3.0, -1.0, 2.0]).astype(complex)
        eig = hermitian_eig(h)
        np.testing.assert_allclose(eig.eigenvalues, [-1.0, 2.0, 3.0])

    def test_degenerate_spectrum(self):
        eig = hermitian_eig(np.eye(4, dtype=complex) * 2.0)
        np.testing.assert_allclose(eig.eigenvalues, [2.0] * 4)

    def test_non_hermitian_raises(self):
        with pytest.raises(DomainError):
            hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_non_square_raises(self):
        with pytest.raises(DomainError):
            hermitian_eig(np.zeros((2, 3)))

    def test_is_hermitian(self):
        assert is_hermitian(np.array([[1, 1j], [-1j, 2]]))
        assert not is_hermitian(np.array([[1, 1j], [1j, 2]]))


class TestUnitaryExp:

    @pytest.mark.parametrize("d", [2, 4, 8])
    def test_matches_scipy_expm(self, d):
        rng = np.random.default_rng(100 + d)
        h = random_hermitian(rng, d)
        np.testing.assert_allclose(unitary_exp(h), expm(1j * h), atol=1e-11)

    @pytest.mark.parametrize("seed", range(5))
    def test_unitary_by_construction(self, seed):
        rng = np.random.default_rng(seed)
        h = random_hermitian(rng, 8, scale=10.0)
        assert unitarity_defect(unitary_exp(h)) < 1e-9

    def test_zero_hamiltonian_gives_identity(self):
        np.testing.assert_allclose(unitary_exp(np.zeros((3, 3))), np.eye(3), atol=1e-15)

    def test_unitarity_defect_of_non_unitary(self):
        assert unitarity_defect(2.0 * np.eye(2)) == pytest.approx(np.sqrt(18.0))
