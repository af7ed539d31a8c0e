"""Tests for the complex layer zoo: attention, activations, norms, heads, regularizers."""

import math

import numpy as np
import pytest

from constants import AttentionActivation, HiddenActivation, NormKind, RegKind
from exceptions import ConfigurationError, DomainError
from layers.activations import ComplexActivation, activate
from layers.attention import MultiHeadAttention, attention_weights, complex_attention
from layers.dense import ComplexDense, UnitaryLayer, complex_dense
from layers.dropout import ComplexDropout, complex_dropout
from layers.embedding import SplitEmbedding
from layers.heads import (
    MeasurementClassificationHead,
    NSPMeasurementHead,
    measurement_cls_head,
    softmax_cross_entropy,
)
from layers.normalization import Normalization, normalize, unit_normalize
from layers.regularizers import RegConfig, attention_ortho, dense_ortho, ortho_regularizers
from services.gradcheck_service import randomize_parameters


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


class TestAttentionWeights:

    @pytest.mark.parametrize("act", [AttentionActivation.MOD_SOFTMAX, AttentionActivation.REAL_SOFTMAX,
                                     AttentionActivation.SQUARED_ZRELU])
    def test_rows_sum_to_one(self, rng, act):
        sigma = crandn(rng, 2, 5, 5)
        weights, _ = attention_weights(sigma, act, bias=0.5 + 0.5j)
        assert not np.iscomplexobj(weights)
        np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-10)
        assert np.all(weights >= 0)

    def test_split_softmax_channels_sum_to_one(self, rng):
        weights, _ = attention_weights(crandn(rng, 4, 4), AttentionActivation.SPLIT_SOFTMAX)
        np.testing.assert_allclose(weights.real.sum(axis=-1), 1.0, atol=1e-10)
        np.testing.assert_allclose(weights.imag.sum(axis=-1), 1.0, atol=1e-10)

    def test_masked_keys_get_zero_weight(self, rng):
        mask = np.array([True, True, False])
        weights, _ = attention_weights(crandn(rng, 3, 3), AttentionActivation.MOD_SOFTMAX, mask)
        np.testing.assert_array_equal(weights[:, 2], 0.0)

    def test_mod_softmax_ranking_survives_positive_scaling(self, rng):
        sigma = crandn(rng, 4, 6)
        weights, _ = attention_weights(sigma, AttentionActivation.MOD_SOFTMAX)
        for c in (0.3, 2.5):
            scaled, _ = attention_weights(c * sigma, AttentionActivation.MOD_SOFTMAX)
            np.testing.assert_array_equal(np.argsort(scaled, axis=-1), np.argsort(weights, axis=-1))

    @pytest.mark.parametrize("act", list(AttentionActivation))
    def test_key_permutation_leaves_output_unchanged(self, rng, act):
        q, k, v = crandn(rng, 2, 3, 4), crandn(rng, 2, 5, 4), crandn(rng, 2, 5, 4)
        perm = rng.permutation(5)
        out, _ = complex_attention(q, k, v, act)
        permuted, _ = complex_attention(q, k[:, perm], v[:, perm], act)
        np.testing.assert_allclose(permuted, out, atol=1e-12)

    def test_fully_masked_row_raises(self, rng):
        with pytest.raises(DomainError):
            attention_weights(crandn(rng, 3, 3), AttentionActivation.MOD_SOFTMAX, np.zeros(3, dtype=bool))

    def test_squared_zrelu_all_gated_falls_back_to_uniform(self):
        sigma = -np.ones((2, 4)) * (1 + 1j)
        weights, _ = attention_weights(sigma, AttentionActivation.SQUARED_ZRELU)
        np.testing.assert_allclose(weights, 0.25)

    def test_single_key_gets_full_weight(self, rng):
        q, k, v = crandn(rng, 1, 1, 1, 4), crandn(rng, 1, 1, 1, 4), crandn(rng, 1, 1, 1, 4)
        out, ctx = complex_attention(q, k, v, AttentionActivation.MOD_SOFTMAX)
        np.testing.assert_allclose(ctx["weights"], 1.0)
        np.testing.assert_allclose(out, v)

    def test_incompatible_shapes(self, rng):
        with pytest.raises(DomainError):
            complex_attention(crandn(rng, 1, 3, 4), crandn(rng, 1, 3, 2), crandn(rng, 1, 3, 4),
                              AttentionActivation.MOD_SOFTMAX)


class TestMultiHeadAttention:

    def test_output_shape_and_parameters(self, rng):
        mha = MultiHeadAttention("att", 8, 2, AttentionActivation.MOD_SOFTMAX)
        randomize_parameters(mha, rng)
        out, ctx = mha.forward(crandn(rng, 3, 5, 8))
        assert out.shape == (3, 5, 8)
        assert ctx["attn"]["weights"].shape == (3, 2, 5, 5)
        assert set(mha.named_parameters()) == {f"att.w{p}.{k}" for p in "qkvo" for k in ("weight", "bias")}

    def test_without_query_and_output_projections(self):
        mha = MultiHeadAttention("att", 8, 2, AttentionActivation.REAL_SOFTMAX, remove_q_o_projections=True)
        assert mha.wq is None and mha.wo is None
        assert len(mha.parameters()) == 4

    def test_indivisible_heads(self):
        with pytest.raises(DomainError):
            MultiHeadAttention("att", 6, 4, AttentionActivation.MOD_SOFTMAX)

    def test_wrong_rank(self, rng):
        mha = MultiHeadAttention("att", 4, 2, AttentionActivation.MOD_SOFTMAX)
        with pytest.raises(DomainError):
            mha.forward(crandn(rng, 5, 4))


class TestActivations:

    def test_split_relu(self):
        z = np.array([1 - 2j, -1 + 3j])
        np.testing.assert_allclose(activate(z, HiddenActivation.SPLIT_RELU), [1 + 0j, 3j])

    def test_zrelu_keeps_first_quadrant_only(self):
        z = np.array([1 + 1j, -1 + 1j, 1 - 1j, 2 + 0j])
        np.testing.assert_allclose(activate(z, HiddenActivation.ZRELU), [1 + 1j, 0, 0, 2])

    def test_argrelu_interval(self):
        z = np.array([np.exp(0.5j), np.exp(2.0j)])
        out = activate(z, HiddenActivation.ARGRELU, theta1=0.0, theta2=1.0)
        np.testing.assert_allclose(out, [np.exp(0.5j), 0])

    def test_modrelu_preserves_phase(self):
        z = np.array([2.0 * np.exp(0.7j), 0.3 * np.exp(-1.0j)])
        out = activate(z, HiddenActivation.MODRELU, modrelu_bias=-0.5)
        np.testing.assert_allclose(out, [1.5 * np.exp(0.7j), 0])

    def test_modgelu_preserves_phase(self, rng):
        z = crandn(rng, 6)
        out = activate(z, HiddenActivation.MODGELU)
        np.testing.assert_allclose(np.angle(out), np.angle(z), atol=1e-12)
        assert np.all(np.abs(out) <= np.abs(z))

    def test_invalid_modrelu_bias(self):
        with pytest.raises(ConfigurationError):
            ComplexActivation("a", HiddenActivation.MODRELU, modrelu_bias=0.1)

    def test_invalid_argrelu_interval(self):
        with pytest.raises(ConfigurationError):
            ComplexActivation("a", HiddenActivation.ARGRELU, theta1=1.0, theta2=0.5)
        with pytest.raises(ConfigurationError):
            ComplexActivation("a", HiddenActivation.ARGRELU, theta1=0.0, theta2=4.0)


class TestNormalization:

    def test_mixed_ln_cls_row_is_unit(self, rng):
        out = normalize(crandn(rng, 3, 6, 8), NormKind.MIXED_LN)
        norms = np.linalg.norm(out[:, 0, :], axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_complex_ln_statistics(self, rng):
        out = normalize(crandn(rng, 4, 16) * 5 + 3j, NormKind.COMPLEX_LN)
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.mean(np.abs(out) ** 2, axis=-1), 1.0, atol=1e-6)

    def test_split_ln_normalizes_each_channel(self, rng):
        out = normalize(crandn(rng, 4, 16), NormKind.SPLIT_LN)
        np.testing.assert_allclose(out.real.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.imag.std(axis=-1), 1.0, atol=1e-6)

    def test_unit_norm_zero_vector(self):
        with pytest.raises(DomainError):
            unit_normalize(np.zeros((2, 4)))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DomainError):
            Normalization("n", NormKind.COMPLEX_LN, 4).forward(crandn(rng, 2, 5))

    def test_too_small_feature_dimension(self):
        with pytest.raises(ConfigurationError):
            Normalization("n", NormKind.SPLIT_LN, 1)


class TestDropout:

    def test_eval_mode_is_identity(self, rng):
        z = crandn(rng, 10)
        out, scale = complex_dropout(z, 0.5, False, rng)
        assert scale is None
        np.testing.assert_array_equal(out, z)

    def test_drops_whole_complex_values(self, rng):
        z = np.full(2000, 1 + 1j)
        out, _ = complex_dropout(z, 0.3, True, rng)
        dropped = out == 0
        np.testing.assert_allclose(out[~dropped], (1 + 1j) / 0.7)
        assert 0.25 < dropped.mean() < 0.35

    def test_drop_rate_matches_probability(self, rng):
        out, _ = complex_dropout(np.ones(100_000, dtype=complex), 0.5, True, rng)
        assert np.mean(out == 0) == pytest.approx(0.5, abs=0.01)

    def test_backward_uses_same_mask(self, rng):
        layer = ComplexDropout("drop", 0.5, rng)
        out, ctx = layer.forward(np.ones(50, dtype=complex), training=True)
        np.testing.assert_array_equal(layer.backward(np.ones(50, dtype=complex), ctx), out)

    def test_invalid_probability(self, rng):
        with pytest.raises(ConfigurationError):
            complex_dropout(np.ones(3), 1.0, True, rng)


class TestEmbedding:

    def test_sum_of_tables(self, rng):
        emb = SplitEmbedding("emb", 10, 4, 3)
        randomize_parameters(emb, rng)
        tok, pos, seg = np.array([[1, 2]]), np.array([[0, 1]]), np.array([[0, 1]])
        out = emb((tok, pos, seg))
        expected = emb.token.value[[1, 2]] + emb.position.value[[0, 1]] + emb.segment.value[[0, 1]]
        np.testing.assert_allclose(out[0], expected)

    def test_out_of_range_ids(self):
        emb = SplitEmbedding("emb", 10, 4, 3)
        with pytest.raises(DomainError):
            emb((np.array([[10]]), np.array([[0]]), np.array([[0]])))
        with pytest.raises(DomainError):
            emb((np.array([[0]]), np.array([[4]]), np.array([[0]])))

    def test_repeated_ids_accumulate(self):
        emb = SplitEmbedding("emb", 5, 4, 2)
        x = (np.array([[3, 3]]), np.array([[0, 1]]), np.array([[0, 0]]))
        _, ctx = emb.forward(x)
        emb.backward(np.ones((1, 2, 2), dtype=complex), ctx)
        np.testing.assert_allclose(emb.token.cotangent[3], [2, 2])
        np.testing.assert_allclose(emb.segment.cotangent[0], [2, 2])


class TestDense:

    def test_weight_layout(self, rng):
        dense = ComplexDense("d", 3, 2)
        randomize_parameters(dense, rng)
        x = crandn(rng, 4, 3)
        np.testing.assert_allclose(dense(x), x @ dense.weight.value.T + dense.bias.value)

    def test_matches_real_block_matrix(self, rng):
        x, w, b = crandn(rng, 4, 3), crandn(rng, 2, 3), crandn(rng, 2)
        block = np.block([[w.real, -w.imag], [w.imag, w.real]])
        stacked = np.concatenate([x.real, x.imag], axis=-1) @ block.T + np.concatenate([b.real, b.imag])
        out = complex_dense(x, w, b)
        np.testing.assert_allclose(out.real, stacked[:, :2], atol=1e-12)
        np.testing.assert_allclose(out.imag, stacked[:, 2:], atol=1e-12)

    def test_unitary_layer_is_unitary(self, rng):
        layer = UnitaryLayer("u", 6)
        randomize_parameters(layer, rng, scale=3.0)
        u, _ = layer.unitary()
        np.testing.assert_allclose(u.conj().T @ u, np.eye(6), atol=1e-10)


class TestMeasurementHeads:

    def test_cls_probabilities_sum_to_one(self, rng):
        head = MeasurementClassificationHead("cls", 8, 3)
        randomize_parameters(head, rng)
        psi, _ = unit_normalize(crandn(rng, 5, 8))
        probs = head.probabilities(psi)
        assert np.all(probs >= 0)
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)

    def test_functional_matches_layer(self, rng):
        head = MeasurementClassificationHead("cls", 4, 2, use_bias=True)
        randomize_parameters(head, rng)
        psi, _ = unit_normalize(crandn(rng, 3, 4))
        logits, _ = measurement_cls_head(psi, head.unitary.weight.value, head.projection.value.real,
                                         head.bias.value.real)
        np.testing.assert_allclose(head(psi), logits, atol=1e-12)

    def test_global_phase_invariance(self, rng):
        psi, _ = unit_normalize(crandn(rng, 5, 4))
        w, projection = crandn(rng, 4, 4), rng.normal(size=(3, 4))
        phases = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=(5, 1)))
        logits, probs = measurement_cls_head(psi, w, projection)
        rotated_logits, rotated_probs = measurement_cls_head(phases * psi, w, projection)
        np.testing.assert_allclose(rotated_probs, probs, atol=1e-12)
        np.testing.assert_allclose(rotated_logits, logits, atol=1e-12)

    def test_rejects_non_unit_states(self, rng):
        head = MeasurementClassificationHead("cls", 4, 2)
        with pytest.raises(DomainError):
            head(2.0 * unit_normalize(crandn(rng, 3, 4))[0])

    def test_projection_is_real(self):
        head = MeasurementClassificationHead("cls", 4, 2)
        assert head.projection.real
        assert not head.unitary.weight.real

    def test_nsp_measurement_probabilities(self, rng):
        head = NSPMeasurementHead("nsp", 6)
        randomize_parameters(head, rng)
        probs = head(crandn(rng, 4, 6))
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-8)

    def test_cross_entropy_ignores_index(self):
        logits = np.array([[0.0, 0.0], [5.0, -5.0]])
        loss, grad = softmax_cross_entropy(logits, np.array([-100, 0]))
        assert loss == pytest.approx(math.log1p(math.exp(-10.0)))
        np.testing.assert_array_equal(grad[0], 0.0)


class TestRegularizers:

    def test_attention_penalty_zero_for_orthogonal_rows(self):
        penalty, grad = attention_ortho(np.eye(3)[None])
        assert penalty == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_attention_penalty_real_gradient(self, rng):
        a = rng.random((3, 3))
        penalty, grad = attention_ortho(a)
        step = 1e-6
        bumped = a.copy()
        bumped[1, 2] += step
        numeric = (attention_ortho(bumped)[0] - penalty) / step
        assert grad[1, 2] == pytest.approx(numeric, rel=1e-4)

    def test_dense_penalty_zero_for_unitary(self, rng):
        u, _ = np.linalg.qr(crandn(rng, 4, 4))
        penalty, _ = dense_ortho(u)
        assert penalty == pytest.approx(0.0, abs=1e-20)

    def test_dense_penalty_value(self):
        penalty, grad = dense_ortho(2.0 * np.eye(2))
        assert penalty == pytest.approx(18.0)
        np.testing.assert_allclose(grad, 12.0 * np.eye(2))

    def test_disabled_when_lambda_zero(self, rng):
        cfg = RegConfig(RegKind.BOTH_ORTHO, 0.0)
        total, att, dense = ortho_regularizers([rng.random((2, 2))], [crandn(rng, 2, 2)], cfg, 1)
        assert total == 0.0
        assert not np.any(att[0]) and not np.any(dense[0])

    def test_scaling_by_batch(self, rng):
        a = rng.random((3, 3))
        cfg = RegConfig(RegKind.ATT_ORTHO, 0.5)
        total, _, _ = ortho_regularizers([a, a], [], cfg, 2)
        assert total == pytest.approx(0.5 * attention_ortho(a)[0])

    def test_negative_lambda(self):
        with pytest.raises(ConfigurationError):
            RegConfig(RegKind.ATT_ORTHO, -1.0)
