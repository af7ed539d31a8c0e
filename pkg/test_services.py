"""Tests for the pretraining, fine-tuning, comparison and simulation services."""

import numpy as np
import pandas as pd
import pytest

from architectures import QCLSEnd2End
from config import load_config
from constants import MAX_FILES_TO_KEEP, Architecture, OptimizerKind, RunMode
from exceptions import ConfigurationError
from report_generator import ReportGenerator, format_report_value
from services.comparison_service import ComparisonService, LeastSquaresProblem, final_loss
from services.finetuning_service import FinetuningService
from services.pretraining_service import PRETRAIN_COLUMNS, PretrainingService
from services.simulation_service import SimulationService
from utils.checkpoint import load_checkpoint
from utils.data_pipeline import LabeledText, read_documents
from utils.file_manager import RunFileManager
from utils.synthetic import separable_classification, topic_corpus

TINY = {"vocab_size": "128", "d_model": "4", "d_hidden": "8", "n_layers": "1", "n_heads": "2",
        "max_seq_len": "16", "dropout_p": "0.0"}


def pretrain_config(**extra):
    return load_config(None, RunMode.PRETRAIN, {**TINY, "steps": "4", "batch_size": "4", "log_every": "1",
                                                 "checkpoint_every": "2", **extra})


def finetune_config(**extra):
    return load_config(None, RunMode.FINETUNE, {**TINY, "epochs": "2", "batch_size": "16", **extra})


def labeled_rows(n: int, seed: int):
    return [LabeledText(label, text, i + 1) for i, (label, text) in
            enumerate(separable_classification(n_rows=n, seed=seed))]


@pytest.fixture(scope="module")
def pretrained(tmp_path_factory):
    out = tmp_path_factory.mktemp("pretrain")
    documents = read_documents(topic_corpus(n_sentences=40, sentences_per_doc=5))
    result = PretrainingService(pretrain_config(), RunFileManager(out)).run(documents)
    return out, result


class TestPretrainingService:

    def test_writes_run_files(self, pretrained):
        out, _ = pretrained
        for name in ("model.ckpt", "vocab.txt", "metrics.csv", "step_0000002.ckpt", "step_0000004.ckpt"):
            assert (out / name).exists(), name

    def test_metrics_table(self, pretrained):
        out, result = pretrained
        frame = pd.read_csv(out / "metrics.csv")
        assert list(frame.columns) == PRETRAIN_COLUMNS
        assert list(frame["step"]) == [1, 2, 3, 4]
        assert np.all(np.isfinite(frame["loss_total"]))
        np.testing.assert_allclose(frame["loss_total"], frame["loss_mlm"] + frame["loss_nsp"], rtol=1e-8)
        assert result.mean_loss("loss_mlm", 1, 2) == pytest.approx(frame["loss_mlm"][:2].mean())

    def test_seeded_rerun_is_identical(self, pretrained, tmp_path):
        out, _ = pretrained
        documents = read_documents(topic_corpus(n_sentences=40, sentences_per_doc=5))
        PretrainingService(pretrain_config(), RunFileManager(tmp_path)).run(documents)
        assert (tmp_path / "metrics.csv").read_bytes() == (out / "metrics.csv").read_bytes()
        assert (tmp_path / "model.ckpt").read_bytes() == (out / "model.ckpt").read_bytes()

    def test_checkpoint_header(self, pretrained):
        out, result = pretrained
        checkpoint = load_checkpoint(out / "model.ckpt")
        assert checkpoint.step == 4
        assert checkpoint.mode is RunMode.PRETRAIN
        assert checkpoint.architecture is Architecture.QBERT
        assert checkpoint.config == result.model.config
        assert len(result.vocab) <= 128


class TestFinetuningService:

    def test_end2end_from_scratch(self, tmp_path):
        config = finetune_config(architecture="qcls-end2end")
        result = FinetuningService(config, RunFileManager(tmp_path)).run(labeled_rows(40, 0), labeled_rows(10, 1))
        assert isinstance(result.model, QCLSEnd2End)
        assert [(m["epoch"], m["split"]) for m in result.metrics] == \
            [(1, "train"), (1, "dev"), (2, "train"), (2, "dev")]
        assert result.dev.n == 10
        assert result.max_unitarity_defect < 1e-8
        checkpoint = load_checkpoint(tmp_path / "model.ckpt")
        assert checkpoint.mode is RunMode.FINETUNE
        assert checkpoint.architecture is Architecture.QCLS_END2END
        assert (tmp_path / "vocab.txt").exists()

    def test_qbert_without_checkpoint_is_the_transformer_baseline(self, tmp_path):
        result = FinetuningService(finetune_config(), RunFileManager(tmp_path)).run(
            labeled_rows(20, 0), labeled_rows(6, 1))
        assert result.model.architecture is Architecture.QCLS_TRANSFORMER

    @pytest.mark.parametrize("arch", [Architecture.QCLS_END2END, Architecture.QCLS_TRANSFORMER])
    def test_baselines_reject_checkpoints(self, tmp_path, arch):
        service = FinetuningService(finetune_config(), RunFileManager(tmp_path), arch)
        with pytest.raises(ConfigurationError):
            service.run(labeled_rows(4, 0), labeled_rows(4, 1), tmp_path / "model.ckpt")

    def test_from_pretrained_encoder(self, pretrained, tmp_path):
        out, pretrain = pretrained
        result = FinetuningService(finetune_config(), RunFileManager(tmp_path)).run(
            labeled_rows(20, 0), labeled_rows(6, 1), out / "model.ckpt")
        assert result.model.architecture is Architecture.QBERT
        assert result.vocab.tokens == pretrain.vocab.tokens
        assert load_checkpoint(tmp_path / "model.ckpt").architecture is Architecture.QBERT

    def test_config_mismatch_with_checkpoint(self, pretrained, tmp_path):
        out, _ = pretrained
        service = FinetuningService(finetune_config(d_hidden="6"), RunFileManager(tmp_path))
        with pytest.raises(ConfigurationError) as info:
            service.run(labeled_rows(4, 0), labeled_rows(4, 1), out / "model.ckpt")
        assert info.value.differing_keys == ["d_hidden"]


class TestComparisonService:

    def test_least_squares_cotangent(self):
        problem = LeastSquaresProblem.random(3, np.random.default_rng(0))
        theta = np.array([0.1 + 0.2j, -0.3j, 0.5])
        rows = np.arange(problem.a.shape[0])
        analytic = problem.cotangent(theta, rows)
        step = 1e-6
        for k in range(3):
            e = np.zeros(3, dtype=complex)
            e[k] = step
            d_re = (problem.loss(theta + e) - problem.loss(theta - e)) / (2 * step)
            d_im = (problem.loss(theta + 1j * e) - problem.loss(theta - 1j * e)) / (2 * step)
            assert analytic[k] == pytest.approx(0.5 * (d_re + 1j * d_im), abs=1e-6)

    def test_final_loss_is_trailing_mean(self):
        assert final_loss([9.0, 8.0, 7.0, 1.0, 3.0, 5.0, 4.0, 2.0]) == pytest.approx(3.0)
        assert final_loss([4.0]) == 4.0

    def test_recorded_curves(self):
        result = ComparisonService(dim=4, steps=30, seeds=2).run()
        assert len(result.rows) == 2 * 2 * 4
        cadamw_seed0 = [r["step"] for r in result.rows if r["optimizer"] == "cadamw" and r["seed"] == 0]
        assert cadamw_seed0 == [0, 10, 20, 30]
        assert set(result.final) == {k.value for k in OptimizerKind}
        assert set(result.final["radamw"]) == {0, 1}
        assert set(result.wins()) <= {0, 1}

    def test_same_start_for_both_optimizers(self):
        result = ComparisonService(dim=4, steps=10, seeds=1).run()
        start = {r["optimizer"]: r["loss"] for r in result.rows if r["step"] == 0}
        assert start["cadamw"] == start["radamw"]

    def test_reproducible(self):
        a = ComparisonService(dim=4, steps=20, seeds=1).run()
        b = ComparisonService(dim=4, steps=20, seeds=1).run()
        assert a.final == b.final

    def test_loss_decreases(self):
        result = ComparisonService(dim=4, steps=500, seeds=1, lr=0.05).run()
        for kind in ("cadamw", "radamw"):
            curve = [r["loss"] for r in result.rows if r["optimizer"] == kind]
            assert result.final[kind][0] < curve[0]

    def test_rejects_non_positive_arguments(self):
        with pytest.raises(ConfigurationError):
            ComparisonService(dim=0)


class TestSimulationService:

    def test_random_head(self):
        report = SimulationService(n_states=4, shots=2000, seed=1).random_head(n_qubits=2, n_classes=2)
        assert report.n_qubits == 2
        assert report.head_dim == 4
        assert report.mse_analytic < 1e-14
        assert report.unitarity_defect < 1e-8

    def test_trained_head(self, tmp_path):
        FinetuningService(finetune_config(architecture="qcls-end2end", epochs="1"), RunFileManager(tmp_path)).run(
            labeled_rows(16, 0), labeled_rows(4, 1))
        report = SimulationService(n_states=3, shots=500).trained_head(tmp_path / "model.ckpt")
        assert report.head_dim == 4
        assert report.n_qubits == 2
        assert report.mse_analytic < 1e-14


class TestRunFiles:

    def test_cleanup_keeps_newest_step_checkpoints(self, tmp_path):
        manager = RunFileManager(tmp_path)
        for step in range(1, MAX_FILES_TO_KEEP + 4):
            manager.step_checkpoint_path(step).write_bytes(b"")
        manager.cleanup_old_files()
        kept = sorted(p.name for p in tmp_path.glob("step_*.ckpt"))
        assert len(kept) == MAX_FILES_TO_KEEP
        assert kept[0] == "step_0000004.ckpt"

    def test_metrics_round_trip(self, tmp_path):
        manager = RunFileManager(tmp_path / "nested")
        manager.save_metrics([{"a": 1, "b": 0.5}], ["a", "b"])
        frame = manager.load_metrics()
        assert list(frame.columns) == ["a", "b"]
        assert frame["b"][0] == 0.5

    def test_report_text_and_html(self, tmp_path):
        generator = ReportGenerator(RunFileManager(tmp_path))
        tables = [{"name": "checks", "columns": ["layer", "passed"], "rows": [["dense", True], ["norm", False]],
                   "flag": 1}]
        path = generator.save("gradcheck", "Gradient check", {"checks": 2, "error": 1.5e-9}, tables, html=True)
        text = path.read_text()
        assert "checks = 2" in text
        assert "error = 1.5e-09" in text
        assert "dense\ttrue" in text
        html = path.with_suffix(".html").read_text()
        assert html.count('class="fail"') == 1

    def test_format_report_value(self):
        assert format_report_value(False) == "false"
        assert format_report_value(float("nan")) == "nan"
        assert format_report_value(0.123456789) == "0.123457"
