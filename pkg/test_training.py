"""Long-running acceptance checks: toy pretraining, transfer, optimizer comparison, shot scaling."""

import math
from pathlib import Path

import numpy as np
import pytest

from config import load_config
from constants import Architecture, RunMode
from qsim import default_harness
from services.comparison_service import ComparisonService
from services.finetuning_service import FinetuningService
from services.pretraining_service import PretrainingService
from utils.data_pipeline import LabeledText, read_documents
from utils.file_manager import RunFileManager
from utils.synthetic import order_classification, topic_corpus

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).parent / "configs"
MODEL = {"d_model": "32", "d_hidden": "64", "n_layers": "2", "n_heads": "2"}


def rows(pairs):
    return [LabeledText(label, text, i + 1) for i, (label, text) in enumerate(pairs)]


@pytest.fixture(scope="module")
def pretrained(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy_pretrain")
    config = load_config(CONFIG_DIR / "pretrain_toy.conf", RunMode.PRETRAIN, dict(MODEL, checkpoint_every="0"))
    documents = read_documents(topic_corpus(n_sentences=200))
    return out, PretrainingService(config, RunFileManager(out)).run(documents)


class TestToyPretraining:

    def test_losses_drop(self, pretrained):
        _, result = pretrained
        mlm_start = result.mean_loss("loss_mlm", 1, 10)
        mlm_end = result.mean_loss("loss_mlm", 451, 500)
        assert mlm_end <= 0.7 * mlm_start
        assert result.mean_loss("loss_nsp", 451, 500) < math.log(2)


class TestTransfer:

    def test_pretrained_encoder_beats_bag_of_words(self, pretrained, tmp_path):
        out, _ = pretrained
        train = rows(order_classification(n_rows=200, paired=True, seed=10))
        dev = rows(order_classification(n_rows=100, paired=True, seed=11))
        for seed in (0, 1, 2):
            overrides = dict(MODEL, seed=str(seed))
            qbert = FinetuningService(
                load_config(CONFIG_DIR / "finetune_toy.conf", RunMode.FINETUNE, overrides),
                RunFileManager(tmp_path / f"qbert{seed}")).run(train, dev, out / "model.ckpt")
            end2end = FinetuningService(
                load_config(CONFIG_DIR / "finetune_toy.conf", RunMode.FINETUNE, overrides),
                RunFileManager(tmp_path / f"end2end{seed}"), Architecture.QCLS_END2END).run(train, dev)
            assert qbert.dev.accuracy >= end2end.dev.accuracy, seed
            assert qbert.max_unitarity_defect < 1e-9


class TestOptimizerComparison:

    def test_cadamw_wins_every_seed(self):
        result = ComparisonService(dim=32, steps=2000, seeds=3).run()
        assert result.wins() == [0, 1, 2]


class TestShotScaling:

    def test_sampled_error_shrinks_with_shots(self):
        def total(shots):
            return sum(default_harness(3, 2, 16, shots, seed).mse_sampled for seed in range(5))

        ratio = total(10_000) / total(100_000)
        assert 5.0 <= ratio <= 20.0

    def test_default_sampled_error(self):
        report = default_harness()
        assert report.mse_sampled < 1e-8
        assert np.isfinite(report.mse_analytic) and report.mse_analytic < 1e-14
