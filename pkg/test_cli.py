"""Command-line tests: every subcommand runs end to end on tiny settings."""

import pandas as pd
import pytest

from exceptions import ConfigurationError
from main import build_parser, main, parse_overrides
from utils.synthetic import separable_classification, topic_corpus, write_lines, write_tsv

TINY_CONFIG = """\
vocab_size = 128
d_model = 4
d_hidden = 8
n_layers = 1
n_heads = 2
max_seq_len = 16
dropout_p = 0.0
n_classes = 2
steps = 3
epochs = 1
batch_size = 8
log_every = 1
"""


def reports(directory, kind: str, suffix: str = "txt"):
    return sorted(directory.glob(f"qbert_{kind}_*.{suffix}"))


class TestParser:

    def test_overrides(self):
        assert parse_overrides(["seed = 3", "lr=0.1"]) == {"seed": "3", "lr": "0.1"}
        assert parse_overrides(None) == {}
        with pytest.raises(ConfigurationError):
            parse_overrides(["seed"])

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_finetune_arch_choices(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["finetune", "--config", "c", "--ckpt", "none", "--train", "t",
                                       "--dev", "d", "--out", "o", "--arch", "bert"])


class TestVerificationCommands:

    def test_gradcheck_single_layer(self, tmp_path):
        assert main(["gradcheck", "--layer", "dense", "--out", str(tmp_path)]) == 0
        text = reports(tmp_path, "gradcheck")[0].read_text()
        assert "checks = 3" in text
        assert "failed = 0" in text
        assert len(reports(tmp_path, "gradcheck", "html")) == 1

    def test_gradcheck_unknown_layer(self, tmp_path):
        assert main(["gradcheck", "--layer", "nope", "--out", str(tmp_path)]) == 1

    def test_simulate_circuit(self, tmp_path):
        args = ["simulate-circuit", "--qubits", "2", "--classes", "2", "--states", "3", "--shots", "1000",
                "--out", str(tmp_path)]
        assert main(args) == 0
        text = reports(tmp_path, "simulate_circuit")[0].read_text()
        assert "n_qubits = 2" in text
        assert "mse_sampled = " in text

    def test_compare_optimizers(self, tmp_path):
        assert main(["compare-optimizers", "--dim", "4", "--steps", "20", "--seeds", "1",
                     "--out", str(tmp_path)]) == 0
        curves = pd.read_csv(tmp_path / "optimizer_comparison.csv")
        assert list(curves.columns) == ["step", "optimizer", "seed", "loss"]
        assert len(curves) == 2 * 3
        assert "cadamw_wins = " in reports(tmp_path, "compare_optimizers")[0].read_text()


class TestTrainingCommands:

    @pytest.fixture
    def files(self, tmp_path):
        config = tmp_path / "tiny.conf"
        config.write_text(TINY_CONFIG)
        corpus = write_lines(tmp_path / "corpus.txt", topic_corpus(n_sentences=30, sentences_per_doc=5))
        train = write_tsv(tmp_path / "train.tsv", separable_classification(n_rows=24, seed=0))
        dev = write_tsv(tmp_path / "dev.tsv", separable_classification(n_rows=8, seed=1))
        return {"config": str(config), "corpus": str(corpus), "train": str(train), "dev": str(dev)}

    def test_pretrain_finetune_eval_simulate(self, tmp_path, files):
        pre, fine, ev, sim = (tmp_path / name for name in ("pre", "fine", "eval", "sim"))
        assert main(["pretrain", "--config", files["config"], "--corpus", files["corpus"], "--out", str(pre)]) == 0
        assert (pre / "model.ckpt").exists() and (pre / "vocab.txt").exists()

        assert main(["finetune", "--config", files["config"], "--ckpt", str(pre / "model.ckpt"),
                     "--train", files["train"], "--dev", files["dev"], "--out", str(fine),
                     "--set", "seed=5"]) == 0
        metrics = pd.read_csv(fine / "metrics.csv")
        assert list(metrics["split"]) == ["train", "dev"]

        assert main(["eval", "--ckpt", str(fine / "model.ckpt"), "--data", files["dev"], "--out", str(ev)]) == 0
        text = reports(ev, "eval")[0].read_text()
        assert "architecture = qbert" in text
        assert "n = 8" in text
        assert "mcc = " in text

        assert main(["simulate-circuit", "--ckpt", str(fine / "model.ckpt"), "--states", "2", "--shots", "100",
                     "--out", str(sim)]) == 0
        assert "head_dim = 4" in reports(sim, "simulate_circuit")[0].read_text()

    def test_finetune_baselines_from_scratch(self, tmp_path, files):
        for arch in ("qcls-transformer", "qcls-end2end"):
            out = tmp_path / arch
            assert main(["finetune", "--config", files["config"], "--ckpt", "none", "--arch", arch,
                         "--train", files["train"], "--dev", files["dev"], "--out", str(out)]) == 0
            assert (out / "model.ckpt").exists()

    def test_eval_rejects_pretraining_checkpoint(self, tmp_path, files):
        pre = tmp_path / "pre"
        assert main(["pretrain", "--config", files["config"], "--corpus", files["corpus"], "--out", str(pre)]) == 0
        assert main(["eval", "--ckpt", str(pre / "model.ckpt"), "--data", files["dev"],
                     "--out", str(tmp_path / "ev")]) == 1

    def test_missing_config_file(self, tmp_path, files):
        assert main(["pretrain", "--config", str(tmp_path / "absent.conf"), "--corpus", files["corpus"],
                     "--out", str(tmp_path / "out")]) == 1

    def test_bad_override(self, tmp_path, files):
        assert main(["pretrain", "--config", files["config"], "--set", "d_model=big", "--corpus", files["corpus"],
                     "--out", str(tmp_path / "out")]) == 1

    def test_malformed_tsv(self, tmp_path, files):
        bad = write_lines(tmp_path / "bad.tsv", ["0\tok", "not a row"])
        assert main(["finetune", "--config", files["config"], "--ckpt", "none", "--train", str(bad),
                     "--dev", files["dev"], "--out", str(tmp_path / "out")]) == 1
