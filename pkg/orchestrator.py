"""Main orchestrator for QBERT command-line runs."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from autodiff import GradCheckReport
from config import RunConfig
from constants import Architecture, OptimizerKind
from qsim import EquivalenceReport
from report_generator import ReportGenerator
from services.comparison_service import COMPARISON_COLUMNS, ComparisonResult, ComparisonService
from services.evaluation_service import EvalResult, EvaluationService, load_finetuned
from services.finetuning_service import FinetuneResult, FinetuningService
from services.gradcheck_service import GradCheckService, summarize
from services.pretraining_service import PretrainingService, PretrainResult
from services.simulation_service import SimulationService
from utils.data_pipeline import encode_classification, load_corpus, load_labeled_tsv
from utils.file_manager import RunFileManager

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _banner(title: str) -> None:
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)


class QBertOrchestrator:
    """Runs one subcommand inside an output directory and prints its summary."""

    def __init__(self, config: RunConfig, out_dir: PathLike):
        self.config = config
        self.file_manager = RunFileManager(out_dir)
        self.report_generator = ReportGenerator(self.file_manager)

    def pretrain(self, corpus: PathLike) -> PretrainResult:
        documents = load_corpus(corpus, self.config.training.max_lines)
        result = PretrainingService(self.config, self.file_manager).run(documents)
        first, last = result.metrics[0], result.metrics[-1]
        _banner("PRETRAINING SUMMARY")
        print(f"Steps: {last['step']}  vocab: {len(result.vocab)}")
        print(f"MLM loss: {first['loss_mlm']:.4f} -> {last['loss_mlm']:.4f}")
        print(f"NSP loss: {first['loss_nsp']:.4f} -> {last['loss_nsp']:.4f}")
        print(f"Checkpoint: {self.file_manager.checkpoint_path}")
        return result

    def finetune(self, train: PathLike, dev: PathLike, ckpt: Optional[PathLike] = None,
                 architecture: Optional[Architecture] = None) -> FinetuneResult:
        n_classes = self.config.model.n_classes
        train_rows = load_labeled_tsv(train, n_classes)
        dev_rows = load_labeled_tsv(dev, n_classes)
        result = FinetuningService(self.config, self.file_manager, architecture).run(train_rows, dev_rows, ckpt)
        _banner("FINE-TUNING SUMMARY")
        print(f"Architecture: {result.model.architecture.value}")
        print(f"Train: loss={result.train.loss:.4f} accuracy={result.train.accuracy:.4f}")
        print(f"Dev:   loss={result.dev.loss:.4f} accuracy={result.dev.accuracy:.4f} "
              f"f1={result.dev.f1:.4f} mcc={result.dev.mcc:.4f}")
        print(f"Max head unitarity defect: {result.max_unitarity_defect:.2e}")
        print(f"Checkpoint: {self.file_manager.checkpoint_path}")
        return result

    def evaluate(self, ckpt: PathLike, data: PathLike) -> EvalResult:
        model, vocab = load_finetuned(ckpt)
        rows = load_labeled_tsv(data, model.config.n_classes)
        batch = encode_classification(rows, vocab, model.config.max_seq_len)
        result = EvaluationService(self.config.training.batch_size).evaluate(model, batch, split=str(data))
        values = {"checkpoint": str(ckpt), "data": str(data), "architecture": model.architecture.value}
        values.update(result.to_dict())
        self.report_generator.save("eval", "Evaluation", values)
        _banner("EVALUATION")
        for key, value in result.to_dict().items():
            print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
        return result

    def gradcheck(self, layer: Optional[str] = None) -> List[GradCheckReport]:
        reports = GradCheckService(self.config.model).run(layer)
        rows = summarize(reports)
        failed = [r for r in reports if not r.passed]
        self.report_generator.save(
            "gradcheck", "Gradient check",
            {"checks": len(reports), "failed": len(failed), "passed": not failed},
            [{"name": "checks", "columns": ["layer", "seed", "max_error", "tolerance", "passed"],
              "rows": rows, "flag": 4}], html=True)
        _banner("GRADIENT CHECK")
        for name, seed, error, tol, passed in rows:
            print(f"{'ok  ' if passed else 'FAIL'} {name:<28} seed={seed} err={error:.2e} tol={tol:.0e}")
        print(f"\n{len(reports) - len(failed)}/{len(reports)} checks passed")
        return reports

    def compare_optimizers(self, dim: int = 32, steps: int = 2000, seeds: int = 3) -> ComparisonResult:
        result = ComparisonService(dim, steps, seeds).run()
        csv_path = self.file_manager.save_metrics(
            result.rows, COMPARISON_COLUMNS, self.file_manager.out_dir / "optimizer_comparison.csv")
        final_rows = [[seed] + [result.final[k][seed] for k in result.final]
                      for seed in sorted(result.final[OptimizerKind.CADAMW.value])]
        wins = result.wins()
        self.report_generator.save(
            "compare_optimizers", "Optimizer comparison",
            {"problem": "lsq", "dim": dim, "steps": steps, "seeds": seeds,
             "cadamw_wins": len(wins), "curves": csv_path},
            [{"name": "final_loss", "columns": ["seed"] + list(result.final), "rows": final_rows}])
        _banner("OPTIMIZER COMPARISON")
        for row in final_rows:
            print(f"seed {row[0]}: " + "  ".join(f"{k}={v:.6g}" for k, v in zip(result.final, row[1:])))
        print(f"CAdamW final loss <= RAdamW on {len(wins)}/{seeds} seeds")
        return result

    def simulate_circuit(self, n_qubits: int, n_classes: int, n_states: int, shots: int, seed: int,
                         ckpt: Optional[PathLike] = None) -> EquivalenceReport:
        service = SimulationService(n_states, shots, seed)
        report = service.trained_head(ckpt) if ckpt is not None else service.random_head(n_qubits, n_classes)
        values: Dict[str, object] = report.to_dict()
        self.report_generator.save("simulate_circuit", "Circuit equivalence", values)
        _banner("CIRCUIT EQUIVALENCE")
        for key, value in values.items():
            print(f"{key} = {value:.6g}" if isinstance(value, float) else f"{key} = {value}")
        return report
