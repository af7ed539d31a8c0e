"""Main entry point for the QBERT toolkit."""

import argparse
import sys
from typing import Dict, List, Optional, Sequence

from config import load_config, setup_logging
from constants import (
    DEFAULT_SHOTS,
    EQUIVALENCE_CLASSES,
    EQUIVALENCE_QUBITS,
    EQUIVALENCE_STATES,
    Architecture,
    RunMode,
)
from exceptions import ConfigurationError, QBertError
from orchestrator import QBertOrchestrator

EPILOG = """
Examples:

Pretrain on a text corpus (one sentence per line, blank line between documents):
  python main.py pretrain --config configs/pretrain_toy.conf --corpus corpus.txt --out runs/pretrain

Fine-tune from the pretrained encoder, or train the baselines:
  python main.py finetune --config configs/finetune_toy.conf --ckpt runs/pretrain/model.ckpt \\
      --train train.tsv --dev dev.tsv --out runs/qbert
  python main.py finetune --config configs/finetune_toy.conf --ckpt none --train train.tsv --dev dev.tsv --out runs/qcls
  python main.py finetune --config configs/finetune_toy.conf --ckpt none --arch qcls-end2end ...

Evaluate a fine-tuned checkpoint:
  python main.py eval --ckpt runs/qbert/model.ckpt --data test.tsv

Verification:
  python main.py gradcheck --layer attention
  python main.py compare-optimizers --problem lsq --dim 32 --steps 2000 --seeds 3
  python main.py simulate-circuit --qubits 3 --classes 2 --states 16 --shots 100000 --seed 0
"""


def parse_overrides(pairs: Optional[Sequence[str]]) -> Dict[str, str]:
    overrides: Dict[str, str] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got '{pair}'")
        overrides[key.strip()] = value.strip()
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="QBERT - quantum-compatible complex-valued BERT toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level (default: $QBERT_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser, required: bool = False) -> None:
        p.add_argument("--config", required=required, help="Flat key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override one configuration key")

    p = sub.add_parser("pretrain", help="MLM + NSP pretraining")
    with_config(p, required=True)
    p.add_argument("--corpus", required=True, help="Plain-text corpus, one sentence per line")
    p.add_argument("--out", required=True, help="Output run directory")

    p = sub.add_parser("finetune", help="Classification with the measurement head")
    with_config(p, required=True)
    p.add_argument("--ckpt", required=True, help="Pretrained checkpoint, or 'none' to train from scratch")
    p.add_argument("--train", required=True, help="Training TSV (label<TAB>text)")
    p.add_argument("--dev", required=True, help="Development TSV (label<TAB>text)")
    p.add_argument("--out", required=True, help="Output run directory")
    p.add_argument("--arch", choices=[a.value for a in Architecture], help="Architecture (overrides the config)")

    p = sub.add_parser("eval", help="Accuracy / F1 / Matthews correlation of a fine-tuned checkpoint")
    with_config(p)
    p.add_argument("--ckpt", required=True, help="Fine-tuned checkpoint")
    p.add_argument("--data", required=True, help="Labeled TSV")
    p.add_argument("--out", default="runs/eval", help="Directory for the report")

    p = sub.add_parser("gradcheck", help="Finite-difference gradient suite")
    with_config(p)
    p.add_argument("--layer", help="Only check layers with this name or name prefix")
    p.add_argument("--out", default="runs/gradcheck", help="Directory for the report")

    p = sub.add_parser("compare-optimizers", help="CAdamW vs RAdamW loss curves")
    p.add_argument("--problem", choices=["lsq"], default="lsq", help="Comparison problem")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--out", default="runs/compare", help="Directory for the CSV and report")

    p = sub.add_parser("simulate-circuit", help="Classical head vs statevector circuit equivalence")
    p.add_argument("--qubits", type=int, default=EQUIVALENCE_QUBITS)
    p.add_argument("--classes", type=int, default=EQUIVALENCE_CLASSES)
    p.add_argument("--states", type=int, default=EQUIVALENCE_STATES)
    p.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ckpt", help="Export the head of a fine-tuned checkpoint instead of a random head")
    p.add_argument("--out", default="runs/simulate", help="Directory for the report")
    return parser


_MODES = {"pretrain": RunMode.PRETRAIN, "finetune": RunMode.FINETUNE, "eval": RunMode.FINETUNE}


def run(args: argparse.Namespace) -> int:
    """Dispatch one parsed command; returns the process exit code."""
    config = load_config(getattr(args, "config", None), _MODES.get(args.command),
                         parse_overrides(getattr(args, "set", None)))
    orchestrator = QBertOrchestrator(config, args.out)

    if args.command == "pretrain":
        orchestrator.pretrain(args.corpus)
    elif args.command == "finetune":
        ckpt = None if args.ckpt.lower() == "none" else args.ckpt
        orchestrator.finetune(args.train, args.dev, ckpt, Architecture(args.arch) if args.arch else None)
    elif args.command == "eval":
        orchestrator.evaluate(args.ckpt, args.data)
    elif args.command == "gradcheck":
        reports = orchestrator.gradcheck(args.layer)
        if not all(r.passed for r in reports):
            return 1
    elif args.command == "compare-optimizers":
        orchestrator.compare_optimizers(args.dim, args.steps, args.seeds)
    elif args.command == "simulate-circuit":
        orchestrator.simulate_circuit(args.qubits, args.classes, args.states, args.shots, args.seed, args.ckpt)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    args = build_parser().parse_args(argv)
    logger = setup_logging(args.log_level)
    try:
        return run(args)
    except (QBertError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
