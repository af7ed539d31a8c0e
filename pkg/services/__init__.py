"""Services package for QBERT runs."""

from .comparison_service import ComparisonService
from .evaluation_service import EvaluationService
from .finetuning_service import FinetuningService
from .gradcheck_service import GradCheckService
from .pretraining_service import PretrainingService
from .simulation_service import SimulationService

__all__ = [
    "ComparisonService",
    "EvaluationService",
    "FinetuningService",
    "GradCheckService",
    "PretrainingService",
    "SimulationService",
]
