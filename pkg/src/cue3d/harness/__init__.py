"""Pipeline orchestration: plans, model runners, evaluation and persistence."""

from .evaluate import GroundTruth, evaluate_prediction, prepare_ground_truth
from .fixtures import make_fixture_set, reference_plan, write_plan
from .pipeline import RunSummary, run_pipeline
from .plan import EvalConfig, PipelinePlan, RunnerSpec, VariantSpec, ingest_variant
from .runners import format_command, obtain_prediction, precomputed_path

__all__ = [
    "EvalConfig", "GroundTruth", "PipelinePlan", "RunSummary", "RunnerSpec", "VariantSpec",
    "evaluate_prediction", "format_command", "ingest_variant", "make_fixture_set",
    "obtain_prediction", "precomputed_path", "prepare_ground_truth", "reference_plan",
    "run_pipeline", "write_plan",
]
