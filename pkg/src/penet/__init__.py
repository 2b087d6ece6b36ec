"""Parameter estimation for Levy-driven Ornstein-Uhlenbeck SDEs.

A three-stage CNN-LSTM estimation network with its own reverse-mode
autodiff engine, exact noise samplers and Euler-Maruyama simulation for
dataset generation, and classical baselines (Cauchy quasi-MLE,
least-squares drift) for comparison.
"""

from .autodiff import GradTape, ShapeError, Tensor, backward
from .baselines import CqmleResult, cqmle_fit, lse_drift, midpoint_predictor
from .dataset import (
    DatasetRecord,
    GenerationSummary,
    build_record,
    generate_dataset,
    inspect_dataset,
    read_dataset,
    write_dataset,
)
from .estimators import CauchyQMLE, LeastSquaresDrift, MidpointPredictor, PEnetRegressor
from .model import InputTooShortError, PEnetConfig, PEnetModel
from .noise import (
    NoiseKind,
    sample_alpha_stable,
    sample_gaussian_increment,
    sample_increment,
    sample_increments,
    sample_student_t,
)
from .optim import AdamState, adam_step, clip_global_norm
from .rng import SeededRng
from .sde import (
    ParamVector,
    SdeFamily,
    SimulationDiverged,
    Trajectory,
    X0Policy,
    alpha_stable_family,
    gaussian_family,
    sample_parameters,
    simulate_ou,
    student_family,
)
from .training import (
    EstimationReport,
    GroupSpec,
    TrainConfig,
    build_report,
    evaluate,
    generate_grouped_testset,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CauchyQMLE",
    "CqmleResult",
    "DatasetRecord",
    "EstimationReport",
    "GenerationSummary",
    "GradTape",
    "GroupSpec",
    "InputTooShortError",
    "LeastSquaresDrift",
    "MidpointPredictor",
    "NoiseKind",
    "ParamVector",
    "PEnetConfig",
    "PEnetModel",
    "PEnetRegressor",
    "SdeFamily",
    "SeededRng",
    "ShapeError",
    "SimulationDiverged",
    "Tensor",
    "TrainConfig",
    "Trajectory",
    "X0Policy",
    "adam_step",
    "alpha_stable_family",
    "backward",
    "build_record",
    "build_report",
    "clip_global_norm",
    "cqmle_fit",
    "evaluate",
    "gaussian_family",
    "generate_dataset",
    "generate_grouped_testset",
    "inspect_dataset",
    "lse_drift",
    "midpoint_predictor",
    "read_dataset",
    "sample_alpha_stable",
    "sample_gaussian_increment",
    "sample_increment",
    "sample_increments",
    "sample_parameters",
    "sample_student_t",
    "simulate_ou",
    "student_family",
    "train",
    "write_dataset",
]
