"""Langevin samplers against gradient optimizers on locally nonconvex objectives."""
from .bounds import (
    beta_requirement,
    bound_report,
    log_sobolev_lower_bound,
    mala_mixing_bound,
    optimization_lower_bound,
    packing_number,
    ula_mixing_bound,
)
from .data import Dataset, gen_adversarial_dataset, gen_sparse_dataset, load_dataset, save_dataset, validate_dataset
from .numerics import RngStream, finite_diff_grad
from .objectives import (
    GmmPosterior,
    ObjectiveConstants,
    PackedWellObjective,
    QuadraticObjective,
    hard_objective_new,
    packing_centers,
    quadratic_objective,
    temper,
)
from .optimizers import run_em, run_gd
from .records import RunRecord
from .samplers import ChainConfig, StepSchedule, run_chain

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "Dataset",
    "GmmPosterior",
    "ObjectiveConstants",
    "PackedWellObjective",
    "QuadraticObjective",
    "RngStream",
    "RunRecord",
    "StepSchedule",
    "beta_requirement",
    "bound_report",
    "finite_diff_grad",
    "gen_adversarial_dataset",
    "gen_sparse_dataset",
    "hard_objective_new",
    "load_dataset",
    "log_sobolev_lower_bound",
    "mala_mixing_bound",
    "optimization_lower_bound",
    "packing_centers",
    "packing_number",
    "quadratic_objective",
    "run_chain",
    "run_em",
    "run_gd",
    "save_dataset",
    "temper",
    "ula_mixing_bound",
    "validate_dataset",
]
