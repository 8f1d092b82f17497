"""dspace: maximum-volume design spaces for regression-modeled quality
attributes, computed by constrained numeric optimization with tolerance-
interval boundaries as the conservative feasibility criterion."""

from ._kernels import backend_name as kernel_backend
from .engine import (
    DsResult,
    assemble_constraints,
    compute_design_space,
    inner_extreme_ti,
    objective,
    run_pass,
)
from .grid import GridSpec, evaluate_grid, grid_design_space, largest_feasible_box
from .model import (
    CategoricalCoding,
    Factor,
    RegressionModel,
    TermSpec,
    build_design_matrix,
    fit_from_table,
    fit_ols,
    implied_last_level,
    model_from_json,
    model_to_json,
    predict,
    predict_batch,
)
from .normalize import map_levels, normalize_problem, reexpress_model, relax_categorical
from .problem import (
    DsProblem,
    OptimizerConfig,
    ParameterDef,
    ResponseSpec,
    canonical_json,
    load_problem,
    problem_from_json,
    problem_to_json,
)
from .tolerance import (
    CcdPlan,
    TiApproximation,
    TiSpec,
    approx_ti,
    build_ti_approximation,
    exact_ti,
    generate_ccd,
    noncentral_chi2_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "DsResult", "assemble_constraints", "compute_design_space",
    "inner_extreme_ti", "objective", "run_pass",
    "GridSpec", "evaluate_grid", "grid_design_space", "largest_feasible_box",
    "CategoricalCoding", "Factor", "RegressionModel", "TermSpec",
    "build_design_matrix", "fit_from_table", "fit_ols", "implied_last_level",
    "model_from_json", "model_to_json", "predict", "predict_batch",
    "map_levels", "normalize_problem", "reexpress_model", "relax_categorical",
    "DsProblem", "OptimizerConfig", "ParameterDef", "ResponseSpec",
    "canonical_json", "load_problem", "problem_from_json", "problem_to_json",
    "CcdPlan", "TiApproximation", "TiSpec", "approx_ti",
    "build_ti_approximation", "exact_ti", "generate_ccd",
    "noncentral_chi2_quantile",
]
