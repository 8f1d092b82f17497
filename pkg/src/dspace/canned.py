"""Canned example problems used by benchmarks, tests and the demo UI."""

from __future__ import annotations

import numpy as np

from .model import (
    Factor,
    RegressionModel,
    canonicalize_terms,
    expand_continuous,
    interaction,
    intercept,
    linear,
    quadratic,
    term_name,
)
from .problem import DsProblem, OptimizerConfig, ParameterDef, ResponseSpec
from .tolerance import TiSpec, exact_halfwidths


def parabola_problem(config: OptimizerConfig | None = None) -> DsProblem:
    """Noiseless y = x1^2 + x2 on [-1,1]^2 with y <= 0 required.

    The largest box containing the setpoint (0, -1) is x1 in [-a, a],
    x2 in [-1, -a^2] with a = 1/sqrt(3): volume 4/(3*sqrt(3)) ~ 0.7698.
    """
    factors = (Factor("x1"), Factor("x2"))
    terms = canonicalize_terms([quadratic(0), linear(1)])
    model = RegressionModel(
        factors=factors,
        terms=terms,
        beta_hat=np.array([1.0, 1.0]),
        sigma2_hat=0.0,
        n=9,
        xtx_inverse=np.eye(2),
    )
    return DsProblem(
        parameters=(
            ParameterDef("x1", bounds=(-1.0, 1.0), setpoint=0.0),
            ParameterDef("x2", bounds=(-1.0, 1.0), setpoint=-1.0),
        ),
        responses=(ResponseSpec("y", model, TiSpec(), upper=0.0),),
        config=config or OptimizerConfig(),
    )


SIXFACTOR_COEFFS = {
    "intercept": -0.45,
    "x1": 2.1, "x2": -0.93, "x3": 0.63, "x4": 0.42, "x5": -0.32, "x6": 0.28,
    "x2^2": 0.76,
    "x1:x2": -0.21, "x1:x5": -0.34, "x1:x6": 0.22,
    "x2:x3": 0.27, "x2:x4": 0.24, "x2:x5": -0.25,
    "x3:x6": -0.19, "x4:x6": -0.32,
}


def sixfactor_model(sigma_fraction: float = 0.10, n_train: int = 60,
                    ti: TiSpec = TiSpec(), seed: int = 2024) -> RegressionModel:
    """Six-factor response surface with fixed published-style coefficients.

    The noise/uncertainty context is a documented desk-scale choice: the
    covariance structure comes from a seeded random n_train-point design on
    the cube, and sigma is calibrated so the mean TI half-width is about
    `sigma_fraction` of the response range over the cube.
    """
    factors = tuple(Factor(f"x{i}") for i in range(1, 7))
    terms = canonicalize_terms(
        [intercept()]
        + [linear(i) for i in range(6)]
        + [quadratic(1)]
        + [interaction(0, 1), interaction(0, 4), interaction(0, 5),
           interaction(1, 2), interaction(1, 3), interaction(1, 4),
           interaction(2, 5), interaction(3, 5)]
    )
    factor_names = [f.name for f in factors]
    beta = np.array([SIXFACTOR_COEFFS[term_name(t, factor_names)] for t in terms])

    rng = np.random.default_rng(seed)
    X_train = rng.uniform(-1.0, 1.0, size=(n_train, 6))
    X = expand_continuous(X_train, terms)
    xtx_inv = np.linalg.inv(X.T @ X)
    df_resid = n_train - len(terms)

    # response range over the cube (dense random sample, seeded)
    sample = rng.uniform(-1.0, 1.0, size=(4096, 6))
    y = expand_continuous(sample, terms) @ beta
    y_range = float(np.max(y) - np.min(y))

    # half-width is linear in sigma (the noncentrality se^2/sigma^2 is
    # sigma-free), so one evaluation at sigma=1 calibrates it
    rows = expand_continuous(sample[:512], terms)
    se2_unit = np.einsum("ij,jk,ik->i", rows, xtx_inv, rows)
    hw_unit = exact_halfwidths(se2_unit, 1.0, df_resid, ti)
    sigma = sigma_fraction * y_range / float(np.mean(hw_unit))

    return RegressionModel(
        factors=factors,
        terms=terms,
        beta_hat=beta,
        sigma2_hat=sigma * sigma,
        n=n_train,
        xtx_inverse=xtx_inv,
    )


def sixfactor_problem(sigma_fraction: float = 0.10,
                      acceptance_fraction: float = 0.60,
                      weights: dict[str, float] | None = None,
                      config: OptimizerConfig | None = None) -> DsProblem:
    """Design-space problem around the six-factor model.

    Acceptance limits sit at the central `acceptance_fraction` band of the
    response range over the cube (desk-scale choice, documented).
    """
    ti = TiSpec()
    model = sixfactor_model(sigma_fraction=sigma_fraction, ti=ti)
    sample = np.random.default_rng(2025).uniform(-1.0, 1.0, size=(4096, 6))
    y = expand_continuous(sample, model.terms) @ model.beta_hat
    y_min, y_max = float(np.min(y)), float(np.max(y))
    margin = (1.0 - acceptance_fraction) / 2.0 * (y_max - y_min)
    params = tuple(
        ParameterDef(f"x{i}", bounds=(-1.0, 1.0), setpoint=0.0,
                     weight=(weights or {}).get(f"x{i}", 1.0))
        for i in range(1, 7)
    )
    return DsProblem(
        parameters=params,
        responses=(ResponseSpec(
            "y", model, ti, lower=y_min + margin, upper=y_max - margin),),
        config=config or OptimizerConfig(),
    )
