"""Tolerance intervals for OLS predictions, exact and approximated.

Convention (documented choice): for a TiSpec(alpha, psi), the interval has
confidence 1 - alpha and content (coverage) psi. The exact half-width at a
point with effective observation count n* = sigma2 / se(yhat)^2 is

    sigma_hat * sqrt( df * q_ncx2(psi; df=1, ncp=1/n*) / q_chi2(alpha; df) )

with df the residual degrees of freedom, q_ncx2 the lower-tail quantile of
the noncentral chi-square and q_chi2 the lower-tail central quantile. Both
quantile arguments are lower-tail probabilities: psi is the content level
passed straight to the noncentral quantile, alpha the confidence complement.

The approximation regresses half-widths on [1, yhat, yhat^2] over a
face-centered central composite design so that interval boundaries inside
the optimizer cost one matrix multiplication.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CapacityError, ContractError, DegeneratePointError, NumericError
from .model import RegressionModel, predict

__all__ = [
    "TiSpec",
    "CcdPlan",
    "TiApproximation",
    "noncentral_chi2_quantile",
    "noncentral_chi2_cdf",
    "exact_ti",
    "exact_halfwidths",
    "generate_ccd",
    "build_ti_approximation",
    "approx_ti",
]


@dataclass(frozen=True)
class TiSpec:
    """Nominal levels: confidence 1 - alpha, content (coverage) psi."""

    alpha: float = 0.05
    psi: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ContractError(f"alpha must be in (0,1), got {self.alpha}")
        if not 0.0 < self.psi < 1.0:
            raise ContractError(f"psi must be in (0,1), got {self.psi}")


def noncentral_chi2_quantile(prob: float, df: int, ncp: float) -> float:
    """Lower-tail quantile of the noncentral chi-square distribution.

    CDF is a Poisson(ncp/2)-weighted series of central chi-square CDFs;
    the quantile comes from bracketed bisection (see _kernels).
    """
    if not 0.0 < prob < 1.0:
        raise ContractError(f"prob must be in (0,1), got {prob}")
    if df <= 0:
        raise ContractError(f"df must be positive, got {df}")
    if ncp < 0:
        raise ContractError(f"ncp must be >= 0, got {ncp}")
    try:
        return float(_kernels.ncx2_ppf(float(prob), float(df), float(ncp)))
    except _kernels.KernelConvergenceError as exc:
        raise NumericError(str(exc)) from exc


def noncentral_chi2_cdf(x, df, ncp):
    """CDF companion of noncentral_chi2_quantile (same series)."""
    try:
        return _kernels.ncx2_cdf(x, float(df), ncp)
    except _kernels.KernelConvergenceError as exc:
        raise NumericError(str(exc)) from exc


def exact_halfwidths(se2, sigma2: float, df_resid: int, spec: TiSpec):
    """Batched exact TI half-widths from squared prediction standard errors."""
    if sigma2 == 0.0:
        return np.zeros_like(np.asarray(se2, dtype=float))
    try:
        return _kernels.ti_halfwidths(se2, float(sigma2), float(df_resid),
                                      spec.alpha, spec.psi)
    except _kernels.KernelConvergenceError as exc:
        raise NumericError(str(exc)) from exc


def exact_ti(model: RegressionModel, x_row, spec: TiSpec):
    """Exact TI boundaries (lower, upper) at one term-expanded point."""
    y_hat, se = predict(model, x_row)
    if model.sigma2_hat == 0.0:
        return y_hat, y_hat
    if se == 0.0:
        raise DegeneratePointError(
            "zero prediction standard error with positive residual variance; "
            "the effective observation count is unbounded at this point"
        )
    hw = float(exact_halfwidths(se * se, model.sigma2_hat, model.df_resid, spec))
    return y_hat - hw, y_hat + hw


@dataclass(frozen=True)
class CcdPlan:
    """Face-centered central composite design on the normalized cube.

    Rows: 2^p factorial corners at +-1, 2p axial points (one axis at +-1,
    rest 0), 5 center replicates. Row count 2^p + 2p + 5, deterministic
    order (corners in binary order, axial pairs per dimension, centers).
    """

    points: np.ndarray
    p: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        expected = 2 ** self.p + 2 * self.p + 5
        if pts.shape != (expected, self.p):
            raise ContractError(
                f"CCD for p={self.p} must have shape ({expected}, {self.p})"
            )


_CCD_MAX_P = 14


def generate_ccd(p: int) -> CcdPlan:
    """Build the CCD for p dimensions; 1 <= p <= 14 keeps 2^p rows tractable."""
    if not 1 <= p <= _CCD_MAX_P:
        raise CapacityError(
            f"CCD supports 1..{_CCD_MAX_P} dimensions (2^p + 2p + 5 rows); got p={p}"
        )
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=p)))
    axial = np.zeros((2 * p, p))
    for d in range(p):
        axial[2 * d, d] = -1.0
        axial[2 * d + 1, d] = 1.0
    centers = np.zeros((5, p))
    return CcdPlan(np.vstack([corners, axial, centers]), p)


@dataclass(frozen=True)
class TiApproximation:
    """Quadratic map from predicted mean to TI half-width.

    Evaluating beyond `fit_domain` is permitted (the optimizer may probe
    such predictions) but callers should flag it; the exact-TI second pass
    corrects any resulting error.
    """

    c0: float
    c1: float
    c2: float
    fit_domain: tuple[float, float]
    fit_residual_max: float

    def half_width(self, y_hat):
        w = self.c0 + y_hat * self.c1 + y_hat * y_hat * self.c2
        return np.maximum(w, 0.0)

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "coefficients": [self.c0, self.c1, self.c2],
            "fit_domain": list(self.fit_domain),
            "fit_residual_max": self.fit_residual_max,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TiApproximation":
        c0, c1, c2 = doc["coefficients"]
        lo, hi = doc["fit_domain"]
        return cls(c0, c1, c2, (lo, hi), doc["fit_residual_max"])


def build_ti_approximation(y_hat, halfwidths) -> TiApproximation:
    """Fit half-width = c0 + c1*yhat + c2*yhat^2 by OLS.

    `y_hat` and `halfwidths` are the exact evaluations on the CCD points
    (computed by the caller, which knows how to predict through categorical
    relaxations). Constant predictions fall back to a constant width.
    """
    y = np.asarray(y_hat, dtype=float).ravel()
    w = np.asarray(halfwidths, dtype=float).ravel()
    if y.shape != w.shape or y.size == 0:
        raise ContractError("y_hat and halfwidths must be equal-length, non-empty")
    spread = float(np.max(y) - np.min(y))
    if spread <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        c0, c1, c2 = float(np.mean(w)), 0.0, 0.0
    else:
        X = np.column_stack([np.ones_like(y), y, y * y])
        coef, *_ = np.linalg.lstsq(X, w, rcond=None)
        c0, c1, c2 = (float(c) for c in coef)
    approx = TiApproximation(
        c0, c1, c2,
        fit_domain=(float(np.min(y)), float(np.max(y))),
        fit_residual_max=0.0,
    )
    resid = float(np.max(np.abs(approx.half_width(y) - w))) if y.size else 0.0
    return TiApproximation(c0, c1, c2, approx.fit_domain, resid)


def approx_ti(approx: TiApproximation, y_hat):
    """Approximated boundaries (yhat - w, yhat + w); batched or scalar."""
    w = approx.half_width(y_hat)
    return y_hat - w, y_hat + w
