"""Normalization of a DsProblem into the optimizer's [-1, 1] coordinates.

Continuous parameters map affinely onto [-1, 1]; model coefficients are
re-expressed in normalized units (linear terms scaled by the half-range,
interactions by the product of half-ranges, quadratics by the squared
half-range, the intercept absorbing center offsets). Re-expression can
require terms the original model lacked (an interaction without its main
effects, say), so the normalized term set is the affine closure of the
original and the unscaled covariance is mapped along.

Categorical factors are relaxed into continuous dimensions bounded by the
range of their level coefficients; the dimension moves in [-1, 1] around the
coefficient midpoint. Prediction through a relaxed coordinate interpolates
between the sum-code rows of the two adjacent levels (adjacent in coefficient
order), which reproduces every real level exactly and keeps the standard
error continuous in between.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecificationError
from .model import (
    CategoricalCoding,
    RegressionModel,
    canonicalize_terms,
    intercept,
    linear,
)
from .problem import DsProblem, ParameterDef
from .tolerance import TiSpec, exact_halfwidths


@dataclass(frozen=True)
class RelaxedDim:
    """Continuous stand-in for a categorical factor."""

    coding: CategoricalCoding
    range: float
    midpoint: float
    dropped: bool


def relax_categorical(coding: CategoricalCoding) -> RelaxedDim:
    """Relax a fitted categorical coding into a bounded continuous dimension.

    The dimension spans [min(coeff), max(coeff)]; a zero range (all level
    effects equal) drops the factor from optimization with all levels
    admitted.
    """
    if coding.level_coefficients is None:
        raise SpecificationError(
            f"categorical factor {coding.factor!r} has no fitted level coefficients"
        )
    coeffs = np.asarray(coding.level_coefficients, dtype=float)
    r_c = float(np.max(coeffs) - np.min(coeffs))
    mid = float((np.max(coeffs) + np.min(coeffs)) / 2.0)
    return RelaxedDim(coding, r_c, mid, dropped=(r_c == 0.0))


def map_levels(raw_range, coding: CategoricalCoding, tol: float = 1e-9):
    """Levels whose coefficient lies in the closed raw-unit interval."""
    lo, hi = raw_range
    return tuple(
        level
        for level, c in zip(coding.levels, coding.level_coefficients)
        if lo - tol <= c <= hi + tol
    )


def reexpress_model(model: RegressionModel, centers, halves) -> RegressionModel:
    """Re-express coefficients for factor map x_raw = center + half * x_norm.

    `centers`/`halves` are keyed by model factor index; categorical factors
    are absent (their sum-code columns are unit-free). The residual degrees
    of freedom are preserved even though the term count may grow.
    """
    orig = model.terms
    closure = set(orig)
    for t in orig:
        if t.kind in ("linear", "quadratic"):
            closure.add(intercept())
            closure.add(linear(t.factors[0]))
        elif t.kind == "interaction":
            closure.add(intercept())
            closure.add(linear(t.factors[0]))
            closure.add(linear(t.factors[1]))
    new_terms = canonicalize_terms(closure)
    idx = {t: i for i, t in enumerate(new_terms)}

    A = np.zeros((len(new_terms), len(orig)))
    for q, t in enumerate(orig):
        if t.kind == "intercept":
            A[idx[t], q] = 1.0
        elif t.kind == "linear":
            (i,) = t.factors
            A[idx[intercept()], q] += centers[i]
            A[idx[t], q] += halves[i]
        elif t.kind == "quadratic":
            (i,) = t.factors
            c, h = centers[i], halves[i]
            A[idx[intercept()], q] += c * c
            A[idx[linear(i)], q] += 2.0 * c * h
            A[idx[t], q] += h * h
        elif t.kind == "interaction":
            i, j = t.factors
            ci, hi = centers[i], halves[i]
            cj, hj = centers[j], halves[j]
            A[idx[intercept()], q] += ci * cj
            A[idx[linear(i)], q] += cj * hi
            A[idx[linear(j)], q] += ci * hj
            A[idx[t], q] += hi * hj
        else:  # categorical_level: unit-free
            A[idx[t], q] = 1.0

    return RegressionModel(
        factors=model.factors,
        terms=new_terms,
        beta_hat=A @ model.beta_hat,
        sigma2_hat=model.sigma2_hat,
        n=model.n,
        xtx_inverse=A @ model.xtx_inverse @ A.T,
        df_resid=model.df_resid,
        codings=model.codings,
    )


@dataclass(frozen=True)
class OptDim:
    """One optimization dimension: a continuous parameter or a relaxed
    categorical. center/half map normalized [-1, 1] to raw units."""

    name: str
    kind: str  # "continuous" | "relaxed"
    param_index: int
    center: float
    half: float
    setpoint: float  # normalized
    weight: float


class _CatBlock:
    """Evaluation recipe for one categorical factor inside one response.

    The relaxed dimension's coordinate is defined by the anchor coding (the
    first response using the factor); interpolation picks the two levels
    adjacent in the anchor's coefficient order, and every response applies
    that same level mixture to its own sum-code columns. For the anchor
    response the mixed effect reproduces the coordinate exactly."""

    def __init__(self, term_cols, anchor: CategoricalCoding, dim_index,
                 setpoint_level):
        self.term_cols = np.asarray(term_cols, dtype=int)
        self.dim_index = dim_index  # None when dropped/unused
        coeffs = np.asarray(anchor.level_coefficients, dtype=float)
        order = np.argsort(coeffs, kind="stable")
        self.sorted_anchor_coeffs = coeffs[order]
        k = len(coeffs)
        codes = np.zeros((k, k - 1))
        for lvl in range(k):
            if lvl == k - 1:
                codes[lvl, :] = -1.0
            else:
                codes[lvl, lvl] = 1.0
        self.sorted_codes = codes[order]
        self.setpoint_code = codes[anchor.levels.index(setpoint_level)]

    def code_rows(self, effects: np.ndarray) -> np.ndarray:
        """Sum-code rows of the level mixture matching anchor `effects`."""
        c = self.sorted_anchor_coeffs
        j = np.clip(np.searchsorted(c, effects, side="right") - 1, 0, len(c) - 2)
        span = c[j + 1] - c[j]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(span > 0, (effects - c[j]) / np.where(span > 0, span, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        return (1.0 - t)[:, None] * self.sorted_codes[j] + t[:, None] * self.sorted_codes[j + 1]


class NormalizedResponse:
    """A response model evaluated directly on optimizer coordinates."""

    def __init__(self, name, model_norm: RegressionModel, ti: TiSpec,
                 lower: float, upper: float, dim_of_factor, cat_blocks):
        self.name = name
        self.model = model_norm
        self.ti = ti
        self.lower = lower
        self.upper = upper
        self._dim_of_factor = dim_of_factor
        self._cat_blocks = cat_blocks
        self._plan = self._compile()

    def _compile(self):
        plan = []
        for col, t in enumerate(self.model.terms):
            if t.kind == "categorical_level":
                continue  # filled by the block recipes
            if t.kind == "intercept":
                plan.append((col, "one", 0, 0))
            elif t.kind == "linear":
                plan.append((col, "lin", self._dim_of_factor[t.factors[0]], 0))
            elif t.kind == "quadratic":
                plan.append((col, "quad", self._dim_of_factor[t.factors[0]], 0))
            else:
                plan.append((col, "int",
                             self._dim_of_factor[t.factors[0]],
                             self._dim_of_factor[t.factors[1]]))
        return plan

    def design_rows(self, pts: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        rows = np.zeros((P.shape[0], self.model.p_terms))
        for col, kind, d1, d2 in self._plan:
            if kind == "one":
                rows[:, col] = 1.0
            elif kind == "lin":
                rows[:, col] = P[:, d1]
            elif kind == "quad":
                rows[:, col] = P[:, d1] ** 2
            else:
                rows[:, col] = P[:, d1] * P[:, d2]
        for blk, dim_meta in self._cat_blocks:
            if blk.dim_index is None:
                rows[:, blk.term_cols] = blk.setpoint_code
            else:
                effects = dim_meta.center + dim_meta.half * P[:, blk.dim_index]
                rows[:, blk.term_cols] = blk.code_rows(effects)
        return rows

    def mean(self, pts) -> np.ndarray:
        return self.design_rows(pts) @ self.model.beta_hat

    def mean_and_se2(self, pts):
        rows = self.design_rows(pts)
        y = rows @ self.model.beta_hat
        se2 = self.model.sigma2_hat * np.einsum(
            "ij,jk,ik->i", rows, self.model.xtx_inverse, rows)
        return y, np.maximum(se2, 0.0)

    def mean_grad(self, pts: np.ndarray) -> np.ndarray:
        """Analytic gradient of the mean w.r.t. optimizer coordinates."""
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        G = np.zeros_like(P)
        beta = self.model.beta_hat
        for col, kind, d1, d2 in self._plan:
            if kind == "lin":
                G[:, d1] += beta[col]
            elif kind == "quad":
                G[:, d1] += 2.0 * beta[col] * P[:, d1]
            elif kind == "int":
                G[:, d1] += beta[col] * P[:, d2]
                G[:, d2] += beta[col] * P[:, d1]
        for blk, dim_meta in self._cat_blocks:
            if blk.dim_index is not None:
                G[:, blk.dim_index] += dim_meta.half
        return G

    def exact_bounds(self, pts):
        """Exact TI boundaries (lower, upper) plus diagnostics (y, se2)."""
        y, se2 = self.mean_and_se2(pts)
        if self.model.sigma2_hat == 0.0:
            return y.copy(), y.copy(), y, se2
        hw = exact_halfwidths(se2, self.model.sigma2_hat, self.model.df_resid, self.ti)
        return y - hw, y + hw, y, se2


class NormalizedProblem:
    """A DsProblem mapped onto the optimizer's normalized cube."""

    def __init__(self, problem: DsProblem):
        self.problem = problem
        self.dims: list[OptDim] = []
        self.dropped: list[tuple[str, tuple[str, ...]]] = []
        self._relaxations: dict[str, RelaxedDim] = {}

        used = {
            f.name
            for r in problem.responses
            for f in r.model.factors
        }
        for pi, p in enumerate(problem.parameters):
            if p.kind == "continuous":
                c = (p.bounds[0] + p.bounds[1]) / 2.0
                h = (p.bounds[1] - p.bounds[0]) / 2.0
                self.dims.append(OptDim(
                    p.name, "continuous", pi, c, h,
                    (float(p.setpoint) - c) / h, p.weight,
                ))
            else:
                relax = self._relax_for(p, problem) if p.name in used else None
                if relax is None or relax.dropped:
                    self.dropped.append((p.name, tuple(p.levels)))
                    if relax is not None:
                        self._relaxations[p.name] = relax
                    continue
                self._relaxations[p.name] = relax
                coeffs = dict(zip(relax.coding.levels, relax.coding.level_coefficients))
                sp_effect = coeffs[p.setpoint]
                self.dims.append(OptDim(
                    p.name, "relaxed", pi, relax.midpoint, relax.range / 2.0,
                    (sp_effect - relax.midpoint) / (relax.range / 2.0), p.weight,
                ))

        self.p = len(self.dims)
        self.dim_index = {d.name: i for i, d in enumerate(self.dims)}
        self.setpoints = np.array([d.setpoint for d in self.dims])
        self.weights = np.array([d.weight for d in self.dims])
        self.responses = [self._normalize_response(r) for r in problem.responses]

    @staticmethod
    def _relax_for(param: ParameterDef, problem: DsProblem) -> RelaxedDim:
        # anchored to the widest-range fitted coding across responses (other
        # responses follow the same level mixture along the dimension); the
        # factor is dropped only when every response sees zero level spread
        candidates = [
            relax_categorical(coding)
            for r in problem.responses
            for coding in r.model.codings
            if coding.factor == param.name
        ]
        if not candidates:
            raise SpecificationError(
                f"categorical parameter {param.name!r} is used by a model "
                f"without codings"
            )
        return max(candidates, key=lambda rd: rd.range)

    def _normalize_response(self, r) -> NormalizedResponse:
        model = r.model
        centers = {}
        halves = {}
        dim_of_factor = {}
        for fi, f in enumerate(model.factors):
            if f.kind != "continuous":
                continue
            d = self.dim_index[f.name]
            dim_of_factor[fi] = d
            centers[fi] = self.dims[d].center
            halves[fi] = self.dims[d].half
        norm_model = reexpress_model(model, centers, halves)

        cat_blocks = []
        for fi, f in enumerate(model.factors):
            if f.kind != "categorical":
                continue
            cols = [
                c for c, t in enumerate(norm_model.terms)
                if t.kind == "categorical_level" and t.factors[0] == fi
            ]
            if not cols:
                continue
            param = self.problem.parameter(f.name)
            dim_idx = self.dim_index.get(f.name)
            anchor = self._relaxations[f.name].coding
            blk = _CatBlock(cols, anchor, dim_idx, param.setpoint)
            meta = self.dims[dim_idx] if dim_idx is not None else None
            cat_blocks.append((blk, meta))
        return NormalizedResponse(
            r.name, norm_model, r.ti, r.lower, r.upper, dim_of_factor, cat_blocks)

    # -- candidate helpers ---------------------------------------------------

    def initial_candidate(self, halfwidth: float) -> np.ndarray:
        s = self.setpoints
        lo = np.clip(s - halfwidth, -1.0, s)
        up = np.clip(s + halfwidth, s, 1.0)
        return np.concatenate([lo, up])

    def denormalize_ranges(self, x: np.ndarray):
        """Raw-unit (or level-set) ranges for a 2p candidate vector."""
        p = self.p
        out = []
        admitted_failures = []
        per_dim = {}
        for i, d in enumerate(self.dims):
            lo_raw = float(d.center + d.half * x[i])
            hi_raw = float(d.center + d.half * x[p + i])
            per_dim[d.name] = (lo_raw, hi_raw)
        for pi, param in enumerate(self.problem.parameters):
            if param.name in per_dim:
                lo_raw, hi_raw = per_dim[param.name]
                if param.kind == "continuous":
                    out.append({
                        "name": param.name, "kind": "continuous",
                        "lower": lo_raw, "upper": hi_raw,
                    })
                else:
                    relax = self._relaxations[param.name]
                    levels = map_levels((lo_raw, hi_raw), relax.coding)
                    if param.setpoint not in levels:
                        admitted_failures.append(param.name)
                    out.append({
                        "name": param.name, "kind": "categorical",
                        "levels": list(levels),
                        "effect_range": [lo_raw, hi_raw],
                    })
            else:
                out.append({
                    "name": param.name, "kind": "categorical",
                    "levels": list(param.levels),
                    "effect_range": None,
                })
        return out, admitted_failures


def normalize_problem(problem: DsProblem) -> NormalizedProblem:
    return NormalizedProblem(problem)
