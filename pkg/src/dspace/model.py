"""Polynomial OLS modeling: term structure, design matrices, fitting, prediction.

Factors are referenced by index into an ordered factor list. Categorical
factors enter the design matrix sum-coded: a k-level factor expands to k-1
columns holding 1 for the matching level, -1 for the last level and 0
otherwise, so level effects sum to zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CodingError,
    ContractError,
    SingularFitError,
    SpecificationError,
)

TERM_KINDS = ("intercept", "linear", "interaction", "quadratic", "categorical_level")


@dataclass(frozen=True, order=True)
class TermSpec:
    """One column recipe of the design matrix."""

    kind: str
    factors: tuple[int, ...] = ()
    level: int | None = None

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise SpecificationError(f"unknown term kind: {self.kind!r}")
        if self.kind == "intercept" and self.factors:
            raise SpecificationError("intercept term takes no factors")
        if self.kind in ("linear", "quadratic") and len(self.factors) != 1:
            raise SpecificationError(f"{self.kind} term needs exactly one factor")
        if self.kind == "interaction":
            if len(self.factors) != 2 or self.factors[0] == self.factors[1]:
                raise SpecificationError("interaction needs two distinct factors")
            if self.factors[0] > self.factors[1]:
                object.__setattr__(self, "factors", (self.factors[1], self.factors[0]))
        if self.kind == "categorical_level":
            if len(self.factors) != 1:
                raise SpecificationError("categorical_level term needs one factor")
            if self.level is None or self.level < 0:
                raise SpecificationError("categorical_level term needs a level index")
        elif self.level is not None:
            raise SpecificationError(f"{self.kind} term does not take a level")


def intercept() -> TermSpec:
    return TermSpec("intercept")


def linear(i: int) -> TermSpec:
    return TermSpec("linear", (i,))


def interaction(i: int, j: int) -> TermSpec:
    return TermSpec("interaction", (i, j))


def quadratic(i: int) -> TermSpec:
    return TermSpec("quadratic", (i,))


def categorical_level(i: int, level: int) -> TermSpec:
    return TermSpec("categorical_level", (i,), level)


_KIND_RANK = {k: r for r, k in enumerate(
    ("intercept", "linear", "categorical_level", "interaction", "quadratic"))}


def canonicalize_terms(terms) -> tuple[TermSpec, ...]:
    """Sort terms into the canonical order and reject duplicates.

    Order: intercept, linear (factor order), categorical blocks (factor
    order, level order), interactions (lexicographic), quadratics (factor
    order). Canonical ordering keeps coefficient indexing reproducible
    across runs and serialized models.
    """
    terms = tuple(terms)
    if len(set(terms)) != len(terms):
        dupes = sorted({t for t in terms if terms.count(t) > 1})
        raise SpecificationError(f"duplicate terms: {dupes}")
    return tuple(sorted(
        terms,
        key=lambda t: (_KIND_RANK[t.kind], t.factors, -1 if t.level is None else t.level),
    ))


def term_name(term: TermSpec, factor_names) -> str:
    if term.kind == "intercept":
        return "intercept"
    if term.kind == "linear":
        return factor_names[term.factors[0]]
    if term.kind == "quadratic":
        return f"{factor_names[term.factors[0]]}^2"
    if term.kind == "interaction":
        return f"{factor_names[term.factors[0]]}:{factor_names[term.factors[1]]}"
    return f"{factor_names[term.factors[0]]}[{term.level}]"


@dataclass(frozen=True)
class Factor:
    """A model input: continuous, or categorical with ordered levels."""

    name: str
    kind: str = "continuous"
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise SpecificationError(f"unknown factor kind: {self.kind!r}")
        if self.kind == "categorical":
            if len(self.levels) < 2:
                raise SpecificationError(f"factor {self.name!r} needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise SpecificationError(f"factor {self.name!r} has duplicate levels")
        elif self.levels:
            raise SpecificationError(f"continuous factor {self.name!r} cannot have levels")


@dataclass(frozen=True)
class CategoricalCoding:
    """Sum coding of one categorical factor.

    `level_coefficients` holds all k level effects (the fitted k-1 plus the
    implied last one) and must sum to zero; it is absent before fitting.
    """

    factor: str
    levels: tuple[str, ...]
    level_coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.level_coefficients is not None:
            if len(self.level_coefficients) != len(self.levels):
                raise SpecificationError(
                    f"coding for {self.factor!r}: {len(self.level_coefficients)} "
                    f"coefficients for {len(self.levels)} levels"
                )
            if abs(sum(self.level_coefficients)) > 1e-10:
                raise SpecificationError(
                    f"coding for {self.factor!r}: level coefficients must sum to zero"
                )


def implied_last_level(fitted_coefficients) -> float:
    """Coefficient of the level not carried as a design column: -sum(others)."""
    return -float(np.sum(np.asarray(fitted_coefficients, dtype=float)))


@dataclass(frozen=True)
class RegressionModel:
    """Fitted polynomial OLS surrogate.

    `xtx_inverse` is the unscaled coefficient covariance: se(yhat)^2 =
    sigma2_hat * row @ xtx_inverse @ row. `df_resid` stays fixed when a model
    is re-expressed in other units, where the term count may grow.
    """

    factors: tuple[Factor, ...]
    terms: tuple[TermSpec, ...]
    beta_hat: np.ndarray
    sigma2_hat: float
    n: int
    xtx_inverse: np.ndarray
    df_resid: int = 0
    codings: tuple[CategoricalCoding, ...] = ()

    def __post_init__(self):
        beta = np.asarray(self.beta_hat, dtype=float)
        cov = np.asarray(self.xtx_inverse, dtype=float)
        object.__setattr__(self, "beta_hat", beta)
        object.__setattr__(self, "xtx_inverse", cov)
        p = len(self.terms)
        if beta.shape != (p,):
            raise ContractError(f"beta_hat has {beta.shape[0]} entries for {p} terms")
        if cov.shape != (p, p):
            raise ContractError(f"xtx_inverse shape {cov.shape} does not match {p} terms")
        if self.df_resid == 0:
            object.__setattr__(self, "df_resid", self.n - p)
        if self.df_resid < 1:
            raise SpecificationError(
                f"no residual degrees of freedom (n={self.n}, p_terms={p})"
            )
        if self.sigma2_hat < 0:
            raise SpecificationError("sigma2_hat must be >= 0")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise SpecificationError("xtx_inverse must be symmetric")
        if p and np.linalg.eigvalsh(cov).min() < -1e-8:
            raise SpecificationError("xtx_inverse must be positive (semi)definite")

    @property
    def p_terms(self) -> int:
        return len(self.terms)

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def term_names(self) -> list[str]:
        return [term_name(t, self.factor_names) for t in self.terms]


def _coding_for(factor: Factor, codings) -> CategoricalCoding:
    for c in codings:
        if c.factor == factor.name:
            return c
    return CategoricalCoding(factor.name, factor.levels)


def build_design_matrix(data, factors, terms, codings=()) -> np.ndarray:
    """Expand a raw n x p factor table into the n x p_terms design matrix.

    `data` is column-indexable by factor position; categorical cells hold
    level labels. Terms must already be unique (canonicalize_terms enforces
    ordering and duplicate rejection).
    """
    terms = canonicalize_terms(terms)
    data = np.asarray(data, dtype=object)
    if data.ndim != 2:
        raise ContractError("data must be a 2-D table")
    n = data.shape[0]
    if data.shape[1] != len(factors):
        raise ContractError(
            f"data has {data.shape[1]} columns for {len(factors)} factors"
        )

    numeric: dict[int, np.ndarray] = {}
    codes: dict[int, np.ndarray] = {}
    for idx, f in enumerate(factors):
        col = data[:, idx]
        if f.kind == "continuous":
            try:
                numeric[idx] = col.astype(float)
            except (TypeError, ValueError) as exc:
                raise CodingError(f"factor {f.name!r} has non-numeric cells") from exc
        else:
            coding = _coding_for(f, codings)
            levels = list(coding.levels)
            k = len(levels)
            block = np.zeros((n, k - 1))
            for r, label in enumerate(col):
                try:
                    j = levels.index(label)
                except ValueError:
                    raise CodingError(
                        f"unknown level {label!r} for factor {f.name!r} "
                        f"(known: {levels})"
                    ) from None
                if j == k - 1:
                    block[r, :] = -1.0
                else:
                    block[r, j] = 1.0
            codes[idx] = block

    cols = []
    for t in terms:
        if t.kind == "intercept":
            cols.append(np.ones(n))
        elif t.kind == "linear":
            cols.append(numeric[t.factors[0]])
        elif t.kind == "quadratic":
            cols.append(numeric[t.factors[0]] ** 2)
        elif t.kind == "interaction":
            cols.append(numeric[t.factors[0]] * numeric[t.factors[1]])
        else:
            block = codes[t.factors[0]]
            if t.level >= block.shape[1]:
                raise SpecificationError(
                    f"level index {t.level} out of range for factor "
                    f"{factors[t.factors[0]].name!r}"
                )
            cols.append(block[:, t.level])
    return np.column_stack(cols) if cols else np.empty((n, 0))


def expand_continuous(points, terms) -> np.ndarray:
    """Design rows for all-continuous points (m x p array -> m x p_terms).

    Fast path used by the optimizer; categorical terms are not allowed here.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = []
    for t in terms:
        if t.kind == "intercept":
            cols.append(np.ones(pts.shape[0]))
        elif t.kind == "linear":
            cols.append(pts[:, t.factors[0]])
        elif t.kind == "quadratic":
            cols.append(pts[:, t.factors[0]] ** 2)
        elif t.kind == "interaction":
            cols.append(pts[:, t.factors[0]] * pts[:, t.factors[1]])
        else:
            raise ContractError("expand_continuous cannot expand categorical terms")
    return np.column_stack(cols)


def fit_ols(X, y, factors=(), terms=(), codings=()) -> RegressionModel:
    """Least-squares fit: beta = (X'X)^-1 X'y, sigma2 = RSS / (n - p).

    Raises SingularFitError naming the collinear columns when X is rank
    deficient (condition number above 1e10). `terms` must match the column
    order of X; without metadata, generic per-column factors are attached.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise ContractError("X must be 2-D")
    n, p = X.shape
    if y.shape[0] != n:
        raise ContractError(f"y has {y.shape[0]} entries for {n} rows")
    if n <= p:
        raise SpecificationError(f"need n > p_terms, got n={n}, p_terms={p}")

    factors = tuple(factors)
    terms = tuple(terms)
    if terms and len(terms) != p:
        raise ContractError(f"{len(terms)} terms for {p} design columns")
    if not terms:
        factors = tuple(Factor(f"col{j}") for j in range(p))
        terms = tuple(linear(j) for j in range(p))
    names = [term_name(t, [f.name for f in factors]) for t in terms]

    sv = np.linalg.svd(X, compute_uv=False)
    if sv[0] <= 0 or sv[-1] == 0 or sv[0] / sv[-1] >= 1e10:
        bad = _collinear_columns(X, names)
        raise SingularFitError(
            f"design matrix is rank deficient; collinear columns: {bad}",
            columns=bad,
        )

    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    sigma2 = float(resid @ resid) / (n - p)
    return RegressionModel(
        factors=factors,
        terms=terms,
        beta_hat=beta,
        sigma2_hat=sigma2,
        n=n,
        xtx_inverse=xtx_inv,
        codings=tuple(codings),
    )


def _collinear_columns(X, names) -> list[str]:
    import scipy.linalg

    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    bad = [names[piv[j]] for j in range(len(diag)) if diag[j] < 1e-10 * scale]
    # columns past the numerical rank are the dependent ones
    return bad or [names[piv[-1]]]


def fit_from_table(data, factors, terms, y, codings=()) -> RegressionModel:
    """Build the design matrix from a raw table and fit, attaching codings.

    After the fit, each categorical factor's coding gains its full k-vector
    of level coefficients (fitted k-1 plus implied last level).
    """
    factors = tuple(factors)
    terms = canonicalize_terms(terms)
    base_codings = [_coding_for(f, codings) for f in factors if f.kind == "categorical"]
    X = build_design_matrix(data, factors, terms, base_codings)
    model = fit_ols(X, y, factors, terms)
    fitted_codings = []
    for coding in base_codings:
        f_idx = next(i for i, f in enumerate(factors) if f.name == coding.factor)
        level_terms = [
            (j, t) for j, t in enumerate(terms)
            if t.kind == "categorical_level" and t.factors[0] == f_idx
        ]
        if level_terms:
            fitted = [float(model.beta_hat[j]) for j, _ in level_terms]
            full = tuple(fitted + [implied_last_level(fitted)])
            fitted_codings.append(CategoricalCoding(coding.factor, coding.levels, full))
        else:
            fitted_codings.append(coding)
    return RegressionModel(
        factors=tuple(factors),
        terms=terms,
        beta_hat=model.beta_hat,
        sigma2_hat=model.sigma2_hat,
        n=model.n,
        xtx_inverse=model.xtx_inverse,
        codings=tuple(fitted_codings),
    )


def predict(model: RegressionModel, x_row):
    """Mean prediction and its standard error at one term-expanded row."""
    x = np.asarray(x_row, dtype=float).ravel()
    if x.shape[0] != model.p_terms:
        raise ContractError(
            f"x_row has {x.shape[0]} entries for {model.p_terms} terms"
        )
    y_hat = float(x @ model.beta_hat)
    se = math.sqrt(max(0.0, model.sigma2_hat * float(x @ model.xtx_inverse @ x)))
    return y_hat, se


def predict_batch(model: RegressionModel, rows):
    """Vectorized predict over m term-expanded rows -> (y_hat, se2) arrays."""
    R = np.atleast_2d(np.asarray(rows, dtype=float))
    if R.shape[1] != model.p_terms:
        raise ContractError(
            f"rows have {R.shape[1]} columns for {model.p_terms} terms"
        )
    y_hat = R @ model.beta_hat
    se2 = model.sigma2_hat * np.einsum("ij,jk,ik->i", R, model.xtx_inverse, R)
    return y_hat, np.maximum(se2, 0.0)


# ---------------------------------------------------------------------------
# serialization

def _term_to_json(t: TermSpec) -> dict:
    d: dict = {"kind": t.kind}
    if t.kind in ("linear", "quadratic"):
        d["factor"] = t.factors[0]
    elif t.kind == "interaction":
        d["factors"] = list(t.factors)
    elif t.kind == "categorical_level":
        d["factor"] = t.factors[0]
        d["level"] = t.level
    return d


def _term_from_json(d: dict, factor_index: dict) -> TermSpec:
    def fidx(v):
        if isinstance(v, str):
            if v not in factor_index:
                raise SpecificationError(f"term references unknown factor {v!r}")
            return factor_index[v]
        return int(v)

    kind = d.get("kind")
    if kind == "intercept":
        return intercept()
    if kind == "linear":
        return linear(fidx(d["factor"]))
    if kind == "quadratic":
        return quadratic(fidx(d["factor"]))
    if kind == "interaction":
        a, b = d["factors"]
        return interaction(fidx(a), fidx(b))
    if kind == "categorical_level":
        return categorical_level(fidx(d["factor"]), int(d["level"]))
    raise SpecificationError(f"unknown term kind in JSON: {kind!r}")


def model_to_json(model: RegressionModel) -> dict:
    return {
        "schema_version": 1,
        "factors": [
            {"name": f.name, "kind": f.kind, **({"levels": list(f.levels)} if f.levels else {})}
            for f in model.factors
        ],
        "terms": [_term_to_json(t) for t in model.terms],
        "coefficients": [float(b) for b in model.beta_hat],
        "sigma2": float(model.sigma2_hat),
        "n": int(model.n),
        "df_resid": int(model.df_resid),
        "xtx_inverse": [[float(v) for v in row] for row in model.xtx_inverse],
        "codings": [
            {
                "factor": c.factor,
                "levels": list(c.levels),
                "level_coefficients": (
                    list(c.level_coefficients) if c.level_coefficients else None
                ),
            }
            for c in model.codings
        ],
    }


def model_from_json(doc: dict) -> RegressionModel:
    """Load a model from JSON, either exported or hand-written (pre-fitted)."""
    try:
        factors = tuple(
            Factor(f["name"], f.get("kind", "continuous"), tuple(f.get("levels", ())))
            for f in doc["factors"]
        )
        factor_index = {f.name: i for i, f in enumerate(factors)}
        terms = canonicalize_terms(
            _term_from_json(t, factor_index) for t in doc["terms"]
        )
        codings = tuple(
            CategoricalCoding(
                c["factor"],
                tuple(c["levels"]),
                tuple(c["level_coefficients"]) if c.get("level_coefficients") else None,
            )
            for c in doc.get("codings", ())
        )
        return RegressionModel(
            factors=factors,
            terms=terms,
            beta_hat=np.asarray(doc["coefficients"], dtype=float),
            sigma2_hat=float(doc["sigma2"]),
            n=int(doc["n"]),
            xtx_inverse=np.asarray(doc["xtx_inverse"], dtype=float),
            df_resid=int(doc.get("df_resid", 0)),
            codings=codings,
        )
    except KeyError as exc:
        raise SpecificationError(f"model JSON missing field {exc}") from None


def read_training_csv(path, factors, response: str | None = None):
    """Read training data: header row names factors, last column is the
    response unless `response` overrides it. Returns (data table, y)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise SpecificationError(f"{path}: need a header row and data rows")
    header = [h.strip() for h in rows[0]]
    response_col = response if response is not None else header[-1]
    if response_col not in header:
        raise SpecificationError(f"{path}: response column {response_col!r} not found")
    col_of = {h: j for j, h in enumerate(header)}
    for f in factors:
        if f.name not in col_of:
            raise SpecificationError(f"{path}: factor column {f.name!r} not found")

    body = rows[1:]
    data = np.empty((len(body), len(factors)), dtype=object)
    y = np.empty(len(body))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise SpecificationError(f"{path}: row {r + 2} has {len(row)} cells")
        for j, f in enumerate(factors):
            cell = row[col_of[f.name]].strip()
            if f.kind == "continuous":
                try:
                    data[r, j] = float(cell)
                except ValueError:
                    raise CodingError(
                        f"{path}: row {r + 2}, factor {f.name!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
            else:
                data[r, j] = cell
        try:
            y[r] = float(row[col_of[response_col]])
        except ValueError:
            raise CodingError(
                f"{path}: row {r + 2}: non-numeric response "
                f"{row[col_of[response_col]]!r}"
            ) from None
    return data, y


def model_spec_from_json(doc: dict):
    """Parse a fitting spec: factors + terms (+ optional response column)."""
    factors = tuple(
        Factor(f["name"], f.get("kind", "continuous"), tuple(f.get("levels", ())))
        for f in doc.get("factors", ())
    )
    if not factors:
        raise SpecificationError("model spec needs a non-empty 'factors' list")
    factor_index = {f.name: i for i, f in enumerate(factors)}
    raw_terms = [_term_from_json(t, factor_index) for t in doc.get("terms", ())]
    if doc.get("include_intercept", True) and intercept() not in raw_terms:
        raw_terms.append(intercept())
    # categorical factors referenced by no term get their full sum-coded block
    for i, f in enumerate(factors):
        if f.kind == "categorical" and not any(
            t.kind == "categorical_level" and t.factors[0] == i for t in raw_terms
        ):
            raw_terms.extend(
                categorical_level(i, j) for j in range(len(f.levels) - 1)
            )
    return factors, canonicalize_terms(raw_terms), doc.get("response")
