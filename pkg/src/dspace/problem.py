"""Design-space problem definition and JSON (de)serialization.

A problem is a list of parameters (continuous with screening bounds, or
categorical with levels), a list of responses (regression model + TI levels
+ acceptance limits) and optimizer settings. Acceptance limits may be
one-sided: null/None means unbounded on that side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

from .errors import SpecificationError
from .model import RegressionModel, model_from_json, model_to_json
from .tolerance import TiSpec


@dataclass(frozen=True)
class ParameterDef:
    name: str
    kind: str = "continuous"
    bounds: tuple[float, float] | None = None
    setpoint: float | str | None = None
    weight: float = 1.0
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise SpecificationError(f"parameter {self.name!r}: unknown kind {self.kind!r}")
        if self.weight <= 0:
            raise SpecificationError(f"parameter {self.name!r}: weight must be > 0")
        if self.kind == "continuous":
            if self.bounds is None or self.bounds[0] >= self.bounds[1]:
                raise SpecificationError(
                    f"parameter {self.name!r}: screening bounds must satisfy b_l < b_u"
                )
            if self.setpoint is None or not isinstance(self.setpoint, (int, float)):
                raise SpecificationError(f"parameter {self.name!r}: numeric setpoint required")
            if not self.bounds[0] <= self.setpoint <= self.bounds[1]:
                raise SpecificationError(
                    f"parameter {self.name!r}: setpoint {self.setpoint} outside bounds {self.bounds}"
                )
        else:
            if len(self.levels) < 2:
                raise SpecificationError(f"parameter {self.name!r}: needs >= 2 levels")
            if self.setpoint not in self.levels:
                raise SpecificationError(
                    f"parameter {self.name!r}: setpoint level {self.setpoint!r} not in levels"
                )


@dataclass(frozen=True)
class ResponseSpec:
    name: str
    model: RegressionModel
    ti: TiSpec = TiSpec()
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise SpecificationError(
                f"response {self.name!r}: acceptance limits must satisfy a_l < a_u"
            )
        if math.isinf(self.lower) and math.isinf(self.upper):
            raise SpecificationError(
                f"response {self.name!r}: at least one acceptance limit must be finite"
            )


@dataclass(frozen=True)
class OptimizerConfig:
    rho_start_pass1: float = 0.01
    rho_start_pass2: float = 0.001
    pass2_method: str = "cobyla"  # cobyla | slsqp | none
    max_iters_pass1: int = 5000
    max_iters_pass2: int = 600
    corner_constraints_enabled: bool = True
    corner_cap: int = 12  # corners auto-disable when p exceeds this
    inner_max_iters: int = 200
    inner_tol: float = 1e-9
    inner_multistart_exp: int = 6  # 2^min(p, exp) corner starts
    initial_box_halfwidth: float = 0.05
    n_starts: int = 1
    seed: int = 0
    feasibility_tol: float = 1e-8
    certificate_tol: float = 1e-3
    verify_points_per_dim: int = 10000

    def __post_init__(self):
        if not 0 < self.rho_start_pass2 <= self.rho_start_pass1:
            raise SpecificationError("need 0 < rho_start_pass2 <= rho_start_pass1")
        if self.max_iters_pass1 <= 0 or self.max_iters_pass2 <= 0:
            raise SpecificationError("iteration limits must be positive")
        if self.pass2_method not in ("cobyla", "slsqp", "none"):
            raise SpecificationError(f"unknown pass2 method {self.pass2_method!r}")
        if self.n_starts < 1:
            raise SpecificationError("n_starts must be >= 1")


@dataclass(frozen=True)
class DsProblem:
    parameters: tuple[ParameterDef, ...]
    responses: tuple[ResponseSpec, ...]
    config: OptimizerConfig = OptimizerConfig()

    def __post_init__(self):
        if not self.parameters:
            raise SpecificationError("problem needs at least one parameter")
        if not self.responses:
            raise SpecificationError("problem needs at least one response")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise SpecificationError("duplicate parameter names")
        by_name = {p.name: p for p in self.parameters}
        for r in self.responses:
            for f in r.model.factors:
                p = by_name.get(f.name)
                if p is None:
                    raise SpecificationError(
                        f"response {r.name!r}: model factor {f.name!r} is not a problem parameter"
                    )
                if p.kind != f.kind:
                    raise SpecificationError(
                        f"response {r.name!r}: factor {f.name!r} kind mismatch "
                        f"(model: {f.kind}, parameter: {p.kind})"
                    )
                if f.kind == "categorical" and tuple(p.levels) != tuple(f.levels):
                    raise SpecificationError(
                        f"response {r.name!r}: factor {f.name!r} level mismatch"
                    )

    def parameter(self, name: str) -> ParameterDef:
        for p in self.parameters:
            if p.name == name:
                return p
        raise SpecificationError(f"unknown parameter {name!r}")

    def with_config(self, **updates) -> "DsProblem":
        return replace(self, config=replace(self.config, **updates))

    def with_weights(self, weights: dict[str, float]) -> "DsProblem":
        unknown = set(weights) - {p.name for p in self.parameters}
        if unknown:
            raise SpecificationError(f"unknown parameters in weights: {sorted(unknown)}")
        params = tuple(
            replace(p, weight=float(weights.get(p.name, p.weight)))
            for p in self.parameters
        )
        return replace(self, parameters=params)


# ---------------------------------------------------------------------------
# JSON


def _limit_to_json(v: float):
    return None if math.isinf(v) else float(v)


def _limit_from_json(v, default: float) -> float:
    if v is None:
        return default
    return float(v)


def problem_to_json(problem: DsProblem) -> dict:
    cfg = problem.config
    return {
        "schema_version": 1,
        "parameters": [
            {
                "name": p.name,
                "kind": p.kind,
                **(
                    {"bounds": list(p.bounds), "setpoint": p.setpoint}
                    if p.kind == "continuous"
                    else {"levels": list(p.levels), "setpoint": p.setpoint}
                ),
                "weight": p.weight,
            }
            for p in problem.parameters
        ],
        "responses": [
            {
                "name": r.name,
                "model": model_to_json(r.model),
                "ti": {"alpha": r.ti.alpha, "psi": r.ti.psi},
                "acceptance": {
                    "lower": _limit_to_json(r.lower),
                    "upper": _limit_to_json(r.upper),
                },
            }
            for r in problem.responses
        ],
        "optimizer": {f.name: getattr(cfg, f.name) for f in fields(OptimizerConfig)},
    }


def config_from_json(doc: dict) -> OptimizerConfig:
    known = {f.name for f in fields(OptimizerConfig)}
    unknown = set(doc) - known
    if unknown:
        raise SpecificationError(f"unknown optimizer settings: {sorted(unknown)}")
    return OptimizerConfig(**doc)


def problem_from_json(doc: dict, model_loader=None) -> DsProblem:
    """Parse a problem document; `model_loader` resolves "model_ref" entries."""
    if not isinstance(doc, dict):
        raise SpecificationError("problem JSON must be an object")
    try:
        params = []
        for p in doc["parameters"]:
            kind = p.get("kind", "continuous")
            params.append(ParameterDef(
                name=p["name"],
                kind=kind,
                bounds=tuple(p["bounds"]) if kind == "continuous" else None,
                setpoint=p["setpoint"],
                weight=float(p.get("weight", 1.0)),
                levels=tuple(p.get("levels", ())),
            ))
        responses = []
        for r in doc["responses"]:
            if "model" in r:
                mdl = model_from_json(r["model"])
            elif "model_ref" in r and model_loader is not None:
                mdl = model_loader(r["model_ref"])
            else:
                raise SpecificationError(
                    f"response {r.get('name')!r}: needs inline 'model' or resolvable 'model_ref'"
                )
            ti = r.get("ti", {})
            acc = r.get("acceptance", {})
            responses.append(ResponseSpec(
                name=r.get("name", f"y{len(responses)}"),
                model=mdl,
                ti=TiSpec(float(ti.get("alpha", 0.05)), float(ti.get("psi", 0.99))),
                lower=_limit_from_json(acc.get("lower"), -math.inf),
                upper=_limit_from_json(acc.get("upper"), math.inf),
            ))
        config = config_from_json(doc.get("optimizer", {}))
        return DsProblem(tuple(params), tuple(responses), config)
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecificationError(f"malformed problem JSON: {exc}") from exc


def load_problem(path: str) -> DsProblem:
    import os

    with open(path) as fh:
        doc = json.load(fh)

    def loader(ref: str) -> RegressionModel:
        ref_path = ref if os.path.isabs(ref) else os.path.join(os.path.dirname(path), ref)
        with open(ref_path) as mf:
            return model_from_json(json.load(mf))

    return problem_from_json(doc, model_loader=loader)


def canonical_json(doc) -> str:
    """Stable serialization used wherever byte-identical output matters."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
