"""Desk-scale simulation studies: TI-approximation accuracy, optimizer vs
grid accuracy, and runtime scaling over the dimension count.

Every study is seed-deterministic end to end and reports both raw per-run
records and aggregates recomputable from them. Wall-clock measurements wrap
the compute calls only (no JSON I/O); one warm-up run is discarded.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .canned import sixfactor_problem
from .engine import compute_design_space
from .errors import InfeasibleError, SpecificationError
from .grid import GridSpec, grid_design_space
from .model import (
    Factor,
    canonicalize_terms,
    expand_continuous,
    fit_from_table,
    interaction,
    intercept,
    linear,
    quadratic,
)
from .normalize import normalize_problem
from .problem import (
    DsProblem,
    OptimizerConfig,
    ParameterDef,
    ResponseSpec,
    canonical_json,
)
from .tolerance import TiSpec, build_ti_approximation, generate_ccd


@dataclass(frozen=True)
class RandomModelSpec:
    """Recipe for one synthetic OLS design-space problem."""

    p: int
    main_effect_range: tuple[float, float] = (0.5, 2.0)
    interaction_density: float = 0.3
    interaction_range: tuple[float, float] = (0.1, 0.8)
    quadratic_density: float = 0.3
    quadratic_range: tuple[float, float] = (0.1, 0.8)
    sigma_range: tuple[float, float] = (0.05, 0.3)
    n_train: int = 0  # 0: five rows per model term
    feasible_target: float = 0.40
    alpha: float = 0.05
    psi: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.interaction_density <= 1.0:
            raise SpecificationError("interaction_density must be in [0,1]")
        if not 0.0 <= self.quadratic_density <= 1.0:
            raise SpecificationError("quadratic_density must be in [0,1]")


def _random_terms(rng, p, interaction_density, quadratic_density):
    terms = [intercept()] + [linear(i) for i in range(p)]
    for i in range(p):
        for j in range(i + 1, p):
            if rng.random() < interaction_density:
                terms.append(interaction(i, j))
    for i in range(p):
        if rng.random() < quadratic_density:
            terms.append(quadratic(i))
    return canonicalize_terms(terms)


def _draw_effects(rng, terms, spec: RandomModelSpec):
    beta = np.empty(len(terms))
    for k, t in enumerate(terms):
        if t.kind == "intercept":
            beta[k] = rng.uniform(-1.0, 1.0)
        elif t.kind == "linear":
            lo, hi = spec.main_effect_range
            beta[k] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
        elif t.kind == "interaction":
            lo, hi = spec.interaction_range
            beta[k] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
        else:
            lo, hi = spec.quadratic_range
            beta[k] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
    return beta


def _acceptance_band(nresp, sample, target, setpoint_norm):
    """Central quantile band of predicted means calibrated so that roughly
    `target` of sampled cube points keep their exact TI inside the band."""
    til, tiu, y, _ = nresp.exact_bounds(sample)
    s_til, s_tiu, _, _ = nresp.exact_bounds(setpoint_norm[None, :])

    def feasible_fraction(q):
        a_l = float(np.quantile(y, 0.5 - q / 2.0))
        a_u = float(np.quantile(y, 0.5 + q / 2.0))
        return float(np.mean((til >= a_l) & (tiu <= a_u))), a_l, a_u

    lo_q, hi_q = 0.02, 1.0
    frac_hi, a_l, a_u = feasible_fraction(hi_q)
    if frac_hi <= target:
        q = hi_q  # even the full band cannot reach the target: widest wins
    else:
        for _ in range(40):
            mid = (lo_q + hi_q) / 2.0
            frac, _, _ = feasible_fraction(mid)
            if frac < target:
                lo_q = mid
            else:
                hi_q = mid
        q = hi_q
    frac, a_l, a_u = feasible_fraction(q)
    setpoint_ok = bool(s_til[0] >= a_l and s_tiu[0] <= a_u)
    return a_l, a_u, q, frac, setpoint_ok


def generate_random_problem(spec: RandomModelSpec) -> DsProblem:
    """Synthesize a fitted-model DS problem; deterministic given the seed.

    Degenerate draws (setpoint infeasible even inside the calibrated band)
    are resampled with an incremented sub-seed, at most 20 attempts.
    """
    for attempt in range(20):
        rng = np.random.default_rng([spec.seed, attempt])
        p = spec.p
        centers = rng.uniform(-2.0, 2.0, size=p)
        halves = rng.uniform(0.5, 5.0, size=p)
        factors = tuple(Factor(f"x{i + 1}") for i in range(p))
        terms = _random_terms(rng, p, spec.interaction_density, spec.quadratic_density)
        beta = _draw_effects(rng, terms, spec)
        sigma = rng.uniform(*spec.sigma_range)
        n = spec.n_train or max(5 * len(terms), len(terms) + 5)

        xn = rng.uniform(-1.0, 1.0, size=(n, p))
        y = expand_continuous(xn, terms) @ beta + rng.normal(0.0, sigma, size=n)
        raw = centers + halves * xn
        model = fit_from_table(raw.astype(object), factors, terms, y)

        params = tuple(
            ParameterDef(f"x{i + 1}",
                         bounds=(float(centers[i] - halves[i]),
                                 float(centers[i] + halves[i])),
                         setpoint=float(centers[i]))
            for i in range(p)
        )
        probe = DsProblem(
            parameters=params,
            responses=(ResponseSpec("y", model, TiSpec(spec.alpha, spec.psi),
                                    lower=-1e30, upper=1e30),),
            config=OptimizerConfig(seed=spec.seed),
        )
        nresp = normalize_problem(probe).responses[0]
        sample = np.random.default_rng([spec.seed, attempt, 1]).uniform(
            -1.0, 1.0, size=(4096, p))
        a_l, a_u, q, frac, setpoint_ok = _acceptance_band(
            nresp, sample, spec.feasible_target, np.zeros(p))
        if not setpoint_ok:
            continue
        return DsProblem(
            parameters=params,
            responses=(ResponseSpec("y", model, TiSpec(spec.alpha, spec.psi),
                                    lower=a_l, upper=a_u),),
            config=OptimizerConfig(seed=spec.seed),
        )
    raise InfeasibleError(
        f"could not generate a problem with a feasible setpoint in 20 attempts "
        f"(seed={spec.seed}, p={spec.p})"
    )


@dataclass
class StudyReport:
    """Per-run records plus aggregates; serializes losslessly."""

    study: str
    config: dict
    records: list
    aggregates: dict

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "study": self.study,
            "config": self.config,
            "records": self.records,
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "StudyReport":
        return cls(doc["study"], doc["config"], doc["records"], doc["aggregates"])

    def to_canonical(self) -> str:
        return canonical_json(self.to_json())

    def write_csv(self, path: str):
        keys = sorted({k for r in self.records for k in r})
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            for r in self.records:
                writer.writerow(r)


_HIST_EDGES = np.linspace(-0.25, 0.25, 102)


def ti_accuracy_study(iterations: int = 1000, seed: int = 0,
                      points_per_iteration: int = 200) -> StudyReport:
    """Approximation error study: random OLS models (random p, sigma, alpha,
    psi, interactions, quadratics), exact vs approximated TI boundaries on a
    fresh cube sample, errors normalized by the response range.

    At least 100 iterations are required for the error statistics to mean
    anything."""
    if iterations < 100:
        raise SpecificationError("ti_accuracy_study needs iterations >= 100")
    records = []
    hist = np.zeros(_HIST_EDGES.size - 1, dtype=int)
    total_errs = 0
    sum_abs = 0.0
    sum_err = 0.0
    for it in range(iterations):
        rng = np.random.default_rng([seed, it])
        p = int(rng.integers(2, 9))
        spec = RandomModelSpec(
            p=p,
            interaction_density=float(rng.uniform(0.0, 0.6)),
            quadratic_density=float(rng.uniform(0.0, 0.6)),
            sigma_range=(0.0, 0.0),  # sigma drawn below
            alpha=float(rng.uniform(0.01, 0.10)),
            psi=float(rng.uniform(0.90, 0.995)),
            seed=int(rng.integers(0, 2**31)),
        )
        mrng = np.random.default_rng([seed, it, 1])
        terms = _random_terms(mrng, p, spec.interaction_density, spec.quadratic_density)
        beta = _draw_effects(mrng, terms, spec)
        sigma = float(mrng.uniform(0.05, 0.5))
        n = max(5 * len(terms), len(terms) + 5)
        xn = mrng.uniform(-1.0, 1.0, size=(n, p))
        y = expand_continuous(xn, terms) @ beta + mrng.normal(0.0, sigma, size=n)
        factors = tuple(Factor(f"x{i + 1}") for i in range(p))
        model = fit_from_table(xn.astype(object), factors, terms, y)

        problem = DsProblem(
            parameters=tuple(
                ParameterDef(f"x{i + 1}", bounds=(-1.0, 1.0), setpoint=0.0)
                for i in range(p)),
            responses=(ResponseSpec("y", model, TiSpec(spec.alpha, spec.psi),
                                    lower=-1e30, upper=1e30),),
        )
        nresp = normalize_problem(problem).responses[0]
        ccd = generate_ccd(p)
        til_c, tiu_c, y_c, _ = nresp.exact_bounds(ccd.points)
        approx = build_ti_approximation(y_c, (tiu_c - til_c) / 2.0)

        pts = mrng.uniform(-1.0, 1.0, size=(points_per_iteration, p))
        til, tiu, yy, _ = nresp.exact_bounds(pts)
        w = approx.half_width(yy)
        y_span = float(np.max(yy) - np.min(yy)) or 1.0
        errs = np.concatenate([((yy - w) - til), ((yy + w) - tiu)]) / y_span
        counts = np.histogram(np.clip(errs, _HIST_EDGES[0], _HIST_EDGES[-1]),
                              bins=_HIST_EDGES)[0]
        hist += counts
        total_errs += errs.size
        sum_abs += float(np.sum(np.abs(errs)))
        sum_err += float(np.sum(errs))
        records.append({
            "iteration": it, "p": p, "sigma": sigma,
            "alpha": spec.alpha, "psi": spec.psi,
            "n_terms": len(terms),
            "mean_abs_err": float(np.mean(np.abs(errs))),
            "max_abs_err": float(np.max(np.abs(errs))),
            "mean_err": float(np.mean(errs)),
            "fit_residual_max": approx.fit_residual_max,
            # per-record bins so the aggregate histogram is recomputable
            "histogram_counts": [int(c) for c in counts],
        })
    return StudyReport(
        study="ti-accuracy",
        config={"iterations": iterations, "seed": seed,
                "points_per_iteration": points_per_iteration},
        records=records,
        aggregates={
            "mean_abs_err": sum_abs / total_errs,
            "mean_err": sum_err / total_errs,
            "n_errors": total_errs,
            "histogram": {
                "edges": [float(e) for e in _HIST_EDGES],
                "counts": [int(c) for c in hist],
            },
        },
    )


def _optimizer_record(problem: DsProblem, label: str, **overrides) -> dict:
    cfg_problem = problem.with_config(**overrides) if overrides else problem
    t0 = time.perf_counter()
    res = compute_design_space(cfg_problem)
    elapsed = time.perf_counter() - t0
    rec = {
        "method": label,
        "feasible": bool(res.feasible),
        "volume_unweighted": res.volume_unweighted,
        "volume_weighted": res.volume_weighted,
        "wall_time_s": elapsed,
    }
    if res.parameters:
        for pr in res.parameters:
            if pr["kind"] == "continuous":
                rec[f"{pr['name']}_from"] = pr["lower"]
                rec[f"{pr['name']}_to"] = pr["upper"]
    return rec


def accuracy_study(problems: list[DsProblem] | None = None,
                   grid_resolution: int = 9, seed: int = 0,
                   n_problems: int = 20, p_range: tuple[int, int] = (2, 5),
                   include_sixfactor: bool = True) -> StudyReport:
    """Volume comparison: grid baseline vs pass-1 optimizer vs two-pass
    (plus a weighted pass when the problem carries non-unit weights)."""
    if problems is None:
        problems = []
        for i in range(n_problems):
            p = p_range[0] + i % (p_range[1] - p_range[0] + 1)
            problems.append(generate_random_problem(
                RandomModelSpec(p=p, seed=seed * 1_000_003 + i)))
        if include_sixfactor:
            problems.append(sixfactor_problem())

    records = []
    dominance_ok = 0
    dominance_n = 0
    for pi, problem in enumerate(problems):
        p = len(problem.parameters)
        base = {"problem": pi, "p": p}
        grid_vol = None
        if p <= 6:
            t0 = time.perf_counter()
            gres = grid_design_space(problem, GridSpec(grid_resolution))
            elapsed = time.perf_counter() - t0
            rec = dict(base, method="grid", feasible=gres["feasible"],
                       volume_unweighted=gres["volume"]["unweighted"],
                       volume_weighted=gres["volume"]["weighted"],
                       wall_time_s=elapsed, grid_resolution=grid_resolution)
            if gres.get("parameters"):
                for pr in gres["parameters"]:
                    if pr["kind"] == "continuous":
                        rec[f"{pr['name']}_from"] = pr["lower"]
                        rec[f"{pr['name']}_to"] = pr["upper"]
            records.append(rec)
            grid_vol = gres["volume"]["unweighted"] if gres["feasible"] else None

        rec1 = dict(base, **_optimizer_record(problem, "optimizer_pass1",
                                              pass2_method="none"))
        records.append(rec1)
        if any(pp.weight != 1.0 for pp in problem.parameters):
            records.append(dict(base, **_optimizer_record(
                problem, "optimizer_weighted", pass2_method="none")))
        rec2 = dict(base, **_optimizer_record(problem, "optimizer_two_pass"))
        records.append(rec2)

        if grid_vol is not None and rec2["feasible"]:
            dominance_n += 1
            if rec2["volume_unweighted"] >= grid_vol:
                dominance_ok += 1

    return StudyReport(
        study="accuracy",
        config={"grid_resolution": grid_resolution, "seed": seed,
                "n_problems": len(problems)},
        records=records,
        aggregates={
            "dominance_fraction": (dominance_ok / dominance_n) if dominance_n else None,
            "dominance_wins": dominance_ok,
            "dominance_comparisons": dominance_n,
        },
    )


def timing_study(p_values=tuple(range(2, 11)), iterations: int = 10,
                 seed: int = 0, grid_resolution: int = 8, grid_max_p: int = 6,
                 grid_iterations: int = 2) -> StudyReport:
    """Wall-clock scaling over the dimension count.

    The optimizer runs with corner constraints disabled so the constraint
    count stays linear in p across the whole sweep; the grid baseline is
    measured up to `grid_max_p` (hard-capped at 6, beyond which measuring is
    the very cost explosion being demonstrated) and extrapolated as
    resolution^p beyond that, with those rows flagged as projected."""
    grid_max_p = min(grid_max_p, 6)
    records = []
    warmed_up = False
    per_p_opt: dict[int, list[float]] = {}
    per_p_grid: dict[int, list[float]] = {}
    for p in p_values:
        for it in range(iterations):
            problem = generate_random_problem(RandomModelSpec(
                p=p, seed=seed * 1_000_003 + p * 1009 + it))
            problem = problem.with_config(corner_constraints_enabled=False)
            if not warmed_up:
                compute_design_space(problem)  # warm-up, discarded
                warmed_up = True
            t0 = time.perf_counter()
            res = compute_design_space(problem)
            elapsed = time.perf_counter() - t0
            per_p_opt.setdefault(p, []).append(elapsed)
            records.append({
                "p": p, "iteration": it, "method": "optimizer",
                "wall_time_s": elapsed, "feasible": bool(res.feasible),
                "volume_unweighted": res.volume_unweighted,
                "projected": False,
            })
            if p <= grid_max_p and it < grid_iterations:
                # bare baseline timing: discretize + box search, no
                # certificate (the reference method has none)
                t0 = time.perf_counter()
                gres = grid_design_space(problem, GridSpec(grid_resolution),
                                         certificate=False)
                elapsed = time.perf_counter() - t0
                per_p_grid.setdefault(p, []).append(elapsed)
                records.append({
                    "p": p, "iteration": it, "method": "grid",
                    "wall_time_s": elapsed, "feasible": bool(gres["feasible"]),
                    "volume_unweighted": gres["volume"]["unweighted"],
                    "projected": False,
                })

    aggregates: dict = {"series": []}
    for p in p_values:
        ts = per_p_opt.get(p, [])
        if ts:
            aggregates["series"].append({
                "p": p, "method": "optimizer", "projected": False,
                "mean_time_s": float(np.mean(ts)),
                "sd_time_s": float(np.std(ts)),
                "n": len(ts),
            })
    measured_ps = sorted(per_p_grid)
    for p in measured_ps:
        ts = per_p_grid[p]
        aggregates["series"].append({
            "p": p, "method": "grid", "projected": False,
            "mean_time_s": float(np.mean(ts)),
            "sd_time_s": float(np.std(ts)),
            "n": len(ts),
        })
    if measured_ps:
        p_ref = measured_ps[-1]
        t_ref = float(np.mean(per_p_grid[p_ref]))
        for p in p_values:
            if p > grid_max_p:
                aggregates["series"].append({
                    "p": p, "method": "grid", "projected": True,
                    "mean_time_s": t_ref * grid_resolution ** (p - p_ref),
                    "sd_time_s": None,
                    "n": 0,
                })
    return StudyReport(
        study="timing",
        config={"p_values": list(p_values), "iterations": iterations,
                "seed": seed, "grid_resolution": grid_resolution,
                "grid_max_p": grid_max_p, "grid_iterations": grid_iterations,
                "corner_constraints_enabled": False},
        records=records,
        aggregates=aggregates,
    )
