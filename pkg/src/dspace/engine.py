"""Design-space search engine.

Pipeline: normalize the problem, relax categorical factors, pre-fit the TI
width approximation on a CCD, run a derivative-free COBYLA pass with the
approximated TI in the constraints, repair the result against exact TIs,
optionally refine with a second pass (COBYLA at smaller rho_start, or SLSQP)
using exact TIs, map relaxed categorical ranges back to level sets,
de-normalize, and attach a post-hoc feasibility certificate (exact-TI inner
extremes plus low-discrepancy sampling over the returned box).

The candidate vector has 2p entries: p lower boundaries followed by p upper
boundaries, all in normalized units.

Constraint order (for a candidate of dimension p):
  p ordering (upper - lower), p setpoint-lower, p setpoint-upper,
  p bound-lower, p bound-upper, then per response 2^p corner-lower and
  2^p corner-upper margins (when corner constraints are active), then per
  response one nested-lower and one nested-upper margin. For a single
  response with corners active the count is 2^(p+1) + 5p + 2.
"""

from __future__ import annotations

import itertools
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import ContractError, SpecificationError
from .normalize import NormalizedProblem, NormalizedResponse, normalize_problem
from .problem import DsProblem, OptimizerConfig
from .tolerance import TiApproximation, build_ti_approximation, generate_ccd

_BIG = 1e20  # stands in for an infinite acceptance margin


def objective(x, weights) -> float:
    """Weighted box volume: prod over dims of (upper - lower) * w."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    p = w.shape[0]
    if x.shape[0] != 2 * p:
        raise ContractError(f"candidate has {x.shape[0]} entries for p={p}")
    return float(np.prod((x[p:] - x[:p]) * w))


def _quad_roots(c0: float, c1: float, c2: float):
    """Real roots of c2 y^2 + c1 y + c0 = 0, degree-robust."""
    if c2 == 0.0:
        if c1 == 0.0:
            return ()
        return (-c0 / c1,)
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return ()
    s = math.sqrt(disc)
    return ((-c1 - s) / (2.0 * c2), (-c1 + s) / (2.0 * c2))


def _approx_band_extremes(approx: TiApproximation, y_lo: float, y_hi: float):
    """Extremes of the approximated TI boundaries over yhat in [y_lo, y_hi].

    The boundaries are piecewise quadratic in yhat (the width is clamped at
    zero), so the extremes sit at interval ends, branch switches (roots of
    the width polynomial) or branch vertices; all are enumerated exactly.
    """
    c0, c1, c2 = approx.c0, approx.c1, approx.c2
    cands = [y_lo, y_hi]
    cands += [r for r in _quad_roots(c0, c1, c2) if y_lo < r < y_hi]
    if c2 != 0.0:
        v_l = (1.0 - c1) / (2.0 * c2)
        v_u = -(1.0 + c1) / (2.0 * c2)
        cands += [v for v in (v_l, v_u) if y_lo < v < y_hi]
    ys = np.array(cands)
    w = approx.half_width(ys)
    lower = ys - w
    upper = ys + w
    return float(np.min(lower)), float(np.max(upper))


class InnerOptimizer:
    """Bounded extreme search inside a box: multi-start screening, then
    quasi-Newton (L-BFGS-B) polish of the most promising starts.

    Screening tiers: a compact set (box center, 2^min(p,6) corners with a
    deterministic filled subset above six dimensions, and face centers) for
    in-iteration use, and a full 3-level factorial (all corner/edge/face
    centers) for polished calls when p <= 6."""

    def __init__(self, p: int, config: OptimizerConfig):
        self.p = p
        self.config = config
        m = min(p, config.inner_multistart_exp)
        base = np.array(list(itertools.product((0.0, 1.0), repeat=m)))
        if p > m:
            rng = np.random.default_rng(config.seed)
            fill = rng.integers(0, 2, size=(base.shape[0], p - m)).astype(float)
            base = np.hstack([base, fill])
        faces = np.tile(0.5, (2 * p, p))
        for d in range(p):
            faces[2 * d, d] = 0.0
            faces[2 * d + 1, d] = 1.0
        self.fracs_small = np.vstack([base, np.full((1, p), 0.5), faces])
        if 3 ** p <= 729:
            self.fracs_big = np.array(
                list(itertools.product((0.0, 0.5, 1.0), repeat=p)))
        else:
            self.fracs_big = self.fracs_small
        # in-iteration screening: prefer full 3-level coverage when cheap
        self.fracs_screen = self.fracs_big if 3 ** p <= 243 else self.fracs_small
        # polish runs that did not report clean convergence (diagnostics)
        self.nonconverged_polishes = 0

    def starts(self, lo: np.ndarray, up: np.ndarray, big: bool = False) -> np.ndarray:
        fracs = self.fracs_big if big else self.fracs_screen
        return lo + fracs * (up - lo)

    def minimize(self, f_batch, f_single, lo, up, grad=None,
                 polish: bool = True, polish_starts: int = 6):
        """Minimize over the box; returns (value, point, converged)."""
        pts = self.starts(lo, up, big=polish)
        vals = f_batch(pts)
        order = np.argsort(vals, kind="stable")
        best_val = float(vals[order[0]])
        best_pt = pts[order[0]].copy()
        if not polish:
            return best_val, best_pt, True
        converged = True
        picks = list(order[:polish_starts])
        center = lo + 0.5 * (up - lo)
        bounds = list(zip(lo, up))
        jac = grad if grad is not None else self._central_diff(f_single)
        for start in [pts[i] for i in picks] + [center]:
            try:
                res = minimize(
                    f_single, start, jac=jac, method="L-BFGS-B", bounds=bounds,
                    options={"maxiter": self.config.inner_max_iters,
                             "ftol": 1e-14,
                             "gtol": max(1e-12, self.config.inner_tol * 0.1)},
                )
            except Exception:
                converged = False
                continue
            if not res.success and res.status != 1:  # 1 = iteration cap
                converged = False
            if res.fun < best_val:
                best_val = float(res.fun)
                best_pt = np.clip(res.x, lo, up)
        if not converged:
            self.nonconverged_polishes += 1
        return best_val, best_pt, converged

    @staticmethod
    def _central_diff(f, step: float = 1e-6):
        def jac(z):
            z = np.asarray(z, dtype=float)
            g = np.empty_like(z)
            for d in range(z.shape[0]):
                zp = z.copy()
                zm = z.copy()
                zp[d] += step
                zm[d] -= step
                g[d] = (f(zp) - f(zm)) / (2.0 * step)
            return g

        return jac


def inner_extreme_ti(resp: NormalizedResponse, lo, up, direction: str,
                     inner: InnerOptimizer, mode: str = "exact",
                     approx: TiApproximation | None = None,
                     polish_starts: int = 6):
    """Extreme of a TI boundary inside [lo, up]: direction "min_lower"
    minimizes the lower boundary, "max_upper" maximizes the upper one.
    Returns (extreme value, argpoint, converged)."""
    lo = np.asarray(lo, dtype=float)
    up = np.maximum(np.asarray(up, dtype=float), lo)
    if direction not in ("min_lower", "max_upper"):
        raise ContractError(f"unknown direction {direction!r}")
    minimize_lower = direction == "min_lower"

    # both directions run as a minimization: f = ti_l, or f = -ti_u
    if mode == "approx":
        if approx is None:
            raise ContractError("approx mode needs a TiApproximation")

        def f_batch(P):
            y = resp.mean(P)
            w = approx.half_width(y)
            return (y - w) if minimize_lower else -(y + w)
    else:
        def f_batch(P):
            til, tiu, _, _ = resp.exact_bounds(P)
            return til if minimize_lower else -tiu

    def f_single(z):
        return float(f_batch(np.asarray(z, dtype=float)[None, :])[0])

    grad = None
    if mode == "approx" and approx.c1 == 0.0 and approx.c2 == 0.0:
        # constant width: boundary gradient equals the mean gradient
        def grad(z):  # noqa: E306
            g = resp.mean_grad(np.asarray(z, dtype=float)[None, :])[0]
            return g if minimize_lower else -g

    val, pt, ok = inner.minimize(f_batch, f_single, lo, up, grad=grad,
                                 polish_starts=polish_starts)
    return (val if minimize_lower else -val), pt, ok


def _mean_extremes(resp: NormalizedResponse, lo, up, inner: InnerOptimizer,
                   polish: bool):
    """(min, max) of the predicted mean over the box."""
    v_min, _, _ = inner.minimize(
        lambda P: resp.mean(P),
        lambda z: float(resp.mean(np.asarray(z)[None, :])[0]),
        lo, up,
        grad=lambda z: resp.mean_grad(np.asarray(z)[None, :])[0],
        polish=polish,
    )
    v_max_neg, _, _ = inner.minimize(
        lambda P: -resp.mean(P),
        lambda z: -float(resp.mean(np.asarray(z)[None, :])[0]),
        lo, up,
        grad=lambda z: -resp.mean_grad(np.asarray(z)[None, :])[0],
        polish=polish,
    )
    return v_min, -v_max_neg


class BoxEvaluator:
    """Objective and the full margin vector for candidate boxes.

    `ti_mode` selects approximated or exact tolerance intervals; `polish`
    controls whether nested extremes are quasi-Newton-polished on every call
    (verification/repair) or screened only (inside optimizer iterations,
    where the repair/certificate stages backstop accuracy).
    """

    def __init__(self, nprob: NormalizedProblem, ti_mode: str,
                 approxes=None, config: OptimizerConfig | None = None,
                 inner: InnerOptimizer | None = None, polish: bool = False,
                 polish_starts: int = 6, extra_fracs=None):
        self.nprob = nprob
        self.p = nprob.p
        self.ti_mode = ti_mode
        self.approxes = approxes or [None] * len(nprob.responses)
        self.config = config or nprob.problem.config
        self.inner = inner or InnerOptimizer(self.p, self.config)
        self.polish = polish
        self.polish_starts = polish_starts
        # box-relative cut points injected by the lazy-constraint loop:
        # fractions of the candidate box where earlier rounds found nested
        # extremes the screening lattice had missed
        self.extra_fracs = (
            np.atleast_2d(np.asarray(extra_fracs, dtype=float))
            if extra_fracs is not None and len(extra_fracs) else None
        )
        self.corners_enabled = (
            self.config.corner_constraints_enabled and self.p <= self.config.corner_cap
        )
        self.corner_bits = (
            np.array(list(itertools.product((False, True), repeat=self.p)))
            if self.corners_enabled else None
        )
        self.extrap_hits = 0
        self.extrap_total = 0
        self.labels = self._labels()

    def _labels(self):
        names = [d.name for d in self.nprob.dims]
        labels = [f"ordering[{n}]" for n in names]
        labels += [f"setpoint_lower[{n}]" for n in names]
        labels += [f"setpoint_upper[{n}]" for n in names]
        labels += [f"bound_lower[{n}]" for n in names]
        labels += [f"bound_upper[{n}]" for n in names]
        if self.corners_enabled:
            for r in self.nprob.responses:
                nc = self.corner_bits.shape[0]
                labels += [f"corner_lower[{r.name}][{c}]" for c in range(nc)]
                labels += [f"corner_upper[{r.name}][{c}]" for c in range(nc)]
        for r in self.nprob.responses:
            labels += [f"nested_lower[{r.name}]", f"nested_upper[{r.name}]"]
        return labels

    @property
    def n_constraints(self) -> int:
        return len(self.labels)

    def objective_weighted(self, x: np.ndarray) -> float:
        return objective(x, self.nprob.weights)

    def _ti_bounds(self, ri: int, pts: np.ndarray):
        resp = self.nprob.responses[ri]
        if self.ti_mode == "approx":
            approx = self.approxes[ri]
            y = resp.mean(pts)
            lo_d, hi_d = approx.fit_domain
            self.extrap_total += y.size
            self.extrap_hits += int(np.sum((y < lo_d) | (y > hi_d)))
            w = approx.half_width(y)
            return y - w, y + w
        til, tiu, _, _ = resp.exact_bounds(pts)
        return til, tiu

    def margins(self, x: np.ndarray) -> np.ndarray:
        p = self.p
        x = np.asarray(x, dtype=float)
        lo, up = x[:p], x[p:]
        s = self.nprob.setpoints
        parts = [up - lo, s - lo, up - s, lo + 1.0, 1.0 - up]

        up_c = np.maximum(up, lo)
        if self.corners_enabled:
            corner_pts = np.where(self.corner_bits, up[None, :], lo[None, :])
            for ri, resp in enumerate(self.nprob.responses):
                til, tiu = self._ti_bounds(ri, corner_pts)
                ml = til - resp.lower if math.isfinite(resp.lower) else np.full_like(til, _BIG)
                mu = resp.upper - tiu if math.isfinite(resp.upper) else np.full_like(tiu, _BIG)
                parts.append(ml)
                parts.append(mu)

        nested = np.empty(2 * len(self.nprob.responses))
        for ri, resp in enumerate(self.nprob.responses):
            ext_lo, ext_up = self._nested_extremes(ri, lo, up_c)
            nested[2 * ri] = (ext_lo - resp.lower) if math.isfinite(resp.lower) else _BIG
            nested[2 * ri + 1] = (resp.upper - ext_up) if math.isfinite(resp.upper) else _BIG
        parts.append(nested)
        return np.concatenate(parts)

    def _nested_extremes(self, ri: int, lo, up):
        resp = self.nprob.responses[ri]
        if self.ti_mode == "approx":
            approx = self.approxes[ri]
            y_lo, y_hi = _mean_extremes(resp, lo, up, self.inner, polish=self.polish)
            lo_d, hi_d = approx.fit_domain
            self.extrap_total += 2
            self.extrap_hits += int(y_lo < lo_d) + int(y_hi > hi_d)
            return _approx_band_extremes(approx, y_lo, y_hi)
        need_lower = math.isfinite(resp.lower)
        need_upper = math.isfinite(resp.upper)
        ext_lo = ext_up = 0.0
        if self.polish:
            if need_lower:
                ext_lo, _, _ = inner_extreme_ti(
                    resp, lo, up, "min_lower", self.inner,
                    polish_starts=self.polish_starts)
            if need_upper:
                ext_up, _, _ = inner_extreme_ti(
                    resp, lo, up, "max_upper", self.inner,
                    polish_starts=self.polish_starts)
        else:
            pts = self.inner.starts(lo, up)
            if self.extra_fracs is not None:
                pts = np.vstack([pts, lo + self.extra_fracs * (up - lo)])
            til, tiu, _, _ = resp.exact_bounds(pts)
            ext_lo = float(np.min(til)) if need_lower else 0.0
            ext_up = float(np.max(tiu)) if need_upper else 0.0
        return ext_lo, ext_up

    def extrapolation_fraction(self) -> float:
        return self.extrap_hits / self.extrap_total if self.extrap_total else 0.0


def assemble_constraints(evaluator):
    """The inequality constraints c_i(x) >= 0 as an ordered list of scalar
    functions (each tagged with `.label`). They share one vectorized margin
    evaluation via a small cache, so calling all of them at the same point
    costs one margin computation.

    Accepts a BoxEvaluator, or a NormalizedProblem (evaluated with exact
    TIs and the problem's own optimizer config)."""
    if isinstance(evaluator, NormalizedProblem):
        evaluator = BoxEvaluator(evaluator, "exact")
    cache: dict = {}

    def margins_at(x) -> np.ndarray:
        key = np.asarray(x, dtype=float).tobytes()
        if key not in cache:
            cache.clear()  # single-slot: optimizers probe one point at a time
            cache[key] = evaluator.margins(x)
        return cache[key]

    funcs = []
    for i, label in enumerate(evaluator.labels):
        def fn(x, _i=i):
            return float(margins_at(x)[_i])

        fn.label = label
        funcs.append(fn)
    return funcs


class _Tracker:
    """Candidate cache + best-feasible bookkeeping around a BoxEvaluator.

    Keeps the k best feasible candidates seen, not just the single best:
    the top of the list may fail the stricter polished re-check later, in
    which case a runner-up often repairs to a larger box.
    """

    def __init__(self, evaluator: BoxEvaluator, feas_tol: float,
                 cache_size: int = 0, keep: int = 8):
        self.ev = evaluator
        self.feas_tol = feas_tol
        self.cache: OrderedDict[bytes, tuple[float, np.ndarray]] = OrderedDict()
        self.cache_size = cache_size or (4 * 2 * evaluator.p + 16)
        self.keep = keep
        self.n_evals = 0
        self.best: list[tuple[float, np.ndarray]] = []  # volume-desc
        self.least_violation = -math.inf  # max over candidates of min margin
        self.least_violation_idx = 0

    @property
    def best_x(self):
        return self.best[0][1] if self.best else None

    @property
    def best_volume(self):
        return self.best[0][0] if self.best else -math.inf

    def evaluate(self, x) -> tuple[float, np.ndarray]:
        arr = np.asarray(x, dtype=float)
        key = arr.tobytes()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        vol = self.ev.objective_weighted(arr)
        margins = self.ev.margins(arr)
        self.n_evals += 1
        worst = float(np.min(margins))
        if worst >= -self.feas_tol:
            if len(self.best) < self.keep or vol > self.best[-1][0]:
                self.best.append((vol, arr.copy()))
                self.best.sort(key=lambda t: -t[0])
                del self.best[self.keep:]
        if worst > self.least_violation:
            self.least_violation = worst
            self.least_violation_idx = int(np.argmin(margins))
        if len(self.cache) >= self.cache_size:
            self.cache.popitem(last=False)
        self.cache[key] = (vol, margins)
        return vol, margins


def run_pass(nprob: NormalizedProblem, start: np.ndarray, *, method: str,
             rho_start: float, max_iters: int, ti_mode: str, approxes=None,
             config: OptimizerConfig | None = None,
             inner: InnerOptimizer | None = None,
             evaluator: BoxEvaluator | None = None):
    """One optimization pass; returns (best feasible candidate or None,
    trace, runner-up candidates by volume).

    `method` is "cobyla" (linear-approximation trust region, rho_start as the
    initial trust-region lower bound) or "slsqp" (sequential quadratic
    programming). The best feasible candidate ever evaluated is returned,
    not just the solver's final iterate.
    """
    config = config or nprob.problem.config
    if evaluator is None:
        evaluator = BoxEvaluator(nprob, ti_mode, approxes, config, inner)
    tracker = _Tracker(evaluator, config.feasibility_tol)

    def neg_obj(x):
        return -tracker.evaluate(x)[0]

    def cons(x):
        return tracker.evaluate(x)[1]

    t0 = time.perf_counter()
    if method == "cobyla":
        options = {"rhobeg": rho_start, "maxiter": max_iters,
                   "tol": max(1e-8, rho_start * 1e-4)}
        res = minimize(neg_obj, start, method="COBYLA",
                       constraints=[{"type": "ineq", "fun": cons}],
                       options=options)
    elif method == "slsqp":
        res = minimize(neg_obj, start, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": cons}],
                       options={"maxiter": max_iters, "ftol": 1e-12})
    else:
        raise SpecificationError(f"unknown pass method {method!r}")
    elapsed = time.perf_counter() - t0

    trace = {
        "method": method,
        "ti_mode": ti_mode,
        "rho_start": rho_start,
        "max_iters": max_iters,
        "n_evaluations": tracker.n_evals,
        "solver_status": int(res.status),
        "solver_message": str(res.message),
        "wall_time_s": elapsed,
        "n_constraints": evaluator.n_constraints,
        "extrapolation_fraction": evaluator.extrapolation_fraction(),
        "inner_nonconverged": evaluator.inner.nonconverged_polishes,
        "feasible": tracker.best_x is not None,
    }
    if tracker.best_x is None:
        trace["most_violated_constraint"] = evaluator.labels[tracker.least_violation_idx]
        trace["least_violation"] = tracker.least_violation
        return None, trace, []
    trace["volume_weighted"] = tracker.best_volume
    trace["volume_unweighted"] = objective(tracker.best_x, np.ones(nprob.p))
    return tracker.best_x, trace, [x for _, x in tracker.best]


def _min_margin(evaluator: BoxEvaluator, x) -> float:
    return float(np.min(evaluator.margins(x)))


def repair_candidate(nprob: NormalizedProblem, cand: np.ndarray,
                     config: OptimizerConfig, inner: InnerOptimizer):
    """Shrink a candidate toward the setpoint until exact-TI feasible.

    Returns (repaired candidate, scale in [0,1], feasible flag). Scale 1
    means no repair was needed. The shrink is anchored at the setpoint so
    ordering/setpoint/bound constraints stay satisfied along the way.
    Bisection runs against cheap screened margins; the accepted scale is
    then confirmed with quasi-Newton-polished inner extremes and backed
    off geometrically if the polish uncovers a deeper violation.
    """
    tol = config.feasibility_tol
    polished = BoxEvaluator(nprob, "exact", config=config, inner=inner,
                            polish=True, polish_starts=2)
    screened = BoxEvaluator(nprob, "exact", config=config, inner=inner,
                            polish=False)
    if _min_margin(polished, cand) >= -tol:
        return cand, 1.0, True
    anchor = np.concatenate([nprob.setpoints, nprob.setpoints])
    if _min_margin(polished, anchor) < -tol:
        return cand, 0.0, False

    lo_t, hi_t = 0.0, 1.0
    if _min_margin(screened, cand) < -tol:
        for _ in range(40):
            mid = (lo_t + hi_t) / 2.0
            if _min_margin(screened, anchor + mid * (cand - anchor)) >= -tol:
                lo_t = mid
            else:
                hi_t = mid
    else:
        # screened margins pass but polished ones fail: shrink directly
        lo_t = 1.0
    scale = lo_t
    for _ in range(60):
        if _min_margin(polished, anchor + scale * (cand - anchor)) >= -tol:
            return anchor + scale * (cand - anchor), scale, True
        scale *= 0.99
    return anchor, 0.0, True


def _violation_fracs(nprob: NormalizedProblem, cand, config, inner):
    """Box-relative positions of nested extremes that violate acceptance
    limits at `cand` (found by polished inner optimization); used as cut
    points for the next lazy-constraint round."""
    p = nprob.p
    lo, up = cand[:p], np.maximum(cand[p:], cand[:p])
    width = np.maximum(up - lo, 1e-300)
    cuts = []
    for resp in nprob.responses:
        if math.isfinite(resp.lower):
            ext, arg, _ = inner_extreme_ti(resp, lo, up, "min_lower", inner,
                                           polish_starts=2)
            if ext - resp.lower < -config.feasibility_tol:
                cuts.append(np.clip((arg - lo) / width, 0.0, 1.0))
        if math.isfinite(resp.upper):
            ext, arg, _ = inner_extreme_ti(resp, lo, up, "max_upper", inner,
                                           polish_starts=2)
            if resp.upper - ext < -config.feasibility_tol:
                cuts.append(np.clip((arg - lo) / width, 0.0, 1.0))
    return cuts


def _best_repaired(nprob: NormalizedProblem, candidates, config, inner):
    """Repair candidates in volume order, keep the best repaired box.

    Stops early once a repaired volume beats the next candidate's raw
    volume (repair can only shrink, never grow). Returns
    (candidate or None, weighted volume, repair scale of the winner).
    """
    ranked = sorted(candidates, key=lambda c: -objective(c, nprob.weights))[:4]
    best_cand, best_vol, best_scale = None, -math.inf, 0.0
    for i, cand in enumerate(ranked):
        cand_r, scale, ok = repair_candidate(nprob, cand, config, inner)
        if ok:
            vol = objective(cand_r, nprob.weights)
            if vol > best_vol:
                best_cand, best_vol, best_scale = cand_r, vol, scale
        if best_cand is not None and i + 1 < len(ranked):
            if best_vol >= objective(ranked[i + 1], nprob.weights):
                break
    if best_cand is None:
        return None, -math.inf, 0.0
    return best_cand, best_vol, best_scale


def verify_candidate(nprob: NormalizedProblem, cand: np.ndarray,
                     config: OptimizerConfig, inner: InnerOptimizer) -> dict:
    """Post-hoc certificate: exact-TI extremes over the returned box (inner
    optimization) plus low-discrepancy sampling, margins against acceptance
    limits at the certificate tolerance."""
    p = nprob.p
    lo, up = cand[:p], np.maximum(cand[p:], cand[:p])
    n_target = config.verify_points_per_dim * p
    sampler = qmc.Sobol(d=p, scramble=True, seed=config.seed)
    pts01 = sampler.random_base2(max(1, math.ceil(math.log2(max(2, n_target)))))
    pts = lo + pts01 * (up - lo)
    if p <= 12:
        corners = np.where(
            np.array(list(itertools.product((False, True), repeat=p))),
            up[None, :], lo[None, :])
        pts = np.vstack([pts, corners])

    responses = []
    feasible = True
    for resp in nprob.responses:
        til, tiu, _, se2 = resp.exact_bounds(pts)
        entry = {"name": resp.name, "n_points": int(pts.shape[0])}
        if resp.model.sigma2_hat > 0.0:
            entry["n_star_min"] = float(resp.model.sigma2_hat / np.max(se2))
        if math.isfinite(resp.lower):
            ext, arg, _ = inner_extreme_ti(resp, lo, up, "min_lower", inner)
            i_s = int(np.argmin(til))
            if til[i_s] < ext:
                ext, arg = float(til[i_s]), pts[i_s]
            entry["lower_margin"] = float(ext - resp.lower)
            entry["lower_argpoint"] = [float(v) for v in arg]
            feasible &= entry["lower_margin"] >= -config.certificate_tol
        if math.isfinite(resp.upper):
            ext, arg, _ = inner_extreme_ti(resp, lo, up, "max_upper", inner)
            i_s = int(np.argmax(tiu))
            if tiu[i_s] > ext:
                ext, arg = float(tiu[i_s]), pts[i_s]
            entry["upper_margin"] = float(resp.upper - ext)
            entry["upper_argpoint"] = [float(v) for v in arg]
            feasible &= entry["upper_margin"] >= -config.certificate_tol
        responses.append(entry)
    return {
        "feasible": bool(feasible),
        "tolerance": config.certificate_tol,
        "responses": responses,
    }


@dataclass
class DsResult:
    """De-normalized design space with diagnostics."""

    feasible: bool
    parameters: list
    volume_weighted: float | None
    volume_unweighted: float | None
    dim_names: list
    normalized_lower: list | None
    normalized_upper: list | None
    certificate: dict | None
    passes: list
    failure: dict | None
    seed: int
    config: dict

    def to_json(self) -> dict:
        # wall-clock entries are stripped: result JSON is byte-reproducible
        # for identical problem + seed + config
        passes = [
            {k: v for k, v in trace.items() if k != "wall_time_s"}
            for trace in self.passes
        ]
        return {
            "schema_version": 1,
            "feasible": self.feasible,
            "parameters": self.parameters,
            "volume": {
                "weighted": self.volume_weighted,
                "unweighted": self.volume_unweighted,
            },
            "normalized": {
                "dims": self.dim_names,
                "lower": self.normalized_lower,
                "upper": self.normalized_upper,
            },
            "certificate": self.certificate,
            "passes": passes,
            "failure": self.failure,
            "seed": self.seed,
            "config": self.config,
        }


def _config_snapshot(config: OptimizerConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(OptimizerConfig)}


def _setpoint_violations(nprob: NormalizedProblem) -> list:
    """Exact-TI margins at the setpoint; any negative one means no feasible
    box can contain the setpoint."""
    sp = nprob.setpoints[None, :]
    out = []
    for resp in nprob.responses:
        til, tiu, _, _ = resp.exact_bounds(sp)
        bad_lo = math.isfinite(resp.lower) and til[0] < resp.lower
        bad_up = math.isfinite(resp.upper) and tiu[0] > resp.upper
        if bad_lo or bad_up:
            out.append({
                "response": resp.name,
                "ti_lower": float(til[0]),
                "ti_upper": float(tiu[0]),
                "acceptance": [
                    None if math.isinf(resp.lower) else resp.lower,
                    None if math.isinf(resp.upper) else resp.upper,
                ],
            })
    return out


def compute_design_space(problem: DsProblem) -> DsResult:
    """Full pipeline; always returns a DsResult (feasible flag + diagnostics)."""
    config = problem.config
    nprob = normalize_problem(problem)
    p = nprob.p
    if p == 0:
        raise SpecificationError("no optimization dimensions (all parameters dropped)")
    inner = InnerOptimizer(p, config)

    violations = _setpoint_violations(nprob)
    if violations:
        ranges, _ = nprob.denormalize_ranges(
            np.concatenate([nprob.setpoints, nprob.setpoints]))
        return DsResult(
            feasible=False,
            parameters=ranges,
            volume_weighted=None,
            volume_unweighted=None,
            dim_names=[d.name for d in nprob.dims],
            normalized_lower=list(map(float, nprob.setpoints)),
            normalized_upper=list(map(float, nprob.setpoints)),
            certificate=None,
            passes=[],
            failure={
                "stage": "setpoint_check",
                "message": "setpoint violates acceptance limits for: "
                           + ", ".join(v["response"] for v in violations),
                "violations": violations,
            },
            seed=config.seed,
            config=_config_snapshot(config),
        )

    # TI width approximation per response, fitted on a CCD over the
    # optimization dimensions (categoricals already relaxed)
    approxes = None
    pass1_mode = "approx"
    if p <= 14:
        ccd = generate_ccd(p)
        approxes = []
        for resp in nprob.responses:
            til, tiu, y, _ = resp.exact_bounds(ccd.points)
            approxes.append(build_ti_approximation(y, (tiu - til) / 2.0))
    else:
        pass1_mode = "exact"  # CCD row count is intractable here

    best: tuple[float, int, np.ndarray] | None = None
    all_passes: list = []
    for k in range(config.n_starts):
        halfwidth = config.initial_box_halfwidth
        if k > 0:
            rng = np.random.default_rng([config.seed, k])
            halfwidth = config.initial_box_halfwidth * float(rng.uniform(0.5, 2.0))
        start = nprob.initial_candidate(halfwidth)

        cand1, trace1, alt1 = run_pass(
            nprob, start, method="cobyla", rho_start=config.rho_start_pass1,
            max_iters=config.max_iters_pass1, ti_mode=pass1_mode,
            approxes=approxes, config=config, inner=inner)
        trace1["pass"] = 1
        trace1["start_index"] = k
        if cand1 is None:
            # the approximated TI may reject a feasible region the exact TI
            # accepts; fall back to the start box and let repair/pass 2 act
            alt1 = [start]
            trace1["fallback_to_start"] = True

        cand1r, vol1, scale = _best_repaired(nprob, alt1, config, inner)
        trace1["repair_scale"] = scale
        trace1["repaired"] = scale < 1.0
        if cand1r is None:
            trace1["repair_failed"] = True
            all_passes.append(trace1)
            continue
        trace1["volume_weighted_repaired"] = vol1
        all_passes.append(trace1)

        cand_k, vol_k = cand1r, vol1
        if config.pass2_method != "none":
            # lazy-constraint rounds: when the polished repair reveals a
            # nested extreme the screening lattice missed, inject that point
            # as a cut and rerun the refinement from the repaired box
            extra_fracs: list = []
            start2 = cand1r
            for round_idx in range(3):
                ev2 = BoxEvaluator(nprob, "exact", approxes, config, inner,
                                   extra_fracs=extra_fracs or None)
                cand2, trace2, alt2 = run_pass(
                    nprob, start2, method=config.pass2_method,
                    rho_start=config.rho_start_pass2,
                    max_iters=config.max_iters_pass2, ti_mode="exact",
                    approxes=approxes, config=config, inner=inner,
                    evaluator=ev2)
                trace2["pass"] = 2
                trace2["round"] = round_idx
                trace2["n_cut_points"] = len(extra_fracs)
                trace2["start_index"] = k
                if cand2 is None:
                    all_passes.append(trace2)
                    break
                cand2r, vol2, scale2 = _best_repaired(nprob, alt2, config, inner)
                trace2["repair_scale"] = scale2
                trace2["repaired"] = scale2 < 1.0
                improved = cand2r is not None and vol2 > vol_k
                if cand2r is not None:
                    trace2["volume_weighted_repaired"] = vol2
                    # refinement never regresses: keep the incumbent unless
                    # pass 2 strictly improves it
                    if improved:
                        cand_k, vol_k = cand2r, vol2
                all_passes.append(trace2)
                if cand2r is not None and scale2 >= 1.0:
                    break  # screening was already faithful: converged clean
                cuts = _violation_fracs(nprob, cand2, config, inner)
                if not cuts:
                    break
                extra_fracs.extend(cuts)
                start2 = cand2r if cand2r is not None else cand1r

        if best is None or vol_k > best[0]:
            best = (vol_k, k, cand_k)

    if best is None:
        return DsResult(
            feasible=False,
            parameters=None,
            volume_weighted=None,
            volume_unweighted=None,
            dim_names=[d.name for d in nprob.dims],
            normalized_lower=None,
            normalized_upper=None,
            certificate=None,
            passes=all_passes,
            failure={"stage": "optimization",
                     "message": "no feasible candidate found in any start"},
            seed=config.seed,
            config=_config_snapshot(config),
        )

    _, _, cand = best
    # snap solver-tolerance drift: box inside [-1,1], setpoint contained
    p_arr = nprob.setpoints
    cand = np.concatenate([
        np.minimum(np.clip(cand[:p], -1.0, 1.0), p_arr),
        np.maximum(np.clip(cand[p:], -1.0, 1.0), p_arr),
    ])
    ranges, admit_failures = nprob.denormalize_ranges(cand)
    certificate = verify_candidate(nprob, cand, config, inner)
    failure = None
    feasible = certificate["feasible"] and not admit_failures
    if admit_failures:
        failure = {
            "stage": "level_mapping",
            "message": "setpoint level not admitted for: " + ", ".join(admit_failures),
        }
    elif not certificate["feasible"]:
        failure = {
            "stage": "verification",
            "message": "exact-TI verification found margins below tolerance "
                       "(infeasible at tolerance)",
        }
    return DsResult(
        feasible=feasible,
        parameters=ranges,
        volume_weighted=objective(cand, nprob.weights),
        volume_unweighted=objective(cand, np.ones(p)),
        dim_names=[d.name for d in nprob.dims],
        normalized_lower=[float(v) for v in cand[:p]],
        normalized_upper=[float(v) for v in cand[p:]],
        certificate=certificate,
        passes=all_passes,
        failure=failure,
        seed=config.seed,
        config=_config_snapshot(config),
    )
