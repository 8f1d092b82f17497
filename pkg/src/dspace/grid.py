"""Grid-discretization baseline for design-space search.

Discretizes the normalized cube into equidistant points, marks each grid
point feasible iff the exact TI boundaries of every response stay within
acceptance limits, then exhaustively finds the largest axis-aligned grid box
(containing the setpoint cell) whose enclosed grid points are all feasible.
This is the reference method the optimizer is compared against: restricted
to grid points, exact but exponential in the dimension count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import InnerOptimizer, _config_snapshot, objective, verify_candidate
from .errors import CapacityError, InfeasibleError, SpecificationError
from .normalize import NormalizedProblem, normalize_problem
from .problem import DsProblem

_GRID_P_GUARD = 6


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 9  # points per dimension, endpoints inclusive

    def __post_init__(self):
        if self.resolution < 2:
            raise SpecificationError("grid resolution must be >= 2")


def grid_coords(resolution: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, resolution)


def setpoint_indices(nprob: NormalizedProblem, spec: GridSpec) -> list[int]:
    """Nearest grid index per dimension (ties toward the lower index)."""
    res = spec.resolution
    out = []
    for s in nprob.setpoints:
        v = (s + 1.0) / 2.0 * (res - 1)
        out.append(int(min(max(math.ceil(v - 0.5), 0), res - 1)))
    return out


def evaluate_grid(nprob: NormalizedProblem, spec: GridSpec,
                  override: bool = False, chunk: int = 65536) -> np.ndarray:
    """Boolean feasibility tensor of shape (resolution,) * p.

    Guarded at p <= 6: the point count grows as resolution^p and a
    ten-dimensional grid at resolution 8 already means ~1.07e9 evaluations;
    pass override=True to force larger evaluations anyway.
    """
    p = nprob.p
    if p > _GRID_P_GUARD and not override:
        raise CapacityError(
            f"grid evaluation for p={p} needs {spec.resolution}**{p} = "
            f"{spec.resolution ** p} points; pass override=True to force"
        )
    coords = grid_coords(spec.resolution)
    mesh = np.stack(
        np.meshgrid(*([coords] * p), indexing="ij"), axis=-1
    ).reshape(-1, p)
    feasible = np.ones(mesh.shape[0], dtype=bool)
    for start in range(0, mesh.shape[0], chunk):
        pts = mesh[start:start + chunk]
        ok = np.ones(pts.shape[0], dtype=bool)
        for resp in nprob.responses:
            til, tiu, _, _ = resp.exact_bounds(pts)
            if math.isfinite(resp.lower):
                ok &= til >= resp.lower
            if math.isfinite(resp.upper):
                ok &= tiu <= resp.upper
        feasible[start:start + chunk] = ok
    return feasible.reshape((spec.resolution,) * p)


def _max_run(vec: np.ndarray, s: int) -> tuple[int, int]:
    """Maximal contiguous True run of a 1-D mask containing index s."""
    lo = s
    while lo > 0 and vec[lo - 1]:
        lo -= 1
    hi = s
    n = vec.shape[0]
    while hi < n - 1 and vec[hi + 1]:
        hi += 1
    return lo, hi


def largest_feasible_box(tensor, setpoint_idx):
    """Largest axis-aligned all-feasible grid box containing the setpoint.

    Exhaustive and exact: every axis-aligned index range combination is
    covered via AND-reductions outward from the setpoint with branch-and-
    bound pruning (per-dimension feasible-run bounds), never approximated.
    Ties are broken by the lexicographically smallest lower-index vector
    (then the smallest upper-index vector, for a total order).
    Returns (lower indices, upper indices, enclosed cell volume).
    """
    tensor = np.asarray(tensor, dtype=bool)
    p = tensor.ndim
    sp = [int(i) for i in setpoint_idx]
    if len(sp) != p:
        raise SpecificationError(f"{len(sp)} setpoint indices for {p} dims")
    if not tensor[tuple(sp)]:
        raise InfeasibleError("setpoint grid cell is infeasible")

    best = {"vol": -1, "lo": None, "hi": None}

    def fiber_bound(sub: np.ndarray, offset: int) -> int:
        bound = 1
        for ax in range(sub.ndim):
            idx = tuple(
                slice(None) if a == ax else sp[offset + a] for a in range(sub.ndim)
            )
            lo, hi = _max_run(sub[idx], sp[offset + ax])
            bound *= hi - lo
            if bound == 0:
                # a pinched dimension caps every wider choice at volume 0
                break
        return bound

    def consider(vol: int, lo_vec: list[int], hi_vec: list[int]):
        if vol > best["vol"] or (
            vol == best["vol"]
            and (lo_vec, hi_vec) < (best["lo"], best["hi"])
        ):
            best["vol"] = vol
            best["lo"] = list(lo_vec)
            best["hi"] = list(hi_vec)

    def rec(sub: np.ndarray, d: int, lo_acc: list, hi_acc: list, prod: int):
        s = sp[d]
        if sub.ndim == 1:
            lo, hi = _max_run(sub, s)
            if prod == 0 or hi == lo:
                # volume is zero whatever this dimension does; the lex
                # tie-break then wants the smallest upper index, i.e. s
                consider(0, lo_acc + [lo], hi_acc + [s])
            else:
                consider(prod * (hi - lo), lo_acc + [lo], hi_acc + [hi])
            return
        n0 = sub.shape[0]
        down: list = [None] * (s + 1)
        cur = sub[s]
        down[s] = cur
        for i in range(s - 1, -1, -1):
            cur = cur & sub[i]
            down[i] = cur
        up: list = [None] * (n0 - s)
        cur = sub[s]
        up[0] = cur
        for j in range(s + 1, n0):
            cur = cur & sub[j]
            up[j - s] = cur
        pairs = sorted(
            ((lo, hi) for lo in range(s + 1) for hi in range(s, n0)),
            key=lambda t: (-(t[1] - t[0]), t[0]),
        )
        rest_sp = tuple(sp[d + 1:])
        for lo, hi in pairs:
            reduced = down[lo] & up[hi - s]
            if not reduced[rest_sp]:
                continue
            ub = prod * (hi - lo) * fiber_bound(reduced, d + 1)
            if ub < best["vol"]:
                continue
            if (ub == best["vol"] and best["lo"] is not None
                    and lo_acc + [lo] > best["lo"][: d + 1]):
                continue  # can only tie, and the tie is already lex-worse
            rec(reduced, d + 1, lo_acc + [lo], hi_acc + [hi], prod * (hi - lo))

    rec(tensor, 0, [], [], 1)
    return best["lo"], best["hi"], best["vol"]


def grid_design_space(problem: DsProblem, spec: GridSpec = GridSpec(),
                      override: bool = False, certificate: bool = True) -> dict:
    """End-to-end grid baseline; result document mirrors the optimizer's.

    The certificate is informative: grid feasibility is only guaranteed at
    the grid points themselves, so exact-TI checks between them may come out
    negative (that is the known accuracy limitation of the approach). Pass
    certificate=False to time the bare baseline (discretize + box search)
    without the diagnostic verification pass, which is not part of the
    method being benchmarked.
    """
    nprob = normalize_problem(problem)
    p = nprob.p
    res = spec.resolution
    step = 2.0 / (res - 1)
    tensor = evaluate_grid(nprob, spec, override=override)
    sp_idx = setpoint_indices(nprob, spec)
    try:
        lo_idx, hi_idx, cells = largest_feasible_box(tensor, sp_idx)
    except InfeasibleError as exc:
        return {
            "schema_version": 1,
            "feasible": False,
            "method": "grid",
            "grid": {"resolution": res, "setpoint_indices": sp_idx},
            "failure": {"stage": "grid_setpoint", "message": str(exc)},
            "parameters": None,
            "volume": {"weighted": None, "unweighted": None},
        }
    cand = np.concatenate([
        -1.0 + step * np.asarray(lo_idx, dtype=float),
        -1.0 + step * np.asarray(hi_idx, dtype=float),
    ])
    ranges, _ = nprob.denormalize_ranges(cand)
    cert_doc = None
    if certificate:
        inner = InnerOptimizer(p, problem.config)
        cert_doc = verify_candidate(nprob, cand, problem.config, inner)
    return {
        "schema_version": 1,
        "feasible": True,
        "method": "grid",
        "grid": {
            "resolution": res,
            "setpoint_indices": sp_idx,
            "lower_indices": lo_idx,
            "upper_indices": hi_idx,
            "feasible_cells": int(np.sum(tensor)),
            "total_cells": int(tensor.size),
        },
        "parameters": ranges,
        "volume": {
            "weighted": objective(cand, nprob.weights),
            "unweighted": objective(cand, np.ones(p)),
        },
        "normalized": {
            "dims": [d.name for d in nprob.dims],
            "lower": [float(v) for v in cand[:p]],
            "upper": [float(v) for v in cand[p:]],
        },
        "certificate": cert_doc,
        "config": _config_snapshot(problem.config),
    }
