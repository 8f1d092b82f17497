"""Benchmark lab: problem generation, studies, report serialization."""

import numpy as np
import pytest

from dspace.bench import (
    RandomModelSpec,
    StudyReport,
    accuracy_study,
    generate_random_problem,
    ti_accuracy_study,
    timing_study,
)
from dspace.normalize import normalize_problem
from dspace.problem import canonical_json, problem_to_json


def test_generation_deterministic():
    spec = RandomModelSpec(p=3, seed=12)
    p1 = generate_random_problem(spec)
    p2 = generate_random_problem(spec)
    assert canonical_json(problem_to_json(p1)) == canonical_json(problem_to_json(p2))


def test_zero_densities_pure_linear():
    spec = RandomModelSpec(p=2, interaction_density=0.0, quadratic_density=0.0,
                           seed=1)
    problem = generate_random_problem(spec)
    model = problem.responses[0].model
    assert len(model.terms) == 3  # intercept + two main effects
    assert {t.kind for t in model.terms} == {"intercept", "linear"}


def test_acceptance_band_calibration():
    # Monte-Carlo feasibility oracle: fresh sample, fraction near target
    spec = RandomModelSpec(p=3, seed=5, feasible_target=0.40)
    problem = generate_random_problem(spec)
    nresp = normalize_problem(problem).responses[0]
    rng = np.random.default_rng(999)  # independent of the calibration sample
    pts = rng.uniform(-1, 1, size=(10_000, 3))
    til, tiu, _, _ = nresp.exact_bounds(pts)
    frac = np.mean((til >= problem.responses[0].lower)
                   & (tiu <= problem.responses[0].upper))
    assert abs(frac - 0.40) <= 0.15


def test_setpoint_always_feasible():
    for seed in range(6):
        problem = generate_random_problem(RandomModelSpec(p=2, seed=seed))
        nresp = normalize_problem(problem).responses[0]
        til, tiu, _, _ = nresp.exact_bounds(np.zeros((1, 2)))
        assert til[0] >= problem.responses[0].lower
        assert tiu[0] <= problem.responses[0].upper


@pytest.fixture(scope="module")
def small_study():
    return ti_accuracy_study(iterations=100, seed=3, points_per_iteration=20)


def test_ti_accuracy_study_bookkeeping(small_study):
    agg = small_study.aggregates
    assert sum(agg["histogram"]["counts"]) == agg["n_errors"] == 100 * 20 * 2
    assert len(small_study.records) == 100
    assert agg["mean_abs_err"] < 0.10
    # the aggregate histogram is recomputable from the per-record bins
    summed = np.sum([r["histogram_counts"] for r in small_study.records], axis=0)
    assert list(summed) == agg["histogram"]["counts"]


def test_ti_accuracy_study_iteration_precondition():
    from dspace.errors import SpecificationError

    with pytest.raises(SpecificationError, match=">= 100"):
        ti_accuracy_study(iterations=10)


def test_constant_model_zero_error():
    # a pure-intercept model has a constant width: approximation is exact
    from dspace.model import Factor, fit_from_table, intercept
    from dspace.normalize import normalize_problem as norm
    from dspace.problem import DsProblem, ParameterDef, ResponseSpec
    from dspace.tolerance import TiSpec, build_ti_approximation, generate_ccd

    rng = np.random.default_rng(0)
    data = rng.uniform(-1, 1, size=(20, 1)).astype(object)
    model = fit_from_table(data, (Factor("x"),), [intercept()],
                           rng.normal(size=20))
    problem = DsProblem(
        parameters=(ParameterDef("x", bounds=(-1, 1), setpoint=0.0),),
        responses=(ResponseSpec("y", model, TiSpec(), lower=-99, upper=99),),
    )
    resp = norm(problem).responses[0]
    ccd = generate_ccd(1)
    til, tiu, y, _ = resp.exact_bounds(ccd.points)
    approx = build_ti_approximation(y, (tiu - til) / 2)
    pts = rng.uniform(-1, 1, size=(50, 1))
    til2, tiu2, y2, _ = resp.exact_bounds(pts)
    np.testing.assert_allclose(y2 - approx.half_width(y2), til2, atol=1e-10)


def test_report_round_trip_lossless(small_study):
    s1 = small_study.to_canonical()
    back = StudyReport.from_json(__import__("json").loads(s1))
    assert back.to_canonical() == s1


def test_report_csv(tmp_path, small_study):
    path = tmp_path / "r.csv"
    small_study.write_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 101  # header + 100 records


def test_accuracy_study_small():
    report = accuracy_study(seed=2, n_problems=2, p_range=(2, 2),
                            include_sixfactor=False, grid_resolution=5)
    methods = {r["method"] for r in report.records}
    assert {"grid", "optimizer_pass1", "optimizer_two_pass"} <= methods
    assert report.aggregates["dominance_comparisons"] >= 1


def test_timing_study_projection_flags():
    report = timing_study(p_values=(2, 3), iterations=1, seed=4,
                          grid_resolution=4, grid_max_p=2, grid_iterations=1)
    series = report.aggregates["series"]
    grid_rows = [r for r in series if r["method"] == "grid"]
    assert any(r["projected"] for r in grid_rows)       # p=3 projected
    assert any(not r["projected"] for r in grid_rows)   # p=2 measured
    projected = next(r for r in grid_rows if r["projected"])
    measured = next(r for r in grid_rows if not r["projected"])
    assert projected["mean_time_s"] == pytest.approx(
        measured["mean_time_s"] * 4.0)  # resolution^(delta p)
    assert all("wall_time_s" in r for r in report.records)


def test_study_seed_determinism():
    r1 = ti_accuracy_study(iterations=100, seed=11, points_per_iteration=5)
    r2 = ti_accuracy_study(iterations=100, seed=11, points_per_iteration=5)
    assert r1.to_canonical() == r2.to_canonical()
