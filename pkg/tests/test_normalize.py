"""Normalization, model re-expression, categorical relaxation."""

import numpy as np
import pytest

from dspace.model import (
    CategoricalCoding,
    Factor,
    RegressionModel,
    canonicalize_terms,
    categorical_level,
    expand_continuous,
    fit_from_table,
    intercept,
    interaction,
    linear,
    quadratic,
)
from dspace.normalize import (
    map_levels,
    normalize_problem,
    reexpress_model,
    relax_categorical,
)
from dspace.problem import DsProblem, ParameterDef, ResponseSpec
from dspace.tolerance import TiSpec


def _simple_model(beta, terms, factors, n=20):
    p = len(terms)
    return RegressionModel(
        factors=factors, terms=terms, beta_hat=np.asarray(beta, dtype=float),
        sigma2_hat=0.01, n=n, xtx_inverse=np.eye(p) * 0.05)


def test_setpoint_maps_to_midpoint():
    model = _simple_model([2.0, 3.0], canonicalize_terms([intercept(), linear(0)]),
                          (Factor("x"),))
    problem = DsProblem(
        parameters=(ParameterDef("x", bounds=(0.0, 10.0), setpoint=5.0),),
        responses=(ResponseSpec("y", model, TiSpec(), lower=-100, upper=100),),
    )
    nprob = normalize_problem(problem)
    assert nprob.setpoints[0] == pytest.approx(0.0)


def test_linear_reexpression_example():
    # y = 2 + 3x on x in [0, 10] becomes y = 17 + 15 x_norm
    terms = canonicalize_terms([intercept(), linear(0)])
    model = _simple_model([2.0, 3.0], terms, (Factor("x"),))
    norm = reexpress_model(model, {0: 5.0}, {0: 5.0})
    by_kind = dict(zip((t.kind for t in norm.terms), norm.beta_hat))
    assert by_kind["intercept"] == pytest.approx(17.0)
    assert by_kind["linear"] == pytest.approx(15.0)


def test_reexpression_prediction_equivalence():
    # predictions at mapped points agree with raw predictions, incl. se
    rng = np.random.default_rng(10)
    factors = (Factor("a"), Factor("b"), Factor("c"))
    terms = canonicalize_terms([
        intercept(), linear(0), linear(1), linear(2),
        interaction(0, 1), interaction(1, 2), quadratic(2),
    ])
    raw = rng.uniform(-3, 7, size=(60, 3)).astype(object)
    y = rng.normal(size=60)
    model = fit_from_table(raw, factors, terms, y)
    centers = {0: 2.0, 1: -1.0, 2: 3.0}
    halves = {0: 5.0, 1: 2.0, 2: 4.0}
    norm = reexpress_model(model, centers, halves)

    pts_norm = rng.uniform(-1, 1, size=(100, 3))
    pts_raw = np.column_stack([
        centers[i] + halves[i] * pts_norm[:, i] for i in range(3)])
    X_raw = expand_continuous(pts_raw, model.terms)
    X_norm = expand_continuous(pts_norm, norm.terms)
    y_raw = X_raw @ model.beta_hat
    y_norm = X_norm @ norm.beta_hat
    np.testing.assert_allclose(y_norm, y_raw, atol=1e-10)
    se_raw = np.einsum("ij,jk,ik->i", X_raw, model.xtx_inverse, X_raw)
    se_norm = np.einsum("ij,jk,ik->i", X_norm, norm.xtx_inverse, X_norm)
    np.testing.assert_allclose(se_norm, se_raw, rtol=1e-9)
    assert norm.df_resid == model.df_resid


def test_candidate_round_trip_identity():
    model = _simple_model([1.0, 1.0], canonicalize_terms([intercept(), linear(0)]),
                          (Factor("x"),))
    problem = DsProblem(
        parameters=(ParameterDef("x", bounds=(-3.0, 17.0), setpoint=2.0),),
        responses=(ResponseSpec("y", model, TiSpec(), lower=-100, upper=100),),
    )
    nprob = normalize_problem(problem)
    d = nprob.dims[0]
    for raw in (-3.0, 0.0, 2.0, 16.5):
        z = (raw - d.center) / d.half
        assert d.center + d.half * z == pytest.approx(raw, abs=1e-12)


def test_relax_categorical_example():
    coding = CategoricalCoding("cat", ("a", "b", "c"), (-0.4, 0.1, 0.3))
    relax = relax_categorical(coding)
    assert relax.range == pytest.approx(0.7)
    assert relax.midpoint == pytest.approx(-0.05)
    # x_c = 1 reproduces the +0.3 level effect
    assert relax.midpoint + relax.range / 2 * 1.0 == pytest.approx(0.3)
    assert not relax.dropped


def test_relax_two_level_symmetric():
    coding = CategoricalCoding("cat", ("lo", "hi"), (-0.6, 0.6))
    relax = relax_categorical(coding)
    for x_c, expected in ((-1.0, -0.6), (1.0, 0.6)):
        assert relax.midpoint + relax.range / 2 * x_c == pytest.approx(expected)


def test_relax_degenerate_dropped():
    coding = CategoricalCoding("cat", ("a", "b"), (0.0, 0.0))
    assert relax_categorical(coding).dropped


def test_map_levels_examples():
    coding = CategoricalCoding("cat", ("a", "b", "c"), (-0.4, 0.1, 0.3))
    assert map_levels((-0.05, 0.35), coding) == ("b", "c")
    assert map_levels((-0.4, 0.3), coding) == ("a", "b", "c")
    assert map_levels((0.1, 0.1), coding) == ("b",)


def _categorical_problem():
    rng = np.random.default_rng(3)
    factors = (Factor("x"), Factor("cat", "categorical", ("a", "b", "c")))
    terms = canonicalize_terms([
        intercept(), linear(0), categorical_level(1, 0), categorical_level(1, 1)])
    data = np.empty((60, 2), dtype=object)
    data[:, 0] = rng.uniform(-1, 1, size=60)
    data[:, 1] = rng.choice(["a", "b", "c"], size=60)
    effects = {"a": -1.0, "b": 0.0, "c": 1.0}
    y = (2.0 * data[:, 0].astype(float)
         + np.array([effects[l] for l in data[:, 1]])
         + rng.normal(0, 0.1, size=60))
    model = fit_from_table(data, factors, terms, y)
    problem = DsProblem(
        parameters=(
            ParameterDef("x", bounds=(-1.0, 1.0), setpoint=0.0),
            ParameterDef("cat", kind="categorical", levels=("a", "b", "c"),
                         setpoint="b"),
        ),
        responses=(ResponseSpec("y", model, TiSpec(), lower=-50.0, upper=50.0),),
    )
    return problem, model


def test_relaxed_dimension_reproduces_levels():
    # predicted lines per level are vertical shifts by coefficient deltas,
    # and the relaxed coordinate reproduces each level exactly
    problem, model = _categorical_problem()
    nprob = normalize_problem(problem)
    assert nprob.p == 2
    resp = nprob.responses[0]
    coding = model.codings[0]
    cat_dim = nprob.dims[nprob.dim_index["cat"]]
    xs = np.linspace(-1, 1, 7)
    base = None
    for lvl, coeff in zip(coding.levels, coding.level_coefficients):
        z_c = (coeff - cat_dim.center) / cat_dim.half
        pts = np.column_stack([xs, np.full_like(xs, z_c)])
        y = resp.mean(pts)
        if base is None:
            base = (y, coeff)
        else:
            np.testing.assert_allclose(y - base[0], coeff - base[1], atol=1e-9)


def test_relaxed_se_matches_exact_levels():
    # at the exact level coordinates the interpolated code rows equal the
    # true sum-code rows, so the se matches a direct model prediction
    problem, model = _categorical_problem()
    nprob = normalize_problem(problem)
    resp = nprob.responses[0]
    coding = model.codings[0]
    cat_dim = nprob.dims[nprob.dim_index["cat"]]
    from dspace.model import build_design_matrix, predict_batch

    for lvl_idx, (lvl, coeff) in enumerate(
            zip(coding.levels, coding.level_coefficients)):
        z_c = (coeff - cat_dim.center) / cat_dim.half
        pts = np.array([[0.3, z_c]])
        _, se2_norm = resp.mean_and_se2(pts)
        raw = np.array([[0.3, lvl]], dtype=object)
        rows = build_design_matrix(raw, model.factors, model.terms,
                                   model.codings)
        _, se2_raw = predict_batch(model, rows)
        assert se2_norm[0] == pytest.approx(se2_raw[0], rel=1e-9)


def test_multi_response_shared_categorical_consistent_mixture():
    # two responses share the categorical factor but fit different level
    # coefficients; along the relaxed dimension both must apply the same
    # level mixture, so at every anchor-level coordinate each response
    # reproduces its own exact level prediction
    rng = np.random.default_rng(9)
    factors = (Factor("x"), Factor("cat", "categorical", ("a", "b", "c")))
    terms = canonicalize_terms([
        intercept(), linear(0), categorical_level(1, 0), categorical_level(1, 1)])
    data = np.empty((90, 2), dtype=object)
    data[:, 0] = rng.uniform(-1, 1, size=90)
    data[:, 1] = rng.choice(["a", "b", "c"], size=90)
    eff1 = {"a": -1.0, "b": 0.0, "c": 1.0}
    eff2 = {"a": 0.5, "b": -0.8, "c": 0.3}  # different ordering on purpose
    x = data[:, 0].astype(float)
    labels = data[:, 1]
    y1 = 2.0 * x + np.array([eff1[l] for l in labels]) + rng.normal(0, 0.1, 90)
    y2 = -1.0 * x + np.array([eff2[l] for l in labels]) + rng.normal(0, 0.1, 90)
    m1 = fit_from_table(data, factors, terms, y1)
    m2 = fit_from_table(data, factors, terms, y2)
    problem = DsProblem(
        parameters=(
            ParameterDef("x", bounds=(-1.0, 1.0), setpoint=0.0),
            ParameterDef("cat", kind="categorical", levels=("a", "b", "c"),
                         setpoint="b"),
        ),
        responses=(
            ResponseSpec("y1", m1, TiSpec(), lower=-50.0, upper=50.0),
            ResponseSpec("y2", m2, TiSpec(), lower=-50.0, upper=50.0),
        ),
    )
    nprob = normalize_problem(problem)
    cat_dim = nprob.dims[nprob.dim_index["cat"]]
    anchor = nprob._relaxations["cat"].coding
    from dspace.model import build_design_matrix, predict_batch

    for resp, model in ((nprob.responses[0], m1), (nprob.responses[1], m2)):
        for lvl, anchor_coeff in zip(anchor.levels, anchor.level_coefficients):
            z_c = (anchor_coeff - cat_dim.center) / cat_dim.half
            got = resp.mean(np.array([[0.4, z_c]]))[0]
            rows = build_design_matrix(np.array([[0.4, lvl]], dtype=object),
                                       model.factors, model.terms, model.codings)
            want, _ = predict_batch(model, rows)
            assert got == pytest.approx(want[0], abs=1e-9)


def test_unused_categorical_admits_all_levels():
    # a categorical parameter no model uses is dropped from optimization
    # and every level stays admitted
    rng = np.random.default_rng(5)
    factors = (Factor("x"),)
    terms = canonicalize_terms([intercept(), linear(0)])
    data = rng.uniform(-1, 1, size=(30, 1)).astype(object)
    model = fit_from_table(data, factors, terms,
                           rng.normal(size=30) + 2 * data[:, 0].astype(float))
    problem = DsProblem(
        parameters=(
            ParameterDef("x", bounds=(-1.0, 1.0), setpoint=0.0),
            ParameterDef("mode", kind="categorical", levels=("m1", "m2"),
                         setpoint="m1"),
        ),
        responses=(ResponseSpec("y", model, TiSpec(), lower=-50.0, upper=50.0),),
    )
    nprob = normalize_problem(problem)
    assert nprob.p == 1
    assert nprob.dropped == [("mode", ("m1", "m2"))]
    ranges, failures = nprob.denormalize_ranges(np.array([-0.5, 0.5]))
    assert not failures
    cat_entry = next(r for r in ranges if r["name"] == "mode")
    assert cat_entry["levels"] == ["m1", "m2"]
