"""Command-line interface: model fitting, DS computation, benchmark studies
and the HTTP service.

Exit codes: 0 success, 2 parse/validation errors, 3 rank-deficient fits,
4 infeasible design space (the result JSON is still emitted).
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import bench as bench_mod
from ._kernels import backend_name
from .engine import compute_design_space
from .errors import DspaceError, SingularFitError
from .model import (
    fit_from_table,
    model_spec_from_json,
    model_to_json,
    read_training_csv,
    term_name,
)
from .problem import canonical_json, load_problem

EXIT_PARSE = 2
EXIT_SINGULAR = 3
EXIT_INFEASIBLE = 4


@click.group()
@click.version_option(package_name="dspace")
def main():
    """Maximum-volume design spaces from regression models."""


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@main.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_spec_json", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", "out_model_json", required=True,
              type=click.Path(dir_okay=False), help="Output model JSON path.")
def fit(data_csv, model_spec_json, out_model_json):
    """Fit an OLS model from CSV training data and a model spec."""
    try:
        with open(model_spec_json) as fh:
            spec_doc = json.load(fh)
    except json.JSONDecodeError as exc:
        _fail(EXIT_PARSE, f"{model_spec_json}: invalid JSON ({exc})")
    try:
        factors, terms, response = model_spec_from_json(spec_doc)
        data, y = read_training_csv(data_csv, factors, response)
        model = fit_from_table(data, factors, terms, y)
    except SingularFitError as exc:
        _fail(EXIT_SINGULAR, str(exc))
    except DspaceError as exc:
        _fail(EXIT_PARSE, str(exc))

    with open(out_model_json, "w") as fh:
        json.dump(model_to_json(model), fh, indent=2)
        fh.write("\n")
    names = model.term_names()
    width = max(len(n) for n in names)
    click.echo(f"{'term':<{width}}  coefficient")
    for name, b in zip(names, model.beta_hat):
        click.echo(f"{name:<{width}}  {b: .6g}")
    click.echo(f"sigma2_hat = {model.sigma2_hat:.6g}  (n={model.n}, "
               f"df_resid={model.df_resid})")
    click.echo(f"model written to {out_model_json}")


def _parse_weights(pairs) -> dict[str, float]:
    weights = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"--weights expects name=value, got {pair!r}")
        name, _, value = pair.partition("=")
        try:
            weights[name] = float(value)
        except ValueError:
            raise click.UsageError(f"--weights {pair!r}: not a number") from None
    return weights


@main.command()
@click.argument("problem_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--pass2", type=click.Choice(["cobyla", "slsqp", "none"]),
              default=None, help="Second-pass method override.")
@click.option("--rho1", type=float, default=None,
              help="Initial trust-region lower bound, pass 1.")
@click.option("--rho2", type=float, default=None,
              help="Initial trust-region lower bound, pass 2.")
@click.option("--no-corners", is_flag=True, help="Disable corner TI constraints.")
@click.option("--starts", type=int, default=None, help="Multi-start count.")
@click.option("--seed", type=int, default=None, help="Random seed override.")
@click.option("--weights", multiple=True, metavar="NAME=W",
              help="Per-parameter weight override (repeatable).")
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None,
              help="Write result JSON here instead of stdout.")
def compute(problem_json, pass2, rho1, rho2, no_corners, starts, seed, weights, out):
    """Compute the design space for a problem JSON; result JSON on stdout."""
    try:
        problem = load_problem(problem_json)
    except (json.JSONDecodeError, DspaceError) as exc:
        _fail(EXIT_PARSE, f"{problem_json}: {exc}")
    overrides = {}
    if pass2 is not None:
        overrides["pass2_method"] = pass2
    if rho1 is not None:
        overrides["rho_start_pass1"] = rho1
    if rho2 is not None:
        overrides["rho_start_pass2"] = rho2
    if no_corners:
        overrides["corner_constraints_enabled"] = False
    if starts is not None:
        overrides["n_starts"] = starts
    if seed is not None:
        overrides["seed"] = seed
    try:
        if overrides:
            problem = problem.with_config(**overrides)
        if weights:
            problem = problem.with_weights(_parse_weights(weights))
        result = compute_design_space(problem)
    except DspaceError as exc:
        _fail(EXIT_PARSE, str(exc))

    payload = canonical_json(result.to_json())
    if out:
        with open(out, "w") as fh:
            fh.write(payload)
            fh.write("\n")
    else:
        click.echo(payload)
    if not result.feasible:
        sys.exit(EXIT_INFEASIBLE)


@main.group()
def bench():
    """Benchmark studies (accuracy and timing)."""


def _write_report(report, out_dir: str, stem: str):
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{stem}.json")
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(json_path, "w") as fh:
        fh.write(report.to_canonical())
        fh.write("\n")
    report.write_csv(csv_path)
    click.echo(f"report written to {json_path} and {csv_path}")


@bench.command("ti-accuracy")
@click.option("--iters", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default="bench-out",
              show_default=True)
def bench_ti_accuracy(iters, seed, out_dir):
    """Exact-vs-approximated TI error study."""
    report = bench_mod.ti_accuracy_study(iterations=iters, seed=seed)
    click.echo(f"mean |err| = {report.aggregates['mean_abs_err']:.4%} "
               f"over {report.aggregates['n_errors']} boundary evaluations")
    _write_report(report, out_dir, "ti_accuracy")


@bench.command("accuracy")
@click.option("--problems", "n_problems", type=int, default=20, show_default=True)
@click.option("--resolution", type=int, default=9, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pmin", type=int, default=2, show_default=True)
@click.option("--pmax", type=int, default=5, show_default=True)
@click.option("--skip-sixfactor", is_flag=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default="bench-out",
              show_default=True)
def bench_accuracy(n_problems, resolution, seed, pmin, pmax, skip_sixfactor, out_dir):
    """Grid vs optimizer volume comparison."""
    report = bench_mod.accuracy_study(
        grid_resolution=resolution, seed=seed, n_problems=n_problems,
        p_range=(pmin, pmax), include_sixfactor=not skip_sixfactor)
    agg = report.aggregates
    if agg["dominance_comparisons"]:
        click.echo(f"optimizer >= grid in {agg['dominance_wins']}/"
                   f"{agg['dominance_comparisons']} feasible comparisons")
    _write_report(report, out_dir, "accuracy")


@bench.command("timing")
@click.option("--pmin", type=int, default=2, show_default=True)
@click.option("--pmax", type=int, default=10, show_default=True)
@click.option("--iters", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resolution", type=int, default=8, show_default=True)
@click.option("--grid-pmax", type=int, default=6, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default="bench-out",
              show_default=True)
def bench_timing(pmin, pmax, iters, seed, resolution, grid_pmax, out_dir):
    """Runtime scaling study; grid rows beyond --grid-pmax are projected."""
    report = bench_mod.timing_study(
        p_values=tuple(range(pmin, pmax + 1)), iterations=iters, seed=seed,
        grid_resolution=resolution, grid_max_p=grid_pmax)
    for row in report.aggregates["series"]:
        tag = " (projected)" if row["projected"] else ""
        click.echo(f"p={row['p']:>2} {row['method']:<9} "
                   f"mean {row['mean_time_s']:.3g}s{tag}")
    _write_report(report, out_dir, "timing")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True,
              envvar="DSPACE_HOST")
@click.option("--port", type=int, default=8611, show_default=True,
              envvar="DSPACE_PORT")
@click.option("--storage-dir", type=click.Path(file_okay=False),
              default="dspace-sessions", show_default=True,
              envvar="DSPACE_STORAGE_DIR")
@click.option("--token", default=None, envvar="DSPACE_TOKEN",
              help="Require this bearer token on every request.")
@click.option("--compute-timeout", type=float, default=120.0, show_default=True,
              envvar="DSPACE_COMPUTE_TIMEOUT")
@click.option("--ui-dir", type=click.Path(file_okay=False), default="frontend/dist",
              show_default=True, envvar="DSPACE_UI_DIR",
              help="Static exploration UI to serve at / (skipped if absent).")
def serve(host, port, storage_dir, token, compute_timeout, ui_dir):
    """Run the HTTP service (also serves the exploration UI if built)."""
    import uvicorn

    from .service import create_app

    app = create_app(storage_dir=storage_dir, token=token,
                     compute_timeout=compute_timeout, ui_dir=ui_dir)
    click.echo(f"kernel backend: {backend_name}")
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
