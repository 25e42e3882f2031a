"""Command-line interface: run experiments, inspect spectra, export bases."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .errors import ReductionError
from .experiments import ExperimentConfig, load_model_json, run_experiment
from .information import mi_relative_error, signal_eigenpairs
from .reducers import ReductionMethod, compute_reduction
from .sampling import sample_gaussian


@click.group()
def main():
    """Optimal low-dimensional projections of observations for Bayesian inference."""


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="CSV destination; defaults to the config's output field or stdout.")
@click.option("--seed", type=int, default=None, help="Override the data seed.")
@click.option("--plot/--no-plot", default=True,
              help="Render convergence figures next to the CSV.")
@click.option("--timing/--no-timing", default=False,
              help="Fill the wall_ms column (breaks byte reproducibility).")
def run(config_path, out_path, seed, plot, timing):
    """Run the experiment described by a JSON configuration."""
    try:
        cfg = ExperimentConfig.from_json(Path(config_path).read_text(encoding="utf-8"))
        if seed is not None:
            cfg = cfg.with_data_seed(seed)
        if timing:
            from dataclasses import replace

            cfg = replace(cfg, timing=True)
        destination = out_path or cfg.output
        rows = run_experiment(cfg, destination)
    except ReductionError as exc:
        _fail(exc)
    if destination is None:
        from .experiments import rows_to_csv

        click.echo(rows_to_csv(rows), nl=False)
    else:
        click.echo(f"wrote {len(rows)} rows to {destination}")
        if plot:
            from .plots import render_result_figures

            for path in render_result_figures(rows, Path(destination).with_suffix("")):
                click.echo(f"wrote {path}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--top", required=True, type=int, help="Number of eigenvalues to print.")
def eig(model_path, top):
    """Print the signal-to-noise spectrum and the a priori error curve."""
    try:
        model = load_model_json(Path(model_path).read_text(encoding="utf-8"))
        problem = model.problem()
        nu = signal_eigenpairs(problem).values
        top = max(1, min(top, nu.size))
        click.echo("r,nu,mi_rel_err")
        for r in range(1, top + 1):
            err = mi_relative_error(nu, r)
            click.echo(f"{r},{float(nu[r - 1])!r},{float(err)!r}")
    except ReductionError as exc:
        _fail(exc)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", required=True,
              type=click.Choice([m.value for m in ReductionMethod]))
@click.option("--r", "rank", required=True, type=int)
@click.option("--out-basis", "basis_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0,
              help="Seed for clustering and for sampling the measurement the kld method needs.")
def reduce(model_path, method, rank, basis_path, seed):
    """Compute a reduction basis and write it as CSV, one column per vector."""
    try:
        model = load_model_json(Path(model_path).read_text(encoding="utf-8"))
        problem = model.problem()
        y = None
        if method == "kld":
            # A posteriori method: synthesize a measurement from the model.
            y = sample_gaussian(problem.observation(), 1, seed)[0]
        locations = np.arange(model.n, dtype=float)
        report = compute_reduction(
            problem, method, rank, y=y, locations=locations, seed=seed
        )
        matrix = report.basis.matrix
        with open(basis_path, "w", encoding="utf-8", newline="\n") as handle:
            for i in range(matrix.shape[0]):
                handle.write(",".join(repr(float(v)) for v in matrix[i]) + "\n")
    except ReductionError as exc:
        _fail(exc)
    click.echo(f"wrote a {matrix.shape[0]}x{matrix.shape[1]} basis to {basis_path}")


if __name__ == "__main__":
    main()
