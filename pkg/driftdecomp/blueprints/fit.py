import os
import sys

import click
from flask import Blueprint, current_app, render_template

from ..errors import ExitCode
from ..models import NONNEG_FLAGS, Command, FitMethod, RunConfig
from ..services.coupled import fit, fit_mode_l
from ..services.storage import read_tensor, write_model
from .common import apply_overrides, coupled_config, fit_method, handles_errors, prepare

fit_bp = Blueprint('fit', __name__, cli_group=None)

SUMMARY_FILE = 'summary.txt'


@fit_bp.cli.command('fit')
@click.option('--input', '-i', 'input_path', required=True, help='DTF tensor to decompose.')
@click.option('--output', '-o', required=True, help='Directory for the model bundle.')
@click.option('--config', 'config_path', help='JSON settings file.')
@click.option('--rank', type=int, help='Number of components R.')
@click.option('--method', type=click.Choice([m.value for m in FitMethod]))
@click.option('--seed', type=int, help='Master seed for the random starts.')
@click.option('--starts', type=int, help='Number of random starts.')
@click.option('--burn-iters', type=int, help='Iterations before start selection.')
@click.option('--max-iters', type=int)
@click.option('--eps', type=float, help='Relative convergence tolerance.')
@click.option('--omega', type=float, help='Exponent of the spectral coupling initialization.')
@click.option('--threads', type=int, help='Parallel starts (default: DRIFTDECOMP_THREADS or CPU count).')
@click.option('--nonneg', type=click.Choice(list(NONNEG_FLAGS)), help='Non-negative factors.')
@click.option('--verbose', '-v', is_flag=True)
@handles_errors
def fit_command(input_path, output, config_path, rank, method, seed, starts, burn_iters,
                max_iters, eps, omega, threads, nonneg, verbose):
    """Fit a PARAFAC2x2 model to a 4-way tensor."""
    run = RunConfig(command=Command.FIT, input_path=input_path, output_path=output,
                    config_path=config_path, R=rank, verbose=verbose)
    prepare(run)
    apply_overrides({
        'FIT_RANK': rank, 'FIT_METHOD': method, 'FIT_SEED': seed, 'FIT_N_STARTS': starts,
        'FIT_BURN_ITERS': burn_iters, 'FIT_MAX_ITERS': max_iters, 'FIT_EPS': eps,
        'FIT_OMEGA': omega, 'THREADS': threads, 'FIT_NONNEG': nonneg,
    })
    run.payload = coupled_config(current_app.config)
    run.method = fit_method(current_app.config)
    run.R = run.payload.flex.R

    X = read_tensor(input_path)
    current_app.logger.info(f'Fitting {run.method.value} with R={run.R} to a {X.dims} tensor')
    if run.method is FitMethod.FLEX_L:
        model = fit_mode_l(X, run.R, run.payload)
    else:
        model = fit(X, run.R, run.payload)

    write_model(model, output)
    summary = render_template('report/fit.txt', model=model, report=model.report,
                              output=os.path.abspath(output))
    with open(os.path.join(output, SUMMARY_FILE), 'w') as f:
        f.write(summary + '\n')
    click.echo(summary)
    if not model.report.converged:
        current_app.logger.warning(f'Stopped at max_iters={run.payload.flex.max_iters} '
                                   f'without converging')
        sys.exit(int(ExitCode.MAX_ITERS))
