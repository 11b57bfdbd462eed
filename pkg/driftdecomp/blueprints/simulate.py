import os

import click
from flask import Blueprint, current_app, render_template

from ..models import Command, RunConfig
from ..services.storage import TENSOR_FILE, write_tensor, write_truth
from ..services.synth import generate
from .common import apply_overrides, handles_errors, prepare, synth_config

simulate_bp = Blueprint('simulate', __name__, cli_group=None)


@simulate_bp.cli.command('simulate')
@click.option('--output', '-o', required=True, help='Directory for the tensor and ground truth.')
@click.option('--config', 'config_path', help='JSON settings file.')
@click.option('--rank', type=int, help='Number of components.')
@click.option('--seed', type=int, help='Random seed.')
@click.option('--verbose', '-v', is_flag=True)
@handles_errors
def simulate(output, config_path, rank, seed, verbose):
    """Generate a synthetic drifting multi-sample tensor with ground truth."""
    run = RunConfig(command=Command.SIMULATE, output_path=output, config_path=config_path,
                    R=rank, verbose=verbose)
    prepare(run)
    apply_overrides({'SYNTH_R': rank, 'SYNTH_SEED': seed})
    cfg = synth_config(current_app.config)
    warnings = cfg.validate()

    X, truth = generate(cfg)
    os.makedirs(output, exist_ok=True)
    tensor_path = os.path.join(output, TENSOR_FILE)
    write_tensor(X, tensor_path)
    truth_path = write_truth(truth, output, tensor_file=TENSOR_FILE)
    current_app.logger.info(f'Wrote {tensor_path} and {truth_path}')

    click.echo(render_template('report/simulate.txt', cfg=cfg, tensor_path=tensor_path,
                               truth_path=truth_path, warnings=warnings))
