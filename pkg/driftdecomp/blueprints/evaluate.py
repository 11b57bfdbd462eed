import json
import os

import click
from flask import Blueprint, current_app, render_template

from ..errors import ConfigError
from ..models import Command, RunConfig
from ..services.metrics import evaluate_model
from ..services.storage import (read_matrix_csv, read_model, read_tensor, read_truth,
                                to_builtin, write_json)
from .common import handles_errors, prepare

evaluate_bp = Blueprint('evaluate', __name__, cli_group=None)

EVALUATION_FILE = 'evaluation.json'


@evaluate_bp.cli.command('evaluate')
@click.option('--model', 'model_path', required=True, help='Model bundle directory.')
@click.option('--truth', 'truth_path', help='Ground-truth sidecar (truth.json).')
@click.option('--input', '-i', 'input_path', help='DTF tensor (default: the one named by the truth).')
@click.option('--amounts', 'amounts_path', help='CSV of known amounts, samples x components.')
@click.option('--spectra', 'spectra_path', help='CSV of reference spectra, channels x components.')
@click.option('--output', '-o', help='Directory for evaluation.json.')
@click.option('--summary', is_flag=True, help='Print a text summary instead of JSON.')
@click.option('--verbose', '-v', is_flag=True)
@handles_errors
def evaluate(model_path, truth_path, input_path, amounts_path, spectra_path, output, summary,
             verbose):
    """Compare a fitted model with ground truth, reference spectra and/or known amounts."""
    run = RunConfig(command=Command.EVALUATE, output_path=output, model_path=model_path,
                    truth_path=truth_path, input_path=input_path, amounts_path=amounts_path,
                    spectra_path=spectra_path, verbose=verbose)
    prepare(run)
    if truth_path is None and amounts_path is None and spectra_path is None:
        raise ConfigError('evaluate needs --truth, --spectra or --amounts')
    if truth_path and spectra_path:
        raise ConfigError('--truth already carries reference spectra; drop --spectra')

    model = read_model(model_path)
    truth, tensor_path = read_truth(truth_path) if truth_path else (None, None)
    tensor_path = input_path or tensor_path
    X = read_tensor(tensor_path) if tensor_path else None
    amounts = read_matrix_csv(amounts_path)[1] if amounts_path else None
    spectra = read_matrix_csv(spectra_path)[1] if spectra_path else None

    result = evaluate_model(model, truth=truth, X=X, amounts=amounts, spectra=spectra)
    if output:
        os.makedirs(output, exist_ok=True)
        write_json(os.path.join(output, EVALUATION_FILE), result)
        current_app.logger.info(f'Wrote {os.path.join(output, EVALUATION_FILE)}')
    if summary:
        click.echo(render_template('report/evaluate.txt', model_path=model_path, result=result))
    else:
        click.echo(json.dumps(result, indent=2, sort_keys=True, default=to_builtin))
