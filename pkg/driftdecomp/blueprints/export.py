import click
from flask import Blueprint, current_app

from ..models import Command, RunConfig
from ..services.export import export_plots
from ..services.storage import read_model
from .common import handles_errors, prepare

export_bp = Blueprint('export', __name__, cli_group=None)


@export_bp.cli.command('export-plots')
@click.option('--model', 'model_path', required=True, help='Model bundle directory.')
@click.option('--output', '-o', required=True, help='Directory for CSV and SVG files.')
@click.option('--verbose', '-v', is_flag=True)
@handles_errors
def export_plots_command(model_path, output, verbose):
    """Write elution surfaces, spectra and abundances as CSV and SVG."""
    run = RunConfig(command=Command.EXPORT_PLOTS, output_path=output, model_path=model_path,
                    verbose=verbose)
    prepare(run)
    model = read_model(model_path)
    written = export_plots(model, output)
    current_app.logger.info(f'Wrote {len(written)} files')
    click.echo(f'Wrote {len(written)} files to {output}')
