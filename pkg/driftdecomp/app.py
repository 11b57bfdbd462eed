#!/usr/bin/env python3
"""
driftdecomp - PARAFAC2x2 decomposition of drifting GC x GC-TOFMS regions
Run with: python -m driftdecomp.app --help
"""

import sys

import click
from flask.cli import FlaskGroup

from . import create_app
from .errors import ExitCode


class DriftDecompGroup(FlaskGroup):
    """Flask CLI group whose usage errors exit with the configuration code."""

    def main(self, *args, **kwargs):
        kwargs.pop('standalone_mode', None)
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.UsageError as e:
            e.show()
            sys.exit(int(ExitCode.CONFIG))
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo('Aborted!', err=True)
            sys.exit(1)


cli = DriftDecompGroup(create_app=create_app, add_default_commands=False, load_dotenv=False,
                       help='Simulate, fit, evaluate and plot PARAFAC2x2 models.')

if __name__ == '__main__':
    cli()
