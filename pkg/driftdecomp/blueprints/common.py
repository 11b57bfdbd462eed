"""Shared pieces of the CLI commands: error handling, config files and config assembly."""

import json
import logging
import os
import sys
from functools import wraps

import click
from flask import current_app

from ..errors import ConfigError, DriftDecompError, ExitCode
from ..models import NONNEG_FLAGS, CoupledConfig, FitMethod, FlexConfig
from ..services.storage import synth_config_from_dict

FILE_KEY_PREFIXES = ('FIT_', 'SYNTH_')


def handles_errors(f):
    """Decorator mapping driftdecomp errors to log lines and exit codes"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except DriftDecompError as e:
            current_app.logger.error(f'{type(e).__name__}: {e}')
            click.echo(f'Error: {e}', err=True)
            sys.exit(int(e.exit_code))
        except OSError as e:
            current_app.logger.error(f'I/O failure: {e}')
            click.echo(f'Error: {e}', err=True)
            sys.exit(int(ExitCode.IO))
    return decorated_function


def _load_settings(f):
    try:
        payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f'Config file is not valid JSON: {e.msg} (at byte {e.pos})') from e
    if not isinstance(payload, dict):
        raise ConfigError('Config file must hold a JSON object')

    version = payload.pop('CONFIG_SCHEMA_VERSION', None)
    if version != current_app.config['CONFIG_SCHEMA_VERSION']:
        raise ConfigError(f'Unsupported CONFIG_SCHEMA_VERSION: {version!r}')
    unknown = sorted(key for key in payload
                     if not key.startswith(FILE_KEY_PREFIXES) or key not in current_app.config)
    if unknown:
        raise ConfigError(f'Unknown config keys: {", ".join(unknown)}')
    return payload


def prepare(run):
    """Validate paths, apply verbosity and merge the --config file, before any computation."""
    run.validate_paths()
    if run.verbose:
        current_app.logger.setLevel(logging.DEBUG)
    if run.config_path:
        current_app.config.from_file(os.path.abspath(run.config_path), load=_load_settings)
        current_app.logger.info(f'Loaded settings from {run.config_path}')


def apply_overrides(overrides):
    """Command flags win over file values and defaults; None means not given."""
    current_app.config.update({key: value for key, value in overrides.items() if value is not None})


def coupled_config(config):
    nonneg = config['FIT_NONNEG']
    if nonneg not in NONNEG_FLAGS:
        raise ConfigError(f'--nonneg must be one of {", ".join(NONNEG_FLAGS)}, got {nonneg!r}')
    nonneg_B, nonneg_A, nonneg_D = NONNEG_FLAGS[nonneg]
    try:
        flex = FlexConfig(
            R=int(config['FIT_RANK']),
            nonneg_B=nonneg_B,
            nonneg_A=nonneg_A,
            nonneg_D=nonneg_D,
            mu_growth=float(config['FIT_MU_GROWTH']),
            growth_iters=int(config['FIT_GROWTH_ITERS']),
            eps=float(config['FIT_EPS']),
            max_iters=int(config['FIT_MAX_ITERS']),
            seed=int(config['FIT_SEED']),
            mu_floor=float(config['FIT_MU_FLOOR']),
        )
        mu_A = config['FIT_MU_A']
        return CoupledConfig(
            flex=flex,
            omega=float(config['FIT_OMEGA']),
            n_starts=int(config['FIT_N_STARTS']),
            burn_iters=int(config['FIT_BURN_ITERS']),
            seed=int(config['FIT_SEED']),
            mu_A=None if mu_A is None else float(mu_A),
            threads=int(config['THREADS']),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f'Invalid fit setting: {e}') from e


def fit_method(config):
    try:
        return FitMethod(config['FIT_METHOD'])
    except ValueError as e:
        raise ConfigError(f'Unknown fit method {config["FIT_METHOD"]!r}') from e


def synth_config(config):
    settings = {key[len('SYNTH_'):].lower(): value
                for key, value in config.items() if key.startswith('SYNTH_')}
    # Dims keep their single-letter upper-case names
    for name in ('i', 'j', 'k', 'l', 'r'):
        settings[name.upper()] = settings.pop(name)
    try:
        return synth_config_from_dict(settings)
    except (TypeError, ValueError) as e:
        raise ConfigError(f'Invalid synthetic setting: {e}') from e
