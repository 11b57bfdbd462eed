"""File formats: the DTF array codec, model bundles, ground-truth sidecars and CSV matrices.

DTF layout:

    DTF 1\\n
    {"dims": [...], "dtype": "f64", "endian": "little", "layout": "C", "order": "IJKL"}\\n
    <prod(dims) little-endian float64 values, C order over the axes named by "order">
"""

import json
import logging
import os
from dataclasses import asdict, fields

import numpy as np

from ..errors import ConfigError, DimensionError, ModelNotFoundError, ParseError
from ..models import (CoupledModel, DenseTensor4, FitMethod, FitReport, GroundTruth,
                      StartSummary, SynthConfig)

logger = logging.getLogger(__name__)

MAGIC = b'DTF 1\n'
SCHEMA_VERSION = 1
MAX_PAYLOAD_BYTES = 1 << 40
TENSOR_ORDER = 'IJKL'

MODEL_FILE = 'model.json'
REPORT_FILE = 'report.json'
PROFILES_FILE = 'F.dtf'
SPECTRA_FILE = 'A.dtf'
ABUNDANCES_FILE = 'D.dtf'
TENSOR_FILE = 'tensor.dtf'
TRUTH_FILE = 'truth.json'
TRUTH_SCORES_FILE = 'truth_scores.dtf'


def to_builtin(value):
    """json.dump default for numpy values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def write_json(path, payload):
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=to_builtin)
        f.write('\n')


def read_json(path):
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f'{path}: {e.msg}', offset=e.pos) from e


# ============ DTF ============

def encode_array(array, order):
    array = np.asarray(array, dtype=np.float64)
    if len(order) != array.ndim:
        raise DimensionError(f'Axis names {order!r} do not match a {array.ndim}-way array')
    header = {'dims': list(array.shape), 'dtype': 'f64', 'endian': 'little',
              'layout': 'C', 'order': order}
    head = json.dumps(header, sort_keys=True, separators=(', ', ': ')).encode('ascii') + b'\n'
    return MAGIC + head + np.ascontiguousarray(array, dtype='<f8').tobytes(order='C')


def _parse_header(raw):
    if not raw.startswith(MAGIC):
        raise ParseError('Not a DTF file: bad magic', offset=0)
    start = len(MAGIC)
    end = raw.find(b'\n', start)
    if end < 0:
        raise ParseError('Unterminated DTF header', offset=start)
    try:
        header = json.loads(raw[start:end].decode('ascii'))
    except UnicodeDecodeError as e:
        raise ParseError('DTF header is not ASCII', offset=start + e.start) from e
    except json.JSONDecodeError as e:
        raise ParseError(f'Malformed DTF header: {e.msg}', offset=start + e.pos) from e
    if not isinstance(header, dict):
        raise ParseError('DTF header must be an object', offset=start)

    dims = header.get('dims')
    order = header.get('order')
    if not isinstance(dims, list) or not all(isinstance(d, int) and d >= 1 for d in dims):
        raise ParseError(f'DTF dims must be positive integers, got {dims!r}', offset=start)
    if not isinstance(order, str) or len(order) != len(dims):
        raise ParseError(f'DTF order {order!r} does not name {len(dims)} axes', offset=start)
    if header.get('dtype') != 'f64' or header.get('layout') != 'C' \
            or header.get('endian', 'little') != 'little':
        raise ParseError('Only little-endian C-layout f64 payloads are supported', offset=start)
    count = 1
    for d in dims:
        count *= d
        if count * 8 > MAX_PAYLOAD_BYTES:
            raise ParseError(f'DTF dims {dims} overflow the payload limit', offset=start)
    return header, end + 1, count


def decode_array(raw):
    """Returns (array, axis names)."""
    header, offset, count = _parse_header(raw)
    expected = count * 8
    found = len(raw) - offset
    if found != expected:
        kind = 'truncated' if found < expected else 'has trailing bytes'
        raise ParseError(f'DTF payload {kind}: expected {expected} bytes, found {found}',
                         offset=offset + min(found, expected))
    data = np.frombuffer(raw, dtype='<f8', count=count, offset=offset)
    return data.astype(np.float64).reshape(header['dims']), header['order']


def write_array(path, array, order):
    with open(path, 'wb') as f:
        f.write(encode_array(array, order))


def read_array(path, order=None):
    with open(path, 'rb') as f:
        array, found = decode_array(f.read())
    if order is not None and found != order:
        raise ParseError(f'{path}: expected axes {order!r}, found {found!r}', offset=len(MAGIC))
    return array


def write_tensor(X, path):
    write_array(path, X.data, TENSOR_ORDER)


def read_tensor(path):
    return DenseTensor4(read_array(path, TENSOR_ORDER))


# ============ MODEL BUNDLE ============

def write_model(model, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    write_array(os.path.join(out_dir, PROFILES_FILE), model.F, 'IRKL')
    write_array(os.path.join(out_dir, SPECTRA_FILE), model.A_final, 'JR')
    write_array(os.path.join(out_dir, ABUNDANCES_FILE), model.D_samples, 'LR')
    write_json(os.path.join(out_dir, MODEL_FILE), {
        'schema_version': SCHEMA_VERSION,
        'method': FitMethod(model.method).value,
        'dims': list(model.dims),
        'rank': model.rank,
        'mu_A': model.mu_A,
        'files': {'F': PROFILES_FILE, 'A': SPECTRA_FILE, 'D': ABUNDANCES_FILE},
    })
    write_json(os.path.join(out_dir, REPORT_FILE), model.report.to_dict())


def _report_from_dict(payload):
    known = {f.name for f in fields(FitReport)}
    report = FitReport(**{k: v for k, v in payload.items() if k in known})
    report.per_start = [StartSummary(**s) for s in report.per_start]
    return report


def read_model(model_dir):
    meta_path = os.path.join(model_dir, MODEL_FILE)
    if not os.path.isfile(meta_path):
        raise ModelNotFoundError(f'No model bundle in {model_dir} ({MODEL_FILE} missing)')
    meta = read_json(meta_path)
    if meta.get('schema_version') != SCHEMA_VERSION:
        raise ParseError(f'{meta_path}: unsupported schema_version {meta.get("schema_version")!r}')
    files = meta['files']
    model = CoupledModel(
        F=read_array(os.path.join(model_dir, files['F']), 'IRKL'),
        A_final=read_array(os.path.join(model_dir, files['A']), 'JR'),
        D_samples=read_array(os.path.join(model_dir, files['D']), 'LR'),
        mu_A=meta.get('mu_A', 0.0),
        method=FitMethod(meta['method']),
    )
    report_path = os.path.join(model_dir, REPORT_FILE)
    if os.path.isfile(report_path):
        model.report = _report_from_dict(read_json(report_path))
    I, R, K, L = model.F.shape
    if model.A_final.shape[1] != R or model.D_samples.shape != (L, R):
        raise DimensionError(
            f'Inconsistent bundle in {model_dir}: F {model.F.shape}, '
            f'A {model.A_final.shape}, D {model.D_samples.shape}')
    return model


# ============ GROUND TRUTH ============

def synth_config_to_dict(cfg):
    payload = asdict(cfg)
    if cfg.amounts is not None:
        payload['amounts'] = [list(row) for row in cfg.amounts]
    return payload


def synth_config_from_dict(payload):
    known = {f.name for f in fields(SynthConfig)}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f'Unknown synthetic settings: {", ".join(unknown)}')
    payload = dict(payload)
    if payload.get('amounts') is not None:
        payload['amounts'] = tuple(tuple(float(v) for v in row) for row in payload['amounts'])
    return SynthConfig(**payload)


def write_truth(truth, out_dir, tensor_file=TENSOR_FILE):
    os.makedirs(out_dir, exist_ok=True)
    write_array(os.path.join(out_dir, TRUTH_SCORES_FILE), truth.score_maps, 'IKRL')
    path = os.path.join(out_dir, TRUTH_FILE)
    write_json(path, {
        'schema_version': SCHEMA_VERSION,
        'config': synth_config_to_dict(truth.config) if truth.config is not None else None,
        'spectra': truth.spectra,
        'abundances': truth.abundances,
        'drifts': truth.drifts,
        'apexes': truth.apexes,
        'score_maps': TRUTH_SCORES_FILE,
        'tensor': tensor_file,
    })
    return path


def read_truth(path):
    """Returns (ground truth, path of the tensor it describes or None)."""
    payload = read_json(path)
    if payload.get('schema_version') != SCHEMA_VERSION:
        raise ParseError(f'{path}: unsupported schema_version {payload.get("schema_version")!r}')
    base = os.path.dirname(os.path.abspath(path))
    config = payload.get('config')
    truth = GroundTruth(
        spectra=np.asarray(payload['spectra'], dtype=np.float64),
        score_maps=read_array(os.path.join(base, payload['score_maps']), 'IKRL'),
        abundances=np.asarray(payload['abundances'], dtype=np.float64),
        drifts=np.asarray(payload.get('drifts') or [], dtype=np.float64),
        apexes=np.asarray(payload.get('apexes') or [], dtype=np.float64),
        config=synth_config_from_dict(config) if config else None,
    )
    tensor = payload.get('tensor')
    return truth, (os.path.join(base, tensor) if tensor else None)


# ============ CSV ============

def write_matrix_csv(path, matrix, header):
    np.savetxt(path, np.atleast_2d(matrix), fmt='%.10g', delimiter=',',
               header=','.join(header), comments='')


def read_matrix_csv(path):
    """Rows x columns with a header line; returns (column names, matrix)."""
    with open(path) as f:
        header = f.readline().strip()
        try:
            matrix = np.loadtxt(f, delimiter=',', ndmin=2)
        except ValueError as e:
            raise ParseError(f'{path}: {e}') from e
    names = [name.strip() for name in header.split(',')] if header else []
    if matrix.size and len(names) != matrix.shape[1]:
        raise ParseError(f'{path}: header names {len(names)} columns, rows have {matrix.shape[1]}')
    return names, matrix
