"""CSV grids and SVG renderings of a fitted model: elution surfaces, spectra and abundances."""

import logging
import os

import numpy as np
from flask import render_template

from .storage import write_matrix_csv

logger = logging.getLogger(__name__)

CELL = 4
BAR = 8
PLOT_HEIGHT = 160
LOW = np.array([255, 255, 255])
HIGH = np.array([8, 48, 107])


def color(value):
    rgb = np.rint(LOW + (HIGH - LOW) * float(np.clip(value, 0.0, 1.0))).astype(int)
    return '#{:02x}{:02x}{:02x}'.format(*rgb)


def surface_cells(surface):
    """Heatmap rectangles, acquisitions down and modulations across."""
    peak = np.abs(surface).max()
    scaled = np.abs(surface) / peak if peak > 0 else np.zeros_like(surface)
    I, K = surface.shape
    return [{'x': k * CELL, 'y': i * CELL, 'fill': color(scaled[i, k])}
            for i in range(I) for k in range(K)]


def bars(values, width=BAR):
    values = np.asarray(values, dtype=np.float64)
    peak = np.abs(values).max()
    heights = np.abs(values) / peak * PLOT_HEIGHT if peak > 0 else np.zeros_like(values)
    return [{'x': n * width, 'y': f'{PLOT_HEIGHT - h:.3f}', 'height': f'{h:.3f}'}
            for n, h in enumerate(heights)]


def _write_text(path, text):
    with open(path, 'w') as f:
        f.write(text)


def export_plots(model, out_dir):
    """Write every plot file for a model; returns the written paths in creation order."""
    os.makedirs(out_dir, exist_ok=True)
    I, R, K, L = model.F.shape
    written = []

    for r in range(R):
        for l in range(L):
            surface = model.F[:, r, :, l] * model.D_samples[l, r]
            name = f'surface_c{r + 1}_s{l + 1}'
            path = os.path.join(out_dir, f'{name}.csv')
            write_matrix_csv(path, surface, [f'modulation_{k + 1}' for k in range(K)])
            written.append(path)
            path = os.path.join(out_dir, f'{name}.svg')
            _write_text(path, render_template(
                'export/surface.svg', title=f'Component {r + 1}, sample {l + 1}',
                cells=surface_cells(surface), cell=CELL, width=K * CELL, height=I * CELL))
            written.append(path)

        spectrum = model.A_final[:, r]
        name = f'spectrum_c{r + 1}'
        path = os.path.join(out_dir, f'{name}.csv')
        write_matrix_csv(path, np.column_stack([np.arange(1, spectrum.size + 1), spectrum]),
                         ['channel', 'intensity'])
        written.append(path)
        path = os.path.join(out_dir, f'{name}.svg')
        _write_text(path, render_template(
            'export/bars.svg', title=f'Spectrum, component {r + 1}', bars=bars(spectrum),
            bar=BAR, width=spectrum.size * BAR, height=PLOT_HEIGHT))
        written.append(path)

    path = os.path.join(out_dir, 'abundances.csv')
    write_matrix_csv(path, model.D_samples, [f'component_{r + 1}' for r in range(R)])
    written.append(path)
    path = os.path.join(out_dir, 'abundances.svg')
    # Sample-major bars: all components of sample 1, then sample 2
    _write_text(path, render_template(
        'export/bars.svg', title='Abundances by sample', bars=bars(model.D_samples.ravel()),
        bar=BAR, width=model.D_samples.size * BAR, height=PLOT_HEIGHT))
    written.append(path)

    logger.info(f'Exported {len(written)} plot files to {out_dir}')
    return written
