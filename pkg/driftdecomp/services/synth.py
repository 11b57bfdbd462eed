"""Synthetic multi-sample GC x GC-TOFMS regions with independent drift in both retention modes."""

import logging

import numpy as np
from scipy.stats import truncnorm

from ..models import DenseTensor4, GroundTruth

logger = logging.getLogger(__name__)

# Noise is truncated just inside the offset so every entry stays strictly positive
TRUNCATION_MARGIN = 1e-6


def random_spectrum(J, n_ms_peaks, rng):
    """Unit-norm spectrum with n_ms_peaks spikes of uniform random height at distinct channels."""
    channels = rng.choice(J, size=n_ms_peaks, replace=False)
    spectrum = np.zeros(J)
    spectrum[channels] = rng.random(n_ms_peaks)
    return spectrum / np.linalg.norm(spectrum)


def gaussian_peak_map(I, K, apex1, apex2, sigma1, sigma2):
    """Separable Gaussian surface on the acquisition (rows) x modulation (columns) grid."""
    second = np.exp(-0.5 * ((np.arange(I) - apex2) / sigma2) ** 2)
    first = np.exp(-0.5 * ((np.arange(K) - apex1) / sigma1) ** 2)
    return np.outer(second, first)


def nominal_apexes(cfg):
    """Undrifted (first-dimension, second-dimension) apex per component, spaced around the centre."""
    offsets = (np.arange(cfg.R) - (cfg.R - 1) / 2) * cfg.apex_spacing
    return np.stack([(cfg.K - 1) / 2 + offsets * cfg.sigma1,
                     (cfg.I - 1) / 2 + offsets * cfg.sigma2], axis=-1)


def generate(cfg):
    """Return (tensor, ground truth) for a synthetic configuration."""
    for warning in cfg.validate():
        logger.warning(warning)
    rng = np.random.default_rng(cfg.seed)
    I, J, K, L, R = cfg.I, cfg.J, cfg.K, cfg.L, cfg.R

    spectra = np.column_stack([random_spectrum(J, cfg.n_ms_peaks, rng) for _ in range(R)])
    drifts = rng.uniform(-1.0, 1.0, size=(L, R, 2)) * np.array([cfg.drift1_max, cfg.drift2_max])
    apexes = nominal_apexes(cfg)[np.newaxis] + drifts
    amounts = np.ones((L, R)) if cfg.amounts is None else np.asarray(cfg.amounts, dtype=np.float64)

    score_maps = np.zeros((I, K, R, L))
    for l in range(L):
        for r in range(R):
            apex1, apex2 = apexes[l, r]
            score_maps[:, :, r, l] = amounts[l, r] * gaussian_peak_map(
                I, K, apex1, apex2, cfg.sigma1, cfg.sigma2)

    # Noise and offset are set against the unscaled scores; scale multiplies the whole tensor
    data = np.einsum('ikrl,jr->ijkl', score_maps, spectra)
    if not cfg.noiseless:
        sd = score_maps.max() / cfg.snr
        if cfg.offset_factor > 0:
            bound = cfg.offset_factor * (1 - TRUNCATION_MARGIN)
            noise = truncnorm.rvs(-bound, bound, scale=sd, size=data.shape, random_state=rng)
        else:
            noise = rng.normal(0.0, sd, size=data.shape)
        data = data + noise + cfg.offset_factor * sd
    data = cfg.scale * data

    abundances = cfg.scale * np.sqrt(np.einsum('ikrl,ikrl->lr', score_maps, score_maps))
    truth = GroundTruth(spectra=spectra, score_maps=score_maps, abundances=abundances,
                        drifts=drifts, apexes=apexes, config=cfg)
    logger.info(f'Generated {I}x{J}x{K}x{L} tensor with {R} components (seed {cfg.seed})')
    return DenseTensor4(data), truth
