"""Flexible-coupling PARAFAC2 on one slice set.

Each slice h is modelled as X_h ~ B_h diag(D_h) A^T with the soft constraint
B_h ~ P_h Bstar weighted by mu_h. The update functions are pure: they read the state
and return new factors, and flex_sweep assigns them in the fixed order
P, Bstar, A, B, D, then mu maintenance and the score normalization pass.
"""

import logging
import time

import numpy as np

from ..errors import ConfigError, DimensionError, DivergenceError
from ..models import FitReport, FlexState
from .linalg import (degenerate_mask, hadamard_diag_solve, nnls_solve, procrustes,
                     regularized_rdiv, truncated_svd)
from .metrics import slice_percent_var
from .tensor import column_normalize, reconstruct_slices

logger = logging.getLogger(__name__)

SNR_CAP = 1e12
MU_CAP = 1e12


def _bump(state, key, count=1):
    state.diagnostics[key] = state.diagnostics.get(key, 0) + int(count)


def slice_terms(state, S):
    """Per-slice data residual ||X_h - B_h D_h A^T||^2 and coupling residual ||B_h - P_h Bstar||^2."""
    resid = S.slices - reconstruct_slices(state.B, state.D, state.A)
    coupling = state.B - state.P @ state.Bstar
    return (np.einsum('hmj,hmj->h', resid, resid),
            np.einsum('hmr,hmr->h', coupling, coupling))


def initial_mu(B, D, A):
    """mu = ||B D A^T||^2 / ||B||^2 per slice."""
    model = reconstruct_slices(B, D, A)
    return np.einsum('hmj,hmj->h', model, model) / np.einsum('hmr,hmr->h', B, B)


def init_state(S, cfg):
    """Random start; A is drawn before Bstar and B so equal seeds share A and Bstar across slice sets."""
    if len(S) == 0:
        raise DimensionError('Cannot initialize on an empty slice set')
    H, m, J = S.slices.shape
    R = cfg.R
    rng = np.random.default_rng(cfg.seed)
    A, _ = column_normalize(rng.random((J, R)))
    Bstar, _ = column_normalize(rng.random((R, R)))
    B, _ = column_normalize(rng.random((H, m, R)))
    D = np.ones((H, R))
    P, _ = procrustes(B, Bstar)
    return FlexState(B=B, A=A, Bstar=Bstar, P=P, D=D, mu=initial_mu(B, D, A), iter=0,
                     diagnostics={})


def estimate_snr(Xh):
    """Ratio of the first to the second singular value of the column-centred slice."""
    Xh = np.asarray(Xh, dtype=np.float64)
    if Xh.shape[0] < 2 or Xh.shape[1] < 2:
        raise DimensionError(f'SNR needs at least a 2 x 2 slice, got {Xh.shape}')
    S = truncated_svd(Xh - Xh.mean(axis=0), 2).S
    return _snr_ratio(S[np.newaxis])[0]


def _snr_ratio(S):
    top, second = S[:, 0], S[:, 1]
    capped = second <= 1e-12 * top
    return np.where(capped, SNR_CAP, top / np.where(capped, 1.0, second))


def snr_prefactor(snr):
    return 10.0 ** (-np.asarray(snr, dtype=np.float64) / 10.0)


def init_mu_snr(state, S, mu_floor=0.0):
    """mu_h = 10^(-SNR_h/10) * ||X_h - B_h D_h A^T||^2 / ||B_h - P_h Bstar||^2."""
    centred = S.slices - S.slices.mean(axis=1, keepdims=True)
    snr = _snr_ratio(np.linalg.svd(centred, compute_uv=False))
    capped_snr = int(np.count_nonzero(snr >= SNR_CAP))
    if capped_snr:
        _bump(state, 'capped_snr', capped_snr)
        logger.debug(f'SNR capped at {SNR_CAP:g} for {capped_snr} slices')

    resid, coupling = slice_terms(state, S)
    zero = coupling <= 0
    mu = np.full(len(S), MU_CAP)
    np.divide(snr_prefactor(snr) * resid, coupling, out=mu, where=~zero)
    if zero.any():
        _bump(state, 'capped_mu', int(zero.sum()))
        logger.warning(f'Zero coupling residual in {int(zero.sum())} slices; mu capped at {MU_CAP:g}')
    return np.maximum(mu, np.maximum(mu_floor * S.norms_sq, np.finfo(np.float64).tiny))


def update_P(state):
    P, S = procrustes(state.B, state.Bstar)
    degenerate = int(np.count_nonzero(degenerate_mask(S)))
    if degenerate:
        _bump(state, 'degenerate_procrustes', degenerate)
    return P


def update_Bstar(state):
    Bstar = np.einsum('h,hmr,hms->rs', state.mu, state.P, state.B)
    return column_normalize(Bstar)[0]


def solve_A(state, S, mu_A=0.0, A_partner=None, nonneg=False):
    """Unnormalized A from the slice-aggregated normal equations plus the spectral coupling."""
    if mu_A < 0:
        raise ConfigError(f'mu_A must be >= 0, got {mu_A}')
    if mu_A > 0 and A_partner is None:
        raise ConfigError('A spectral coupling weight needs a partner loading matrix')
    BD = state.B * state.D[:, np.newaxis, :]
    N = np.einsum('hmj,hmr->jr', S.slices, BD)
    G = np.einsum('hmr,hms->rs', BD, BD)
    if mu_A > 0:
        N = N + mu_A * A_partner
    if nonneg:
        return nnls_solve(G + mu_A * np.eye(G.shape[0]), N)
    return regularized_rdiv(N, G, mu_A)


def update_A(state, S, mu_A=0.0, A_partner=None, nonneg=False):
    """Return (A, D): column-normalized loadings, with the scales moved into every D_h."""
    A, scales = column_normalize(solve_A(state, S, mu_A, A_partner, nonneg))
    return A, state.D * scales


def update_B(state, S, nonneg=False):
    AD = state.A[np.newaxis] * state.D[:, np.newaxis, :]
    N = S.slices @ AD + state.mu[:, np.newaxis, np.newaxis] * (state.P @ state.Bstar)
    G = np.swapaxes(AD, -1, -2) @ AD
    if not nonneg:
        return regularized_rdiv(N, G, state.mu)
    R = G.shape[-1]
    return np.stack([nnls_solve(G[h] + state.mu[h] * np.eye(R), N[h]) for h in range(len(S))])


def update_D(state, S, nonneg=True):
    BtB = np.swapaxes(state.B, -1, -2) @ state.B
    AtA = state.A.T @ state.A
    h = np.einsum('hmr,hmr->hr', state.B, S.slices @ state.A)
    return hadamard_diag_solve(BtB, AtA, h, nonneg)


def grow_mu(state, cfg):
    if 2 <= state.iter < cfg.growth_iters + 1:
        return state.mu * cfg.mu_growth
    return state.mu


def normalize_scores(state):
    """Unit-norm B columns with the scales moved into D; the reconstruction is unchanged."""
    B, scales = column_normalize(state.B)
    return B, state.D * scales


def objective(state, S, mu_A=0.0, A_partner=None):
    resid, coupling = slice_terms(state, S)
    total = float(resid.sum() + np.dot(state.mu, coupling))
    if A_partner is not None:
        diff = state.A - A_partner
        total += mu_A * float(np.vdot(diff, diff))
    return total


def has_converged(sigma_old, sigma_new, eps):
    if sigma_old == 0:
        return True
    return (sigma_old - sigma_new) / sigma_old < eps


def flex_sweep(state, S, cfg, mu_A=0.0, A_partner=None):
    """One ALS iteration in place; returns the state."""
    state.iter += 1
    state.P = update_P(state)
    state.Bstar = update_Bstar(state)
    state.A, state.D = update_A(state, S, mu_A, A_partner, nonneg=cfg.nonneg_A)
    state.B = update_B(state, S, nonneg=cfg.nonneg_B)
    state.D = update_D(state, S, nonneg=cfg.nonneg_D)

    # mu maintenance
    if state.iter == 1:
        state.mu = init_mu_snr(state, S, cfg.mu_floor)
    else:
        state.mu = grow_mu(state, cfg)

    state.B, state.D = normalize_scores(state)
    return state


def dead_components(state):
    """Components whose abundance is zero in every slice."""
    return [int(r) for r in np.flatnonzero(~(state.D != 0).any(axis=0))]


def fit_flex(S, cfg, state=None):
    """Fit one flexible-coupling model; pass state to continue an earlier run."""
    started = time.perf_counter()
    if state is None:
        state = init_state(S, cfg)
    trace = [objective(state, S)]
    converged = False
    for _ in range(cfg.max_iters - state.iter):
        flex_sweep(state, S, cfg)
        sigma = objective(state, S)
        if not np.isfinite(sigma):
            raise DivergenceError(f'Objective became non-finite at iteration {state.iter}',
                                  trace=trace + [sigma])
        trace.append(sigma)
        logger.debug(f'flex {S.mode.value} iter {state.iter}: sigma={sigma:.10g}')
        if state.iter > max(cfg.growth_iters, 1) and has_converged(trace[-2], sigma, cfg.eps):
            converged = True
            break

    dead = dead_components(state)
    if dead:
        logger.warning(f'Dead components on the {S.mode.value} unfolding: {dead}')
    report = FitReport(
        objective_trace=trace,
        percent_var=slice_percent_var(S, state),
        iterations=len(trace) - 1,
        wall_time_s=time.perf_counter() - started,
        converged=converged,
        diagnostics=dict(state.diagnostics, dead_components=dead),
    )
    logger.info(f'flex {S.mode.value} fit {report.status.value} after {state.iter} iterations, '
                f'sigma={trace[-1]:.6g}')
    return state, report
