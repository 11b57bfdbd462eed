"""Coupled PARAFAC2x2: flexible-coupling models on the KL and IL unfoldings tied by their spectra."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from ..errors import (AllStartsDivergedError, ConfigError, DivergenceError, NotPSDError,
                      SingularSystemError)
from ..models import CoupledModel, FitMethod, FitReport, Mode, StartSummary
from .flex import (dead_components, fit_flex, flex_sweep, has_converged, init_state,
                   objective)
from .linalg import hadamard_diag_solve
from .metrics import percent_var, profile_slices, slice_percent_var, ssr
from .tensor import column_normalize, unfold

logger = logging.getLogger(__name__)

START_FAILURES = (DivergenceError, SingularSystemError, NotPSDError)


def start_seeds(master_seed, n_starts):
    """Derived per-start seeds; both unfoldings of one start share its seed."""
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(n_starts)]


def spectral_coupling(ssr_total, a_norm_sq, omega):
    return 10.0 ** omega * ssr_total / a_norm_sq


def init_mu_A(state_kl, state_il, S_kl, S_il, omega):
    """Initial spectral coupling from the residuals of the random start."""
    residual = ssr(S_kl, state_kl) + ssr(S_il, state_il)
    return spectral_coupling(residual, float(np.vdot(state_kl.A, state_kl.A)), omega)


def coupled_objective(model, S_kl, S_il):
    """Returns (sigma, sigma_kl, sigma_il); sigma adds mu_A ||A_kl - A_il||^2."""
    sigma_kl = objective(model.state_kl, S_kl)
    sigma_il = objective(model.state_il, S_il)
    diff = model.state_kl.A - model.state_il.A
    return sigma_kl + sigma_il + model.mu_A * float(np.vdot(diff, diff)), sigma_kl, sigma_il


def _record(model, sigmas):
    sigma, sigma_kl, sigma_il = sigmas
    model.report.objective_trace.append(sigma)
    model.report.trace_kl.append(sigma_kl)
    model.report.trace_il.append(sigma_il)


def init_model(S_kl, S_il, cfg, seed):
    flex = replace(cfg.flex, seed=seed)
    state_kl = init_state(S_kl, flex)
    state_il = init_state(S_il, flex)
    if cfg.mu_A is not None:
        mu_A = float(cfg.mu_A)
    else:
        mu_A = init_mu_A(state_kl, state_il, S_kl, S_il, cfg.omega)
    model = CoupledModel(state_kl=state_kl, state_il=state_il, mu_A=mu_A)
    _record(model, coupled_objective(model, S_kl, S_il))
    return model


def coupled_sweep(model, S_kl, S_il, cfg):
    """One iteration: the KL sweep, then the IL sweep against the fresh KL spectra."""
    model.iter += 1
    flex_sweep(model.state_kl, S_kl, cfg.flex, mu_A=model.mu_A, A_partner=model.state_il.A)
    flex_sweep(model.state_il, S_il, cfg.flex, mu_A=model.mu_A, A_partner=model.state_kl.A)
    if 2 <= model.iter < cfg.flex.growth_iters + 1:
        model.mu_A *= cfg.flex.mu_growth

    sigmas = coupled_objective(model, S_kl, S_il)
    if not np.isfinite(sigmas[0]):
        raise DivergenceError(f'Coupled objective became non-finite at iteration {model.iter}',
                              trace=model.report.objective_trace + [sigmas[0]])
    _record(model, sigmas)
    logger.debug(f'pf2x2 iter {model.iter}: sigma={sigmas[0]:.10g} mu_A={model.mu_A:.4g}')
    return model


def assemble_profiles(model, dims, source='both'):
    """Elution surfaces F (I, R, K, L) from the KL and/or IL scores, unit norm per (r, l)."""
    if source not in ('both', 'kl', 'il'):
        raise ConfigError(f'Unknown profile source: {source}')
    I, _, K, L = dims
    R = model.rank
    F = np.zeros((I, R, K, L))
    if source in ('both', 'kl'):
        state = model.state_kl
        BD = state.B * state.D[:, np.newaxis, :]
        F += BD.reshape(L, K, I, R).transpose(2, 3, 1, 0)
    if source in ('both', 'il'):
        state = model.state_il
        BD = state.B * state.D[:, np.newaxis, :]
        F += BD.reshape(L, I, K, R).transpose(1, 3, 2, 0)
    norms = np.sqrt(np.einsum('irkl,irkl->rl', F, F))
    return F / np.where(norms > 0, norms, 1.0)[np.newaxis, :, np.newaxis, :]


def solve_abundances(F, X, A, nonneg=True):
    """Per-sample diagonal abundances d_l for X_l ~ F_l diag(d_l) A^T."""
    F_l = profile_slices(F)
    X_l = unfold(X, Mode.L).slices
    BtB = np.swapaxes(F_l, -1, -2) @ F_l
    h = np.einsum('hmr,hmr->hr', F_l, X_l @ A)
    try:
        return hadamard_diag_solve(BtB, A.T @ A, h, nonneg)
    except SingularSystemError as e:
        raise SingularSystemError(
            f'Abundance system for sample {e.index} is singular (collinear components): '
            f'condition {e.condition:.3g}', condition=e.condition, index=e.index) from e


def _run_starts(run, seeds, threads):
    workers = max(1, min(threads, len(seeds)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(seeds)), seeds))


def _select_start(results):
    summaries = [summary for _, summary in results]
    candidates = [(s.sigma, s.index) for s in summaries if not s.diverged]
    if not candidates:
        raise AllStartsDivergedError(
            f'All {len(summaries)} starts diverged', starts=[vars(s) for s in summaries])
    _, best = min(candidates)
    return best, summaries


def fit(X, R, cfg):
    """Multi-start PARAFAC2x2 fit of X with R components."""
    started = time.perf_counter()
    flex = replace(cfg.flex, R=R)
    cfg = replace(cfg, flex=flex)
    S_kl = unfold(X, Mode.KL)
    S_il = unfold(X, Mode.IL)
    burn = min(cfg.burn_iters, flex.max_iters)

    def run(index, seed):
        try:
            model = init_model(S_kl, S_il, cfg, seed)
            for _ in range(burn):
                coupled_sweep(model, S_kl, S_il, cfg)
        except START_FAILURES as e:
            logger.warning(f'Start {index} (seed {seed}) failed: {e}')
            return None, StartSummary(index=index, seed=seed, diverged=True, message=str(e))
        sigma = model.report.objective_trace[-1]
        logger.info(f'Start {index} (seed {seed}): sigma={sigma:.8g} after {burn} iterations')
        return model, StartSummary(index=index, seed=seed, sigma=sigma)

    results = _run_starts(run, start_seeds(cfg.seed, cfg.n_starts), cfg.threads)
    best, summaries = _select_start(results)
    model = results[best][0]
    logger.info(f'Selected start {best} of {cfg.n_starts}')

    converged = False
    trace = model.report.objective_trace
    while model.iter < flex.max_iters:
        coupled_sweep(model, S_kl, S_il, cfg)
        if model.iter > max(flex.growth_iters, 1) and has_converged(trace[-2], trace[-1], flex.eps):
            converged = True
            break

    model.F = assemble_profiles(model, X.dims)
    model.A_final, _ = column_normalize(model.state_kl.A + model.state_il.A)
    model.D_samples = solve_abundances(model.F, X, model.A_final, nonneg=flex.nonneg_D)

    report = model.report
    report.iterations = model.iter
    report.converged = converged
    report.per_start = summaries
    report.selected_start = best
    report.mu_A_final = model.mu_A
    report.percent_var = percent_var(X, model)
    report.percent_var_kl = slice_percent_var(S_kl, model.state_kl)
    report.percent_var_il = slice_percent_var(S_il, model.state_il)
    report.diagnostics = _diagnostics(model)
    report.wall_time_s = time.perf_counter() - started
    logger.info(f'pf2x2 fit {report.status.value} after {model.iter} iterations, '
                f'%VAR={report.percent_var:.4f}')
    return model


def _diagnostics(model):
    dead = sorted(set(dead_components(model.state_kl)) | set(dead_components(model.state_il)))
    dead += [r for r in range(model.rank) if r not in dead and not model.D_samples[:, r].any()]
    if dead:
        logger.warning(f'Dead components: {sorted(dead)}')
    diagnostics = {'dead_components': sorted(dead)}
    for name, state in (('kl', model.state_kl), ('il', model.state_il)):
        for key, count in state.diagnostics.items():
            diagnostics[f'{name}_{key}'] = count
    return diagnostics


def fit_mode_l(X, R, cfg):
    """Single flexible-coupling model on the mode-L unfolding; D_h are the sample abundances."""
    started = time.perf_counter()
    flex = replace(cfg.flex, R=R)
    S_l = unfold(X, Mode.L)
    burn_cfg = replace(flex, max_iters=min(cfg.burn_iters, flex.max_iters))

    def run(index, seed):
        try:
            state, report = fit_flex(S_l, replace(burn_cfg, seed=seed))
        except START_FAILURES as e:
            logger.warning(f'Start {index} (seed {seed}) failed: {e}')
            return None, StartSummary(index=index, seed=seed, diverged=True, message=str(e))
        return (state, report), StartSummary(index=index, seed=seed,
                                             sigma=report.objective_trace[-1])

    results = _run_starts(run, start_seeds(cfg.seed, cfg.n_starts), cfg.threads)
    best, summaries = _select_start(results)
    state, burn_report = results[best][0]
    state, report = fit_flex(S_l, flex, state=state)

    I, _, K, L = X.dims
    B, scales = column_normalize(state.B)
    model = CoupledModel(
        F=B.reshape(L, I, K, R).transpose(1, 3, 2, 0).copy(),
        D_samples=state.D * scales,
        A_final=state.A.copy(),
        method=FitMethod.FLEX_L,
        iter=state.iter,
    )
    if len(report.objective_trace) == 1:
        report.converged = burn_report.converged
    report.objective_trace = burn_report.objective_trace + report.objective_trace[1:]
    report.iterations = len(report.objective_trace) - 1
    report.per_start = summaries
    report.selected_start = best
    report.percent_var = percent_var(X, model)
    report.wall_time_s = time.perf_counter() - started
    model.report = report
    return model
