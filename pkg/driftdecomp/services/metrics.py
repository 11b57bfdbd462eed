"""Model-quality metrics: cosines, component matching, residuals and variance explained."""

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import linregress

from ..errors import DimensionError, UndefinedInputError
from ..models import MatchResult
from .tensor import column_normalize, reconstruct_slices, unfold

EXHAUSTIVE_MAX_R = 8


def cosine(u, v):
    u = np.ravel(np.asarray(u, dtype=np.float64))
    v = np.ravel(np.asarray(v, dtype=np.float64))
    if u.shape != v.shape:
        raise DimensionError(f'Vector lengths differ: {u.size} vs {v.size}')
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise UndefinedInputError('Cosine is undefined for a zero vector')
    return float(np.dot(u, v) / (nu * nv))


def cosine_matrix(truth, est):
    """|cos| between every truth column (rows) and every estimate column (columns)."""
    T, _ = column_normalize(truth)
    E, _ = column_normalize(est)
    return np.abs(T.T @ E)


def _best_permutation(C):
    R = C.shape[0]
    if R <= EXHAUSTIVE_MAX_R:
        best, best_total = None, -np.inf
        for perm in permutations(range(R)):
            total = C[np.arange(R), perm].sum()
            if total > best_total:
                best, best_total = perm, total
        return tuple(int(p) for p in best)
    _, cols = linear_sum_assignment(C, maximize=True)
    return tuple(int(c) for c in cols)


def match_components(truth, est):
    """Pair each truth column with an estimate column, maximizing the summed cosine.

    permutation[r] is the estimate column matched to truth column r. Cosines are taken
    in absolute value, since a component and its negation describe the same factor.
    """
    truth = np.asarray(truth, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if truth.shape != est.shape:
        raise DimensionError(f'Shapes differ: {truth.shape} vs {est.shape}')
    C = cosine_matrix(truth, est)
    perm = _best_permutation(C)
    cosines = C[np.arange(C.shape[0]), perm]
    return MatchResult(permutation=perm, per_component_cosines=cosines,
                       mean_cosine=float(cosines.mean()))


def ssr(S, state):
    resid = S.slices - reconstruct_slices(state.B, state.D, state.A)
    return float(np.vdot(resid, resid))


def slice_percent_var(S, state):
    total = float(S.norms_sq.sum())
    if total == 0:
        return None
    return 100.0 * (1.0 - ssr(S, state) / total)


def profile_slices(F):
    """F (I, R, K, L) as L stacked (I*K) x R matrices, rows i*K + k."""
    I, R, K, L = F.shape
    return F.transpose(3, 0, 2, 1).reshape(L, I * K, R)


def reconstruct(F, D_samples, A):
    """Mode-L slices F_l diag(d_l) A^T, shape (L, I*K, J)."""
    return reconstruct_slices(profile_slices(F), D_samples, A)


def percent_var(X, model):
    total = X.norm_sq
    if total == 0:
        raise UndefinedInputError('Percent variance is undefined for a zero tensor')
    if model.dims != X.dims:
        raise DimensionError(f'Model dims {model.dims} do not match tensor dims {X.dims}')
    resid = unfold(X, 'l').slices - reconstruct(model.F, model.D_samples, model.A_final)
    return 100.0 * (1.0 - float(np.vdot(resid, resid)) / total)


def calibration_regression(known, fitted):
    """Per-component straight-line fit of fitted abundances against known amounts.

    known and fitted are L x R; returns one dict per component, with None where the
    regression is undefined (fewer than two samples or constant known amounts).
    """
    known = np.asarray(known, dtype=np.float64)
    fitted = np.asarray(fitted, dtype=np.float64)
    if known.shape != fitted.shape:
        raise DimensionError(f'Shapes differ: {known.shape} vs {fitted.shape}')
    results = []
    for r in range(known.shape[1]):
        x, y = known[:, r], fitted[:, r]
        if x.size < 2 or np.ptp(x) == 0:
            results.append(None)
            continue
        fit = linregress(x, y)
        results.append({
            'slope': float(fit.slope),
            'intercept': float(fit.intercept),
            'r_squared': float(fit.rvalue ** 2),
        })
    return results


def _match_dict(match):
    return {
        'permutation': list(match.permutation),
        'cosines': [float(c) for c in match.per_component_cosines],
        'mean_cosine': match.mean_cosine,
    }


def _surface_cosine(truth_map, surface):
    # A dead component has an all-zero surface and no agreement with anything
    if not surface.any():
        return 0.0
    return abs(cosine(truth_map, surface))


def evaluate_model(model, truth=None, X=None, amounts=None, spectra=None):
    """Agreement of a fitted model with ground truth, the data and/or known amounts.

    Components are matched on spectra (the truth's, or a J x R reference matrix); the same
    pairing is used for score maps and abundances. With no spectra to match, known amounts
    are compared in model component order.
    """
    result = {'schema_version': 1, 'spectra': None, 'score_maps': None, 'percent_var': None,
              'abundance_regression': None, 'calibration': None}
    perm = list(range(model.rank))
    if truth is not None:
        spectra = truth.spectra
    if spectra is not None:
        match = match_components(spectra, model.A_final)
        perm = list(match.permutation)
        result['spectra'] = _match_dict(match)
    if truth is not None:
        I, R, K, L = model.F.shape
        if truth.score_maps.shape != (I, K, R, L):
            raise DimensionError(
                f'Truth score maps {truth.score_maps.shape} do not match model (I, K, R, L) = '
                f'{(I, K, R, L)}')
        surfaces = model.F * model.D_samples.T[np.newaxis, :, np.newaxis, :]
        cosines = np.array([_surface_cosine(truth.score_maps[:, :, r, :], surfaces[:, perm[r], :, :])
                            for r in range(R)])
        result['score_maps'] = _match_dict(MatchResult(
            permutation=tuple(perm), per_component_cosines=cosines,
            mean_cosine=float(cosines.mean())))
        result['abundance_regression'] = calibration_regression(
            truth.abundances, model.D_samples[:, perm])
    if X is not None:
        result['percent_var'] = percent_var(X, model)
    if amounts is not None:
        result['calibration'] = calibration_regression(amounts, model.D_samples[:, perm])
    return result
