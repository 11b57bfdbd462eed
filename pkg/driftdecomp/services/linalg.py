"""Matrix kernels shared by the ALS updates.

Every kernel accepts either a single matrix or a stack of matrices along axis 0,
so per-slice updates run as one batched call.
"""

import logging

import numpy as np
import scipy.linalg

from ..errors import DimensionError, NotPSDError, SingularSystemError
from ..models import TruncatedSVD

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
DEGENERATE_RATIO = 1e-12


def truncated_svd(M, r):
    M = np.asarray(M, dtype=np.float64)
    m, n = M.shape
    if r > min(m, n) or r < 1:
        raise DimensionError(f'Rank {r} out of range for a {m} x {n} matrix')
    U, S, Vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver='gesdd')
    return TruncatedSVD(U=U[:, :r], S=S[:r], V=Vt[:r].T)


def procrustes(B, Bstar):
    """Orthogonal Procrustes on B Bstar^T; returns (P, singular values)."""
    B = np.asarray(B, dtype=np.float64)
    m, R = B.shape[-2:]
    if m < R:
        raise DimensionError(f'Procrustes needs at least R={R} rows, got {m}')
    U, S, Vt = np.linalg.svd(B @ Bstar.T, full_matrices=False)
    return U @ Vt, S


def procrustes_project(B, Bstar):
    """P = U V^T minimizing ||B - P Bstar||_F over orthonormal-column P."""
    P, _ = procrustes(B, Bstar)
    return P


def degenerate_mask(S):
    """True where the product B Bstar^T lost rank."""
    S = np.atleast_2d(S)
    top = S[..., 0]
    return S[..., -1] <= DEGENERATE_RATIO * np.where(top > 0, top, 1.0)


def _check_condition(M, what):
    cond = np.linalg.cond(M)
    cond = np.where(np.isfinite(cond), cond, np.inf)
    bad = np.flatnonzero(np.atleast_1d(cond) > MAX_CONDITION)
    if bad.size:
        index = int(bad[0]) if np.ndim(cond) else None
        worst = float(np.atleast_1d(cond)[bad[0]])
        where = f' (slice {index})' if index is not None else ''
        raise SingularSystemError(
            f'{what} is numerically singular{where}: condition {worst:.3g}',
            condition=worst, index=index)


def regularized_rdiv(N, G, mu):
    """Solve Z (G + mu I) = N for Z.

    Stacks are supported: N (H, m, R), G (H, R, R) and mu (H,).
    """
    N = np.asarray(N, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if (mu < 0).any():
        raise DimensionError('mu must be non-negative')
    R = G.shape[-1]
    M = G + mu[..., np.newaxis, np.newaxis] * np.eye(R)
    _check_condition(M, 'Regularized system')
    # M is symmetric, so Z = N M^-1 = (M^-1 N^T)^T
    return np.swapaxes(np.linalg.solve(M, np.swapaxes(N, -1, -2)), -1, -2)


def _check_psd(G):
    if not np.allclose(G, G.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(G).max())):
        raise NotPSDError('Gram matrix is not symmetric')
    eigs = np.linalg.eigvalsh(G)
    if eigs[0] < -1e-10 * max(1.0, abs(eigs[-1])):
        raise NotPSDError(f'Gram matrix is not positive semi-definite (min eigenvalue {eigs[0]:.3g})')


def _passive_solve(G, T, passive):
    """Solve G z = t restricted to each column's passive set; other entries are 0.

    Columns that share a passive set are solved together.
    """
    Z = np.zeros_like(T)
    if T.shape[1] == 0:
        return Z
    patterns, groups = np.unique(passive.T, axis=0, return_inverse=True)
    for g, pattern in enumerate(patterns):
        vars_ = np.flatnonzero(pattern)
        if vars_.size == 0:
            continue
        cols = np.flatnonzero(groups.ravel() == g)
        sub = G[np.ix_(vars_, vars_)]
        rhs = T[np.ix_(vars_, cols)]
        try:
            Z[np.ix_(vars_, cols)] = np.linalg.solve(sub, rhs)
        except np.linalg.LinAlgError:
            Z[np.ix_(vars_, cols)] = np.linalg.lstsq(sub, rhs, rcond=None)[0]
    return Z


def nnls_solve(G, H):
    """Row-wise z >= 0 minimizing z^T G z - 2 z^T h, with a shared Gram matrix G.

    Fast combinatorial active-set method: columns of the transposed problem that share
    a passive set are solved together, and each column follows Lawson-Hanson steps.
    """
    G = np.asarray(G, dtype=np.float64)
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    n = G.shape[0]
    if G.shape != (n, n) or H.shape[1] != n:
        raise DimensionError(f'Gram {G.shape} does not match targets {H.shape}')
    _check_psd(G)

    T = H.T.copy()                                  # (n, m): one problem per column
    tol = 1e-12 * max(1.0, float(np.abs(T).max()) if T.size else 1.0, float(np.abs(G).max()))
    max_iter = 30 * n

    # Start from the clipped unconstrained solution
    passive = np.ones(T.shape, dtype=bool)
    Z = _passive_solve(G, T, passive)
    passive = Z > 0
    Z[~passive] = 0.0
    feasible = Z.copy()
    Z = _passive_solve(G, T, passive)

    todo = np.arange(T.shape[1])
    iterations = 0
    while todo.size and iterations < max_iter:
        iterations += 1

        # Step back towards the last feasible point until the passive solve is non-negative
        infeasible = todo[np.any(Z[:, todo] < 0, axis=0)]
        inner = 0
        while infeasible.size and inner < max_iter:
            inner += 1
            for col in infeasible:
                neg = np.flatnonzero(passive[:, col] & (Z[:, col] < 0))
                alpha = feasible[neg, col] / (feasible[neg, col] - Z[neg, col])
                step = alpha.min()
                feasible[:, col] += step * (Z[:, col] - feasible[:, col])
                drop = neg[alpha <= step]
                passive[drop, col] = False
                feasible[drop, col] = 0.0
                passive[:, col] &= feasible[:, col] > 0
            Z[:, infeasible] = _passive_solve(G, T[:, infeasible], passive[:, infeasible])
            infeasible = infeasible[np.any(Z[:, infeasible] < 0, axis=0)]
        feasible[:, todo] = Z[:, todo]

        # Optimality: the negative half-gradient t - G z must be <= 0 on the active set
        W = T[:, todo] - G @ Z[:, todo]
        W[passive[:, todo]] = -np.inf
        optimal = np.all(W <= tol, axis=0)
        todo = todo[~optimal]
        if todo.size:
            W = W[:, ~optimal]
            passive[W.argmax(axis=0), todo] = True
            Z[:, todo] = _passive_solve(G, T[:, todo], passive[:, todo])

    if todo.size:
        logger.warning(f'NNLS did not converge for {todo.size} of {T.shape[1]} rows')

    Z[Z < 0] = 0.0
    assert (Z >= 0).all()
    return Z.T


def hadamard_diag_solve(BtB, AtA, h, nonneg):
    """Diagonal least squares: solve [(B^T B) * (A^T A)] d = h for every stacked system.

    BtB (H, R, R), AtA (R, R) and h (H, R); returns d (H, R).
    """
    G = BtB * AtA
    _check_condition(G, 'Hadamard Gram')
    d = np.linalg.solve(G, h[..., np.newaxis])[..., 0]
    if nonneg:
        for idx in np.flatnonzero((d < 0).any(axis=-1)):
            d[idx] = nnls_solve(G[idx], h[idx][np.newaxis])[0]
    return d
