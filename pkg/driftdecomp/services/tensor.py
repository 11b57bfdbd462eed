"""Unfoldings, Khatri-Rao product and column normalization for 4-way (I, J, K, L) tensors.

Layout conventions, fixed here and nowhere else:

  - DenseTensor4 data is C-ordered over (i, j, k, l).
  - KL slices are X[:, :, k, l] (I x J), ordered l-major: h = l*K + k.
  - IL slices are X[i, :, :, l].T (K x J), ordered l-major: h = l*I + i.
  - L slices are X[:, :, :, l] with rows (i, k) mapped to i*K + k, the same row order
    khatri_rao(F2, F1) produces for F2 (I x R) and F1 (K x R).
"""

import numpy as np

from ..errors import DimensionError
from ..models import DenseTensor4, Mode, SliceSet


def khatri_rao(A, B):
    """Column-wise Kronecker product; row j*K + k of the result holds A[j] * B[k]."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise DimensionError('khatri_rao expects two matrices')
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f'Column counts differ: {A.shape[1]} vs {B.shape[1]}')
    J, R = A.shape
    K = B.shape[0]
    return np.einsum('jr,kr->jkr', A, B).reshape(J * K, R)


def index_map_for(mode, dims):
    I, J, K, L = dims
    mode = Mode(mode)
    if mode is Mode.KL:
        return tuple((k, l) for l in range(L) for k in range(K))
    if mode is Mode.IL:
        return tuple((i, l) for l in range(L) for i in range(I))
    return tuple((l,) for l in range(L))


def unfold(X, mode):
    """Split X into the slice set of one unfolding."""
    mode = Mode(mode)
    data = X.data
    I, J, K, L = X.dims
    if mode is Mode.KL:
        slices = data.transpose(3, 2, 0, 1).reshape(L * K, I, J)
    elif mode is Mode.IL:
        slices = data.transpose(3, 0, 2, 1).reshape(L * I, K, J)
    else:
        slices = data.transpose(3, 0, 2, 1).reshape(L, I * K, J)
    return SliceSet(mode=mode, slices=np.ascontiguousarray(slices),
                    index_map=index_map_for(mode, X.dims), dims=X.dims)


def _expected_shape(mode, dims):
    I, J, K, L = dims
    if mode is Mode.KL:
        return (L * K, I, J)
    if mode is Mode.IL:
        return (L * I, K, J)
    return (L, I * K, J)


def fold(S, dims=None):
    """Exact inverse of unfold."""
    dims = tuple(int(d) for d in (dims if dims is not None else S.dims))
    if len(dims) != 4:
        raise DimensionError(f'Expected 4 dims, got {dims}')
    I, J, K, L = dims
    expected = _expected_shape(S.mode, dims)
    if S.slices.shape != expected:
        raise DimensionError(
            f'{S.mode.value} slices have shape {S.slices.shape}, expected {expected} for dims {dims}')
    if S.index_map != index_map_for(S.mode, dims):
        raise DimensionError('index_map does not match the canonical slice order')

    if S.mode is Mode.KL:
        data = S.slices.reshape(L, K, I, J).transpose(2, 3, 1, 0)
    else:
        data = S.slices.reshape(L, I, K, J).transpose(1, 3, 2, 0)
    return DenseTensor4(np.ascontiguousarray(data))


def column_normalize(M):
    """Scale the columns of M (or of every matrix in a stack) to unit norm.

    Returns (M_hat, s) with M = M_hat * s; zero columns pass through with scale 0.
    """
    M = np.asarray(M, dtype=np.float64)
    s = np.linalg.norm(M, axis=-2)
    safe = np.where(s > 0, s, 1.0)
    return M / safe[..., np.newaxis, :], s


def reconstruct_slices(B, D, A):
    """B_h diag(D_h) A^T for every slice h."""
    return np.einsum('hmr,hr,jr->hmj', B, D, A)
