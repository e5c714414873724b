"""Kernel evaluation, width selection and symmetric eigendecomposition.

Data matrices are ``d x N`` with one sample per column. No kernel centering is
applied anywhere: the raw Gram matrix is what the regularizer factorizes.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import (DegenerateDataError, IndefiniteKernelError,
                     InvalidInputError, NumericalFailureError)

PSD_TOL = 1e-8


class KernelFamily(str, Enum):
    RBF = "rbf"
    LINEAR = "linear"


class WidthCriterion(str, Enum):
    DMAX = "dmax"
    DMED = "dmed"


@dataclass(frozen=True)
class KernelModel:
    """Kernel family plus inverse squared length-scale ``gamma`` (RBF only)."""

    family: KernelFamily = KernelFamily.RBF
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if self.family is KernelFamily.RBF:
            if not (np.isfinite(self.gamma) and self.gamma > 0):
                raise InvalidInputError(f"RBF kernel needs gamma > 0, got {self.gamma}")

    @classmethod
    def rbf(cls, gamma):
        return cls(KernelFamily.RBF, float(gamma))

    @classmethod
    def linear(cls):
        return cls(KernelFamily.LINEAR, 1.0)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]


def as_data_matrix(S):
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2 or S.shape[0] < 1 or S.shape[1] < 1:
        raise InvalidInputError(f"data matrix must be d x N with d, N >= 1, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidInputError("data matrix contains non-finite entries")
    return S


def pairwise_sq_dists(S):
    """Exact pairwise squared distances between columns (no Gram shortcut)."""
    S = as_data_matrix(S)
    if S.shape[1] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(S.T, "sqeuclidean"))


def kernel_matrix(S, kernel):
    S = as_data_matrix(S)
    if kernel.family is KernelFamily.RBF:
        K = np.exp(-kernel.gamma * pairwise_sq_dists(S))
    else:
        K = S.T @ S
    return 0.5 * (K + K.T)


def cross_kernel(S, T, kernel):
    """Kernel values ``k(s_i, t_j)`` between columns of S (rows) and T (cols)."""
    S = as_data_matrix(S)
    T = as_data_matrix(T)
    if S.shape[0] != T.shape[0]:
        raise InvalidInputError(f"dimension mismatch: {S.shape[0]} vs {T.shape[0]}")
    if kernel.family is KernelFamily.RBF:
        sq = ((S[:, :, None] - T[:, None, :]) ** 2).sum(axis=0)
        return np.exp(-kernel.gamma * sq)
    return S.T @ T


def pair_gradients(S, kernel, K=None):
    """Array ``A`` of shape (N, N, d) with ``A[i, j] = dK_ij / ds_i``.

    The derivative with respect to the second argument is ``A[j, i]``; on the
    diagonal the full derivative of ``K_ii`` is ``2 * A[i, i]``.
    """
    S = as_data_matrix(S)
    if kernel.family is KernelFamily.RBF:
        if K is None:
            K = kernel_matrix(S, kernel)
        diff = S.T[:, None, :] - S.T[None, :, :]
        return -2.0 * kernel.gamma * K[:, :, None] * diff
    N = S.shape[1]
    return np.broadcast_to(S.T[None, :, :], (N, N, S.shape[0])).copy()


def select_width(S, criterion):
    """Inverse width for an RBF kernel from the pairwise distance spread.

    ``dmax`` puts the kernel value at the largest pairwise distance at
    exp(-9/2); ``dmed`` puts the value at the median distance at 0.5.
    """
    S = as_data_matrix(S)
    criterion = WidthCriterion(criterion)
    if S.shape[1] < 2:
        raise DegenerateDataError("width selection needs at least two samples")
    d = np.sqrt(pdist(S.T, "sqeuclidean"))
    if criterion is WidthCriterion.DMAX:
        ref = d.max()
        target = 4.5
    else:
        ref = np.median(d)
        target = np.log(2.0)
    if not ref > 0:
        raise DegenerateDataError(f"{criterion.value} pairwise distance is zero")
    return target / ref**2


def sym_eig(K):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise InvalidInputError("matrix contains non-finite entries")
    scale = max(1.0, np.abs(K).max())
    if np.abs(K - K.T).max() > 1e-10 * scale:
        raise InvalidInputError("matrix is not symmetric")
    try:
        w, U = np.linalg.eigh(0.5 * (K + K.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigendecomposition failed: {exc}") from exc
    return EigenDecomposition(w[::-1].copy(), U[:, ::-1].copy())


def clamp_psd(eigenvalues, tol=PSD_TOL):
    """Zero out round-off negatives; reject genuinely indefinite spectra."""
    lam = np.asarray(eigenvalues, dtype=float).copy()
    top = max(lam.max(initial=0.0), 0.0)
    floor = -tol * top
    if lam.size and lam.min() < floor:
        raise IndefiniteKernelError(
            f"kernel matrix is indefinite: min eigenvalue {lam.min():.3e} "
            f"below tolerance {floor:.3e}")
    lam[lam < 0] = 0.0
    return lam
