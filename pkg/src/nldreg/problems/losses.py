"""Data terms ``f(W, S)`` as stacked residual blocks.

Losses act on the *sample matrix* ``X`` (d x N, one regularized sample per
column) and expose residuals plus a sparse Jacobian with respect to
``X`` flattened column by column. The squared residual sum is the loss.

Shape layouts for NRSfM:

* shape matrix ``S``: 3F x N, rows ``3i:3i+3`` hold frame i's xyz, column j
  is point j.
* sample matrix ``X``: 3N x F, column i is frame i's shape vector
  ``(x_1, y_1, z_1, x_2, ...)``. The kernel regularizer sees frames as samples.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import InvalidInputError


@dataclass
class MaskedObservations:
    """Observation matrix and 0/1 availability mask of the same shape.

    Entries of ``values`` where ``mask == 0`` are ignored by every consumer.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask).astype(bool)
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise InvalidInputError(
                f"values {self.values.shape} and mask {self.mask.shape} must be equal 2-D shapes")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise InvalidInputError("observed values must be finite")

    @property
    def shape(self):
        return self.values.shape


def shapes_to_samples(S):
    """3F x N shape matrix -> 3N x F sample matrix."""
    S = np.asarray(S, dtype=float)
    F3, N = S.shape
    if F3 % 3:
        raise InvalidInputError(f"shape matrix needs 3F rows, got {F3}")
    return S.reshape(F3 // 3, 3, N).transpose(2, 1, 0).reshape(3 * N, F3 // 3)


def samples_to_shapes(X):
    """3N x F sample matrix -> 3F x N shape matrix."""
    X = np.asarray(X, dtype=float)
    N3, F = X.shape
    if N3 % 3:
        raise InvalidInputError(f"sample matrix needs 3N rows, got {N3}")
    return X.reshape(N3 // 3, 3, F).transpose(2, 1, 0).reshape(3 * F, N3 // 3)


def completion_loss(obs, S):
    """Residuals ``W_ij - S_ij`` over observed entries (column-major order)."""
    S = np.asarray(S, dtype=float)
    if S.shape != obs.shape:
        raise InvalidInputError(f"S {S.shape} does not match observations {obs.shape}")
    m = obs.mask.T
    return (obs.values.T - S.T)[m]


class CompletionLoss:
    """``||Z o (W - S)||_F^2`` with the completed matrix as sample matrix."""

    def __init__(self, obs):
        self.obs = obs
        d, N = obs.shape
        # column-major flat index of each observed entry
        flat = np.arange(d * N).reshape(N, d)
        self._cols = flat[obs.mask.T]
        self.residual_count = self._cols.size
        self._J = sp.csr_matrix(
            (-np.ones(self._cols.size), (np.arange(self._cols.size), self._cols)),
            shape=(self._cols.size, d * N))

    @property
    def shape(self):
        return self.obs.shape

    def residuals(self, X):
        return completion_loss(self.obs, X)

    def jacobian(self, X):
        return self._J

    def value(self, X):
        r = self.residuals(X)
        return float(r @ r)


def nrsfm_loss(obs, cameras, S):
    """Reprojection residuals ``w_i(x_j) - R_i s_i(x_j)`` for observed (i, j).

    ``obs`` is 2F x N; a point counts as observed in frame i when both of its
    mask rows are set. Residuals are ordered frame by frame, point by point.
    """
    S = np.asarray(S, dtype=float)
    F = cameras.n_frames
    N = obs.shape[1]
    if obs.shape[0] != 2 * F or S.shape != (3 * F, N):
        raise InvalidInputError(
            f"inconsistent NRSfM shapes: W {obs.shape}, S {S.shape}, {F} cameras")
    R = cameras.rotations
    P = np.einsum("fab,fbn->fan", R, S.reshape(F, 3, N))
    resid = obs.values.reshape(F, 2, N) - P
    vis = point_visibility(obs)
    return resid.transpose(0, 2, 1)[vis].ravel()


def point_visibility(obs):
    """F x N boolean: point j observed in frame i."""
    m = obs.mask.reshape(-1, 2, obs.shape[1])
    return m[:, 0, :] & m[:, 1, :]


class NRSfMLoss:
    """Reprojection loss on the 3N x F sample matrix for fixed cameras."""

    def __init__(self, obs, cameras):
        self.obs = obs
        self.cameras = cameras
        F = cameras.n_frames
        N = obs.shape[1]
        if obs.shape[0] != 2 * F:
            raise InvalidInputError(f"W has {obs.shape[0]} rows, expected {2 * F}")
        self.n_frames, self.n_points = F, N
        self.vis = point_visibility(obs)
        self.residual_count = 2 * int(self.vis.sum())
        self._J = self._build_jacobian()

    @property
    def shape(self):
        return (3 * self.n_points, self.n_frames)

    def _build_jacobian(self):
        F, N = self.n_frames, self.n_points
        R = self.cameras.rotations
        fi, pj = np.nonzero(self.vis)
        k = np.arange(fi.size)
        # residual rows 2k, 2k+1; variables of point j in frame i at i*3N + 3j + c
        rows = (2 * k[:, None, None] + np.arange(2)[None, :, None]) * np.ones((1, 1, 3), int)
        cols = (fi * 3 * N + 3 * pj)[:, None, None] + np.arange(3)[None, None, :] + np.zeros((1, 2, 1), int)
        vals = -R[fi]
        return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                             shape=(2 * fi.size, 3 * N * F))

    def residuals(self, X):
        return nrsfm_loss(self.obs, self.cameras, samples_to_shapes(X))

    def jacobian(self, X):
        return self._J

    def value(self, X):
        r = self.residuals(X)
        return float(r @ r)
