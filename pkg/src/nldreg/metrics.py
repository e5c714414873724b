"""Evaluation metrics: manifold error, 1-NN classification in the learned
embedding, completion RMS and normalized 3D reconstruction error."""
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .cfsolver import RANK_TOL
from .errors import (DegenerateDataError, InvalidInputError,
                     UndefinedMetricError)
from .kernelcore import as_data_matrix, cross_kernel, kernel_matrix


@dataclass
class LabeledData:
    data: np.ndarray  # d x N
    labels: np.ndarray

    def __post_init__(self):
        self.data = as_data_matrix(self.data)
        self.labels = np.asarray(self.labels)
        if self.labels.shape != (self.data.shape[1],):
            raise InvalidInputError(
                f"{self.labels.size} labels for {self.data.shape[1]} samples")


def manifold_error(K_est, K_gt, normalized=False):
    """``||K_est - K_gt||_F^2``, optionally divided by ``||K_gt||_F^2``."""
    K_est = np.asarray(K_est, dtype=float)
    K_gt = np.asarray(K_gt, dtype=float)
    if K_est.shape != K_gt.shape:
        raise InvalidInputError(f"shape mismatch {K_est.shape} vs {K_gt.shape}")
    err = float(np.sum((K_est - K_gt) ** 2))
    if normalized:
        ref = float(np.sum(K_gt**2))
        if ref == 0:
            raise UndefinedMetricError("reference kernel matrix is zero")
        err /= ref
    return err


class Classification(NamedTuple):
    predicted: np.ndarray
    error_rate: Optional[float]


def embed(basis, K_rows):
    """Coordinates ``z_j = (1/g_j) sum_i U_ij K_rows[i]`` over retained components.

    ``K_rows`` holds kernel values between the training samples (rows) and
    the points being embedded (columns).
    """
    top = basis.spectrum.max(initial=0.0)
    keep = basis.spectrum > RANK_TOL * top if top > 0 else np.zeros_like(basis.spectrum, bool)
    if not np.any(keep):
        raise DegenerateDataError("all components were shrunk to zero")
    U = basis.basis[:, keep]
    return (U.T @ K_rows) / basis.spectrum[keep][:, None]


def knn_classify(basis, train, test, kernel, test_labels=None, K_train=None):
    """1-nearest-neighbour labels for ``test`` (d x M) in the embedding of ``basis``."""
    test = as_data_matrix(test)
    if K_train is None:
        K_train = kernel_matrix(train.data, kernel)
    Z_train = embed(basis, K_train)
    Z_test = embed(basis, cross_kernel(train.data, test, kernel))
    nearest = np.argmin(cdist(Z_test.T, Z_train.T), axis=1)
    predicted = train.labels[nearest]
    err = None
    if test_labels is not None:
        test_labels = np.asarray(test_labels)
        err = float(np.mean(predicted != test_labels))
    return Classification(predicted, err)


class CompletionRMS(NamedTuple):
    deleted: float
    overall: float


def completion_rms(S_est, S_gt, mask_deleted):
    S_est = np.asarray(S_est, dtype=float)
    S_gt = np.asarray(S_gt, dtype=float)
    m = np.asarray(mask_deleted).astype(bool)
    if S_est.shape != S_gt.shape or m.shape != S_gt.shape:
        raise InvalidInputError("completion_rms needs equal shapes")
    if not m.any():
        raise UndefinedMetricError("no deleted entries to evaluate")
    diff = S_est - S_gt
    return CompletionRMS(float(np.sqrt(np.mean(diff[m] ** 2))),
                         float(np.sqrt(np.mean(diff**2))))


def to_camera_frame(S, cameras):
    """Express each frame's 3 x N shape in its camera's coordinate frame."""
    S = np.asarray(S, dtype=float)
    F = S.shape[0] // 3
    R = cameras.full_rotations
    return np.einsum("fab,fbn->fan", R, S.reshape(F, 3, -1)).reshape(3 * F, -1)


def e3d(S_est, S_gt):
    """Normalized mean 3D error of 3F x N shape matrices.

    The mean point error is divided by the mean over x, y, z of the standard
    deviation of the ground-truth coordinates. The estimate with its third
    (depth) coordinate negated is also scored and the lower error returned.
    """
    S_est = np.asarray(S_est, dtype=float)
    S_gt = np.asarray(S_gt, dtype=float)
    if S_est.shape != S_gt.shape or S_gt.shape[0] % 3:
        raise InvalidInputError(f"e3d needs equal 3F x N shapes, got {S_est.shape}, {S_gt.shape}")
    F = S_gt.shape[0] // 3
    gt = S_gt.reshape(F, 3, -1)
    sigma = float(np.mean(gt.transpose(1, 0, 2).reshape(3, -1).std(axis=1)))
    if not sigma > 0:
        raise UndefinedMetricError("ground truth has zero spread")
    est = S_est.reshape(F, 3, -1)
    flipped = est * np.array([1.0, 1.0, -1.0])[None, :, None]
    errs = [float(np.mean(np.linalg.norm(e - gt, axis=1))) for e in (est, flipped)]
    return min(errs) / sigma
