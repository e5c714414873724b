"""Orthographic cameras parameterized by unit quaternions ``(w, x, y, z)``."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import DegenerateDataError, InvalidInputError
from ..preimage import LMConfig, ResidualProblem, lm_minimize
from .losses import MaskedObservations, point_visibility

log = logging.getLogger(__name__)


def _quat_quadratic(q):
    """Rotation matrix of the unnormalized quaternion times ``|q|^2``."""
    w, x, y, z = q
    return np.array([
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])


def _quat_quadratic_grad(q):
    """d M / d q_k for the first two rows of the quadratic form, shape (4, 2, 3)."""
    w, x, y, z = q
    return 2 * np.array([
        [[w, -z, y], [z, w, -x]],
        [[x, y, z], [y, -x, -w]],
        [[-y, x, w], [x, y, z]],
        [[-z, -w, x], [w, -z, y]],
    ])


def quaternion_to_rotation(q):
    q = np.asarray(q, dtype=float)
    n2 = float(q @ q)
    if not n2 > 0 or not np.isfinite(n2):
        raise InvalidInputError("quaternion must be finite and non-zero")
    return _quat_quadratic(q) / n2


def quaternion_to_orthographic(q):
    """First two rows of the rotation matrix of ``q`` (normalized internally)."""
    return quaternion_to_rotation(q)[:2]


def orthographic_jacobian(q):
    """Derivative of ``quaternion_to_orthographic`` w.r.t. the raw q, (4, 2, 3)."""
    q = np.asarray(q, dtype=float)
    n2 = float(q @ q)
    M = _quat_quadratic(q)[:2]
    dM = _quat_quadratic_grad(q)
    return dM / n2 - 2.0 * q[:, None, None] * M[None] / n2**2


def rotation_to_quaternion(R):
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    q = np.array([w, x, y, z])
    return q if w >= 0 else -q


def nearest_orthographic(M):
    """Nearest 2x3 matrix with orthonormal rows (polar factor of M)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    return U @ Vt


def orthographic_to_quaternion(P):
    """Quaternion of the proper rotation whose first two rows are ``P``."""
    P = nearest_orthographic(P)
    R = np.vstack([P, np.cross(P[0], P[1])])
    return rotation_to_quaternion(R)


@dataclass
class CameraSequence:
    quaternions: np.ndarray  # F x 4, unit norm
    flags: list = field(default_factory=list)  # frames left untouched by refinement

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.quaternions, dtype=float))
        if q.shape[1] != 4:
            raise InvalidInputError(f"quaternions must be F x 4, got {q.shape}")
        norms = np.linalg.norm(q, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(q)):
            raise InvalidInputError("quaternions must be finite and non-zero")
        self.quaternions = q / norms[:, None]

    @property
    def n_frames(self):
        return self.quaternions.shape[0]

    @property
    def rotations(self):
        """F x 2 x 3 orthographic projection matrices."""
        return np.stack([quaternion_to_orthographic(q) for q in self.quaternions])

    @property
    def full_rotations(self):
        return np.stack([quaternion_to_rotation(q) for q in self.quaternions])

    @classmethod
    def from_rotations(cls, R):
        return cls(np.stack([orthographic_to_quaternion(P[:2]) for P in R]))


def frame_residual_problem(w, s):
    """Reprojection residuals of one frame as a function of its quaternion.

    ``w`` is 2 x n observed image points, ``s`` the matching 3 x n shape.
    """
    n = w.shape[1]

    def residuals(q):
        return (w - quaternion_to_orthographic(q) @ s).T.ravel()

    def jacobian(q):
        dP = orthographic_jacobian(q)  # (4, 2, 3)
        return -np.einsum("kab,bn->nak", dP, s).reshape(2 * n, 4)

    return ResidualProblem(4, 2 * n, residuals, jacobian)


def refine_cameras(W, Z, S, R0, cfg=None):
    """Per-frame LM over quaternions for fixed shapes ``S`` (3F x N).

    Frames with fewer than three observed points keep their initial camera
    and are listed in the returned sequence's ``flags``.
    """
    cfg = cfg or LMConfig(max_iters=50)
    obs = W if isinstance(W, MaskedObservations) else MaskedObservations(W, Z)
    S = np.asarray(S, dtype=float)
    F = R0.n_frames
    N = obs.shape[1]
    if obs.shape != (2 * F, N) or S.shape != (3 * F, N):
        raise InvalidInputError("inconsistent shapes for camera refinement")
    vis = point_visibility(obs)
    quats = R0.quaternions.copy()
    flags = []
    for i in range(F):
        cols = np.nonzero(vis[i])[0]
        if cols.size < 3:
            log.warning("frame %d has %d observed points; camera left unchanged", i, cols.size)
            flags.append(i)
            continue
        prob = frame_residual_problem(obs.values[2 * i:2 * i + 2, cols], S[3 * i:3 * i + 3, cols])
        res = lm_minimize(prob, quats[i], cfg)
        quats[i] = res.x / np.linalg.norm(res.x)
    return CameraSequence(quats, flags)


def fill_missing_with_point_means(obs):
    """Fill unobserved image coordinates with that point's mean over frames."""
    W = obs.values.copy()
    m = obs.mask
    F2, N = W.shape
    for c in range(2):
        rows = slice(c, F2, 2)
        vals, mk = W[rows], m[rows]
        counts = mk.sum(axis=0)
        means = np.where(counts > 0, np.where(mk, vals, 0).sum(axis=0) / np.maximum(counts, 1), 0.0)
        W[rows] = np.where(mk, vals, means[None, :])
    return W


def center_frames(obs):
    """Subtract each row's mean over observed entries."""
    W = obs.values.copy()
    m = obs.mask
    counts = m.sum(axis=1, keepdims=True)
    means = np.where(m, W, 0).sum(axis=1, keepdims=True) / np.maximum(counts, 1)
    return MaskedObservations(np.where(m, W - means, 0.0), m)


def rigid_factorization_init(W, Z=None, return_shape=False):
    """Tomasi-Kanade style camera initialization from 2F x N tracks.

    Missing entries are filled with per-point means, the centered matrix is
    factorized at rank 3, a metric upgrade enforces orthonormal camera rows
    in the least-squares sense, and each 2x3 block is projected to the
    nearest orthographic camera.
    """
    obs = W if isinstance(W, MaskedObservations) else MaskedObservations(W, np.ones_like(W) if Z is None else Z)
    counts = point_visibility(obs).sum(axis=1)
    if np.any(counts < 3):
        raise DegenerateDataError("every frame needs at least three observed points")
    obs = center_frames(obs)
    Wf = fill_missing_with_point_means(obs)
    Wf -= Wf.mean(axis=1, keepdims=True)
    F = Wf.shape[0] // 2

    U, sv, Vt = np.linalg.svd(Wf, full_matrices=False)
    if sv.size < 3 or sv[2] <= 1e-10 * sv[0]:
        raise DegenerateDataError("measurement matrix has rank < 3")
    M = U[:, :3] * np.sqrt(sv[:3])
    shape = np.sqrt(sv[:3])[:, None] * Vt[:3]

    Q = _metric_upgrade(M)
    M = M @ Q
    shape = np.linalg.solve(Q, shape)
    R = np.stack([nearest_orthographic(M[2 * i:2 * i + 2]) for i in range(F)])
    cams = CameraSequence.from_rotations(R)
    if return_shape:
        return cams, shape
    return cams


def _sym_coeffs(a, b):
    """Coefficients of ``a^T L b`` in the 6 unique entries of symmetric L."""
    return np.array([a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[0] * b[2] + a[2] * b[0],
                     a[1] * b[1], a[1] * b[2] + a[2] * b[1], a[2] * b[2]])


def _metric_upgrade(M):
    rows, rhs = [], []
    for i in range(M.shape[0] // 2):
        a, b = M[2 * i], M[2 * i + 1]
        rows += [_sym_coeffs(a, a), _sym_coeffs(b, b), _sym_coeffs(a, b)]
        rhs += [1.0, 1.0, 0.0]
    l = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    L = np.array([[l[0], l[1], l[2]], [l[1], l[3], l[4]], [l[2], l[4], l[5]]])
    w, V = np.linalg.eigh(L)
    # nearest PD matrix keeps the upgrade real for noisy or non-rigid tracks
    w = np.maximum(w, 1e-8 * max(w.max(), 1e-12))
    return V * np.sqrt(w)
