"""Linear trace-norm baseline (TNH): ``min_X tau ||X||_* + f(X)``.

Solved by monotone accelerated proximal gradient with a continuation on the threshold: the
threshold starts at the spectral norm of the initial gradient and shrinks
geometrically towards ``tau``. Within each continuation stage the objective
(at that stage's threshold) is nonincreasing. For fixed cameras the NRSfM
problem and plain masked completion share this solver; in NRSfM the matrix
being regularized is the 3N x F sample matrix (frames as samples).
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, NumericalFailureError
from .losses import (CompletionLoss, MaskedObservations, NRSfMLoss,
                     samples_to_shapes)

log = logging.getLogger(__name__)


def svt(M, mu):
    """Singular value soft-thresholding, the prox of ``mu ||.||_*``."""
    M = np.asarray(M, dtype=float)
    if mu < 0:
        raise InvalidInputError("threshold must be >= 0")
    if mu == 0:
        return M.copy()
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - mu, 0.0)
    k = np.count_nonzero(s)
    return (U[:, :k] * s[:k]) @ Vt[:k]


def nuclear_norm(M):
    return float(np.linalg.svd(M, compute_uv=False).sum())


def lipschitz_estimate(loss, shape, iters=50, seed=0):
    """Largest eigenvalue of ``2 J^T J`` by power iteration."""
    J = loss.jacobian(np.zeros(shape))
    v = np.random.default_rng(seed).normal(size=J.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = J.T @ (J @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return 2.0 * lam * 1.01


@dataclass
class TNHResult:
    X: np.ndarray
    objective: float
    log: list = field(default_factory=list)  # (threshold, objective) per iteration
    iterations: int = 0
    stages: int = 0


def _gradient(loss, X):
    """Gradient of the squared residual sum, as a matrix shaped like X."""
    r = loss.residuals(X)
    g = 2.0 * (loss.jacobian(X).T @ r)
    return g.reshape(X.shape[1], X.shape[0]).T


def tnh_minimize(loss, tau, X0=None, iters=20000, shrink=0.5, stage_tol=1e-8):
    """Minimize ``tau ||X||_* + loss(X)`` over the loss's sample matrix.

    Accelerated proximal gradient with restarts: a trial point that would
    increase the objective is discarded and the momentum reset, so the logged
    objective is nonincreasing within each continuation stage. A stage ends
    when the proximal-gradient step is small relative to the iterate.
    """
    if not tau > 0:
        raise InvalidInputError("tau must be > 0")
    shape = loss.shape
    X = np.zeros(shape) if X0 is None else np.array(X0, dtype=float)
    L = lipschitz_estimate(loss, shape)
    if L <= 0:
        return TNHResult(np.zeros(shape), 0.0)
    step = 1.0 / L

    g0 = _gradient(loss, X)
    mu = max(np.linalg.norm(g0, 2) * 0.5, tau)
    history = []
    total = 0
    stages = 0
    while True:
        stages += 1
        final = mu <= tau
        tol = stage_tol if final else 10 * stage_tol
        obj = mu * nuclear_norm(X) + loss.value(X)
        Y, t = X, 1.0
        while total < iters:
            total += 1
            Z = svt(Y - step * _gradient(loss, Y), step * mu)
            z_obj = mu * nuclear_norm(Z) + loss.value(Z)
            if not np.isfinite(z_obj):
                raise NumericalFailureError("TNH objective became non-finite")
            if z_obj > obj:
                if Y is not X:
                    # momentum overshot: restart from the last accepted iterate
                    Y, t = X, 1.0
                    continue
                if z_obj - obj > 1e-9 * max(1.0, abs(obj)):
                    raise NumericalFailureError("TNH step increased the objective; "
                                                "Lipschitz estimate too small")
                break  # stalled at round-off level
            gap = np.linalg.norm(Z - Y)
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            Y = Z + ((t - 1.0) / t_next) * (Z - X)
            X, obj, t = Z, z_obj, t_next
            history.append((mu, obj))
            if gap <= tol * max(1.0, np.linalg.norm(Z)):
                break
        if final or total >= iters:
            break
        mu = max(mu * shrink, tau)
    final_obj = tau * nuclear_norm(X) + loss.value(X)
    return TNHResult(X, final_obj, history, total, stages)


def tnh_solve(W, Z, cameras, tau, iters=20000, return_result=False):
    """TNH on 2F x N tracks with fixed cameras, or plain completion when
    ``cameras`` is None. Returns the 3F x N shape matrix (or the completed
    matrix)."""
    obs = W if isinstance(W, MaskedObservations) else MaskedObservations(W, Z)
    if cameras is None:
        loss = CompletionLoss(obs)
        res = tnh_minimize(loss, tau, iters=iters)
        out = res.X
    else:
        loss = NRSfMLoss(obs, cameras)
        res = tnh_minimize(loss, tau, iters=iters)
        out = samples_to_shapes(res.X)
    if return_result:
        return out, res
    return out
