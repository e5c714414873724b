"""Levenberg-Marquardt least squares and the pre-image (S-update) subproblem.

The S-update minimizes

    f(W, S) + (rho/2) ||K(S) - C^T C||_F^2

jointly over all columns of S. Variables are flattened column by column, so
sample ``k`` occupies ``x[k*d:(k+1)*d]``.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import InvalidInputError
from .kernelcore import as_data_matrix, kernel_matrix, pair_gradients

log = logging.getLogger(__name__)


@dataclass
class LMConfig:
    max_iters: int = 100
    initial_damping: float = 1e-3  # relative to the largest curvature entry
    damping_up: float = 10.0
    damping_down: float = 0.1
    step_tol: float = 1e-9
    rel_obj_tol: float = 1e-8
    # above this many variables the damped system is solved by preconditioned CG
    dense_limit: int = 2500
    cg_maxiter: int = 300

    def __post_init__(self):
        for name in ("max_iters", "initial_damping", "damping_up", "damping_down",
                     "step_tol", "rel_obj_tol", "dense_limit", "cg_maxiter"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"LMConfig.{name} must be positive")


@dataclass
class ResidualProblem:
    """Residual vector ``r(x)`` with optional Jacobian and Gauss-Newton hooks.

    ``normal(x, r)`` may return ``(H, g)`` with ``H ~ J^T J`` (a dense array or
    an object with ``solve_damped``/``max_diag``) and ``g = J^T r``. Without
    either hook the Jacobian is approximated by forward differences.
    """

    n: int
    m: int
    residuals: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], object]] = None
    normal: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None

    def jac(self, x):
        if self.jacobian is not None:
            return self.jacobian(x)
        return forward_difference_jacobian(self.residuals, x)

    def gauss_newton(self, x, r):
        if self.normal is not None:
            return self.normal(x, r)
        J = self.jac(x)
        if sp.issparse(J):
            return DenseNormal((J.T @ J).toarray()), np.asarray(J.T @ r).ravel()
        return DenseNormal(J.T @ J), J.T @ r


@dataclass
class LMIteration:
    iteration: int
    objective: float
    damping: float
    step_norm: float
    rejected: int


@dataclass
class LMResult:
    x: np.ndarray
    objective: float
    log: list = field(default_factory=list)
    reason: str = ""

    @property
    def iterations(self):
        return len(self.log) - 1


def forward_difference_jacobian(fun, x, r0=None):
    x = np.asarray(x, dtype=float)
    if r0 is None:
        r0 = fun(x)
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += h
        J[:, i] = (fun(xp) - r0) / h
    return J


class DenseNormal:
    def __init__(self, H):
        self.H = np.asarray(H, dtype=float)

    def max_diag(self):
        return float(np.max(np.diag(self.H), initial=0.0))

    def solve_damped(self, g, mu, cfg):
        A = self.H + mu * np.eye(self.H.shape[0])
        try:
            return sla.cho_solve(sla.cho_factor(A, check_finite=False), g)
        except (np.linalg.LinAlgError, ValueError):
            return np.linalg.lstsq(A, g, rcond=None)[0]


class KernelPenaltyNormal:
    """Gauss-Newton matrix of the data term plus the kernel penalty.

    ``H = H_data + rho * (delta_kl sum_j A_kj A_kj^T + A_kl A_lk^T)`` in d x d
    blocks, with ``A`` from :func:`pair_gradients`.
    """

    def __init__(self, H_data, A, rho):
        self.H_data = H_data
        self.A = A
        self.rho = rho
        self.N, _, self.d = A.shape
        self.n = self.N * self.d
        self._blocks = None

    def dense(self):
        A, N, d = self.A, self.N, self.d
        H = self.rho * np.einsum("kla,lkb->kalb", A, A)
        own = self.rho * np.einsum("kja,kjb->kab", A, A)
        for k in range(N):
            H[k, :, k, :] += own[k]
        H = H.reshape(self.n, self.n)
        if self.H_data is not None:
            H += self.H_data.toarray() if sp.issparse(self.H_data) else self.H_data
        return H

    def matvec(self, v):
        V = v.reshape(self.N, self.d)
        t = np.einsum("kja,ka->kj", self.A, V)
        out = self.rho * np.einsum("kj,kja->ka", t + t.T, self.A).ravel()
        if self.H_data is not None:
            out += self.H_data @ v
        return out

    def diag_blocks(self):
        if self._blocks is None:
            A, d = self.A, self.d
            blocks = self.rho * (np.einsum("kja,kjb->kab", A, A)
                                 + np.einsum("kka,kkb->kab", A, A))
            if self.H_data is not None:
                Hd = sp.coo_matrix(self.H_data)
                keep = Hd.row // d == Hd.col // d
                np.add.at(blocks, (Hd.row[keep] // d, Hd.row[keep] % d, Hd.col[keep] % d),
                          Hd.data[keep])
            self._blocks = blocks
        return self._blocks

    def max_diag(self):
        return float(np.max(np.diagonal(self.diag_blocks(), axis1=1, axis2=2), initial=0.0))

    def solve_damped(self, g, mu, cfg):
        if self.n <= cfg.dense_limit:
            return DenseNormal(self.dense()).solve_damped(g, mu, cfg)
        blocks = self.diag_blocks() + mu * np.eye(self.d)
        inv = np.linalg.inv(blocks)
        d = self.d

        def precond(v):
            return np.einsum("kab,kb->ka", inv, v.reshape(self.N, d)).ravel()

        op = LinearOperator((self.n, self.n), matvec=lambda v: self.matvec(v) + mu * v)
        M = LinearOperator((self.n, self.n), matvec=precond)
        x, _ = cg(op, g, rtol=1e-10, maxiter=cfg.cg_maxiter, M=M)
        return x


def lm_minimize(prob, x0, cfg=None):
    """Minimize ``0.5 ||r(x)||^2`` by Levenberg-Marquardt.

    Only steps that strictly decrease the objective are accepted, so the
    returned iterate is the best one seen. Non-finite trial points count as
    rejected steps.
    """
    cfg = cfg or LMConfig()
    x = np.array(x0, dtype=float).ravel()
    if x.size != prob.n or not np.all(np.isfinite(x)):
        raise InvalidInputError("invalid start: x0 must be finite with length n")
    r = np.asarray(prob.residuals(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise InvalidInputError("invalid start: residuals are not finite at x0")
    obj = 0.5 * float(r @ r)
    history = [LMIteration(0, obj, 0.0, 0.0, 0)]
    if obj == 0.0:
        return LMResult(x, obj, history, "zero-residual")

    mu = None
    reason = "max-iters"
    for it in range(1, cfg.max_iters + 1):
        H, g = prob.gauss_newton(x, r)
        if not np.any(g):
            reason = "zero-gradient"
            break
        if mu is None:
            mu = cfg.initial_damping * max(H.max_diag(), 1e-12)
        rejected = 0
        while True:
            delta = -H.solve_damped(g, mu, cfg)
            x_new = x + delta
            r_new = np.asarray(prob.residuals(x_new), dtype=float)
            obj_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if obj_new < obj:
                break
            rejected += 1
            mu *= cfg.damping_up
            if mu > 1e30 or rejected > 60:
                delta = None
                break
        if delta is None:
            reason = "damping-limit"
            break
        step = float(np.linalg.norm(delta))
        decrease = obj - obj_new
        x, r, obj = x_new, r_new, obj_new
        mu *= cfg.damping_down
        history.append(LMIteration(it, obj, mu, step, rejected))
        if step <= cfg.step_tol * (np.linalg.norm(x) + cfg.step_tol):
            reason = "step-tol"
            break
        if decrease <= cfg.rel_obj_tol * (obj + decrease):
            reason = "objective-tol"
            break
        if obj == 0.0:
            reason = "zero-residual"
            break
    return LMResult(x, obj, history, reason)


def _upper_pairs(N):
    iu, ju = np.triu_indices(N)
    w = np.where(iu == ju, 1.0, np.sqrt(2.0))
    return iu, ju, w


def kernel_penalty_residuals(S, target, kernel, rho):
    """Upper-triangle residuals ``sqrt(rho/2) w_ij (K(S)_ij - target_ij)``.

    Off-diagonal weights are sqrt(2) so the squared sum equals
    ``(rho/2) ||K(S) - target||_F^2``.
    """
    K = kernel_matrix(S, kernel)
    iu, ju, w = _upper_pairs(K.shape[0])
    return np.sqrt(0.5 * rho) * w * (K - target)[iu, ju]


def kernel_penalty_jacobian(S, kernel, rho):
    S = as_data_matrix(S)
    d, N = S.shape
    A = pair_gradients(S, kernel)
    iu, ju, w = _upper_pairs(N)
    c = np.sqrt(0.5 * rho) * w
    rows = np.arange(iu.size)
    cols_i = iu[:, None] * d + np.arange(d)
    cols_j = ju[:, None] * d + np.arange(d)
    diag = iu == ju
    vals_i = c[:, None] * A[iu, ju]
    vals_j = c[:, None] * A[ju, iu]
    # on the diagonal both arguments are the same sample
    vals_i[diag] += vals_j[diag]
    vals_j[diag] = 0.0
    data = np.concatenate([vals_i.ravel(), vals_j.ravel()])
    r = np.concatenate([np.repeat(rows, d), np.repeat(rows, d)])
    cidx = np.concatenate([cols_i.ravel(), cols_j.ravel()])
    return sp.csr_matrix((data, (r, cidx)), shape=(iu.size, d * N))


def subproblem(loss, target, shape, kernel, rho):
    """Residual problem for the S-update with fixed ``target = C^T C``."""
    d, N = shape
    n = d * N
    m_pen = N * (N + 1) // 2 if rho > 0 else 0

    def unflat(x):
        return x.reshape(N, d).T

    def residuals(x):
        X = unflat(x)
        parts = [loss.residuals(X)]
        if rho > 0:
            parts.append(kernel_penalty_residuals(X, target, kernel, rho))
        return np.concatenate(parts)

    def jacobian(x):
        X = unflat(x)
        blocks = [loss.jacobian(X)]
        if rho > 0:
            blocks.append(kernel_penalty_jacobian(X, kernel, rho))
        return sp.vstack(blocks).tocsr()

    def normal(x, r):
        X = unflat(x)
        Jd = loss.jacobian(X)
        m_data = Jd.shape[0]
        H_data = (Jd.T @ Jd).tocsr()
        g = np.asarray(Jd.T @ r[:m_data]).ravel()
        if rho <= 0:
            return KernelPenaltyNormal(H_data, np.zeros((N, N, d)), 0.0), g
        K = kernel_matrix(X, kernel)
        A = pair_gradients(X, kernel, K)
        D = K - target
        g = g + rho * np.einsum("kj,kja->ka", D, A).ravel()
        return KernelPenaltyNormal(H_data, A, rho), g

    m = loss.residual_count + m_pen
    return ResidualProblem(n, m, residuals, jacobian, normal), unflat


def solve_subproblem_S(loss, basis, S0, kernel, rho, cfg=None):
    """Update S for fixed C. Returns ``(S, LMResult)``.

    ``rho = 0`` decouples the problem into the plain data fit.
    """
    S0 = as_data_matrix(S0)
    if rho < 0:
        raise InvalidInputError("rho must be >= 0")
    target = basis.gram() if basis is not None else np.zeros((S0.shape[1],) * 2)
    prob, unflat = subproblem(loss, target, S0.shape, kernel, rho)
    res = lm_minimize(prob, S0.T.ravel(), cfg)
    return unflat(res.x).copy(), res
