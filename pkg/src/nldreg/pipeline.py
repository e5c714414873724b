"""Penalty-method alternation between the closed-form C-step and the
pre-image S-step, with the penalty weight rho escalated stage by stage.

The energy being decreased at a fixed rho is

    E(S, C) = f(W, S) + (rho/2) ||K(S) - C^T C||_F^2 + tau ||C||_*
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .cfsolver import ShrinkageParams, robust_kpca
from .errors import InvalidInputError, NumericalFailureError
from .kernelcore import as_data_matrix, kernel_matrix
from .preimage import LMConfig, solve_subproblem_S

log = logging.getLogger(__name__)

BETA_MAX = 64.0  # cap on the extrapolation factor


@dataclass(frozen=True)
class PenaltySchedule:
    rho0: float = 1.0
    rho_max: float = 1e4
    rho_scale: float = 10.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise InvalidInputError("rho0 must be > 0")
        if not self.rho_scale > 1:
            raise InvalidInputError("rho_scale must be > 1")
        if not self.rho_max >= self.rho0:
            raise InvalidInputError("rho_max must be >= rho0")

    @classmethod
    def relative(cls, tau, start=100.0, span=1e4, rho_scale=10.0):
        """Penalty ladder from ``start * tau`` spanning a factor ``span``."""
        return cls(start * tau, start * tau * span, rho_scale)

    def rhos(self):
        out = []
        rho = self.rho0
        while rho <= self.rho_max * (1 + 1e-12):
            out.append(rho)
            rho *= self.rho_scale
        return out


@dataclass
class StageRecord:
    rho: float
    energies: list = field(default_factory=list)  # (inner, step, energy), step in {"C", "S", "X"}
    constraint_residual: float = float("nan")
    inner_iterations: int = 0
    lm_iterations: int = 0
    extrapolations: int = 0
    converged: bool = False


@dataclass
class SolveReport:
    S: np.ndarray
    basis: object
    kernel: object
    tau: float
    stages: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def constraint_residuals(self):
        return [s.constraint_residual for s in self.stages]

    @property
    def final_energy(self):
        return self.stages[-1].energies[-1][2] if self.stages else float("nan")

    def energy_trace(self):
        return [(k, inner, step, e) for k, st in enumerate(self.stages)
                for inner, step, e in st.energies]

    def summary(self):
        """JSON-ready summary without the large arrays."""
        return {
            "tau": self.tau,
            "kernel": {"family": self.kernel.family.value, "gamma": self.kernel.gamma},
            "wall_time": self.wall_time,
            "stages": [asdict(s) for s in self.stages],
            "constraint_residuals": self.constraint_residuals,
            "effective_rank": self.basis.effective_rank if self.basis is not None else None,
        }


def constraint_residual(S, basis, kernel):
    return float(np.linalg.norm(kernel_matrix(S, kernel) - basis.gram()))


def energy(loss, S, basis, kernel, tau, rho):
    S = as_data_matrix(S)
    if S.shape != tuple(loss.shape):
        raise InvalidInputError(f"S {S.shape} does not match loss shape {loss.shape}")
    N = S.shape[1]
    if basis.basis.shape != (N, N):
        raise InvalidInputError("feature basis does not match the number of samples")
    D = kernel_matrix(S, kernel) - basis.gram()
    return loss.value(S) + 0.5 * rho * float(np.sum(D * D)) + tau * basis.nuclear_norm


def regularized_solve(loss, S0, kernel, tau, schedule=None, inner_tol=1e-6,
                      max_inner=100, lm=None, max_stages=None, callback=None,
                      extrapolate=True):
    """Run the alternation from the initial estimate ``S0``.

    Each inner iteration does the C-step (closed form) then the S-step (LM).
    A stage ends when the relative energy decrease of a full inner iteration
    drops below ``inner_tol`` or after ``max_inner`` iterations.

    With ``extrapolate`` set, each S-step is followed by a trial move along
    the last displacement, S + beta (S - S_prev). The trial is kept only if
    it lowers the energy with C re-solved in closed form, so the energy trace
    stays nonincreasing. beta grows after each success and resets on failure.
    """
    schedule = schedule or PenaltySchedule()
    lm = lm or LMConfig(max_iters=2)
    S = as_data_matrix(S0).copy()
    if S.shape != tuple(loss.shape):
        raise InvalidInputError(f"S0 {S.shape} does not match loss shape {loss.shape}")
    rhos = schedule.rhos()
    if max_stages is not None:
        rhos = rhos[:max_stages]

    t0 = time.perf_counter()
    report = SolveReport(S, None, kernel, tau)
    basis = None
    for rho in rhos:
        params = ShrinkageParams(tau, rho)
        stage = StageRecord(rho)
        prev = math.inf
        beta = 1.0
        basis = robust_kpca(kernel_matrix(S, kernel), params)
        for inner in range(1, max_inner + 1):
            e_c = _checked_energy(loss, S, basis, kernel, tau, rho, "C", inner)
            S_prev = S
            S, res = solve_subproblem_S(loss, basis, S, kernel, rho, lm)
            e_s = _checked_energy(loss, S, basis, kernel, tau, rho, "S", inner)
            stage.energies += [(inner, "C", e_c), (inner, "S", e_s)]
            basis = robust_kpca(kernel_matrix(S, kernel), params)
            if extrapolate:
                e_new = energy(loss, S, basis, kernel, tau, rho)
                trial = S + beta * (S - S_prev)
                trial_basis = robust_kpca(kernel_matrix(trial, kernel), params)
                e_trial = energy(loss, trial, trial_basis, kernel, tau, rho)
                if e_trial < e_new:
                    S, basis, e_s = trial, trial_basis, e_trial
                    stage.energies.append((inner, "X", e_trial))
                    stage.extrapolations += 1
                    beta = min(2.0 * beta, BETA_MAX)
                else:
                    beta = 1.0
            stage.lm_iterations += res.iterations
            stage.inner_iterations = inner
            if callback is not None:
                callback(rho, inner, S, basis, e_s)
            if e_s == 0.0 or (math.isfinite(prev) and prev - e_s <= inner_tol * abs(prev)):
                stage.converged = True
                break
            prev = e_s
        stage.constraint_residual = constraint_residual(S, basis, kernel)
        log.info("rho=%g: %d inner iterations, energy %.6g, constraint residual %.3g",
                 rho, stage.inner_iterations, stage.energies[-1][2], stage.constraint_residual)
        report.stages.append(stage)

    report.S = S
    report.basis = basis
    report.wall_time = time.perf_counter() - t0
    return report


def _checked_energy(loss, S, basis, kernel, tau, rho, step, inner):
    e = energy(loss, S, basis, kernel, tau, rho)
    if not np.isfinite(e):
        raise NumericalFailureError(
            f"non-finite energy after {step}-step {inner} at rho={rho}: "
            f"loss={loss.value(S)!r}, nuclear norm={basis.nuclear_norm!r}")
    return e


@dataclass
class NRSfMReport:
    shapes: np.ndarray  # 3F x N
    cameras: object
    rounds: list = field(default_factory=list)  # SolveReport per outer round
    init_shapes: np.ndarray = None
    wall_time: float = 0.0

    def summary(self):
        return {
            "rounds": [r.summary() for r in self.rounds],
            "camera_flags": list(self.cameras.flags),
            "wall_time": self.wall_time,
        }


def nrsfm_solve(obs, tau, cameras=None, kernel=None, width="dmed", schedule=None,
                outer=5, refine=True, init_tau=1e-7, init_iters=20000, lm=None,
                inner_tol=1e-6, max_inner=20, max_stages=None):
    """Kernel-regularized NRSfM with shape and camera alternation.

    Cameras default to the rigid factorization estimate. Shapes start from the
    linear trace-norm solution at ``init_tau``; the RBF width is then picked
    from that estimate unless ``kernel`` is given. Each outer round runs the
    penalty method on the shapes and, when ``refine`` is set, re-fits every
    camera by LM. With ``refine=False`` a single round is run.

    The default penalty ladder starts at ``100 tau``. Depth is unobserved, so
    the shapes drift towards the regularizer at a rate set by tau/rho; a ladder
    starting at rho = 1 leaves the linear initialization almost untouched,
    while rho = tau lets the RBF shrinkage pull occluded points apart.
    """
    from .kernelcore import KernelModel, select_width
    from .problems import (NRSfMLoss, refine_cameras, rigid_factorization_init,
                           samples_to_shapes, shapes_to_samples, tnh_solve)

    t0 = time.perf_counter()
    if cameras is None:
        cameras = rigid_factorization_init(obs)
    S = tnh_solve(obs, None, cameras, init_tau, iters=init_iters)
    init = S.copy()
    if kernel is None:
        kernel = KernelModel.rbf(select_width(shapes_to_samples(S), width))
    if schedule is None:
        schedule = PenaltySchedule.relative(tau)
    if lm is None:
        lm = LMConfig(max_iters=5)
    report = NRSfMReport(S, cameras, init_shapes=init)
    for k in range(outer if refine else 1):
        loss = NRSfMLoss(obs, cameras)
        rep = regularized_solve(loss, shapes_to_samples(S), kernel, tau, schedule,
                                inner_tol=inner_tol, max_inner=max_inner, lm=lm,
                                max_stages=max_stages)
        S = samples_to_shapes(rep.S)
        report.rounds.append(rep)
        if refine:
            cameras = refine_cameras(obs, None, S, cameras)
        log.info("outer round %d: final energy %.6g", k, rep.final_energy)
    report.shapes = S
    report.cameras = cameras
    report.wall_time = time.perf_counter() - t0
    return report
