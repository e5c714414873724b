"""Closed-form robust dimensionality reduction in feature space.

Given a PSD kernel matrix ``K = U diag(lam) U^T`` the problem

    min_C  (rho/2) ||K - C^T C||_F^2 + tau ||C||_*

is solved by ``C = diag(g) U^T`` where each ``g_i`` minimizes the scalar
objective ``(rho/2)(lam_i - g^2)^2 + tau g`` over ``g >= 0``. The candidates
are zero and the nonnegative roots of ``x^3 - lam_i x + tau/(2 rho)``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .kernelcore import clamp_psd, sym_eig

RANK_TOL = 1e-9


@dataclass(frozen=True)
class ShrinkageParams:
    tau: float
    rho: float = 1.0

    def __post_init__(self):
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise InvalidInputError(f"tau must be >= 0, got {self.tau}")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise InvalidInputError(f"rho must be > 0, got {self.rho}")


@dataclass
class FeatureBasis:
    """Low-rank feature-space representation ``C = diag(spectrum) basis^T``."""

    spectrum: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray = field(default=None)  # clamped input spectrum
    objective: float = float("nan")

    @property
    def C(self):
        return self.spectrum[:, None] * self.basis.T

    def gram(self):
        """``C^T C`` assembled without forming C."""
        return (self.basis * self.spectrum**2) @ self.basis.T

    @property
    def nuclear_norm(self):
        return float(self.spectrum.sum())

    @property
    def effective_rank(self):
        top = self.spectrum.max(initial=0.0)
        if top <= 0:
            return 0
        return int(np.count_nonzero(self.spectrum > RANK_TOL * top))


def depressed_cubic_real_roots(p, q):
    """Real roots of ``x^3 + p x + q``, ascending, repeated roots collapsed."""
    p = float(p)
    q = float(q)
    if p == 0.0 and q == 0.0:
        return [0.0]
    if p == 0.0:
        return [-math.copysign(abs(q) ** (1.0 / 3.0), q)]
    # x = s y keeps the coefficients O(1) so the discriminant cannot under/overflow
    s = max(math.sqrt(abs(p)), abs(q) ** (1.0 / 3.0))
    return [s * r for r in _unit_cubic_roots(p / s / s, q / s / s / s)]


def _unit_cubic_roots(p, q):
    disc = -4.0 * p**3 - 27.0 * q**2
    if abs(disc) <= 1e-13:
        # merged pair: simple root 3q/p, double root -3q/(2p)
        roots = [3.0 * q / p, -1.5 * q / p]
    elif disc > 0:
        # three distinct real roots (p < 0 here)
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        # one real root; cancellation-free Cardano
        h = math.sqrt(q * q / 4.0 + p**3 / 27.0)
        a = -math.copysign(np.cbrt(abs(q) / 2.0 + h), q)
        b = -p / (3.0 * a) if a != 0.0 else 0.0
        roots = [a + b]

    polished = []
    for r in roots:
        fr = r * r * r + p * r + q
        for _ in range(2):
            d = 3.0 * r * r + p
            if d == 0.0:
                break
            trial = r - fr / d
            ft = trial * trial * trial + p * trial + q
            # near a double root the derivative vanishes; keep only improving steps
            if not abs(ft) < abs(fr):
                break
            r, fr = trial, ft
        polished.append(r)
    polished.sort()

    out = []
    for r in polished:
        if out and abs(r - out[-1]) <= 1e-12 * max(1.0, abs(r)):
            continue
        out.append(r)
    return out


def shrinkage_objective(gamma, lam, params):
    return 0.5 * params.rho * (lam - gamma * gamma) ** 2 + params.tau * gamma


def shrink_eigenvalue(lam, params):
    """Optimal nonnegative feature-space singular value for eigenvalue ``lam``.

    Ties between candidates go to the smaller value.
    """
    lam = max(float(lam), 0.0)
    candidates = [0.0]
    candidates += [r for r in depressed_cubic_real_roots(-lam, params.tau / (2.0 * params.rho)) if r > 0]
    best = 0.0
    best_val = shrinkage_objective(0.0, lam, params)
    for c in sorted(candidates[1:]):
        val = shrinkage_objective(c, lam, params)
        if val < best_val:
            best, best_val = c, val
    return best


def robust_kpca(K, params):
    eig = sym_eig(K)
    lam = clamp_psd(eig.eigenvalues)
    spectrum = np.array([shrink_eigenvalue(l, params) for l in lam])
    objective = float(np.sum(shrinkage_objective(spectrum, lam, params)))
    return FeatureBasis(spectrum=spectrum, basis=eig.eigenvectors,
                        eigenvalues=lam, objective=objective)


def feature_objective(K, basis, params):
    """Direct evaluation of ``(rho/2)||K - C^T C||_F^2 + tau ||C||_*``."""
    resid = np.asarray(K, dtype=float) - basis.gram()
    return 0.5 * params.rho * float(np.sum(resid**2)) + params.tau * basis.nuclear_norm


def truncated_kpca(K, rank):
    """Plain kernel PCA basis keeping the ``rank`` largest eigenvalues."""
    eig = sym_eig(K)
    lam = clamp_psd(eig.eigenvalues)
    if not 0 <= rank <= lam.size:
        raise InvalidInputError(f"rank must lie in [0, {lam.size}]")
    order = np.argsort(lam)[::-1]
    spectrum = np.zeros_like(lam)
    spectrum[order[:rank]] = np.sqrt(lam[order[:rank]])
    return FeatureBasis(spectrum=spectrum, basis=eig.eigenvectors, eigenvalues=lam)
