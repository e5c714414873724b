import json

import numpy as np
import pytest

from nldreg.cfsolver import FeatureBasis, ShrinkageParams, robust_kpca
from nldreg.errors import InvalidInputError
from nldreg.kernelcore import KernelModel, kernel_matrix
from nldreg.pipeline import (PenaltySchedule, constraint_residual, energy,
                             nrsfm_solve, regularized_solve)
from nldreg.preimage import LMConfig
from nldreg.problems import CompletionLoss, MaskedObservations
from nldreg.synth import synth_completion, synth_nrsfm

FAST = LMConfig(max_iters=5)


def test_schedule():
    assert PenaltySchedule().rhos() == pytest.approx([1, 10, 100, 1e3, 1e4])
    assert PenaltySchedule(2.0, 2.0).rhos() == [2.0]
    for bad in [dict(rho0=0), dict(rho_scale=1.0), dict(rho0=10, rho_max=1)]:
        with pytest.raises(InvalidInputError):
            PenaltySchedule(**bad)


def test_relative_schedule():
    sched = PenaltySchedule.relative(1e-4)
    assert sched.rhos() == pytest.approx([1e-2, 1e-1, 1.0, 10.0, 100.0])
    assert PenaltySchedule.relative(2.0, start=1.0, span=10.0).rhos() == pytest.approx([2.0, 20.0])


def test_energy_examples():
    S = np.array([[0.0, 1.0]])
    loss = CompletionLoss(MaskedObservations(S, np.ones_like(S)))
    basis = FeatureBasis(np.array([1.0, 2.0]), np.eye(2))
    assert energy(loss, S, basis, KernelModel.rbf(1.0), 3.0, 0.0) == 9.0
    K = kernel_matrix(S, KernelModel.linear())
    exact = robust_kpca(K, ShrinkageParams(1e-300))
    assert energy(loss, S, exact, KernelModel.linear(), 0.0, 5.0) == pytest.approx(0.0, abs=1e-20)


def test_energy_matches_recomputation():
    rng = np.random.default_rng(0)
    S = rng.normal(size=(3, 6))
    obs = MaskedObservations(rng.normal(size=(3, 6)), rng.uniform(size=(3, 6)) > 0.3)
    k = KernelModel.rbf(0.4)
    basis = robust_kpca(kernel_matrix(S + 0.1, k), ShrinkageParams(0.2, 3.0))
    C = basis.C
    f = sum((obs.values[i, j] - S[i, j]) ** 2 for i in range(3) for j in range(6) if obs.mask[i, j])
    K = np.exp(-0.4 * ((S[:, :, None] - S[:, None, :]) ** 2).sum(0))
    expected = f + 1.5 * np.sum((K - C.T @ C) ** 2) + 0.7 * np.linalg.svd(C, compute_uv=False).sum()
    assert energy(CompletionLoss(obs), S, basis, k, 0.7, 3.0) == pytest.approx(expected, rel=1e-10)


def test_energy_shape_checks():
    S = np.zeros((2, 3))
    loss = CompletionLoss(MaskedObservations(S, np.ones_like(S)))
    with pytest.raises(InvalidInputError):
        energy(loss, np.zeros((3, 3)), FeatureBasis(np.ones(3), np.eye(3)), KernelModel.linear(), 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        energy(loss, S, FeatureBasis(np.ones(2), np.eye(2)), KernelModel.linear(), 1.0, 1.0)


def test_single_stage_vanishing_tau_keeps_exact_data():
    rng = np.random.default_rng(1)
    S0 = rng.normal(size=(3, 8))
    loss = CompletionLoss(MaskedObservations(S0, np.ones_like(S0)))
    k = KernelModel.rbf(0.3)
    rep = regularized_solve(loss, S0, k, 1e-12, PenaltySchedule(1.0, 1.0), lm=FAST)
    np.testing.assert_allclose(rep.S, S0, atol=1e-6)
    assert constraint_residual(rep.S, rep.basis, k) <= 1e-6
    assert len(rep.stages) == 1


def _small_completion():
    inst = synth_completion(25, 5, 0.25, seed=3)
    m = inst.obs.mask
    counts = m.sum(axis=1)
    S0 = np.where(m, inst.obs.values, (np.where(m, inst.obs.values, 0).sum(1) / counts)[:, None])
    return inst, S0


def test_stage_energy_nonincreasing_and_constraint_shrinks():
    inst, S0 = _small_completion()
    k = KernelModel.rbf(0.2)
    rep = regularized_solve(CompletionLoss(inst.obs), S0, k, 0.5, max_inner=15, lm=FAST)
    for st in rep.stages:
        es = [e for _, _, e in st.energies]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(es, es[1:]))
    res = rep.constraint_residuals
    assert res[-1] <= 0.1 * res[0]
    assert rep.final_energy == rep.stages[-1].energies[-1][2]
    json.dumps(rep.summary())


def test_plain_alternation_without_extrapolation():
    inst, S0 = _small_completion()
    k = KernelModel.rbf(0.2)
    loss = CompletionLoss(inst.obs)
    plain = regularized_solve(loss, S0, k, 0.5, max_inner=10, lm=FAST, extrapolate=False)
    assert all(st.extrapolations == 0 for st in plain.stages)
    assert all(step in "CS" for _, _, step, _ in plain.energy_trace())
    fast = regularized_solve(loss, S0, k, 0.5, max_inner=10, lm=FAST)
    assert sum(st.extrapolations for st in fast.stages) > 0
    # extrapolated trials are only kept when they lower the energy
    for st in fast.stages:
        es = [e for _, _, e in st.energies]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(es, es[1:]))


def test_callback_and_stage_cap():
    inst, S0 = _small_completion()
    seen = []
    rep = regularized_solve(CompletionLoss(inst.obs), S0, KernelModel.rbf(0.2), 0.5, max_inner=2,
                            max_stages=2, lm=FAST, callback=lambda rho, i, S, b, e: seen.append((rho, i)))
    assert [s.rho for s in rep.stages] == [1.0, 10.0]
    assert seen == [(1.0, 1), (1.0, 2), (10.0, 1), (10.0, 2)]


def test_initial_shape_mismatch():
    inst, S0 = _small_completion()
    with pytest.raises(InvalidInputError):
        regularized_solve(CompletionLoss(inst.obs), S0.T, KernelModel.rbf(0.2), 0.5)


def test_nrsfm_solve_with_camera_refinement():
    inst = synth_nrsfm(F=8, N=10, deformation_amplitude=0.3, seed=2, camera_step=0.3)
    rep = nrsfm_solve(inst.obs, 1e-2, outer=2, lm=FAST, max_inner=3,
                      schedule=PenaltySchedule(1.0, 10.0))
    assert len(rep.rounds) == 2
    assert rep.shapes.shape == inst.shapes.shape
    for P in rep.cameras.rotations:
        np.testing.assert_allclose(P @ P.T, np.eye(2), atol=1e-12)
    json.dumps(rep.summary())
