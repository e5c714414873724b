import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nldreg.cfsolver import ShrinkageParams, robust_kpca
from nldreg.errors import InvalidInputError
from nldreg.kernelcore import KernelModel, kernel_matrix, pair_gradients
from nldreg.preimage import (KernelPenaltyNormal, LMConfig, ResidualProblem,
                             kernel_penalty_jacobian, kernel_penalty_residuals,
                             lm_minimize, solve_subproblem_S, subproblem)
from nldreg.problems import CompletionLoss, MaskedObservations

from .oracles import forward_difference_jacobian


def rosenbrock():
    return ResidualProblem(
        2, 2,
        lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]),
        lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]]))


def test_lm_linear_matches_lstsq():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(30, 5))
    b = rng.normal(size=30)
    prob = ResidualProblem(5, 30, lambda x: A @ x - b, lambda x: A)
    res = lm_minimize(prob, np.zeros(5))
    np.testing.assert_allclose(res.x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-8)


def test_lm_rosenbrock():
    res = lm_minimize(rosenbrock(), np.array([-1.2, 1.0]), LMConfig(max_iters=200))
    assert res.objective < 1e-12
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_lm_finite_difference_fallback():
    prob = rosenbrock()
    prob.jacobian = None
    res = lm_minimize(prob, np.array([-1.2, 1.0]), LMConfig(max_iters=200))
    assert res.objective < 1e-10


def test_lm_accepted_steps_decrease():
    res = lm_minimize(rosenbrock(), np.array([-1.2, 1.0]), LMConfig(max_iters=200))
    objs = [it.objective for it in res.log]
    assert all(b < a for a, b in zip(objs, objs[1:]))
    assert res.iterations == len(objs) - 1


def test_lm_zero_residual_start():
    res = lm_minimize(rosenbrock(), np.array([1.0, 1.0]))
    assert res.reason == "zero-residual"
    assert res.iterations == 0


def test_lm_rejects_bad_start():
    with pytest.raises(InvalidInputError):
        lm_minimize(rosenbrock(), np.array([np.nan, 1.0]))
    with pytest.raises(InvalidInputError):
        lm_minimize(rosenbrock(), np.zeros(3))


def test_lm_config_validation():
    with pytest.raises(InvalidInputError):
        LMConfig(max_iters=0)


@pytest.mark.parametrize("kernel", [KernelModel.rbf(0.7), KernelModel.linear()])
def test_penalty_jacobian_matches_finite_differences(kernel):
    rng = np.random.default_rng(1)
    d, N, rho = 2, 5, 3.0
    S = rng.normal(size=(d, N))
    T = rng.normal(size=(N, N))
    T = T + T.T

    def fun(x):
        return kernel_penalty_residuals(x.reshape(N, d).T, T, kernel, rho)

    J = kernel_penalty_jacobian(S, kernel, rho).toarray()
    J_fd = forward_difference_jacobian(fun, S.T.ravel())
    np.testing.assert_allclose(J, J_fd, rtol=1e-4, atol=1e-4 * np.abs(J).max())


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(1, 4), st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_penalty_residual_weighting(N, d, rho, seed):
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(d, N))
    T = rng.normal(size=(N, N))
    T = T + T.T
    r = kernel_penalty_residuals(S, T, KernelModel.rbf(0.5), rho)
    D = kernel_matrix(S, KernelModel.rbf(0.5)) - T
    assert r.size == N * (N + 1) // 2
    np.testing.assert_allclose(r @ r, 0.5 * rho * np.sum(D * D), rtol=1e-10)


def _instance(seed=2, d=3, N=6, missing=0.3):
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(d, N))
    mask = rng.uniform(size=(d, N)) > missing
    return S, MaskedObservations(np.where(mask, S + 0.1 * rng.normal(size=S.shape), 0), mask)


def test_gauss_newton_matrix_matches_jacobian():
    S, obs = _instance()
    loss = CompletionLoss(obs)
    kernel = KernelModel.rbf(0.4)
    T = robust_kpca(kernel_matrix(S, kernel), ShrinkageParams(0.05, 2.0)).gram()
    prob, _ = subproblem(loss, T, S.shape, kernel, 2.0)
    x = S.T.ravel() + 0.01
    J = prob.jac(x).toarray()
    r = prob.residuals(x)
    H, g = prob.normal(x, r)
    np.testing.assert_allclose(H.dense(), J.T @ J, atol=1e-12)
    np.testing.assert_allclose(g, J.T @ r, atol=1e-12)
    v = np.random.default_rng(0).normal(size=x.size)
    np.testing.assert_allclose(H.matvec(v), J.T @ J @ v, atol=1e-12)


def test_dense_and_cg_solves_agree():
    rng = np.random.default_rng(3)
    d, N = 4, 30
    S = rng.normal(size=(d, N))
    A = pair_gradients(S, KernelModel.rbf(0.3))
    H = KernelPenaltyNormal(None, A, 10.0)
    g = rng.normal(size=d * N)
    mu = 1e-2 * H.max_diag()
    x_dense = H.solve_damped(g, mu, LMConfig(dense_limit=10_000))
    x_cg = H.solve_damped(g, mu, LMConfig(dense_limit=1, cg_maxiter=2000))
    np.testing.assert_allclose(x_cg, x_dense, rtol=1e-6, atol=1e-8 * np.abs(x_dense).max())


def test_rho_zero_is_plain_data_fit():
    S, obs = _instance()
    out, res = solve_subproblem_S(CompletionLoss(obs), None, S, KernelModel.rbf(1.0), 0.0)
    np.testing.assert_allclose(out[obs.mask], obs.values[obs.mask], atol=1e-8)
    np.testing.assert_array_equal(out[~obs.mask], S[~obs.mask])


def test_negative_rho_rejected():
    S, obs = _instance()
    with pytest.raises(InvalidInputError):
        solve_subproblem_S(CompletionLoss(obs), None, S, KernelModel.rbf(1.0), -1.0)


def test_consistent_point_is_fixed():
    # S fits the data exactly and K(S) equals the target: nothing to improve
    rng = np.random.default_rng(4)
    S = rng.normal(size=(3, 8))
    obs = MaskedObservations(S, np.ones_like(S))
    kernel = KernelModel.linear()
    basis = robust_kpca(kernel_matrix(S, kernel), ShrinkageParams(1e-12, 1.0))
    out, res = solve_subproblem_S(CompletionLoss(obs), basis, S, kernel, 10.0)
    np.testing.assert_allclose(out, S, atol=1e-7)
    assert res.objective < 1e-12


def test_penalty_pulls_missing_point_to_circle():
    t = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    S_true = np.vstack([np.cos(t), np.sin(t)])
    mask = np.ones_like(S_true, dtype=bool)
    mask[:, 0] = False
    kernel = KernelModel.rbf(1.0)
    basis = robust_kpca(kernel_matrix(S_true, kernel), ShrinkageParams(1e-9, 1.0))
    S0 = S_true.copy()
    S0[:, 0] *= 1.3
    out, res = solve_subproblem_S(CompletionLoss(MaskedObservations(S_true, mask)),
                                  basis, S0, kernel, 10.0)
    assert abs(np.linalg.norm(out[:, 0]) - 1.0) < 0.1 * 0.3
    assert np.linalg.norm(out[:, 0] - S_true[:, 0]) < 1e-3
