import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nldreg.errors import (DegenerateDataError, IndefiniteKernelError,
                           InvalidInputError)
from nldreg.kernelcore import (KernelModel, clamp_psd, cross_kernel,
                               kernel_matrix, pair_gradients, select_width,
                               sym_eig)


def test_single_column_rbf():
    K = kernel_matrix(np.array([[0.3], [-2.0]]), KernelModel.rbf(7.0))
    assert K.shape == (1, 1)
    assert K[0, 0] == 1.0


def test_duplicate_columns_give_all_ones():
    S = np.array([[1.0, 1.0], [2.0, 2.0]])
    np.testing.assert_array_equal(kernel_matrix(S, KernelModel.rbf(0.5)), np.ones((2, 2)))


def test_two_points_oil_flow_width():
    K = kernel_matrix(np.array([[0.0, 1.0]]), KernelModel.rbf(0.075))
    assert K[0, 1] == pytest.approx(0.927743, abs=1e-6)
    assert K[0, 1] == np.exp(-0.075)


def test_non_finite_input_rejected():
    with pytest.raises(InvalidInputError):
        kernel_matrix(np.array([[0.0, np.nan]]), KernelModel.rbf(1.0))


def test_bad_gamma_rejected():
    with pytest.raises(InvalidInputError):
        KernelModel.rbf(0.0)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 6), elements=st.floats(-2, 2)),
       st.floats(1e-3, 10))
def test_rbf_kernel_properties(S, gamma):
    K = kernel_matrix(S, KernelModel.rbf(gamma))
    assert np.array_equal(K, K.T)
    np.testing.assert_array_equal(np.diag(K), 1.0)
    assert np.all(K > 0) and np.all(K <= 1)


def test_linear_kernel_eigs_are_squared_singular_values():
    rng = np.random.default_rng(0)
    S = rng.normal(size=(4, 9))
    lam = sym_eig(kernel_matrix(S, KernelModel.linear())).eigenvalues
    sv = np.linalg.svd(S, compute_uv=False)
    expected = np.zeros(9)
    expected[:4] = sv**2
    np.testing.assert_allclose(lam, expected, rtol=1e-8, atol=1e-8 * sv[0] ** 2)


def test_cross_kernel_matches_kernel_matrix():
    rng = np.random.default_rng(1)
    S = rng.normal(size=(3, 7))
    k = KernelModel.rbf(0.4)
    np.testing.assert_allclose(cross_kernel(S, S, k), kernel_matrix(S, k), atol=1e-14)


@pytest.mark.parametrize("kernel", [KernelModel.rbf(0.3), KernelModel.linear()])
def test_pair_gradients_finite_differences(kernel):
    rng = np.random.default_rng(2)
    S = rng.normal(size=(2, 5))
    A = pair_gradients(S, kernel)
    h = 1e-6
    for i in range(5):
        for a in range(2):
            Sp = S.copy()
            Sp[a, i] += h
            dK = (kernel_matrix(Sp, kernel) - kernel_matrix(S, kernel)) / h
            for j in range(5):
                analytic = 2 * A[i, i, a] if i == j else A[i, j, a]
                assert dK[i, j] == pytest.approx(analytic, rel=1e-4, abs=1e-6)
                if j != i:
                    # derivative of K_ji w.r.t. its second argument s_i
                    assert dK[j, i] == pytest.approx(A[i, j, a], rel=1e-4, abs=1e-6)


def test_select_width_dmax():
    S = np.array([[0.0, 3.0, 1.0]])
    assert select_width(S, "dmax") == pytest.approx(0.5)


def test_select_width_dmed():
    # pairwise distances 1, 1, 2 -> median 1
    S = np.array([[0.0, 1.0, 2.0]])
    assert select_width(S, "dmed") == pytest.approx(np.log(2.0))


def test_select_width_identities_on_cloud():
    rng = np.random.default_rng(3)
    S = rng.normal(size=(5, 100))
    d = np.array([np.linalg.norm(S[:, i] - S[:, j]) for i in range(100) for j in range(i + 1, 100)])
    g_med = select_width(S, "dmed")
    assert np.exp(-g_med * np.median(d) ** 2) == pytest.approx(0.5, abs=1e-12)
    g_max = select_width(S, "dmax")
    assert np.exp(-g_max * d.max() ** 2) == pytest.approx(np.exp(-4.5), abs=1e-12)


def test_select_width_degenerate():
    with pytest.raises(DegenerateDataError):
        select_width(np.ones((3, 4)), "dmed")


def test_sym_eig_identity_and_diag():
    np.testing.assert_allclose(sym_eig(np.eye(3)).eigenvalues, [1, 1, 1])
    eig = sym_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(eig.eigenvalues, [3, 2, 1])
    np.testing.assert_allclose(np.abs(eig.eigenvectors), np.eye(3)[:, [0, 2, 1]], atol=1e-12)


def test_sym_eig_reconstruction():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(20, 20))
    K = A + A.T
    eig = sym_eig(K)
    U, lam = eig.eigenvectors, eig.eigenvalues
    assert np.all(np.diff(lam) <= 0)
    assert np.abs(U.T @ U - np.eye(20)).max() <= 1e-8
    assert np.linalg.norm(U @ np.diag(lam) @ U.T - K) <= 1e-8 * np.linalg.norm(K)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_clamp_psd():
    np.testing.assert_array_equal(clamp_psd([2.0, 0.5, -1e-9]), [2.0, 0.5, 0.0])
    with pytest.raises(IndefiniteKernelError):
        clamp_psd([2.0, -1e-3])
