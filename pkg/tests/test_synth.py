import numpy as np
import pytest

from nldreg.errors import InvalidInputError
from nldreg.problems import rigid_factorization_init
from nldreg.synth import (bernoulli_mask, surface_points, synth_completion,
                          synth_low_rank, synth_manifold, synth_nrsfm)


def test_manifold_noise_free_on_surfaces():
    man = synth_manifold(20, seed=1)
    assert man.data.data.shape == (12, 60)
    for c, (A, b) in enumerate(man.surfaces):
        cols = man.data.labels == c
        np.testing.assert_allclose(surface_points(man.latent[:, cols], A, b),
                                   man.data.data[:, cols], atol=1e-12)


def test_manifold_deterministic():
    a, b = synth_manifold(10, noise_sigma=0.1, seed=3), synth_manifold(10, noise_sigma=0.1, seed=3)
    np.testing.assert_array_equal(a.data.data, b.data.data)
    c = synth_manifold(10, noise_sigma=0.1, seed=4)
    assert not np.array_equal(a.data.data, c.data.data)


def test_manifold_noise_level():
    man = synth_manifold(1000, noise_sigma=0.2, seed=5, n_classes=1)
    std = (man.data.data - man.clean).std(axis=1)
    assert np.all(np.abs(std - 0.2) <= 0.05 * 0.2)


def test_manifold_rejects_bad_args():
    with pytest.raises(InvalidInputError):
        synth_manifold(5, noise_sigma=-1.0)


def test_bernoulli_mask_rate():
    m = bernoulli_mask((200, 200), 0.25, seed=0)
    assert set(np.unique(m)) <= {0, 1}
    assert abs(1 - m.mean() - 0.25) < 0.01
    with pytest.raises(InvalidInputError):
        bernoulli_mask((2, 2), 1.0, 0)


def test_completion_instance():
    inst = synth_completion(50, 12, 0.25, seed=2)
    assert inst.truth.shape == (12, 50)
    np.testing.assert_array_equal(inst.obs.values[inst.obs.mask], inst.truth[inst.obs.mask])
    assert inst.deleted.any()


def test_low_rank_instance():
    inst = synth_low_rank(30, 8, rank=3, missing_prob=0.2, seed=1)
    s = np.linalg.svd(inst.truth, compute_uv=False)
    assert s[2] > 1e-6 * s[0] and s[3] <= 1e-10 * s[0]
    np.testing.assert_array_equal(inst.obs.values[inst.obs.mask], inst.truth[inst.obs.mask])
    with pytest.raises(InvalidInputError):
        synth_low_rank(5, 4, rank=5)


def test_nrsfm_no_missing_means_full_mask():
    inst = synth_nrsfm(F=5, N=7, missing_prob=0.0, seed=1)
    assert inst.Z.all()


def test_nrsfm_tracks_are_projections():
    inst = synth_nrsfm(F=6, N=8, missing_prob=0.3, seed=2)
    R = inst.cameras.rotations
    P = np.einsum("fab,fbn->fan", R, inst.shapes.reshape(6, 3, 8)).reshape(12, 8)
    m = inst.obs.mask
    np.testing.assert_allclose(inst.W[m], P[m], atol=1e-12)
    # both image rows of a point share visibility
    np.testing.assert_array_equal(m[0::2], m[1::2])


def test_nrsfm_frames_centered():
    S = synth_nrsfm(F=4, N=9, seed=3).shapes
    np.testing.assert_allclose(S.mean(axis=1), 0.0, atol=1e-12)


def test_nrsfm_rigid_scene_factorizes():
    inst = synth_nrsfm(F=15, N=12, deformation_amplitude=0.0, seed=4)
    cams, shape = rigid_factorization_init(inst.W, inst.Z, return_shape=True)
    W = inst.W - inst.W.mean(axis=1, keepdims=True)
    reproj = np.vstack([P @ shape for P in cams.rotations])
    assert np.abs(reproj - W).max() <= 1e-6


def test_nrsfm_deterministic():
    a, b = synth_nrsfm(F=4, N=5, noise=0.01, seed=5), synth_nrsfm(F=4, N=5, noise=0.01, seed=5)
    np.testing.assert_array_equal(a.W, b.W)
    np.testing.assert_array_equal(a.shapes, b.shapes)
