"""Deterministic synthetic data: labeled non-linear manifolds (a stand-in for
the 12-D oil flow data) and articulated non-rigid scenes with orthographic
cameras."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidInputError
from .metrics import LabeledData
from .problems.cameras import CameraSequence, rotation_to_quaternion
from .problems.losses import MaskedObservations

N_FEATURES = 9


def surface_features(u):
    """Smooth non-linear lift of 3 x n latent coordinates in [-1, 1]^3."""
    u1, u2, u3 = u
    return np.stack([
        u1, u2, u3,
        np.sin(np.pi * u1),
        np.cos(np.pi * u2),
        np.sin(np.pi * u3) * u1,
        u2 * u3,
        np.cos(0.5 * np.pi * (u1 + u3)),
        u1 * u2,
    ])


def surface_params(n_classes, d, surface_seed=0):
    """Per-class linear embeddings ``(A_c, b_c)`` of the lifted features."""
    rng = np.random.default_rng(surface_seed)
    params = []
    for _ in range(n_classes):
        A = rng.normal(size=(d, N_FEATURES)) / np.sqrt(N_FEATURES)
        b = rng.normal(size=d)
        params.append((A, b))
    return params


def surface_points(u, A, b):
    return A @ surface_features(u) + b[:, None]


@dataclass
class SynthManifold:
    data: LabeledData  # noisy samples
    clean: np.ndarray  # d x N, on the surfaces
    latent: np.ndarray  # 3 x N latent coordinates
    surfaces: list  # (A, b) per class


def synth_manifold(n_per_class, d=12, noise_sigma=0.0, seed=0, n_classes=3, surface_seed=0):
    """Samples from ``n_classes`` 3-parameter surfaces embedded in ``d`` dims.

    ``n_per_class`` may be an int or one count per class.
    """
    counts = np.broadcast_to(np.asarray(n_per_class, dtype=int), (n_classes,))
    if np.any(counts < 0) or d < 1 or noise_sigma < 0:
        raise InvalidInputError("invalid synthetic manifold parameters")
    surfaces = surface_params(n_classes, d, surface_seed)
    rng = np.random.default_rng(seed)
    cols, latents, labels = [], [], []
    for c, n in enumerate(counts):
        u = rng.uniform(-1.0, 1.0, size=(3, n))
        cols.append(surface_points(u, *surfaces[c]))
        latents.append(u)
        labels.append(np.full(n, c))
    clean = np.concatenate(cols, axis=1)
    noisy = clean + noise_sigma * rng.normal(size=clean.shape)
    return SynthManifold(LabeledData(noisy, np.concatenate(labels)), clean,
                         np.concatenate(latents, axis=1), surfaces)


def bernoulli_mask(shape, missing_prob, seed):
    """0/1 availability mask with entries removed independently."""
    if not 0 <= missing_prob < 1:
        raise InvalidInputError("missing probability must be in [0, 1)")
    rng = np.random.default_rng(seed)
    return (rng.uniform(size=shape) >= missing_prob).astype(int)


@dataclass
class SynthCompletion:
    truth: np.ndarray
    obs: MaskedObservations

    @property
    def deleted(self):
        return ~self.obs.mask


def synth_completion(n=100, d=12, missing_prob=0.25, seed=0, mask_seed=None, noise_sigma=0.0):
    """Single 3-parameter surface with entries deleted at random."""
    man = synth_manifold([n], d, noise_sigma, seed, n_classes=1)
    truth = man.data.data
    mask = bernoulli_mask(truth.shape, missing_prob, seed + 1 if mask_seed is None else mask_seed)
    return SynthCompletion(truth, MaskedObservations(np.where(mask, truth, 0.0), mask))


def synth_low_rank(n=100, d=12, rank=2, missing_prob=0.25, seed=0):
    """Completion instance whose complete matrix has exactly ``rank``."""
    if not 1 <= rank <= min(n, d):
        raise InvalidInputError("rank must lie in [1, min(n, d)]")
    rng = np.random.default_rng(seed)
    truth = rng.normal(size=(d, rank)) @ rng.normal(size=(rank, n))
    mask = bernoulli_mask(truth.shape, missing_prob, seed + 1)
    return SynthCompletion(truth, MaskedObservations(np.where(mask, truth, 0.0), mask))


@dataclass
class SynthNRSfM:
    obs: MaskedObservations  # 2F x N
    shapes: np.ndarray  # 3F x N ground truth
    cameras: CameraSequence

    @property
    def W(self):
        return self.obs.values

    @property
    def Z(self):
        return self.obs.mask.astype(int)


def articulated_shapes(F, N, amplitude, seed):
    """Two rigid segments joined at the origin; the second swings about the
    joint with two angles driven by one periodic phase. Frames are centered."""
    rng = np.random.default_rng(seed)
    n_a = N // 2
    seg_a = np.vstack([rng.uniform(-1.0, 0.0, n_a) * 1.5,
                       rng.uniform(-0.5, 0.5, n_a),
                       rng.uniform(-0.5, 0.5, n_a)])
    seg_b = np.vstack([rng.uniform(0.0, 1.0, N - n_a) * 1.5,
                       rng.uniform(-0.4, 0.4, N - n_a),
                       rng.uniform(-0.4, 0.4, N - n_a)])
    t = np.arange(F) / max(F - 1, 1)
    shapes = np.empty((3 * F, N))
    for i in range(F):
        theta = amplitude * np.sin(2 * np.pi * t[i])
        phi = 0.6 * amplitude * np.sin(4 * np.pi * t[i] + 1.0)
        Rj = Rotation.from_euler("zx", [theta, phi]).as_matrix()
        s = np.hstack([seg_a, Rj @ seg_b])
        shapes[3 * i:3 * i + 3] = s - s.mean(axis=1, keepdims=True)
    return shapes


def random_walk_cameras(F, step, seed):
    rng = np.random.default_rng(seed)
    R = Rotation.random(random_state=rng.integers(2**32))
    quats = []
    for _ in range(F):
        quats.append(rotation_to_quaternion(R.as_matrix()))
        R = Rotation.from_rotvec(step * rng.normal(size=3)) * R
    return CameraSequence(np.array(quats))


def synth_nrsfm(F=50, N=30, deformation_amplitude=0.35, missing_prob=0.0, noise=0.0,
                seed=0, camera_step=0.3):
    """Articulated scene, random-walk orthographic cameras, Bernoulli point mask."""
    if F < 1 or N < 3:
        raise InvalidInputError("need F >= 1 and N >= 3")
    shapes = articulated_shapes(F, N, deformation_amplitude, seed)
    cams = random_walk_cameras(F, camera_step, seed + 1)
    R = cams.rotations
    W = np.einsum("fab,fbn->fan", R, shapes.reshape(F, 3, N)).reshape(2 * F, N)
    rng = np.random.default_rng(seed + 2)
    if noise > 0:
        W = W + noise * rng.normal(size=W.shape)
    vis = bernoulli_mask((F, N), missing_prob, seed + 3)
    Z = np.repeat(vis, 2, axis=0)
    return SynthNRSfM(MaskedObservations(np.where(Z, W, 0.0), Z), shapes, cams)
