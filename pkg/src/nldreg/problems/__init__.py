"""Concrete inverse problems: masked completion and non-rigid structure from motion."""
from .cameras import (CameraSequence, nearest_orthographic,
                      orthographic_to_quaternion, quaternion_to_orthographic,
                      refine_cameras, rigid_factorization_init)
from .losses import (CompletionLoss, MaskedObservations, NRSfMLoss,
                     completion_loss, nrsfm_loss, samples_to_shapes,
                     shapes_to_samples)
from .tnh import svt, tnh_minimize, tnh_solve

__all__ = [
    "CameraSequence", "CompletionLoss", "MaskedObservations", "NRSfMLoss",
    "completion_loss", "nearest_orthographic", "nrsfm_loss",
    "orthographic_to_quaternion", "quaternion_to_orthographic", "refine_cameras",
    "rigid_factorization_init", "samples_to_shapes", "shapes_to_samples", "svt",
    "tnh_minimize", "tnh_solve",
]
