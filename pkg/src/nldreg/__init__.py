"""Non-linear (kernel feature space) dimensionality regularization for inverse problems."""

__version__ = "0.1.0"
