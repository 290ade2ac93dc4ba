"""Planar active-surface tactile gripper: simulator, estimator, control, training."""

__version__ = "0.1.0"
