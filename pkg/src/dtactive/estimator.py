"""Tactile-image statistics and dead-reckoning orientation estimation.

The estimator never reads simulator ground truth: it consumes the two depth
maps, the gripper-encoder gap and encoder-derived belt speeds. Orientation is
the time integral of the commanded angular velocity, multiplied per frame by
the learned rolling ratio when a rectification model is supplied (ratio 1
without one, which is the open-loop baseline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import learning
from .errors import EstimatorError
from .world import DepthMap


@dataclass
class TactileSummary:
    depth_sum: float          # sum over both maps, mm*px
    centroid_x: float         # mean of the two depth-weighted centroids, mm
    d_obj: float              # gap + both max depths, mm
    valid: bool               # False when either map is empty


@dataclass(frozen=True)
class OrientationEstimate:
    theta_hat: float = 0.0    # unwrapped, rad
    k_hat: float = 1.0


def _map_centroid(values: np.ndarray, pitch: float) -> float:
    total = values.sum()
    w = values.shape[1]
    xs = (np.arange(w) - (w - 1) / 2.0) * pitch
    return float((values.sum(axis=0) * xs).sum() / total)


def summarize(d_left: DepthMap, d_right: DepthMap, gap: float) -> TactileSummary:
    if d_left.values.shape != d_right.values.shape:
        raise ValueError("depth maps must share dimensions")
    sl, sr = d_left.values.sum(), d_right.values.sum()
    s = float(sl + sr)
    if sl <= 0 or sr <= 0:
        return TactileSummary(depth_sum=s, centroid_x=math.nan, d_obj=math.nan, valid=False)
    cx = 0.5 * (_map_centroid(d_left.values, d_left.pitch)
                + _map_centroid(d_right.values, d_right.pitch))
    d_obj = gap + float(d_left.values.max()) + float(d_right.values.max())
    return TactileSummary(depth_sum=s, centroid_x=cx, d_obj=d_obj, valid=True)


def gap_from_encoder(theta_g: float, gap_ref: float, rho: float) -> float:
    """Inverse of the gripper-encoder calibration gap = gap_ref - rho*theta_G."""
    return gap_ref - rho * theta_g


def belt_speed(theta_now: float, theta_prev: float, rho: float, dt: float) -> float:
    """Backward-difference surface speed from consecutive encoder readings."""
    return rho * (theta_now - theta_prev) / dt


def command_omega(v_left: float, v_right: float, d_obj: float) -> float:
    """Commanded angular velocity (v_L + v_R) / d_obj from measured speeds."""
    if d_obj <= 0:
        raise ValueError(f"d_obj must be > 0, got {d_obj}")
    return (v_left + v_right) / d_obj


def update(
    est: OrientationEstimate,
    features: np.ndarray,
    omega_c: float,
    dt: float,
    model: learning.ModelParams | None = None,
) -> OrientationEstimate:
    """One dead-reckoning tick: theta += k_hat * omega_c * dt.

    `features` is the frozen feature vector for this frame (its scalar channel
    already carries omega_c), so replaying a logged trajectory reproduces the
    live estimate bit for bit.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if model is None:
        k_hat = 1.0
    else:
        k_hat = learning.forward(model, features)
        if not math.isfinite(k_hat):
            raise EstimatorError(f"non-finite rectification output {k_hat}")
    return OrientationEstimate(theta_hat=est.theta_hat + k_hat * omega_c * dt, k_hat=k_hat)
