"""Three PD loops and policy inversion: one control tick of the gripper.

Loop order per tick: sense -> estimate -> grip / orientation / position ->
belt commands. All derivative terms are one-step backward differences on the
error; there is no integral term.

Note on the belt-command form: the desired belt speeds are the exact
algebraic inverse of the angular-velocity-command relation,
v = omega * d_obj / 2 +- v_comp. A form dividing by the diameter
(omega / (2 d_obj)) is dimensionally inconsistent (it would not produce mm/s)
and is deliberately not used; `command_omega` recovers the commanded rate
from the produced speeds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import learning
from .errors import ControlError, ObjectLostError
from .estimator import TactileSummary, command_omega

MAX_INVALID_FRAMES = 5


@dataclass
class Gains:
    grip_kp: float = 8e-3       # fast enough to track a square's extent collapse
    grip_kd: float = 1e-3
    orient_kp: float = 2.0
    orient_kd: float = 0.2
    pos_kp: float = 1.0
    pos_kd: float = 0.1
    s_ref: float = 1000.0       # depth-sum setpoint, mm*px at quarter-scale maps
    x_center: float = 0.0       # sensor center, mm
    v_gap_max: float = 10.0     # mm/s
    v_belt_max: float = 50.0    # mm/s
    omega_max: float = 1.0      # rad/s
    u_min: float = 0.1
    u_max: float = 1.5
    dt: float = 0.05
    ema_alpha: float = 0.0      # encoder-speed EMA; 0 disables (raw speeds)

    def validate(self) -> None:
        checks = [
            ("grip_kp", self.grip_kp >= 0), ("grip_kd", self.grip_kd >= 0),
            ("orient_kp", self.orient_kp >= 0), ("orient_kd", self.orient_kd >= 0),
            ("pos_kp", self.pos_kp >= 0), ("pos_kd", self.pos_kd >= 0),
            ("s_ref", self.s_ref > 0), ("v_gap_max", self.v_gap_max > 0),
            ("v_belt_max", self.v_belt_max > 0), ("omega_max", self.omega_max > 0),
            ("u_min", self.u_min > 0), ("u_max", self.u_max >= self.u_min),
            ("dt", self.dt > 0), ("ema_alpha", 0 <= self.ema_alpha <= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"gains.{name}: out of range")


@dataclass
class ControlState:
    e_grip_prev: float | None = None
    e_orient_prev: float | None = None
    e_pos_prev: float | None = None
    held_d_obj: float = math.nan
    held_x: float = math.nan
    invalid_count: int = 0
    last_omega_d: float = 0.0
    last_omega_c: float = 0.0
    last_u: float = 1.0
    last_v_comp: float = 0.0

    def reset(self) -> None:
        self.__init__()


def _pd(error: float, prev: float | None, kp: float, kd: float, dt: float) -> float:
    d = 0.0 if prev is None else (error - prev) / dt
    return kp * error + kd * d


def grip_pd(depth_sum: float, gains: Gains, state: ControlState) -> float:
    """Gap speed regulating the tactile depth sum; too little contact closes."""
    e = gains.s_ref - depth_sum
    out = -_pd(e, state.e_grip_prev, gains.grip_kp, gains.grip_kd, gains.dt)
    state.e_grip_prev = e
    return float(np.clip(out, -gains.v_gap_max, gains.v_gap_max))


def orientation_pd(theta_d: float, theta_hat: float, gains: Gains, state: ControlState) -> float:
    e = theta_d - theta_hat
    out = _pd(e, state.e_orient_prev, gains.orient_kp, gains.orient_kd, gains.dt)
    state.e_orient_prev = e
    return float(np.clip(out, -gains.omega_max, gains.omega_max))


def policy_invert(
    omega_d: float,
    features: np.ndarray,
    policy: learning.ModelParams | None,
    gains: Gains,
) -> tuple[float, float]:
    """(omega_c, u): command that should realize omega_d given the contact.

    With no policy model u = 1 (open-loop). The raw network output is clamped
    to [u_min, u_max] before inversion so the command stays bounded.
    """
    if policy is None:
        u = 1.0
    else:
        u = learning.forward(policy, features)
        if not math.isfinite(u):
            raise ControlError(f"non-finite policy output {u}")
    u = float(np.clip(u, gains.u_min, gains.u_max))
    bound = gains.omega_max / gains.u_min
    omega_c = float(np.clip(omega_d / u, -bound, bound))
    return omega_c, u


def position_pd(x_obj: float, gains: Gains, state: ControlState) -> float:
    e = gains.x_center - x_obj
    out = _pd(e, state.e_pos_prev, gains.pos_kp, gains.pos_kd, gains.dt)
    state.e_pos_prev = e
    return float(np.clip(out, -gains.v_belt_max / 2.0, gains.v_belt_max / 2.0))


def belt_commands(omega_c: float, d_obj: float, v_comp: float, gains: Gains | None = None):
    """Belt speeds realizing omega_c plus an in-hand translation v_comp."""
    if d_obj <= 0:
        raise ValueError(f"d_obj must be > 0, got {d_obj}")
    v_l = omega_c * d_obj / 2.0 + v_comp
    v_r = omega_c * d_obj / 2.0 - v_comp
    if gains is not None:
        v_l = float(np.clip(v_l, -gains.v_belt_max, gains.v_belt_max))
        v_r = float(np.clip(v_r, -gains.v_belt_max, gains.v_belt_max))
    return v_l, v_r


def hold_tactile(summary: TactileSummary, state: ControlState) -> tuple[float, float]:
    """(d_obj, x_obj) with stale-frame holding; raises after 5 bad frames."""
    if summary.valid:
        state.invalid_count = 0
        state.held_d_obj = summary.d_obj
        state.held_x = summary.centroid_x
    else:
        state.invalid_count += 1
        if state.invalid_count > MAX_INVALID_FRAMES or not math.isfinite(state.held_d_obj):
            raise ObjectLostError(
                f"tactile signal lost for {state.invalid_count} consecutive frames"
            )
    return state.held_d_obj, state.held_x


def control_step(
    theta_d: float,
    summary: TactileSummary,
    features_policy,
    theta_hat: float,
    gains: Gains,
    policy: learning.ModelParams | None,
    state: ControlState,
    held: tuple[float, float] | None = None,
    omega_override: float | None = None,
):
    """One full tick: returns (v_left, v_right, v_gap).

    `features_policy` is a callable omega_d -> feature vector so the policy
    network sees the desired rate the orientation loop just produced. The
    rollout driver passes `held` (d_obj, x_obj) when it already applied the
    stale-frame hold this tick; standalone callers omit it and the 5-frame
    ObjectLost rule applies here. `omega_override` replaces the orientation
    loop and policy with a fixed command (data-collection profile).
    """
    d_obj, x_obj = held if held is not None else hold_tactile(summary, state)
    v_gap = grip_pd(summary.depth_sum, gains, state)
    if omega_override is None:
        omega_d = orientation_pd(theta_d, theta_hat, gains, state)
        omega_c, u = policy_invert(omega_d, features_policy(omega_d), policy, gains)
    else:
        omega_d, omega_c, u = omega_override, omega_override, 1.0
    v_comp = position_pd(x_obj, gains, state)
    v_l, v_r = belt_commands(omega_c, d_obj, v_comp, gains)
    state.last_omega_d, state.last_omega_c = omega_d, omega_c
    state.last_u, state.last_v_comp = u, v_comp
    for name, v in [("v_left", v_l), ("v_right", v_r), ("v_gap", v_gap)]:
        if not math.isfinite(v):
            raise ControlError(f"non-finite command {name}={v}")
    return v_l, v_r, v_gap
