"""Deterministic planar simulation of an object squeezed between two active belts.

Frame conventions (fixed throughout the package):

* x runs along the belt surfaces, y across the gap. The left sensor plane is
  at y = -gap/2, the right at y = +gap/2; the gripper itself never translates.
* Positive angular velocity is counter-clockwise. Positive belt speed in each
  sensor's own frame is the direction that drives positive object rotation:
  the left belt's +v is world +x, the right belt's +v is world -x. Equal
  positive speeds on both belts therefore spin the object counter-clockwise,
  and (v_left + v_right) / d_obj is the commanded angular velocity.
* Encoders integrate commanded motion exactly: theta = travel / rho for the
  belts, and the gripper encoder maps affinely to the gap,
  gap = gap_ref - rho * theta_G.

Dynamics are quasi-static and overdamped: each substep balances penalty
normal forces (p = k_n * depth) across the gap, then solves the object's
(v_x, omega) so regularized Coulomb tractions, the normal-force torque and
rotational damping cancel. There is no inertia; with zero commands and a
settled pose nothing moves. Surface shear in the soft layer carries slightly
less tangential velocity than the belt itself (``belt_slip``), which is what
keeps the emergent rolling ratio of a circle just below 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ObjectLostError
from .geometry import rotate, silhouette
from .shapes import ObjectShape


@dataclass
class WorldConfig:
    k_n: float = 5.0            # normal stiffness, N per mm depth per mm of line
    mu: float = 0.8             # Coulomb friction
    c_rot: float = 5.0          # rotational damping, N*mm*s
    dt: float = 0.05            # control period, s (20 Hz)
    substeps: int = 10
    d_max: float = 1.5          # depth-map clamp, mm
    noise_sigma: float = 0.01   # depth noise, mm (0 disables)
    seed: int = 0
    rho: float = 5.0            # belt travel per motor rad, mm/rad
    depth_width: int = 115      # quarter scale of 460x345; full scale selectable
    depth_height: int = 86
    pitch: float = 0.4          # mm per pixel
    extrude: float = 20.0       # out-of-plane contact band rendered into maps, mm
    gap_ref: float = 64.0       # gap at gripper-encoder zero, mm
    gap_min: float = 1.0
    v_stick: float = 0.5        # stick/slip transition velocity, mm/s (calibrated)
    belt_slip: float = 0.0175   # tangential surface-carry loss fraction (calibrated)

    def validate(self) -> None:
        checks = [
            ("k_n", self.k_n > 0), ("mu", self.mu >= 0), ("c_rot", self.c_rot > 0),
            ("dt", self.dt > 0), ("substeps", self.substeps >= 1), ("d_max", self.d_max > 0),
            ("noise_sigma", self.noise_sigma >= 0), ("rho", self.rho > 0),
            ("depth_width", self.depth_width >= 16), ("depth_height", self.depth_height >= 12),
            ("pitch", self.pitch > 0), ("extrude", self.extrude > 0),
            ("gap_ref", self.gap_ref > 0), ("v_stick", self.v_stick > 0),
            ("belt_slip", 0 <= self.belt_slip < 0.5),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"world.{name}: out of range")

    def columns(self) -> np.ndarray:
        return (np.arange(self.depth_width) - (self.depth_width - 1) / 2.0) * self.pitch


@dataclass
class Command:
    v_left: float = 0.0   # mm/s, sensor frame (positive drives +omega)
    v_right: float = 0.0
    v_gap: float = 0.0    # mm/s, positive opens


@dataclass
class EncoderState:
    theta_g: float
    theta_l: float
    theta_r: float


@dataclass
class WorldState:
    shape: ObjectShape
    x: float
    y: float
    theta: float          # unwrapped, rad
    gap: float
    s_left: float         # accumulated belt travel, mm, sensor frame
    s_right: float
    t: float
    v_x: float = 0.0      # last solved object velocity
    v_y: float = 0.0
    omega: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def encoders(self, cfg: WorldConfig) -> EncoderState:
        return EncoderState(
            theta_g=(cfg.gap_ref - self.gap) / cfg.rho,
            theta_l=self.s_left / cfg.rho,
            theta_r=self.s_right / cfg.rho,
        )


@dataclass
class ContactSummary:
    p1: np.ndarray | None      # deepest object point on the left sensor
    p2: np.ndarray | None      # deepest object point on the right sensor
    tilt: float                # angle of p1->p2 line from the y axis, rad
    d_obj: float               # y-separation of the deepest points
    patch_left: np.ndarray     # (n, 2) columns of (x, depth)
    patch_right: np.ndarray

    @property
    def valid(self) -> bool:
        return self.p1 is not None and self.p2 is not None


@dataclass
class DepthMap:
    width: int
    height: int
    pitch: float
    d_max: float
    values: np.ndarray  # (height, width), mm, in [0, d_max]


def init_state(
    shape: ObjectShape,
    cfg: WorldConfig,
    x0: float = 0.0,
    theta0: float = 0.0,
    squeeze: float = 0.4,
) -> WorldState:
    """Place the object centered in a gap that pinches it by `squeeze` mm per side."""
    verts = rotate(shape.vertices, theta0)
    y_top, y_bot = float(verts[:, 1].max()), float(verts[:, 1].min())
    gap = (y_top - y_bot) - 2.0 * squeeze
    if gap <= cfg.gap_min:
        raise ValueError(f"object {shape.id} too small for squeeze={squeeze}")
    y0 = -(y_top + y_bot) / 2.0  # equal penetration on both sides
    return WorldState(
        shape=shape, x=x0, y=y0, theta=theta0, gap=gap,
        s_left=0.0, s_right=0.0, t=0.0,
        rng=np.random.default_rng(cfg.seed),
    )


def _world_silhouette(state: WorldState, cfg: WorldConfig):
    verts = rotate(state.shape.vertices, state.theta)
    verts = verts + np.array([state.x, state.y])
    cols = cfg.columns()
    y_bot, y_top, hit = silhouette(verts, cols)
    return cols, y_bot, y_top, hit


def _depth_profiles(y_bot, y_top, hit, gap):
    half = gap / 2.0
    d_left = np.where(hit, np.maximum(0.0, -half - y_bot), 0.0)
    d_right = np.where(hit, np.maximum(0.0, y_top - half), 0.0)
    return d_left, d_right


def contact(state: WorldState, cfg: WorldConfig) -> ContactSummary:
    """Penetration profiles and the deepest-point pair at the current pose."""
    cols, y_bot, y_top, hit = _world_silhouette(state, cfg)
    d_left, d_right = _depth_profiles(y_bot, y_top, hit, state.gap)
    half = state.gap / 2.0
    patch_l = np.stack([cols[d_left > 0], d_left[d_left > 0]], axis=1)
    patch_r = np.stack([cols[d_right > 0], d_right[d_right > 0]], axis=1)
    if len(patch_l) == 0 or len(patch_r) == 0:
        return ContactSummary(None, None, 0.0, 0.0, patch_l, patch_r)
    i1 = int(np.argmax(d_left))   # first max = smallest x on ties
    i2 = int(np.argmax(d_right))
    p1 = np.array([cols[i1], -half - d_left[i1]])
    p2 = np.array([cols[i2], half + d_right[i2]])
    dvec = p2 - p1
    tilt = math.atan2(dvec[0], dvec[1])
    d_obj = float(np.linalg.norm(dvec) * math.cos(tilt))
    return ContactSummary(p1, p2, tilt, d_obj, patch_l, patch_r)


def _relax_y(y_bot, y_top, hit, gap, k_n, pitch, y_span):
    """Shift dy of the object that balances left/right normal forces.

    Safeguarded Newton on the monotone-decreasing net force; returns 0.0
    immediately when the current pose is already balanced (keeps symmetric
    cases bit-exact).
    """
    yb, yt = y_bot[hit], y_top[hit]
    if len(yb) == 0:
        return 0.0
    half = gap / 2.0
    kk = k_n * pitch

    def force(dy):
        f_l = np.sum(np.maximum(0.0, -half - (yb + dy)))
        f_r = np.sum(np.maximum(0.0, (yt + dy) - half))
        return kk * (f_l - f_r)

    def slope(dy):
        n = np.count_nonzero(-half - (yb + dy) > 0) + np.count_nonzero((yt + dy) - half > 0)
        return -kk * max(n, 1)

    tol = 1e-10
    f = force(0.0)
    if abs(f) <= tol:
        return 0.0
    # net force decreases with dy, so the root lies on the side f points to
    if f > 0:
        lo, hi = 0.0, y_span
        while force(hi) > 0:
            hi *= 2.0
    else:
        lo, hi = -y_span, 0.0
        while force(lo) < 0:
            lo *= 2.0
    dy = 0.0
    for _ in range(200):
        if f > 0:
            lo = dy
        else:
            hi = dy
        cand = dy - f / slope(dy)
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        dy = cand
        f = force(dy)
        if abs(f) <= tol or (hi - lo) < 1e-14:
            break
    return dy


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def _solve_tangential(r_y, n_force, u_surf, tau_n, cfg: WorldConfig, w0):
    """Minimize the convex friction potential over (v_x, omega).

    r_y: sample lever arms (y - y_c); n_force: per-sample normal force;
    u_surf: world-frame surface-carry velocity at each sample.
    """
    mu, vs, c_rot = cfg.mu, cfg.v_stick, cfg.c_rot
    fn = mu * n_force

    def phi(w):
        s = (w[0] - w[1] * r_y) - u_surf
        return float(np.sum(fn * vs * _log_cosh(s / vs)) + 0.5 * c_rot * w[1] ** 2 - tau_n * w[1])

    def grad_hess(w):
        s = (w[0] - w[1] * r_y) - u_surf
        t = np.tanh(s / vs)
        g0 = np.sum(fn * t)
        g1 = np.sum(fn * t * (-r_y)) + c_rot * w[1] - tau_n
        wgt = fn * (1.0 - t * t) / vs
        h00 = np.sum(wgt) + 1e-12
        h01 = np.sum(wgt * (-r_y))
        h11 = np.sum(wgt * r_y * r_y) + c_rot + 1e-12
        return np.array([g0, g1]), np.array([[h00, h01], [h01, h11]])

    w = np.array(w0, dtype=float)
    scale = max(1.0, float(np.sum(fn)))
    # cap the Newton step: in saturated-friction regions the Hessian collapses
    # and the raw step can be enormous, which makes the line search thrash
    step_cap = 20.0 * (1.0 + float(np.max(np.abs(u_surf), initial=0.0)))
    for _ in range(100):
        g, h = grad_hess(w)
        if np.max(np.abs(g)) < 1e-9 * scale:
            break
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = -g / max(h[0, 0], h[1, 1])
        norm = float(np.max(np.abs(step)))
        if norm > step_cap:
            step = step * (step_cap / norm)
        f0 = phi(w)
        alpha = 1.0
        gdots = float(g @ step)
        # absolute tolerance keeps the search from thrashing once the
        # descent per step falls below float resolution of the potential
        floor = 1e-13 * max(1.0, abs(f0))
        for _ in range(20):
            if phi(w + alpha * step) <= f0 + 1e-4 * alpha * gdots + floor:
                break
            alpha *= 0.5
        w = w + alpha * step
    return float(w[0]), float(w[1])


def step(state: WorldState, cmd: Command, cfg: WorldConfig) -> WorldState:
    """Advance one control period of cfg.dt using quasi-static substeps."""
    h = cfg.dt / cfg.substeps
    x, y, theta, gap = state.x, state.y, state.theta, state.gap
    s_l, s_r = state.s_left, state.s_right
    vx = vy = om = 0.0
    carry = 1.0 - cfg.belt_slip
    half_span = max(1.0, state.shape.max_radius())
    cols = cfg.columns()
    for _ in range(cfg.substeps):
        if abs(y) > gap:
            raise ObjectLostError(
                f"object {state.shape.id} ejected: y={y:.3f} gap={gap:.3f} t={state.t:.3f}"
            )
        gap = max(cfg.gap_min, gap + cmd.v_gap * h)
        s_l += cmd.v_left * h
        s_r += cmd.v_right * h
        verts = rotate(state.shape.vertices, theta) + np.array([x, y])
        y_bot, y_top, hit = silhouette(verts, cols)
        dy = _relax_y(y_bot, y_top, hit, gap, cfg.k_n, cfg.pitch, half_span)
        y += dy
        y_bot = y_bot + dy
        y_top = y_top + dy
        d_left, d_right = _depth_profiles(y_bot, y_top, hit, gap)
        ml, mr = d_left > 0, d_right > 0
        n_l = cfg.k_n * d_left[ml] * cfg.pitch
        n_r = cfg.k_n * d_right[mr] * cfg.pitch
        if len(n_l) + len(n_r) == 0:
            vx = om = 0.0
            vy = dy / h
        else:
            r_y = np.concatenate([y_bot[ml] - y, y_top[mr] - y])
            n_f = np.concatenate([n_l, n_r])
            u = np.concatenate([
                np.full(len(n_l), cmd.v_left * carry),
                np.full(len(n_r), -cmd.v_right * carry),
            ])
            r_x_l = cols[ml] - x
            r_x_r = cols[mr] - x
            tau_n = float(np.sum(r_x_l * n_l) - np.sum(r_x_r * n_r))
            vx, om = _solve_tangential(r_y, n_f, u, tau_n, cfg, (vx, om))
            vy = dy / h
            x += vx * h
            theta += om * h
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
            raise ArithmeticError(
                f"non-finite solve: obj={state.shape.id} x={x} y={y} theta={theta} gap={gap}"
            )
    return replace(
        state, x=x, y=y, theta=theta, gap=gap, s_left=s_l, s_right=s_r,
        t=state.t + cfg.dt, v_x=vx, v_y=vy, omega=om,
    )


def render_depth(state: WorldState, side: str, cfg: WorldConfig) -> DepthMap:
    """Synthesize one tactile depth image at the current pose.

    Pixel x is world-aligned on both sensors (the two maps share the x axis),
    pixel rows span the out-of-plane direction: the contact band covers
    cfg.extrude mm, zero elsewhere. Belt travel does not move the image.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    cols, y_bot, y_top, hit = _world_silhouette(state, cfg)
    d_left, d_right = _depth_profiles(y_bot, y_top, hit, state.gap)
    profile = d_left if side == "left" else d_right
    h, w = cfg.depth_height, cfg.depth_width
    rows_z = (np.arange(h) - (h - 1) / 2.0) * cfg.pitch
    band = np.abs(rows_z) <= cfg.extrude / 2.0
    values = np.zeros((h, w))
    values[band, :] = profile[None, :]
    np.clip(values, 0.0, cfg.d_max, out=values)
    if cfg.noise_sigma > 0:
        values = values + state.rng.normal(0.0, cfg.noise_sigma, size=values.shape)
        np.clip(values, 0.0, cfg.d_max, out=values)
    return DepthMap(width=w, height=h, pitch=cfg.pitch, d_max=cfg.d_max, values=values)


def ground_truth(state: WorldState) -> dict:
    return {"theta_obj": state.theta, "omega_obj": state.omega, "x_obj": state.x}
