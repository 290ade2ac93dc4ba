"""Data collection, train/test protocol, and the offline/online evaluations.

A rollout runs the full sense -> estimate -> control -> act loop at 20 Hz and
logs one Frame per tick. Collection drives each trained object through four
constant-rate 360-degree rolls (one per commanded speed) and each novel
object through one; online evaluation tracks a sinusoidal orientation
reference for two periods and scores RMSE plus RMS jerk of the ground-truth
trajectory.

Trajectory files are CSV (one frame per row, 9 significant digits) with the
frozen per-frame feature vectors in a sibling little-endian float64 binary,
referenced from the CSV header comment. The feature rows are exactly what the
estimator consumed live, so offline replay reproduces the live estimate.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import control, estimator, learning
from .control import ControlState, Gains
from .errors import ObjectLostError
from .estimator import OrientationEstimate
from .shapes import NOVEL_IDS, TRAINED_IDS, ObjectShape, build_object_library, get_object
from .world import Command, WorldConfig, init_state, render_depth, step

DEFAULT_SPEEDS = (0.1, 0.15, 0.25, 0.4)  # rad/s commanded rolling rates
DEFAULT_NOVEL_SPEED = 0.25
DEFAULT_AMPLITUDE_DEG = 180.0
DEFAULT_PERIOD_S = 50.0
DEFAULT_PERIODS = 2
DEFAULT_SQUEEZE = 0.35

CSV_COLUMNS = [
    "t", "theta_g", "theta_l", "theta_r",
    "v_left", "v_right", "v_left_filt", "v_right_filt",
    "depth_sum", "centroid_x", "d_obj", "tactile_valid",
    "omega_c", "theta_gt", "omega_gt", "x_gt",
    "k_true", "theta_hat", "k_hat",
    "theta_d", "omega_d", "u", "omega_c_cmd", "v_comp", "v_gap",
]


@dataclass
class HarnessConfig:
    speeds: tuple = DEFAULT_SPEEDS
    novel_speed: float = DEFAULT_NOVEL_SPEED
    amplitude_deg: float = DEFAULT_AMPLITUDE_DEG
    period_s: float = DEFAULT_PERIOD_S
    periods: int = DEFAULT_PERIODS
    seed: int = 0
    squeeze: float = DEFAULT_SQUEEZE

    def validate(self) -> None:
        checks = [
            ("speeds", len(self.speeds) >= 1 and all(s > 0 for s in self.speeds)),
            ("novel_speed", self.novel_speed > 0),
            ("amplitude_deg", self.amplitude_deg >= 0),
            ("period_s", self.period_s > 0),
            ("periods", self.periods >= 1),
            ("squeeze", self.squeeze > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"harness.{name}: out of range")


@dataclass
class Trajectory:
    object_id: str
    profile: str
    seed: int
    aborted: bool
    data: dict            # column name -> np.ndarray, CSV_COLUMNS order
    features: np.ndarray  # (n_frames, FEATURE_LEN) as consumed by the estimator

    @property
    def n_frames(self) -> int:
        return len(self.data["t"])


@dataclass
class OfflineRow:
    object_id: str
    raw_err_deg: float
    rect_err_deg: float

    @property
    def reduction_deg(self) -> float:
        return self.raw_err_deg - self.rect_err_deg


@dataclass
class OnlineRow:
    object_id: str
    mode: str       # 'open-loop' | 'ours'
    rmse_deg: float
    jerk_deg_s3: float
    aborted: bool


@dataclass
class EvalReport:
    offline: list = field(default_factory=list)
    online: list = field(default_factory=list)


def run_rollout(
    shape: ObjectShape,
    world_cfg: WorldConfig,
    gains: Gains,
    *,
    seed: int,
    n_ticks: int,
    theta0: float = 0.0,
    squeeze: float = DEFAULT_SQUEEZE,
    omega_target: float | None = None,
    theta_d_fn=None,
    model_n: learning.ModelParams | None = None,
    model_pi: learning.ModelParams | None = None,
    profile: str = "",
    frame_hook=None,
) -> Trajectory:
    """One full closed-loop rollout; constant-rate when omega_target is given,
    orientation tracking when theta_d_fn is given."""
    if (omega_target is None) == (theta_d_fn is None):
        raise ValueError("exactly one of omega_target / theta_d_fn required")
    cfg = replace(world_cfg, seed=seed)
    st = init_state(shape, cfg, theta0=theta0, squeeze=squeeze)
    est = OrientationEstimate(theta_hat=theta0)
    cs = ControlState()
    dt = cfg.dt
    prev = st.encoders(cfg)
    v_l_f = v_r_f = 0.0
    rows = {name: [] for name in CSV_COLUMNS}
    feats = []
    aborted = False
    for tick in range(n_ticks):
        enc = st.encoders(cfg)
        d_l = render_depth(st, "left", cfg)
        d_r = render_depth(st, "right", cfg)
        if frame_hook is not None:
            frame_hook(shape.id, profile, tick, d_l, d_r)
        gap_hat = estimator.gap_from_encoder(enc.theta_g, cfg.gap_ref, cfg.rho)
        summ = estimator.summarize(d_l, d_r, gap_hat)
        try:
            d_obj, x_obj = control.hold_tactile(summ, cs)
        except ObjectLostError:
            aborted = True
            break
        v_l = estimator.belt_speed(enc.theta_l, prev.theta_l, cfg.rho, dt)
        v_r = estimator.belt_speed(enc.theta_r, prev.theta_r, cfg.rho, dt)
        if gains.ema_alpha > 0:
            v_l_f = gains.ema_alpha * v_l + (1 - gains.ema_alpha) * v_l_f
            v_r_f = gains.ema_alpha * v_r + (1 - gains.ema_alpha) * v_r_f
        else:
            v_l_f, v_r_f = v_l, v_r
        omega_c = estimator.command_omega(v_l_f, v_r_f, d_obj)
        blocks = learning.pool_blocks(d_l, d_r, cfg.d_max)
        feat = learning.compose_features(blocks, omega_c, gains.omega_max)
        est = estimator.update(est, feat, omega_c, dt, model_n)
        theta_d = theta_d_fn(st.t) if theta_d_fn is not None else math.nan
        try:
            v_ld, v_rd, v_gap = control.control_step(
                theta_d, summ,
                lambda om: learning.compose_features(blocks, om, gains.omega_max),
                est.theta_hat, gains, model_pi, cs,
                held=(d_obj, x_obj), omega_override=omega_target,
            )
        except ObjectLostError:
            aborted = True
            break
        rows["t"].append(st.t)
        rows["theta_g"].append(enc.theta_g)
        rows["theta_l"].append(enc.theta_l)
        rows["theta_r"].append(enc.theta_r)
        rows["v_left"].append(v_l)
        rows["v_right"].append(v_r)
        rows["v_left_filt"].append(v_l_f)
        rows["v_right_filt"].append(v_r_f)
        rows["depth_sum"].append(summ.depth_sum)
        rows["centroid_x"].append(summ.centroid_x)
        rows["d_obj"].append(d_obj)
        rows["tactile_valid"].append(1.0 if summ.valid else 0.0)
        rows["omega_c"].append(omega_c)
        rows["theta_gt"].append(st.theta)
        rows["omega_gt"].append(st.omega)
        rows["x_gt"].append(st.x)
        rows["k_true"].append(math.nan)  # filled below from theta_gt differences
        rows["theta_hat"].append(est.theta_hat)
        rows["k_hat"].append(est.k_hat)
        rows["theta_d"].append(theta_d)
        rows["omega_d"].append(cs.last_omega_d)
        rows["u"].append(cs.last_u)
        rows["omega_c_cmd"].append(cs.last_omega_c)
        rows["v_comp"].append(cs.last_v_comp)
        rows["v_gap"].append(v_gap)
        feats.append(feat)
        prev = enc
        try:
            st = step(st, Command(v_ld, v_rd, v_gap), cfg)
        except ObjectLostError:
            aborted = True
            break
    data = {k: np.array(v, dtype=float) for k, v in rows.items()}
    _fill_k_true(data, dt)
    features = np.array(feats) if feats else np.zeros((0, learning.FEATURE_LEN))
    return Trajectory(
        object_id=shape.id, profile=profile, seed=seed, aborted=aborted,
        data=data, features=features,
    )


def _fill_k_true(data: dict, dt: float, omega_floor: float = 1e-9) -> None:
    """Realized ratio over each frame window: (theta_gt[i]-theta_gt[i-1])/(omega_c[i]*dt).

    Frames with near-zero command carry nan (label undefined); training applies
    its own larger omega_floor on top.
    """
    th = data["theta_gt"]
    om = data["omega_c"]
    k = np.full_like(th, math.nan)
    if len(th) > 1:
        dth = np.diff(th)
        denom = om[1:] * dt
        ok = np.abs(om[1:]) > omega_floor
        k[1:][ok] = dth[ok] / denom[ok]
    data["k_true"] = k


def rollout_seed(base: int, obj_index: int, run_index: int) -> int:
    return base + 1000 * obj_index + run_index


def collect(
    world_cfg: WorldConfig,
    gains: Gains,
    hcfg: HarnessConfig,
    objects: tuple = TRAINED_IDS,
    novel: tuple = NOVEL_IDS,
    frame_hook=None,
) -> list[Trajectory]:
    """The collection protocol: four constant-rate 360-degree rolls per trained
    object (one per speed), one per novel object. Grip, position, and
    dead-reckoning loops run throughout; aborted rollouts keep their partial
    log and are marked."""
    hcfg.validate()
    trajs = []
    library = {s.id: s for s in build_object_library()}
    all_ids = list(objects) + list(novel)
    for oi, oid in enumerate(all_ids):
        speeds = hcfg.speeds if oid in objects else (hcfg.novel_speed,)
        for si, speed in enumerate(speeds):
            n_ticks = math.ceil((2.0 * math.pi / speed) / world_cfg.dt)
            trajs.append(run_rollout(
                library[oid], world_cfg, gains,
                seed=rollout_seed(hcfg.seed, oi, si),
                n_ticks=n_ticks,
                theta0=0.3 * si,
                squeeze=hcfg.squeeze,
                omega_target=speed,
                profile=f"const_{speed:g}",
                frame_hook=frame_hook,
            ))
    return trajs


def split(dataset: list[Trajectory], seed: int):
    """Per trained object, 3 of its 4 trajectories train and 1 tests; novel
    objects are test-only. Returns (train, test)."""
    by_obj: dict[str, list[Trajectory]] = {}
    for tr in dataset:
        by_obj.setdefault(tr.object_id, []).append(tr)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for oid in sorted(by_obj):
        group = sorted(by_obj[oid], key=lambda tr: tr.profile)
        if oid in NOVEL_IDS:
            test.extend(group)
            continue
        if len(group) != 4:
            raise ValueError(f"object {oid} has {len(group)} trajectories, expected 4")
        hold = int(rng.integers(0, 4))
        for i, tr in enumerate(group):
            (test if i == hold else train).append(tr)
    return train, test


def trajectories_to_samples(
    trajs: list[Trajectory],
    role: str,
    omega_floor: float,
    omega_max: float = 1.0,
) -> list[learning.Sample]:
    """Training pairs. The rectification role keeps the logged feature rows
    (scalar channel = commanded rate); the policy role swaps in the realized
    rate over the same frame window."""
    samples = []
    for tr in trajs:
        k = tr.data["k_true"]
        om_c = tr.data["omega_c"]
        for i in range(tr.n_frames):
            if not math.isfinite(k[i]) or abs(om_c[i]) < omega_floor:
                continue
            if role == learning.ROLE_RECTIFY:
                f = tr.features[i]
            else:
                omega_real = k[i] * om_c[i]
                f = learning.compose_features(tr.features[i][:-1], omega_real, omega_max)
            samples.append(learning.Sample(features=f, label=float(k[i])))
    return samples


def train_models(
    train_trajs: list[Trajectory],
    tcfg: learning.TrainConfig,
    omega_max: float = 1.0,
):
    """Both networks from one dataset pass: returns (rectify, policy)."""
    s_n = trajectories_to_samples(train_trajs, learning.ROLE_RECTIFY, tcfg.omega_floor, omega_max)
    s_p = trajectories_to_samples(train_trajs, learning.ROLE_POLICY, tcfg.omega_floor, omega_max)
    model_n = learning.train(s_n, tcfg, learning.ROLE_RECTIFY)
    model_pi = learning.train(s_p, tcfg, learning.ROLE_POLICY)
    return model_n, model_pi


def replay_theta_hat(
    traj: Trajectory,
    model: learning.ModelParams | None,
    dt: float,
    omega_max: float = 1.0,
) -> np.ndarray:
    """Dead-reckoned orientation from the logged features alone.

    The command rate is recovered from the feature scalar channel (exact
    float64 in the sidecar), and the update path is the live one, so replay
    reproduces what the logging run computed bit for bit.
    """
    est = OrientationEstimate(theta_hat=traj.data["theta_gt"][0] if traj.n_frames else 0.0)
    out = np.empty(traj.n_frames)
    for i in range(traj.n_frames):
        omega_c = traj.features[i, -1] * omega_max
        est = estimator.update(est, traj.features[i], omega_c, dt, model)
        out[i] = est.theta_hat
    return out


def eval_offline(model_n: learning.ModelParams, test_trajs: list[Trajectory], dt: float) -> list[OfflineRow]:
    """Replay each held-out trajectory raw (ratio 1) and rectified; mean
    absolute orientation error in degrees for each."""
    if model_n.role != learning.ROLE_RECTIFY:
        raise ValueError(f"offline evaluation needs the rectification model, got role {model_n.role}")
    rows = []
    for tr in test_trajs:
        gt = tr.data["theta_gt"]
        raw = replay_theta_hat(tr, None, dt)
        rect = replay_theta_hat(tr, model_n, dt)
        rows.append(OfflineRow(
            object_id=tr.object_id,
            raw_err_deg=float(np.degrees(np.mean(np.abs(raw - gt)))),
            rect_err_deg=float(np.degrees(np.mean(np.abs(rect - gt)))),
        ))
    return rows


def desired_trajectory(t: float, amplitude_deg: float, period_s: float) -> float:
    """Sinusoidal orientation reference in degrees."""
    if period_s <= 0:
        raise ValueError("period must be > 0")
    return amplitude_deg * math.sin(2.0 * math.pi * t / period_s)


def eval_online(
    models,
    object_id: str,
    world_cfg: WorldConfig,
    gains: Gains,
    hcfg: HarnessConfig,
    mode: str,
) -> tuple[OnlineRow, Trajectory]:
    """Track the sinusoidal reference for `periods` periods and score it.

    mode 'ours' uses both learned networks; 'open-loop' is plain dead
    reckoning (ratio 1, unit policy) with the same PD loops.
    """
    if mode not in ("ours", "open-loop"):
        raise ValueError(f"mode must be 'ours' or 'open-loop', got {mode}")
    model_n, model_pi = (None, None) if mode == "open-loop" else models
    shape = get_object(object_id)
    amp_rad = math.radians(hcfg.amplitude_deg)
    theta_d_fn = lambda t: amp_rad * math.sin(2.0 * math.pi * t / hcfg.period_s)
    n_ticks = int(round(hcfg.periods * hcfg.period_s / world_cfg.dt))
    obj_index = list(TRAINED_IDS + NOVEL_IDS).index(object_id)
    traj = run_rollout(
        shape, world_cfg, gains,
        seed=rollout_seed(hcfg.seed + 500_000, obj_index, 0 if mode == "ours" else 1),
        n_ticks=n_ticks,
        squeeze=hcfg.squeeze,
        theta_d_fn=theta_d_fn,
        model_n=model_n, model_pi=model_pi,
        profile=f"sin_A{hcfg.amplitude_deg:g}_T{hcfg.period_s:g}_{mode}",
    )
    if traj.aborted or traj.n_frames < 4:
        row = OnlineRow(object_id, mode, math.inf, math.inf, True)
    else:
        desired = np.degrees(np.vectorize(theta_d_fn)(traj.data["t"]))
        actual = np.degrees(traj.data["theta_gt"])
        row = OnlineRow(
            object_id, mode,
            rmse(desired, actual),
            rms_jerk(actual, world_cfg.dt),
            False,
        )
    return row, traj


def rmse(desired, actual) -> float:
    desired = np.asarray(desired, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if desired.shape != actual.shape or len(desired) < 1:
        raise ValueError("series must be equal-length and non-empty")
    return float(np.sqrt(np.mean((desired - actual) ** 2)))


def rms_jerk(series, dt: float = 0.05) -> float:
    """RMS of the third derivative via three successive first differences."""
    series = np.asarray(series, dtype=float)
    if len(series) < 4:
        raise ValueError("need at least 4 samples for a third difference")
    jerk = np.diff(series, n=3) / dt ** 3
    return float(np.sqrt(np.mean(jerk ** 2)))


# ---------------------------------------------------------------------------
# Trajectory file I/O

def _fmt(v: float) -> str:
    return "%.9g" % v


def write_trajectory(traj: Trajectory, csv_path: str, provenance: dict | None = None) -> None:
    """CSV with header comments plus a sibling .f64 feature file (row-major
    little-endian float64, one row per frame)."""
    feat_name = os.path.splitext(os.path.basename(csv_path))[0] + ".f64"
    feat_path = os.path.join(os.path.dirname(csv_path), feat_name)
    meta = {
        "object": traj.object_id,
        "profile": traj.profile,
        "seed": traj.seed,
        "aborted": str(traj.aborted).lower(),
        "features": feat_name,
        "dims": traj.features.shape[1] if traj.features.size else learning.FEATURE_LEN,
    }
    if provenance:
        meta.update(provenance)
    lines = ["# " + " ".join(f"{k}={v}" for k, v in meta.items())]
    lines.append(",".join(CSV_COLUMNS))
    cols = [traj.data[c] for c in CSV_COLUMNS]
    for i in range(traj.n_frames):
        lines.append(",".join(_fmt(col[i]) for col in cols))
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    traj.features.astype("<f8").tofile(feat_path)


def read_trajectory(csv_path: str) -> Trajectory:
    meta = {}
    rows = []
    with open(csv_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            rows.append(line)
    header = rows[0].split(",")
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected trajectory columns in {csv_path}")
    body = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    if body.size == 0:
        body = np.zeros((0, len(CSV_COLUMNS)))
    data = {c: body[:, i] for i, c in enumerate(CSV_COLUMNS)}
    dims = int(meta.get("dims", learning.FEATURE_LEN))
    feat_path = os.path.join(os.path.dirname(csv_path), meta["features"])
    features = np.fromfile(feat_path, dtype="<f8").reshape(-1, dims)
    return Trajectory(
        object_id=meta.get("object", "?"),
        profile=meta.get("profile", ""),
        seed=int(meta.get("seed", 0)),
        aborted=meta.get("aborted", "false") == "true",
        data=data,
        features=features,
    )


# ---------------------------------------------------------------------------
# Report rendering

def report_text(report: EvalReport, notes: dict | None = None) -> str:
    out = []
    if notes:
        out.append("# " + " ".join(f"{k}={v}" for k, v in notes.items()))
    if report.offline:
        out.append("== offline orientation error (deg, mean absolute) ==")
        for r in report.offline:
            out.append(f"object: {r.object_id}")
            out.append(f"  raw_error_deg: {_fmt(r.raw_err_deg)}")
            out.append(f"  rectified_error_deg: {_fmt(r.rect_err_deg)}")
            out.append(f"  reduction_deg: {_fmt(r.reduction_deg)}")
    if report.online:
        out.append("== online tracking (deg RMSE / deg/s^3 RMS jerk) ==")
        for r in report.online:
            out.append(f"object: {r.object_id}")
            out.append(f"  mode: {r.mode}")
            out.append(f"  rmse_deg: {_fmt(r.rmse_deg)}")
            out.append(f"  rms_jerk_deg_s3: {_fmt(r.jerk_deg_s3)}")
            out.append(f"  aborted: {str(r.aborted).lower()}")
    return "\n".join(out) + "\n"


def report_dict(report: EvalReport) -> dict:
    return {
        "offline": [
            {"object": r.object_id, "raw_err_deg": r.raw_err_deg,
             "rect_err_deg": r.rect_err_deg, "reduction_deg": r.reduction_deg}
            for r in report.offline
        ],
        "online": [
            {"object": r.object_id, "mode": r.mode, "rmse_deg": r.rmse_deg,
             "rms_jerk_deg_s3": r.jerk_deg_s3, "aborted": r.aborted}
            for r in report.online
        ],
    }


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
