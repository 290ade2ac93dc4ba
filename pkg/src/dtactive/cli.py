"""Command-line entry point: collect -> train -> eval pipelines plus the
grasp-analysis table. Exit codes: 0 success, 1 runtime failure, 2 usage error.

All outputs land under the configured output directory; every generated file
carries the config digest and seed in a header comment for provenance.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import os
import sys
import time

import numpy as np

from . import dexterity, harness, learning
from .config import RunConfig, parse_config, serialize_config
from .errors import ConfigError
from .harness import EvalReport, HarnessConfig
from .shapes import ALL_IDS, NOVEL_IDS, TRAINED_IDS

DUMP_STRIDE = 25  # with --dump-depth, save every 25th frame's maps as PGM


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtactive", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, objects=False, modes=False, traj=False):
        sp.add_argument("--config", default=None, help="YAML config file")
        sp.add_argument("--seed", type=int, default=None, help="override base seed")
        sp.add_argument("--out", default=None, help="output directory root")
        if objects:
            sp.add_argument("--object", action="append", default=None,
                            choices=list(ALL_IDS), help="object id (repeatable)")
        if modes:
            sp.add_argument("--mode", action="append", default=None,
                            choices=["open-loop", "ours"], help="evaluation mode (repeatable)")
        if traj:
            sp.add_argument("--amplitude", type=float, default=None, help="sinusoid amplitude, deg")
            sp.add_argument("--period", type=float, default=None, help="sinusoid period, s")
        sp.add_argument("--dump-depth", action="store_true",
                        help=f"dump every {DUMP_STRIDE}th frame's depth maps as 16-bit PGM")

    common(sub.add_parser("dexterity", help="grasp-analysis table"))
    common(sub.add_parser("collect", help="run the data-collection protocol"))
    common(sub.add_parser("train", help="train both networks from collected data"))
    common(sub.add_parser("eval-offline", help="orientation-error replay on held-out data"))
    common(sub.add_parser("eval-online", help="closed-loop tracking evaluation"),
           objects=True, modes=True, traj=True)
    common(sub.add_parser("run", help="collect + train + eval end to end"),
           objects=True, modes=True, traj=True)
    common(sub.add_parser("demo", help="reduced end-to-end pipeline (a few minutes)"))
    return p


def _load(args) -> tuple[RunConfig, dict]:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.harness.seed = args.seed
        cfg.world = dataclasses.replace(cfg.world, seed=args.seed)
        cfg.training.seed = args.seed
    if args.out is not None:
        cfg.paths.out_dir = args.out
    if getattr(args, "amplitude", None) is not None:
        cfg.harness.amplitude_deg = args.amplitude
    if getattr(args, "period", None) is not None:
        cfg.harness.period_s = args.period
    cfg.validate()
    provenance = {
        "config_sha256": harness.config_digest(serialize_config(cfg)),
        "base_seed": cfg.harness.seed,
    }
    return cfg, provenance


def write_pgm(depthmap, path: str) -> None:
    """Binary PGM (P5), 16-bit big-endian, depth in micrometers."""
    um = np.clip(np.round(depthmap.values * 1000.0), 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{depthmap.width} {depthmap.height}\n65535\n".encode())
        fh.write(um.tobytes())


def _make_dump_hook(out_dir: str):
    os.makedirs(out_dir, exist_ok=True)

    def hook(object_id, profile, tick, d_l, d_r):
        if tick % DUMP_STRIDE:
            return
        stem = f"{object_id}_{profile}_{tick:05d}"
        write_pgm(d_l, os.path.join(out_dir, stem + "_left.pgm"))
        write_pgm(d_r, os.path.join(out_dir, stem + "_right.pgm"))

    return hook


def cmd_dexterity(args) -> int:
    cfg, prov = _load(args)
    geom = cfg.dexterity
    r_roller = dexterity.min_radius_roller(20.0)
    r_flat = dexterity.min_radius_flat_corner(geom)
    disk = dexterity.disk_region(10.0)
    load = dexterity.GraspLoad(normal_force=10.0, friction_coefficient=1.0)
    t_disk = dexterity.anti_torsion_torque(disk, load)
    lift = dexterity.lifting_force(10.0, 0.8, 2.0 * 4.0, 4.0)
    rows = [
        ("min graspable radius, 20 mm roller pair", f"{r_roller:.3f} mm"),
        ("min graspable radius, flat-corner fingertip", f"{r_flat:.3f} mm"),
        ("anti-torsion torque, 10 mm disk patch (mu=1, 10 N)", f"{t_disk:.2f} N*mm"),
        ("lifting force (R=2r, mu=0.8, 10 N)", f"{lift:.3f} N"),
    ]
    width = max(len(r[0]) for r in rows)
    print("grasp analysis")
    for name, val in rows:
        print(f"  {name:<{width}}  {val}")
    if args.out is not None:
        os.makedirs(cfg.paths.report_dir, exist_ok=True)
        record = {
            "provenance": prov,
            "min_radius_roller_mm": r_roller,
            "min_radius_flat_corner_mm": r_flat,
            "anti_torsion_disk_nmm": t_disk,
            "lifting_force_n": lift,
            "geometry": {
                "corner_radius": geom.corner_radius,
                "plane_protrusion": geom.plane_protrusion,
                "plane_half_length": geom.plane_half_length,
                "table_clearance": geom.table_clearance,
            },
        }
        path = os.path.join(cfg.paths.report_dir, "dexterity.json")
        with open(path, "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
        print(f"wrote {path}")
    return 0


def _collect_into(cfg: RunConfig, prov: dict, dump_depth: bool = False) -> list:
    os.makedirs(cfg.paths.data_dir, exist_ok=True)
    hook = _make_dump_hook(os.path.join(cfg.paths.out_dir, "depthmaps")) if dump_depth else None
    trajs = harness.collect(cfg.world, cfg.gains, cfg.harness, frame_hook=hook)
    for traj in trajs:
        name = f"traj_{traj.object_id}_{traj.profile}.csv"
        harness.write_trajectory(traj, os.path.join(cfg.paths.data_dir, name), prov)
    return trajs


def _read_dataset(cfg: RunConfig) -> list:
    paths = sorted(glob.glob(os.path.join(cfg.paths.data_dir, "traj_*.csv")))
    if not paths:
        raise FileNotFoundError(f"dataset not found: {cfg.paths.data_dir}")
    return [harness.read_trajectory(p) for p in paths]


def cmd_collect(args) -> int:
    cfg, prov = _load(args)
    t0 = time.time()
    trajs = _collect_into(cfg, prov, args.dump_depth)
    frames = sum(t.n_frames for t in trajs)
    print(f"collected {len(trajs)} trajectories, {frames} frames in {time.time()-t0:.1f} s "
          f"-> {cfg.paths.data_dir}")
    return 0


def cmd_train(args) -> int:
    cfg, prov = _load(args)
    dataset = _read_dataset(cfg)
    train_trajs, _ = harness.split(dataset, cfg.harness.seed)
    t0 = time.time()
    model_n, model_pi = harness.train_models(train_trajs, cfg.training, cfg.gains.omega_max)
    os.makedirs(cfg.paths.model_dir, exist_ok=True)
    comment = f"config_sha256={prov['config_sha256']} seed={prov['base_seed']}"
    learning.save_model(model_n, os.path.join(cfg.paths.model_dir, "rectify.model"), comment)
    learning.save_model(model_pi, os.path.join(cfg.paths.model_dir, "policy.model"), comment)
    print(f"trained rectification + policy networks in {time.time()-t0:.1f} s "
          f"-> {cfg.paths.model_dir}")
    return 0


def _load_models(cfg: RunConfig):
    n_path = os.path.join(cfg.paths.model_dir, "rectify.model")
    p_path = os.path.join(cfg.paths.model_dir, "policy.model")
    for p in (n_path, p_path):
        if not os.path.exists(p):
            raise FileNotFoundError(f"model not found: {p}")
    return learning.load_model(n_path), learning.load_model(p_path)


def _write_reports(report: EvalReport, cfg: RunConfig, prov: dict) -> None:
    os.makedirs(cfg.paths.report_dir, exist_ok=True)
    txt = harness.report_text(report, prov)
    with open(os.path.join(cfg.paths.report_dir, "report.txt"), "w") as fh:
        fh.write(txt)
    summary = {"provenance": prov, **harness.report_dict(report)}
    with open(os.path.join(cfg.paths.report_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(txt, end="")


def cmd_eval_offline(args) -> int:
    cfg, prov = _load(args)
    dataset = _read_dataset(cfg)
    _, test_trajs = harness.split(dataset, cfg.harness.seed)
    model_n, _ = _load_models(cfg)
    report = EvalReport(offline=harness.eval_offline(model_n, test_trajs, cfg.world.dt))
    _write_reports(report, cfg, prov)
    return 0


def cmd_eval_online(args) -> int:
    cfg, prov = _load(args)
    objects = args.object or list(ALL_IDS)
    modes = args.mode or ["open-loop", "ours"]
    models = _load_models(cfg)
    report = EvalReport()
    for oid in objects:
        for mode in modes:
            row, _ = harness.eval_online(models, oid, cfg.world, cfg.gains, cfg.harness, mode)
            report.online.append(row)
    _write_reports(report, cfg, prov)
    return 0


def cmd_run(args) -> int:
    cfg, prov = _load(args)
    _collect_into(cfg, prov, args.dump_depth)
    rc = cmd_train(args)
    if rc:
        return rc
    cfg2, _ = _load(args)
    dataset = _read_dataset(cfg2)
    _, test_trajs = harness.split(dataset, cfg2.harness.seed)
    models = _load_models(cfg2)
    report = EvalReport(offline=harness.eval_offline(models[0], test_trajs, cfg2.world.dt))
    objects = args.object or list(ALL_IDS)
    modes = args.mode or ["open-loop", "ours"]
    for oid in objects:
        for mode in modes:
            row, _ = harness.eval_online(models, oid, cfg2.world, cfg2.gains, cfg2.harness, mode)
            report.online.append(row)
    _write_reports(report, cfg2, prov)
    return 0


def cmd_demo(args) -> int:
    """Reduced pipeline: 3 objects, 2 speeds, short training, one online pair."""
    cfg, prov = _load(args)
    cfg.harness.speeds = (0.2, 0.4)
    cfg.harness.period_s = 30.0
    cfg.harness.periods = 1
    cfg.training.epochs = 12
    t0 = time.time()
    objects, novel = ("A1", "B1"), ("N1",)
    os.makedirs(cfg.paths.data_dir, exist_ok=True)
    trajs = harness.collect(cfg.world, cfg.gains, cfg.harness, objects=objects, novel=novel)
    for traj in trajs:
        name = f"traj_{traj.object_id}_{traj.profile}.csv"
        harness.write_trajectory(traj, os.path.join(cfg.paths.data_dir, name), prov)
    by_obj = {}
    for tr in trajs:
        by_obj.setdefault(tr.object_id, []).append(tr)
    train_trajs = [by_obj[o][0] for o in objects]   # first speed trains
    test_trajs = [by_obj[o][1] for o in objects] + [by_obj[n][0] for n in novel]
    model_n, model_pi = harness.train_models(train_trajs, cfg.training, cfg.gains.omega_max)
    os.makedirs(cfg.paths.model_dir, exist_ok=True)
    comment = f"config_sha256={prov['config_sha256']} seed={prov['base_seed']}"
    learning.save_model(model_n, os.path.join(cfg.paths.model_dir, "rectify.model"), comment)
    learning.save_model(model_pi, os.path.join(cfg.paths.model_dir, "policy.model"), comment)
    report = EvalReport(offline=harness.eval_offline(model_n, test_trajs, cfg.world.dt))
    for mode in ("open-loop", "ours"):
        row, _ = harness.eval_online((model_n, model_pi), "A1", cfg.world, cfg.gains,
                                     cfg.harness, mode)
        report.online.append(row)
    _write_reports(report, cfg, prov)
    print(f"demo finished in {time.time()-t0:.1f} s")
    return 0


_COMMANDS = {
    "dexterity": cmd_dexterity,
    "collect": cmd_collect,
    "train": cmd_train,
    "eval-offline": cmd_eval_offline,
    "eval-online": cmd_eval_online,
    "run": cmd_run,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failures map to exit 1 with one line
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
