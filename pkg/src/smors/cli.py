"""Command line: ``smors simulate | sweep | check``.

Exit codes: 0 success, 1 runtime failure, 2 config error, 3 output-safety refusal.
Relative output directories are placed under $SMORS_OUTPUT_ROOT when it is set.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg
from .checks import format_table, run_checks
from .sim import ENERGY_METRICS, Experiment, gravity_sweep, run_jump_experiment, summarize, write_log_csv, write_sweep_csv
from .spatial import rot_to_rpy

OUTPUT_ROOT_ENV = "SMORS_OUTPUT_ROOT"
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_REFUSED = 0, 1, 2, 3


class Refused(RuntimeError):
    pass


class ConfigMissing(RuntimeError):
    pass


def _parse_gammas(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid gamma list {text!r}") from exc
    if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
        raise argparse.ArgumentTypeError("gamma values must lie in [0, 1]")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="smors", description="Soft-arm multirotor jumping simulations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", type=Path, help="TOML experiment config; defaults when omitted")
        sp.add_argument("--energy-metric", choices=ENERGY_METRICS, help="override sim.energy_metric")
        if out:
            sp.add_argument("--out", type=Path, help="output directory")
            sp.add_argument("--no-overwrite", action="store_true", help="refuse to write into a non-empty directory")

    sim = sub.add_parser("simulate", help="closed-loop jump run")
    common(sim)
    sim.add_argument("--plot-data", action="store_true", help="also write binned series for six plot panels")
    sim.add_argument("--bin", type=int, default=10, help="samples per bin for --plot-data")
    sw = sub.add_parser("sweep", help="energy over the gravity fraction of the reference")
    common(sw)
    sw.add_argument("--gamma-list", type=_parse_gammas, help="comma separated gravity fractions, default 0:0.1:1")
    chk = sub.add_parser("check", help="fast invariant battery")
    common(chk, out=False)
    return p


def load_experiment(args):
    if args.config is not None and not args.config.is_file():
        raise ConfigMissing(f"config file not found: {args.config}")
    exp = Experiment() if args.config is None else cfg.load(args.config)
    if args.energy_metric:
        exp = replace(exp, sim=replace(exp.sim, energy_metric=args.energy_metric))
    return exp


def output_dir(args):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = args.out if args.out is not None else Path(f"smors_{args.command}")
    if root and not out.is_absolute():
        out = Path(root) / out
    if args.no_overwrite and out.exists() and any(out.iterdir()):
        raise Refused(f"output directory {out} is not empty")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_config(exp, out):
    with open(out / "config.toml", "w") as fh:
        fh.write(cfg.dumps(exp))


PANELS = {
    "position": ("p_x", "p_y", "p_z", "pd_x", "pd_y", "pd_z"),
    "orientation": ("roll_deg", "pitch_deg", "yaw_deg", "roll_d_deg", "pitch_d_deg", "yaw_d_deg"),
    "position_error": ("ep_x", "ep_y", "ep_z", "ep_norm"),
    "attitude_error": ("eR_deg",),
    "arm_angles": ("q11_deg", "q21_deg", "q13_deg", "q23_deg", "q15_deg", "q25_deg"),
    "propeller_forces": tuple(f"u{i}" for i in range(1, 7)),
}


def write_plot_data(log_, out, bin_size):
    """Bin-averaged series, one CSV per panel, with the contact flag (any tip force) per bin."""
    n = len(log_.t) // bin_size * bin_size
    if n == 0:
        return

    def binned(x):
        x = np.asarray(x, dtype=float)[:n]
        return x.reshape(n // bin_size, bin_size, *x.shape[1:]).mean(axis=1)

    rpy = np.rad2deg(log_.q[:, 3:6])
    rpy_d = np.rad2deg(np.array([rot_to_rpy(R) for R in log_.R_d]))
    data = {
        "position": np.hstack([log_.q[:, 0:3], log_.p_d]),
        "orientation": np.hstack([rpy, rpy_d]),
        "position_error": np.hstack([log_.e_p, np.linalg.norm(log_.e_p, axis=1)[:, None]]),
        "attitude_error": np.rad2deg(log_.e_R_angle)[:, None],
        "arm_angles": np.rad2deg(log_.q[:, 6:12]),
        "propeller_forces": log_.u[:, :6],
    }
    t = binned(log_.t)
    contact = log_.in_contact[:n].reshape(-1, bin_size).any(axis=1)
    for name, cols in PANELS.items():
        vals = binned(data[name])
        with open(out / f"panel_{name}.csv", "w") as fh:
            fh.write(",".join(("t", *cols, "contact")) + "\n")
            for k in range(len(t)):
                fh.write(",".join([repr(float(t[k])), *(repr(float(v)) for v in vals[k]), str(int(contact[k]))]) + "\n")


def _summary_json(summary):
    s = dict(summary)
    s["stance_intervals"] = [list(iv) for iv in s["stance_intervals"]]
    return s


def cmd_simulate(args):
    exp = load_experiment(args)
    out = output_dir(args)
    _write_config(exp, out)
    res = run_jump_experiment(exp)
    write_log_csv(res, out / "log.csv")
    summary = summarize(res)
    _json(_summary_json(summary), out / "summary.json")
    if args.plot_data:
        write_plot_data(res, out, max(1, args.bin))
    print(f"peak position error   {summary['peak_position_error_m']:.4f} m at t={summary['peak_position_error_time']:.3f} s")
    print(f"peak attitude error   {summary['peak_attitude_error_deg']:.2f} deg at t={summary['peak_attitude_error_time']:.3f} s"
          f" ({'stance' if summary['peak_attitude_error_in_stance'] else 'flight'})")
    print(f"stance intervals      {len(summary['stance_intervals'])}")
    print(f"energy                {summary['energy']:.4f}")
    print(f"output                {out}")
    if not res.completed:
        print(f"run aborted: {res.failure}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args):
    exp = load_experiment(args)
    out = output_dir(args)
    _write_config(exp, out)
    table = gravity_sweep(exp, args.gamma_list)
    write_sweep_csv(table, out / "sweep.csv")
    for row in table:
        name = f"summary_gamma_{row['g_frac']:.3f}.json"
        summary = _summary_json(summarize(row["log"])) if row["log"] is not None else {"completed": False}
        summary["error"] = row["error"]
        _json(summary, out / name)
        print(f"gamma {row['g_frac']:.2f}  ok={int(row['ok'])}  E/E(0)={row['energy_norm_translation']:.4f}"
              f"  E/E_hover={row['energy_norm_hover']:.4f}")
    print(f"output {out}")
    return EXIT_OK if all(r["ok"] for r in table) else EXIT_RUNTIME


def cmd_check(args):
    exp = load_experiment(args)
    results = run_checks(exp)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "check": cmd_check}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigMissing as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Refused as exc:
        print(f"refusing to write: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
