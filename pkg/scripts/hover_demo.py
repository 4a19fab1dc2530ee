"""Hover recovery from a position offset; prints the error every 0.25 s."""

import argparse

import numpy as np

from smors.controller import hover_equilibrium
from smors.sim import Experiment, SimConfig, run_closed_loop
from smors.trajectory import HoverReference


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--offset", type=float, nargs=3, default=(0.05, 0.0, 0.0), help="initial offset [m]")
    ap.add_argument("--duration", type=float, default=3.0)
    args = ap.parse_args()
    exp = Experiment(sim=SimConfig(duration=args.duration))
    target = np.array([0.0, 0.0, 1.0])
    state0, _ = hover_equilibrium(exp.robot, exp.controller.arm_hold_angle, p=target + np.asarray(args.offset))
    log = run_closed_loop(exp, state0=state0, trajectory=HoverReference(target))
    e = np.linalg.norm(log.e_p, axis=1)
    every = max(1, int(round(0.25 / (log.t[1] - log.t[0]))))
    for k in range(0, len(e), every):
        print(f"t {log.t[k]:5.2f} s  |e_p| {e[k] * 1e3:8.4f} mm")
    print(f"final |e_p| {e[-1] * 1e3:.4f} mm")


if __name__ == "__main__":
    main()
