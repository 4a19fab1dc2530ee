"""Energy of the jump experiment over the gravity fraction; writes sweep.csv."""

import argparse
import logging

import numpy as np

from smors.sim import Experiment, SimConfig, gravity_sweep, write_sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=11)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    exp = Experiment(sim=SimConfig(duration=args.duration))
    table = gravity_sweep(exp, np.linspace(0.0, 1.0, args.points))
    write_sweep_csv(table, args.out)
    for row in table:
        print(f"gamma {row['g_frac']:.2f}  ok {row['ok']}  E/E(0) {row['energy_norm_translation']:.3f}")


if __name__ == "__main__":
    main()
