"""Closed-loop jump run at one gravity fraction; prints the summary and hop counts."""

import argparse
import logging

from smors.sim import Experiment, SimConfig, run_closed_loop, summarize, write_log_csv
from smors.trajectory import TrajectoryParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=0.3)
    ap.add_argument("--duration", type=float, default=10.0)
    ap.add_argument("--csv", help="write the log here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    exp = Experiment(trajectory=TrajectoryParams(g_frac=args.gamma), sim=SimConfig(duration=args.duration))
    log = run_closed_loop(exp)
    s = summarize(log)
    for key in ("completed", "peak_position_error_m", "peak_attitude_error_deg", "peak_attitude_error_in_stance",
                "max_flight_position_error_m", "energy", "saturation_events", "hops"):
        print(f"{key:32s} {s[key]}")
    if args.csv:
        write_log_csv(log, args.csv)


if __name__ == "__main__":
    main()
