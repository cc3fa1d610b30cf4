"""Learn a gain on the demo plant and compare controlled and uncontrolled
state trajectories from x(0) = [5, 5, 5]."""

import argparse
from pathlib import Path

import numpy as np

from ofspi.config import demo_config
from ofspi.pipeline import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/closed_loop")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = demo_config()
    cfg.excitation.seed = args.seed
    outcome = run_experiment(cfg, Path(args.out))
    ver = outcome.record["verification"]
    traj = np.loadtxt(Path(args.out) / "trajectory.csv", delimiter=",", skiprows=1)
    k = traj[:, 0]
    closed = np.abs(traj[:, 1:4]).max(axis=1)
    opened = np.abs(traj[:, 4:7]).max(axis=1)
    print(f"open-loop rho {ver['open_loop_rho']:.4f}, closed-loop rho {ver['final_rho']:.4f}")
    print(f"{'k':>5} {'|x| closed':>12} {'|x| open':>14}")
    for i in range(0, len(k), 50):
        print(f"{int(k[i]):5d} {closed[i]:12.3e} {opened[i]:14.3e}")
    hit = np.flatnonzero(closed < 5e-3)
    if hit.size:
        print(f"closed-loop states below 5e-3 from step {int(k[hit[0]])}")


if __name__ == "__main__":
    main()
