"""Scale and spectral-radius traces for several decay rates delta.

Writes one CSV per delta plus a combined ``sweep.csv`` with columns
``delta, j, c_j, bound, rho`` where ``bound = 1/c_j`` and ``rho`` is the
true closed-loop spectral radius of the gain at iteration ``j``.
"""

import argparse
import copy
import csv
from pathlib import Path

from ofspi.config import demo_config
from ofspi.pipeline import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/sweep")
    ap.add_argument("--deltas", default="0.1,0.4,0.7,0.9")
    args = ap.parse_args()
    out = Path(args.out)
    rows = []
    for delta in (float(d) for d in args.deltas.split(",")):
        cfg = copy.deepcopy(demo_config())
        cfg.delta = delta
        rec = run_experiment(cfg, out / f"delta_{delta}").record
        for h in rec["history"]:
            rows.append((delta, h["j"], h["c"], h["rho_bound"], h["rho_actual"]))
        print(f"delta={delta}: {rec['iterations']} iterations, "
              f"final rho {rec['verification']['final_rho']:.4f}")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "j", "c_j", "bound", "rho"])
        w.writerows(rows)
    print(f"wrote {out / 'sweep.csv'}")


if __name__ == "__main__":
    main()
