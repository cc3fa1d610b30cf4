"""Command line front-end: ``ofspi demo | run | verify``."""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

from ofspi.config import ConfigError, ExperimentConfig, demo_config
from ofspi.pipeline import StageError, run_experiment, verify_result

SWEEP_DELTAS = [0.1, 0.4, 0.7, 0.9]


def _deltas(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _summary(outcome) -> str:
    rec = outcome.record
    parts = [f"beta={rec['beta_tilde']}", f"iterations={rec['iterations']}",
             f"c_final={rec['c_final']:.6f}"]
    ver = rec.get("verification")
    if ver:
        parts += [f"open-loop rho={ver['open_loop_rho']:.4f}",
                  f"closed-loop rho={ver['final_rho']:.4f}",
                  f"certificates {'pass' if ver['all_passed'] else 'FAIL'}"]
    return "  ".join(parts)


def _run(cfg: ExperimentConfig, args) -> int:
    if args.seed is not None:
        cfg.excitation.seed = args.seed
    verify = False if args.no_verify else None
    out = Path(args.out)
    try:
        if args.sweep_delta:
            for delta in args.sweep_delta:
                c = copy.deepcopy(cfg)
                c.delta = delta
                outcome = run_experiment(c, out / f"delta_{delta}", verify)
                print(f"delta={delta}: {_summary(outcome)}")
        else:
            outcome = run_experiment(cfg, out, verify)
            print(_summary(outcome))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.stage == "config" else 1
    print(f"artifacts written to {out}")
    return 0


def cmd_demo(args) -> int:
    cfg = demo_config()
    if args.config:
        cfg.dump(args.config)
    return _run(cfg, args)


def cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    return _run(cfg, args)


def cmd_verify(args) -> int:
    result_path = Path(args.result)
    if result_path.is_dir():
        result_path = result_path / "result.json"
    try:
        record = json.loads(result_path.read_text())
        cfg = ExperimentConfig.load(args.config) if args.config else \
            ExperimentConfig.from_dict(record["config"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        print(f"error: [verify] missing or unreadable artifacts: {exc}", file=sys.stderr)
        return 2
    report = verify_result(record, cfg)
    for line in report.lines:
        print(line)
    print("verification", "passed" if report.passed else "FAILED")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofspi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="excitation phase seed")
        p.add_argument("--no-verify", action="store_true",
                       help="skip the model-based checks and trajectory export")
        p.add_argument("--sweep-delta", type=_deltas, nargs="?", const=SWEEP_DELTAS,
                       default=None, metavar="D1,D2,...",
                       help="run once per delta into OUT/delta_<d> (default 0.1,0.4,0.7,0.9)")

    p = sub.add_parser("demo", help="power-system example")
    common(p)
    p.add_argument("--config", default=None, help="also write the demo config here")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("run", help="run a configured experiment")
    common(p)
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="replay certificates over a stored result")
    p.add_argument("result", help="result.json or the directory holding it")
    p.add_argument("--config", default=None, help="config with the true plant "
                   "(defaults to the one echoed in the result)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
