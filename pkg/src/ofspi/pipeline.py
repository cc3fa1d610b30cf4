"""Collect, learn, verify and export one experiment."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ofspi import oracle
from ofspi.config import ConfigError, ExperimentConfig
from ofspi.excitation import build_regression, collect, min_samples, rank_condition
from ofspi.learner import SpiError, SpiResult, run_spi
from ofspi.plant import IOPlant, check_assumption1, spectral_radius
from ofspi.reconstruction import FilterBank

log = logging.getLogger(__name__)

ITERATION_COLUMNS = ["j", "beta_tilde", "alpha_j", "c_j", "ls_residual", "rho_bound", "rho_actual"]


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    result: SpiResult
    record: dict
    checks: list = field(default_factory=list)
    trajectory: tuple | None = None


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_iterations_csv(path, result: SpiResult, checks=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ITERATION_COLUMNS)
        for i, h in enumerate(result.history):
            rho = checks[i].rho_actual if checks else None
            res = h.learned.residual if h.learned is not None else None
            w.writerow([h.j, _fmt(h.beta_tilde), _fmt(h.alpha), _fmt(h.c), _fmt(res),
                        _fmt(1.0 / h.c), _fmt(rho)])


def write_trajectory_csv(path, X_cl, U_cl, X_ol) -> None:
    n = X_cl.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k"] + [f"x{i}_closed" for i in range(n)] + [f"x{i}_open" for i in range(n)]
                   + [f"u{i}_closed" for i in range(U_cl.shape[1])])
        for k in range(X_cl.shape[0]):
            u = U_cl[k] if k < U_cl.shape[0] else np.full(U_cl.shape[1], np.nan)
            w.writerow([k] + [repr(float(v)) for v in np.concatenate([X_cl[k], X_ol[k], u])])


def result_record(cfg: ExperimentConfig, result: SpiResult, rank, checks=None,
                  extra: dict | None = None) -> dict:
    hist = []
    for i, h in enumerate(result.history):
        entry = {"j": h.j, "beta_tilde": h.beta_tilde, "alpha": h.alpha, "c": h.c,
                 "gain": h.gain.tolist(),
                 "ls_residual": None if h.learned is None else h.learned.residual,
                 "gamma": h.gamma}
        if checks:
            entry["rho_actual"] = checks[i].rho_actual
            entry["rho_bound"] = checks[i].rho_bound
            entry["passed"] = checks[i].passed
        hist.append(entry)
    rec = {
        "termination": result.termination,
        "gain": result.gain.tolist(),
        "beta_tilde": result.beta_tilde,
        "iterations": result.iterations,
        "c_final": result.c_final,
        "rank": {"achieved": rank.achieved, "required": rank.required, "samples": rank.rows},
        "beta_trials": [[b, s] for b, s in result.beta_trials],
        "history": hist,
        "config": cfg.to_dict(),
    }
    if extra:
        rec["verification"] = extra
    return rec


def run_experiment(cfg: ExperimentConfig, out_dir=None, verify: bool | None = None) -> ExperimentOutcome:
    """Full pipeline.  Raises :class:`StageError` tagged with the failing
    stage (``config``, ``collect``, ``rank``, ``learn``, ``verify``)."""
    verify = cfg.verify if verify is None else verify
    try:
        cfg.validate()
    except ConfigError as exc:
        raise StageError("config", str(exc)) from exc
    sys = cfg.system()
    n, m, p = sys.n, sys.m, sys.p
    fb = FilterBank(cfg.M_r(n), m, p)
    k0 = cfg.start(n)
    k_s = k0 + cfg.samples
    spec = cfg.excitation_spec(m, fb.n_r)
    try:
        data = collect(IOPlant(sys, cfg.plant.x0), fb, spec, k0, k_s)
    except ValueError as exc:
        raise StageError("collect", str(exc)) from exc
    reg = build_regression(data)
    rank = rank_condition(reg)
    log.info("%s", rank)
    if not rank.passed:
        raise StageError("rank", f"{rank} (required rank {rank.required}; at least "
                         f"{min_samples(fb.n_r, m)} samples recommended)")
    try:
        result = run_spi(cfg.spi_config(m, p), data, reg)
    except SpiError as exc:
        raise StageError("learn", str(exc)) from exc

    checks, extra, traj = None, None, None
    if verify:
        try:
            mbar = oracle.construct_mbar(sys, fb)
        except ValueError as exc:
            raise StageError("verify", str(exc)) from exc
        checks = [oracle.verify_iteration(sys, mbar, h.gain, h.c) for h in result.history]
        eig = np.linalg.eigvals(sys.A)
        a1 = check_assumption1(sys)
        x0 = np.zeros(n) if cfg.plant.x0 is None else np.asarray(cfg.plant.x0, float)
        X_cl, U_cl = oracle.closed_loop_trajectory(sys, fb, result.gain, x0, cfg.horizon)
        X_ol, _ = oracle.closed_loop_trajectory(sys, fb, np.zeros_like(result.gain), x0, cfg.horizon)
        traj = (X_cl, U_cl, X_ol)
        extra = {
            "open_loop_rho": spectral_radius(sys.A),
            "open_loop_eigenvalues": [[float(z.real), float(z.imag)] for z in sorted(eig, key=lambda z: (abs(z), z.imag))],
            "controllable": bool(a1.controllable),
            "observable": bool(a1.observable),
            "mbar": mbar.M.tolist(),
            "mbar_fit_residual": mbar.residual,
            "state_gain": (result.gain @ mbar.pinv).tolist(),
            "final_rho": checks[-1].rho_actual,
            "all_passed": bool(all(c.passed for c in checks)),
            "final_state_inf_norm": float(np.abs(X_cl[-1]).max()),
        }
    record = result_record(cfg, result, rank, checks, extra)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_iterations_csv(out / "iterations.csv", result, checks)
        (out / "result.json").write_text(json.dumps(record, indent=2) + "\n")
        data.to_csv(out / "data_log.csv")
        if traj is not None:
            write_trajectory_csv(out / "trajectory.csv", *traj)
    return ExperimentOutcome(cfg, result, record, checks or [], traj)


@dataclass
class VerifyReport:
    lines: list[str]
    passed: bool


def verify_result(record: dict, cfg: ExperimentConfig) -> VerifyReport:
    """Replay the spectral-radius certificate over a stored history."""
    sys = cfg.system()
    fb = FilterBank(cfg.M_r(sys.n), sys.m, sys.p)
    mbar = oracle.construct_mbar(sys, fb)
    lines, ok = [], True
    for h in record["history"]:
        chk = oracle.verify_iteration(sys, mbar, np.asarray(h["gain"]), h["c"])
        ok &= chk.passed
        lines.append(f"j={h['j']:3d}  rho={chk.rho_actual:.6f}  bound={chk.rho_bound:.6f}  "
                     f"{'pass' if chk.passed else 'FAIL'}")
    final = oracle.verify_iteration(sys, mbar, np.asarray(record["gain"]), record["c_final"])
    lines.append(f"final gain: closed-loop rho={final.rho_actual:.6f} "
                 f"({'stable' if final.rho_actual < 1 else 'NOT stable, rho >= 1'})")
    ok &= final.passed and final.rho_actual < 1.0
    if record["c_final"] < 1.0:
        lines.append(f"non-terminated run: c_final={record['c_final']:.6f} < 1")
        ok = False
    return VerifyReport(lines, ok)
