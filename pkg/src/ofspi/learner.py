"""Model-free stabilizing policy iteration on a fixed input/output log.

Every quantity here is computed from the logged ``(u, y, rbar)`` samples
only; the plant matrices are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ofspi.excitation import ExperimentLog, RegressionData, d_kbar, rank_condition
from ofspi.tensor_ops import mat_from_vecs, unvec, vec

ZERO_SAMPLE_TOL = 1e-12


class SpiError(RuntimeError):
    """Base class for learner failures."""


class RankConditionError(SpiError):
    pass


class EvaluationRankError(SpiError):
    def __init__(self, rank: int, cols: int):
        self.rank, self.cols = rank, cols
        super().__init__(f"policy evaluation regressor has rank {rank} of {cols} "
                         f"(gap {cols - rank}); excitation is insufficient")


class NoStableCompressionError(SpiError):
    pass


class StepSizeError(SpiError):
    pass


class IterationLimitError(SpiError):
    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


def default_beta_sequence() -> tuple[float, ...]:
    """``0.9, 0.89, ..., 0.01``."""
    return tuple(round(0.9 - 0.01 * i, 2) for i in range(90))


@dataclass
class SpiConfig:
    Q: np.ndarray
    R: np.ndarray
    delta: float = 0.7
    beta_sequence: tuple[float, ...] = field(default_factory=default_beta_sequence)
    safety: float = 0.9
    max_iter: int = 100

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.beta_sequence = tuple(float(b) for b in self.beta_sequence)

    def problems(self) -> list[str]:
        """All violated parameter constraints, not just the first."""
        out = []
        for name, M in (("Q", self.Q), ("R", self.R)):
            if M.shape[0] != M.shape[1]:
                out.append(f"{name} must be square, got shape {M.shape}")
            elif not np.allclose(M, M.T) or np.linalg.eigvalsh((M + M.T) / 2).min() <= 0:
                out.append(f"{name} must be symmetric positive definite")
        if not 0.0 < self.delta < 1.0:
            out.append(f"δ must lie in (0,1), got {self.delta}")
        seq = self.beta_sequence
        if not seq:
            out.append("beta sequence must be nonempty")
        if any(not 0.0 < b < 1.0 for b in seq):
            out.append("every beta must lie in (0,1)")
        if any(b2 >= b1 for b1, b2 in zip(seq, seq[1:])):
            out.append("beta sequence must be strictly decreasing")
        if not 0.0 < self.safety <= 1.0:
            out.append(f"safety fraction must lie in (0,1], got {self.safety}")
        if self.max_iter < 1:
            out.append("max_iter must be at least 1")
        return out


@dataclass(frozen=True)
class LearnedQuantities:
    P: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    residual: float


@dataclass(frozen=True)
class IterationRecord:
    """State at iteration ``j``: the gain in force, its scale ``c`` and, when
    the loop evaluated it, the learned value matrices."""

    j: int
    beta_tilde: float
    alpha: float
    c: float
    gain: np.ndarray
    learned: LearnedQuantities | None = None
    gamma: float | None = None


@dataclass
class SpiResult:
    gain: np.ndarray
    history: list[IterationRecord]
    beta_tilde: float
    Qc: np.ndarray
    beta_trials: list[tuple[float, str]]
    termination: str = "converged"

    @property
    def iterations(self) -> int:
        return self.history[-1].j

    @property
    def c_final(self) -> float:
        return self.history[-1].c


def _sizes(n_r: int, m: int) -> tuple[int, int, int]:
    return n_r * (n_r + 1) // 2, n_r * m, m * (m + 1) // 2


def assemble_system(reg: RegressionData, dk: np.ndarray, gain: np.ndarray, c: float,
                    Q: np.ndarray, R: np.ndarray, Qc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Regressor ``psi`` and target ``phi`` for one policy evaluation.

    Unknowns are ``[vecs(P), vec(Y1), vecs(Y2)]`` with ``Y1`` of shape
    ``(n_r, m)`` in column-major order.
    """
    if c <= 0:
        raise ValueError(f"cumulative coefficient must be positive, got {c}")
    n_r, m = reg.n_r, reg.m
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    if gain.shape != (m, n_r):
        raise ValueError(f"gain has shape {gain.shape}, expected {(m, n_r)}")
    if dk.shape != reg.D_u.shape:
        raise ValueError(f"D_Kr has shape {dk.shape}, expected {reg.D_u.shape}")
    Qc = np.asarray(Qc, dtype=float)
    if Qc.shape != (n_r, n_r):
        raise ValueError(f"Qc has shape {Qc.shape}, expected {(n_r, n_r)}")
    inv_c2 = c ** -2
    # D_rr (K' (x) I) has rows kron(K r, r), matching column-major vec(Y1).
    mid = -2.0 * reg.D_rr @ np.kron(gain.T, np.eye(n_r)) - 2.0 * reg.D_ur
    psi = np.hstack([reg.C_r + (1.0 - inv_c2) * reg.D_r, mid, -reg.D_u + dk])
    phi = -inv_c2 * (reg.D_yy @ vec(Q) + reg.D_rr @ vec(gain.T @ R @ gain + Qc))
    return psi, phi


def policy_evaluation(psi: np.ndarray, phi: np.ndarray, n_r: int, m: int) -> LearnedQuantities:
    """Least-squares solve of ``psi @ theta = phi`` with column equilibration."""
    a, b, _ = _sizes(n_r, m)
    norms = np.linalg.norm(psi, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    scaled = psi / scale
    theta_s, _, rank, _ = np.linalg.lstsq(scaled, phi, rcond=None)
    if rank < psi.shape[1] or np.any(norms == 0):
        rank = min(rank, int(np.sum(norms > 0)))
        raise EvaluationRankError(int(rank), psi.shape[1])
    theta = theta_s / scale
    residual = float(np.linalg.norm(psi @ theta - phi))
    return LearnedQuantities(
        P=mat_from_vecs(theta[:a]),
        Y1=unvec(theta[a:a + b], n_r, m),
        Y2=mat_from_vecs(theta[a + b:]),
        residual=residual,
    )


def evaluate(log: ExperimentLog, reg: RegressionData, gain: np.ndarray, c: float,
             cfg: SpiConfig, Qc: np.ndarray) -> LearnedQuantities:
    psi, phi = assemble_system(reg, d_kbar(log, gain), gain, c, cfg.Q, cfg.R, Qc)
    return policy_evaluation(psi, phi, reg.n_r, reg.m)


def _informative(log: ExperimentLog) -> np.ndarray:
    return np.linalg.norm(log.R, axis=1) >= ZERO_SAMPLE_TOL


def check_value_positivity(log: ExperimentLog, P: np.ndarray) -> bool:
    R = log.R[_informative(log)]
    return bool(np.all(np.einsum("ti,ij,tj->t", R, P, R) > 0.0))


def policy_improvement(lq: LearnedQuantities, R: np.ndarray, c: float) -> np.ndarray:
    """``c^2 (R + c^2 Y2)^-1 Y1'``."""
    R = np.atleast_2d(R)
    inner = R + c ** 2 * lq.Y2
    if np.linalg.cond(inner) > 1e12:
        raise SpiError("R + c^2 Y2 is numerically singular; evaluation is corrupted")
    return c ** 2 * np.linalg.solve(inner, lq.Y1.T)


def step_size_terms(log: ExperimentLog, P: np.ndarray, gain_next: np.ndarray,
                    Q: np.ndarray, R: np.ndarray, Qc: np.ndarray,
                    delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ``(Pi, Xi)`` over informative samples."""
    mask = _informative(log)
    Rs, Ys = log.R[mask], log.Y[mask]
    W = gain_next.T @ R @ gain_next + Qc
    quad_W = np.einsum("ti,ij,tj->t", Rs, W, Rs)
    quad_P = np.einsum("ti,ij,tj->t", Rs, P, Rs)
    quad_y = np.einsum("ti,ij,tj->t", Ys, Q, Ys)
    Pi = quad_P - quad_W - quad_y
    Xi = (1.0 - delta) * (quad_W + quad_y)
    return Pi, Xi


def select_step_size(log: ExperimentLog, P: np.ndarray, gain_next: np.ndarray,
                     cfg: SpiConfig, Qc: np.ndarray, c: float) -> tuple[float, float]:
    """Largest step satisfying ``((1 + a/c)^2 - 1) Pi <= Xi`` on every
    sample, times the safety fraction.  Returns ``(alpha, gamma)`` with
    ``gamma = min Xi/Pi``.
    """
    Pi, Xi = step_size_terms(log, P, gain_next, cfg.Q, cfg.R, Qc, cfg.delta)
    if Pi.size == 0:
        raise StepSizeError("no informative samples for step-size selection")
    bad = np.flatnonzero(Pi <= 0.0)
    if bad.size:
        t = int(np.flatnonzero(_informative(log))[bad[0]])
        raise StepSizeError(
            f"Pi(k) <= 0 at sample k={log.k0 + t} (Pi={Pi[bad[0]]:.3e}, {bad.size} samples "
            "affected); reconstruction error too large or rank condition marginal")
    gamma = float(np.min(Xi / Pi))
    return cfg.safety * c * (np.sqrt(1.0 + gamma) - 1.0), gamma


def search_beta(log: ExperimentLog, reg: RegressionData, cfg: SpiConfig):
    """Walk the beta sequence until the initial value matrix is positive on
    the data.  Returns ``(beta, P0, trials)``."""
    zero_gain = np.zeros((reg.m, reg.n_r))
    zero_Qc = np.zeros((reg.n_r, reg.n_r))
    trials = []
    for beta in cfg.beta_sequence:
        try:
            lq = evaluate(log, reg, zero_gain, beta, cfg, zero_Qc)
        except EvaluationRankError as exc:
            trials.append((beta, f"rejected: {exc}"))
            continue
        if check_value_positivity(log, lq.P):
            trials.append((beta, "accepted"))
            return beta, lq.P, trials
        trials.append((beta, "rejected: value not positive on data"))
    raise NoStableCompressionError(
        f"no stable compression found over {len(cfg.beta_sequence)} beta values")


def run_spi(cfg: SpiConfig, log: ExperimentLog, reg: RegressionData) -> SpiResult:
    problems = cfg.problems()
    if problems:
        raise ValueError("; ".join(problems))
    report = rank_condition(reg)
    if not report.passed:
        raise RankConditionError(str(report))
    beta, P0, trials = search_beta(log, reg, cfg)
    Qc = P0
    gain = np.zeros((reg.m, reg.n_r))
    c, alpha, j = beta, 0.0, 0
    history: list[IterationRecord] = []
    while not c >= 1.0:
        if j >= cfg.max_iter:
            history.append(IterationRecord(j, beta, alpha, c, gain))
            raise IterationLimitError(
                f"cumulative coefficient {c:.6f} < 1 after {j} iterations", history)
        lq = evaluate(log, reg, gain, c, cfg, Qc)
        gain_next = policy_improvement(lq, cfg.R, c)
        alpha_next, gamma = select_step_size(log, lq.P, gain_next, cfg, Qc, c)
        if not alpha_next > 0.0:
            raise StepSizeError(f"step size {alpha_next} is not positive at j={j}")
        history.append(IterationRecord(j, beta, alpha, c, gain, lq, gamma))
        gain, alpha, c, j = gain_next, alpha_next, c + alpha_next, j + 1
    history.append(IterationRecord(j, beta, alpha, c, gain))
    return SpiResult(gain, history, beta, Qc, trials)
