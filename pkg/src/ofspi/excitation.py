"""Exploration signals, data collection and the regression data matrices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ofspi.plant import IOPlant, spectral_radius
from ofspi.reconstruction import FilterBank, filter_step, reconstruction_state
from ofspi.tensor_ops import vecv_rows

RANK_RTOL = 1e-8
SAMPLE_MARGIN = 1.2
K0_EPS = 1e-8


@dataclass(frozen=True)
class ExcitationSpec:
    """Sum-of-sinusoids input, one row of terms per input channel.

    ``u_i(k) = sum_t amplitudes[i, t] * sin(frequencies[i, t] * k + phases[i, t]) + bias[i]``
    """

    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.amplitudes, dtype=float))
        m = np.asarray(self.bias, dtype=float).size if a.size == 0 else a.shape[0]
        shape = (m, a.size // m if m else 0)
        a = a.reshape(shape)
        w = np.asarray(self.frequencies, dtype=float).reshape(shape)
        ph = np.asarray(self.phases, dtype=float).reshape(shape)
        bias = np.asarray(self.bias, dtype=float).reshape(m)
        for name, arr in (("amplitudes", a), ("frequencies", w), ("phases", ph), ("bias", bias)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"excitation {name} must be finite")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "bias", bias)

    @property
    def m(self) -> int:
        return self.bias.size

    def problems(self, rank_target: int | None = None) -> list[str]:
        """Return a list of violated invariants (empty when valid)."""
        out = []
        if np.any(self.amplitudes == 0.0):
            out.append("excitation amplitudes must be nonzero")
        if rank_target is not None:
            need = math.ceil(rank_target / 2)
            distinct = np.unique(np.round(self.frequencies.ravel(), 12)).size
            if distinct < need:
                out.append(f"excitation has {distinct} distinct frequencies, "
                           f"rank target {rank_target} needs at least {need}")
        return out


def default_excitation(m: int, rank_target: int | None = None, n_terms: int = 10,
                       seed: int = 0) -> ExcitationSpec:
    """Unit-amplitude sinusoids with frequencies spread over ``(0, pi)``.

    Each channel gets ``max(n_terms, ceil(rank_target / 2))`` terms; all
    ``m * terms`` frequencies are distinct.  Phases come from ``seed``.
    """
    terms = n_terms if rank_target is None else max(n_terms, math.ceil(rank_target / 2))
    total = m * terms
    freqs = np.pi * (np.arange(total) + 0.5) / total
    freqs = freqs.reshape(terms, m).T
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(m, terms))
    return ExcitationSpec(np.ones((m, terms)), freqs, phases, np.zeros(m))


def constant_excitation(m: int, level: float = 1.0) -> ExcitationSpec:
    return ExcitationSpec(np.zeros((m, 0)), np.zeros((m, 0)), np.zeros((m, 0)),
                          np.full(m, level))


def excitation(k: int, spec: ExcitationSpec) -> np.ndarray:
    terms = spec.amplitudes * np.sin(spec.frequencies * k + spec.phases)
    return terms.sum(axis=1) + spec.bias


def required_rank(n_r: int, m: int) -> int:
    return (n_r * (n_r + 1) + m * (m + 1)) // 2 + n_r * m


def min_samples(n_r: int, m: int) -> int:
    return math.ceil(SAMPLE_MARGIN * required_rank(n_r, m))


def default_k0(M_r: np.ndarray, eps: float = K0_EPS) -> int:
    """Smallest ``k >= 1`` with ``rho(M_r)**k <= eps``."""
    rho = spectral_radius(M_r)
    if rho <= 0.0:
        return 1
    if rho >= 1.0:
        raise ValueError("M_r must be Schur")
    return max(1, math.ceil(math.log(eps) / math.log(rho) - 1e-12))


@dataclass(frozen=True)
class ExperimentLog:
    """Samples ``k0 <= k < k_s``; ``R_next[t]`` is ``rbar(k_t + 1)``."""

    k0: int
    k_s: int
    U: np.ndarray
    Y: np.ndarray
    R: np.ndarray
    R_next: np.ndarray

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k0, self.k_s)

    def __len__(self) -> int:
        return self.R.shape[0]

    @property
    def n_r(self) -> int:
        return self.R.shape[1]

    @property
    def m(self) -> int:
        return self.U.shape[1]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    def consistency_error(self, fb: FilterBank) -> float:
        """Max deviation of ``R_next`` from the filter recursion applied to
        the logged ``(u, y)``; also checks contiguity ``R_next[t] == R[t+1]``."""
        Fu = np.kron(np.eye(fb.m), fb.M_r)
        Fy = np.kron(np.eye(fb.p), fb.M_r)
        nu = fb.n * fb.m
        pred_u = self.R[:, :nu] @ Fu.T + np.kron(self.U, fb.b)
        pred_y = self.R[:, nu:] @ Fy.T + np.kron(self.Y, fb.b)
        err = np.abs(np.hstack([pred_u, pred_y]) - self.R_next).max(initial=0.0)
        if len(self) > 1:
            err = max(err, np.abs(self.R_next[:-1] - self.R[1:]).max())
        return float(err)

    def to_csv(self, path) -> None:
        header = (["k"] + [f"u{i}" for i in range(self.m)] + [f"y{i}" for i in range(self.p)]
                  + [f"r{i}" for i in range(self.n_r)] + [f"r_next{i}" for i in range(self.n_r)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, k in enumerate(self.ks):
                row = np.concatenate([self.U[t], self.Y[t], self.R[t], self.R_next[t]])
                w.writerow([int(k)] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "ExperimentLog":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        m = sum(h.startswith("u") for h in header)
        p = sum(h.startswith("y") for h in header)
        n_r = sum(h.startswith("r_next") for h in header)
        data = np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(body), -1)
        ks = [int(r[0]) for r in body]
        if ks and ks != list(range(ks[0], ks[0] + len(ks))):
            raise ValueError("log indices are not contiguous")
        k0 = ks[0] if ks else 0
        c = np.cumsum([0, m, p, n_r, n_r])
        return cls(k0, k0 + len(ks), data[:, c[0]:c[1]], data[:, c[1]:c[2]],
                   data[:, c[2]:c[3]], data[:, c[3]:c[4]])


def collect(plant: IOPlant, fb: FilterBank, spec: ExcitationSpec, k0: int, k_s: int,
            gain: np.ndarray | None = None) -> ExperimentLog:
    """Run plant and filters together from time 0 and log ``[k0, k_s)``.

    The input is ``u(k) = -gain @ rbar(k) + excitation(k)``; ``gain``
    defaults to zero.
    """
    if plant.m != fb.m or plant.p != fb.p or spec.m != fb.m:
        raise ValueError(f"dimension mismatch: plant (m={plant.m}, p={plant.p}), "
                         f"filters (m={fb.m}, p={fb.p}), excitation m={spec.m}")
    if not 0 <= k0 < k_s:
        raise ValueError(f"need 0 <= k0 < k_s, got k0={k0}, k_s={k_s}")
    if plant.k != 0:
        raise ValueError("plant must start at time 0")
    gain = np.zeros((fb.m, fb.n_r)) if gain is None else np.asarray(gain, dtype=float)
    N = k_s - k0
    U = np.empty((N, fb.m))
    Y = np.empty((N, fb.p))
    R = np.empty((N, fb.n_r))
    R_next = np.empty((N, fb.n_r))
    fb = fb.reset()
    for k in range(k_s):
        r = reconstruction_state(fb)
        u = -gain @ r + excitation(k, spec)
        y = plant.step(u)
        fb = filter_step(fb, u, y)
        if k >= k0:
            t = k - k0
            U[t], Y[t], R[t] = u, y, r
            R_next[t] = reconstruction_state(fb)
    return ExperimentLog(k0, k_s, U, Y, R, R_next)


@dataclass(frozen=True)
class RegressionData:
    C_r: np.ndarray
    D_rr: np.ndarray
    D_ur: np.ndarray
    D_yy: np.ndarray
    D_r: np.ndarray
    D_u: np.ndarray
    n_r: int
    m: int
    p: int


def _row_kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product: row t is ``kron(A[t], B[t])``."""
    return (A[:, :, None] * B[:, None, :]).reshape(A.shape[0], -1)


def build_regression(log: ExperimentLog) -> RegressionData:
    """Data matrices, one row per logged interval.

    ``C_r`` rows are ``vecv(r(k+1)) - vecv(r(k))`` so that
    ``C_r @ vecs(P)`` is the change in ``r' P r`` over each interval.
    """
    R, Rn, U, Y = log.R, log.R_next, log.U, log.Y
    return RegressionData(
        C_r=vecv_rows(Rn) - vecv_rows(R),
        D_rr=_row_kron(R, R),
        D_ur=_row_kron(U, R),
        D_yy=_row_kron(Y, Y),
        D_r=vecv_rows(R),
        D_u=vecv_rows(U),
        n_r=log.n_r, m=log.m, p=log.p,
    )


def d_kbar(log: ExperimentLog, gain: np.ndarray) -> np.ndarray:
    """Rows ``vecv(gain @ r(k))`` over the log."""
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    if gain.shape != (log.m, log.n_r):
        raise ValueError(f"gain has shape {gain.shape}, expected {(log.m, log.n_r)}")
    return vecv_rows(log.R @ gain.T)


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank after scaling every nonzero column to unit norm."""
    if M.size == 0:
        return 0
    norms = np.linalg.norm(M, axis=0)
    keep = norms > 0
    if not np.any(keep):
        return 0
    s = np.linalg.svd(M[:, keep] / norms[keep], compute_uv=False)
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class RankReport:
    achieved: int
    required: int
    rows: int

    @property
    def passed(self) -> bool:
        return self.achieved == self.required

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (f"rank condition {verdict}: rank {self.achieved} of required "
                f"{self.required} over {self.rows} samples")


def rank_condition(reg: RegressionData) -> RankReport:
    M = np.hstack([reg.D_r, reg.D_ur, reg.D_u])
    return RankReport(numerical_rank(M), required_rank(reg.n_r, reg.m), M.shape[0])
