"""Model-based ground truth used only to verify the learner.

Nothing in :mod:`ofspi.learner` imports this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ofspi.plant import IOPlant, LtiSystem, PlantState, spectral_radius, step
from ofspi.reconstruction import FilterBank, filter_step, reconstruction_state

EQ7_SLACK = 1e-12
MBAR_RESIDUAL_TOL = 1e-10


def unwrap(plant: IOPlant) -> tuple[LtiSystem, np.ndarray]:
    """Expose the true system and hidden state behind an :class:`IOPlant`."""
    return plant._sys, plant._state.x.copy()


def dlyap(A_tilde: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Solve ``A' P A - P = -W`` through ``(I - A' (x) A') vec(P) = vec(W)``.

    Raises:
        ValueError: ``A_tilde`` is not Schur.
    """
    A_tilde = np.atleast_2d(np.asarray(A_tilde, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    rho = spectral_radius(A_tilde)
    if rho >= 1.0:
        raise ValueError(f"dlyap needs a Schur matrix, spectral radius is {rho:.6g}")
    n = A_tilde.shape[0]
    lhs = np.eye(n * n) - np.kron(A_tilde.T, A_tilde.T)
    P = np.linalg.solve(lhs, W.reshape(-1, order="F")).reshape((n, n), order="F")
    # one refinement step against the vectorized residual
    res = W - P + A_tilde.T @ P @ A_tilde
    P = P + np.linalg.solve(lhs, res.reshape(-1, order="F")).reshape((n, n), order="F")
    return (P + P.T) / 2 if np.allclose(W, W.T) else P


def lyap_residual(A_tilde, P, W) -> float:
    return float(np.linalg.norm(A_tilde.T @ P @ A_tilde - P + W))


@dataclass(frozen=True)
class ModelIterate:
    j: int
    K: np.ndarray
    c: float
    A_tilde: np.ndarray
    P: np.ndarray | None = None


class StepSizeBoundError(ValueError):
    pass


def initial_iterate(sys: LtiSystem, c0: float, K0: np.ndarray | None = None) -> ModelIterate:
    K0 = np.zeros((sys.m, sys.n)) if K0 is None else np.atleast_2d(K0)
    return ModelIterate(0, K0, c0, c0 * (sys.A - sys.B @ K0))


def model_evaluate(sys: LtiSystem, it: ModelIterate, Q, R, Q_c) -> np.ndarray:
    Q, R = np.atleast_2d(Q), np.atleast_2d(R)
    W = sys.C.T @ Q @ sys.C + Q_c + it.K.T @ R @ it.K
    return dlyap(it.A_tilde, W)


def model_improve(sys: LtiSystem, P: np.ndarray, R, c: float) -> np.ndarray:
    R = np.atleast_2d(R)
    B = sys.B
    return c ** 2 * np.linalg.solve(R + c ** 2 * B.T @ P @ B, B.T @ P @ sys.A)


def step_size_bound(sys: LtiSystem, K_next: np.ndarray, c: float) -> float:
    """Upper limit ``1/rho(A - B K_next) - c`` on the next step size."""
    rho = spectral_radius(sys.A - sys.B @ K_next)
    return np.inf if rho == 0.0 else 1.0 / rho - c


def model_spi_step(sys: LtiSystem, it: ModelIterate, Q, R, Q_c, alpha: float,
                   check: bool = True) -> ModelIterate:
    """Evaluate, improve and advance the scale by ``alpha``.

    The returned iterate carries ``P`` of the input iterate, i.e. the value
    matrix the new gain was computed from.

    Raises:
        StepSizeBoundError: ``alpha`` is outside ``(0, 1/rho(A - B K+) - c)``.
    """
    P = it.P if it.P is not None else model_evaluate(sys, it, Q, R, Q_c)
    K_next = model_improve(sys, P, R, it.c)
    if check:
        bound = step_size_bound(sys, K_next, it.c)
        if not 0.0 < alpha < bound + EQ7_SLACK:
            raise StepSizeBoundError(
                f"step size {alpha:.6g} violates 0 < alpha < {bound:.6g} at j={it.j}")
    c_next = it.c + alpha
    return ModelIterate(it.j + 1, K_next, c_next, c_next * (sys.A - sys.B @ K_next), P)


@dataclass(frozen=True)
class ParameterizationMatrix:
    M: np.ndarray
    residual: float

    @property
    def pinv(self) -> np.ndarray:
        M = self.M
        return M.T @ np.linalg.inv(M @ M.T)

    def reconstruct(self, r: np.ndarray) -> np.ndarray:
        return self.M @ r


def simulate_with_filters(sys: LtiSystem, fb: FilterBank, inputs: np.ndarray,
                          x0=None) -> tuple[np.ndarray, np.ndarray]:
    """States ``x(k)`` and ``rbar(k)`` for ``k = 0..N`` under an open-loop
    input sequence of length ``N``."""
    inputs = np.asarray(inputs, dtype=float).reshape(len(inputs), sys.m)
    state = PlantState(np.zeros(sys.n) if x0 is None else np.asarray(x0, float), 0)
    fb = fb.reset()
    X = [state.x]
    Rb = [reconstruction_state(fb)]
    for u in inputs:
        state, y = step(sys, state, u)
        fb = filter_step(fb, u, y)
        X.append(state.x)
        Rb.append(reconstruction_state(fb))
    return np.array(X), np.array(Rb)


def construct_mbar(sys: LtiSystem, fb: FilterBank, n_samples: int | None = None,
                   seed: int = 12345) -> ParameterizationMatrix:
    """Fit ``x = Mbar rbar`` on a zero-initial-state trajectory, where the
    relation holds exactly."""
    n_r = fb.n_r
    n_samples = n_samples or 4 * n_r + 20
    rng = np.random.default_rng(seed)
    X, Rb = simulate_with_filters(sys, fb, rng.standard_normal((n_samples, sys.m)))
    X, Rb = X[1:], Rb[1:]
    norms = np.linalg.norm(Rb, axis=0)
    s = np.linalg.svd(Rb / np.where(norms > 0, norms, 1.0), compute_uv=False)
    if s.size < n_r or s[-1] <= 1e-9 * s[0]:
        raise ValueError("reconstruction samples are rank deficient; use a longer "
                         "or richer excitation")
    Mt, *_ = np.linalg.lstsq(Rb, X, rcond=None)
    M = Mt.T
    residual = float(np.linalg.norm(Rb @ Mt - X) / max(np.linalg.norm(X), 1.0))
    if residual > MBAR_RESIDUAL_TOL:
        raise ValueError(f"Mbar fit residual {residual:.3e} exceeds {MBAR_RESIDUAL_TOL}")
    if np.linalg.matrix_rank(M) < sys.n:
        raise ValueError("Mbar is not full row rank")
    return ParameterizationMatrix(M, residual)


@dataclass(frozen=True)
class IterationCheck:
    rho_actual: float
    rho_bound: float

    @property
    def passed(self) -> bool:
        return bool(self.rho_actual < self.rho_bound)


def verify_iteration(sys: LtiSystem, mbar: ParameterizationMatrix, gain: np.ndarray,
                     c: float) -> IterationCheck:
    K = np.atleast_2d(gain) @ mbar.pinv
    return IterationCheck(spectral_radius(sys.A - sys.B @ K), 1.0 / c)


def replay_model(sys: LtiSystem, Q, R, beta: float, alphas, Q_c: np.ndarray,
                 check: bool = True) -> list[ModelIterate]:
    """Model-based iterates for a given scale schedule.

    ``alphas[j]`` is the step taken after iteration ``j``.  Entry ``j`` of the
    result holds ``K^j`` and ``c_j`` and, for all but the last, ``P^j``.
    """
    it = initial_iterate(sys, beta)
    out = []
    for alpha in alphas:
        P = model_evaluate(sys, it, Q, R, Q_c)
        out.append(ModelIterate(it.j, it.K, it.c, it.A_tilde, P))
        it = model_spi_step(sys, out[-1], Q, R, Q_c, alpha, check=check)
        it = ModelIterate(it.j, it.K, it.c, it.A_tilde)
    out.append(it)
    return out


def closed_loop_trajectory(sys: LtiSystem, fb: FilterBank, gain: np.ndarray, x0,
                           horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """True states under ``u(k) = -gain @ rbar(k)`` with the controller
    seeing only the plant output.  Returns ``X`` (``horizon+1`` rows) and
    ``U`` (``horizon`` rows)."""
    plant = IOPlant(sys, x0)
    fb = fb.reset()
    gain = np.atleast_2d(gain)
    X = [unwrap(plant)[1]]
    U = []
    for _ in range(horizon):
        u = -gain @ reconstruction_state(fb)
        y = plant.step(u)
        fb = filter_step(fb, u, y)
        X.append(unwrap(plant)[1])
        U.append(u)
    return np.array(X), np.array(U)
