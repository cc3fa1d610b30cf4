"""Ground-truth LTI plant ``x+ = Ax + Bu``, ``y = Cx``.

The learner only ever sees an :class:`IOPlant`, which maps inputs to outputs
and keeps the matrices and the hidden state private.  Verification code
reaches the internals through :func:`ofspi.oracle.unwrap`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        B = B.reshape(n, -1) if B.ndim < 2 else B
        C = C.reshape(-1, n) if C.ndim < 2 else C
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        for name, M in (("A", A), ("B", B), ("C", C)):
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} has non-finite entries")
            M.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass
class PlantState:
    x: np.ndarray
    k: int = 0


def step(sys: LtiSystem, state: PlantState, u) -> tuple[PlantState, np.ndarray]:
    """Advance one sample. ``y`` is read from the pre-step state."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (sys.m,):
        raise ValueError(f"input has shape {u.shape}, expected ({sys.m},)")
    x = state.x
    y = sys.C @ x
    return PlantState(sys.A @ x + sys.B @ u, state.k + 1), y


def spectral_radius(M: np.ndarray) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(np.abs(eig)))


def _numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def controllability_matrix(sys: LtiSystem) -> np.ndarray:
    blocks = [sys.B]
    for _ in range(sys.n - 1):
        blocks.append(sys.A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(sys: LtiSystem) -> np.ndarray:
    blocks = [sys.C]
    for _ in range(sys.n - 1):
        blocks.append(blocks[-1] @ sys.A)
    return np.vstack(blocks)


@dataclass(frozen=True)
class Assumption1Report:
    controllable: bool
    observable: bool
    controllability_rank: int
    observability_rank: int
    n: int

    def __bool__(self) -> bool:
        return self.controllable and self.observable


def check_assumption1(sys: LtiSystem) -> Assumption1Report:
    """Rank tests on the n-block controllability/observability matrices.

    Singular values below ``1e-9`` times the largest count as zero.
    """
    rc = _numerical_rank(controllability_matrix(sys))
    ro = _numerical_rank(observability_matrix(sys))
    return Assumption1Report(rc == sys.n, ro == sys.n, rc, ro, sys.n)


class IOPlant:
    """Input/output view of a plant: ``step(u)`` returns ``y(k)``.

    Nothing else about the plant is public.
    """

    def __init__(self, sys: LtiSystem, x0=None):
        self._sys = sys
        x0 = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
        if x0.shape != (sys.n,):
            raise ValueError(f"x0 has shape {x0.shape}, expected ({sys.n},)")
        self._state = PlantState(x0.copy(), 0)

    @property
    def m(self) -> int:
        return self._sys.m

    @property
    def p(self) -> int:
        return self._sys.p

    @property
    def k(self) -> int:
        return self._state.k

    def output(self) -> np.ndarray:
        """Current measurement ``y(k)`` without advancing time."""
        return self._sys.C @ self._state.x

    def step(self, u) -> np.ndarray:
        self._state, y = step(self._sys, self._state, u)
        return y


# Discretized power system used in the numerical example.
POWER_SYSTEM = LtiSystem(
    A=[[0.8825, 0.0014, 0.0470],
       [0.0894, 0.9049, 0.0023],
       [0.0028, 0.0571, 0.9995]],
    B=[[0.0001], [0.1190], [0.0036]],
    C=[[1.0, 0.0, 0.0]],
)

PRESETS: dict[str, LtiSystem] = {"power_system": POWER_SYSTEM}


def preset(name: str) -> LtiSystem:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown plant preset {name!r}; known: {sorted(PRESETS)}") from None
