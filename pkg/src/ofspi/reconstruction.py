"""Stable input/output filters whose joint state parameterizes the plant
state.

``r_u`` is driven by the input through ``I_m (x) M_r`` and ``r_y`` by the
output through ``I_p (x) M_r``.  The printed recursion swaps the two identity
sizes, which only type-checks when ``m == p``; the dimension-consistent
assignment is used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROOT_IMAG_TOL = 1e-12


def _check_conjugate_pairs(roots: np.ndarray) -> None:
    unmatched = list(roots[np.abs(roots.imag) > ROOT_IMAG_TOL])
    while unmatched:
        z = unmatched.pop()
        idx = next((i for i, w in enumerate(unmatched)
                    if abs(w - np.conj(z)) <= 1e-9 * max(1.0, abs(z))), None)
        if idx is None:
            raise ValueError(f"complex root {z} has no conjugate partner")
        unmatched.pop(idx)


def polynomial_from_roots(roots) -> np.ndarray:
    """Monic coefficients ``[1, d_1, ..., d_n]`` by repeated convolution."""
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    coeffs = np.array([1.0 + 0j])
    for z in roots:
        coeffs = np.convolve(coeffs, np.array([1.0, -z]))
    return coeffs.real.copy()


def companion_from_roots(roots) -> np.ndarray:
    """Companion matrix (ones on the superdiagonal, last row ``-d_n ... -d_1``)
    whose characteristic roots are ``roots``.

    Raises:
        ValueError: a root is on or outside the unit circle, or a complex root
            lacks its conjugate.
    """
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    if roots.size == 0:
        raise ValueError("need at least one root")
    bad = roots[np.abs(roots) >= 1.0]
    if bad.size:
        raise ValueError(f"roots must lie strictly inside the unit circle: {bad}")
    _check_conjugate_pairs(roots)
    d = polynomial_from_roots(roots)[1:]
    n = roots.size
    M = np.zeros((n, n))
    M[:-1, 1:] = np.eye(n - 1)
    M[-1, :] = -d[::-1]
    return M


def default_roots(n: int) -> list[float]:
    """``-0.1, -0.2, ...`` extended to ``n`` values."""
    return [-0.1 * (i + 1) for i in range(n)]


@dataclass
class FilterBank:
    M_r: np.ndarray
    m: int
    p: int
    r_u: np.ndarray = field(default=None)
    r_y: np.ndarray = field(default=None)

    def __post_init__(self):
        self.M_r = np.atleast_2d(np.asarray(self.M_r, dtype=float))
        n = self.n
        if self.M_r.shape != (n, n):
            raise ValueError(f"M_r must be square, got {self.M_r.shape}")
        self.r_u = np.zeros(n * self.m) if self.r_u is None else np.asarray(self.r_u, float)
        self.r_y = np.zeros(n * self.p) if self.r_y is None else np.asarray(self.r_y, float)
        if self.r_u.shape != (n * self.m,) or self.r_y.shape != (n * self.p,):
            raise ValueError("filter state dimensions do not match n*m / n*p")
        self._Fu = np.kron(np.eye(self.m), self.M_r)
        self._Fy = np.kron(np.eye(self.p), self.M_r)

    @classmethod
    def from_roots(cls, roots, m: int, p: int) -> "FilterBank":
        return cls(companion_from_roots(roots), m, p)

    @property
    def n(self) -> int:
        return self.M_r.shape[0]

    @property
    def n_r(self) -> int:
        return self.n * (self.m + self.p)

    @property
    def b(self) -> np.ndarray:
        b = np.zeros(self.n)
        b[-1] = 1.0
        return b

    def reset(self) -> "FilterBank":
        return FilterBank(self.M_r, self.m, self.p)


def filter_step(fb: FilterBank, u, y) -> FilterBank:
    """One step of both filters; returns a new bank."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if u.shape != (fb.m,) or y.shape != (fb.p,):
        raise ValueError(f"expected u of size {fb.m} and y of size {fb.p}, "
                         f"got {u.shape} and {y.shape}")
    b = fb.b
    r_u = fb._Fu @ fb.r_u + np.kron(u, b)
    r_y = fb._Fy @ fb.r_y + np.kron(y, b)
    return FilterBank(fb.M_r, fb.m, fb.p, r_u, r_y)


def reconstruction_state(fb: FilterBank) -> np.ndarray:
    """``[r_u; r_y]``. This ordering is what every regression assumes."""
    return np.concatenate([fb.r_u, fb.r_y])
