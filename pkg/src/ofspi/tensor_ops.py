"""Vectorization and Kronecker helpers used by every regression.

``vecs`` and ``vecv`` share one traversal order (row-major upper triangle),
so that ``vecs(P) @ vecv(x) == x.T @ P @ x``.
"""

from __future__ import annotations

import math

import numpy as np


def vec(M: np.ndarray) -> np.ndarray:
    """Stack the columns of ``M`` top to bottom."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        return M.copy()
    return M.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec` for a ``rows x cols`` matrix."""
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


def _triu(a: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(a)


def vecs(S: np.ndarray) -> np.ndarray:
    """Upper triangle of a symmetric matrix, off-diagonals doubled.

    Raises:
        ValueError: if ``S`` is not square.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"vecs needs a square matrix, got shape {S.shape}")
    i, j = _triu(S.shape[0])
    out = S[i, j].copy()
    out[i != j] *= 2.0
    return out


def vecv(v: np.ndarray) -> np.ndarray:
    """Pairwise products ``v_i v_j`` for ``i <= j``, row-major."""
    v = np.asarray(v, dtype=float).ravel()
    i, j = _triu(v.size)
    return v[i] * v[j]


def vecv_rows(V: np.ndarray) -> np.ndarray:
    """Apply :func:`vecv` to every row of ``V`` (shape ``(N, a)``)."""
    V = np.asarray(V, dtype=float)
    i, j = _triu(V.shape[1])
    return V[:, i] * V[:, j]


def triangular_root(length: int) -> int:
    """Return ``a`` with ``a(a+1)/2 == length`` or raise ``ValueError``."""
    a = (math.isqrt(8 * length + 1) - 1) // 2
    if a * (a + 1) // 2 != length or length < 1:
        raise ValueError(f"length {length} is not a triangular number")
    return a


def mat_from_vecs(w: np.ndarray) -> np.ndarray:
    """Rebuild the symmetric matrix whose :func:`vecs` is ``w``."""
    w = np.asarray(w, dtype=float).ravel()
    a = triangular_root(w.size)
    i, j = _triu(a)
    vals = np.where(i == j, w, w / 2.0)
    S = np.zeros((a, a))
    S[i, j] = vals
    S[j, i] = vals
    return S


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product; 1-D inputs are treated as column vectors."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim == 1 and B.ndim == 1:
        return np.kron(A, B)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    return np.kron(A, B)
