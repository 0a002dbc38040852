"""Recursive batched-QR solver for Tikhonov-regularized least squares.

The state carries an upper-triangular factor ``U`` with
``U^T U = lam I + sum_k F_k^T F_k`` and a transformed right-hand side ``z``
with ``U^T z = sum_k F_k^T d_k``. Each update is a Q-less QR of the stacked
matrix ``[[U, z], [F, d]]``, so memory stays bounded by the largest batch
regardless of how many rows are processed in total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidInputError, RankDeficiencyError


@dataclass(frozen=True)
class RecursiveQRState:
    U: np.ndarray
    z: np.ndarray
    rows_seen: int
    lam: float

    @property
    def n(self) -> int:
        return self.U.shape[0]


def init(n: int, lam: float = 0.0, n_rhs: Optional[int] = None) -> RecursiveQRState:
    """Start a recursion for ``n`` unknowns with the ``sqrt(lam) I`` base case.

    With ``n_rhs`` set, ``z`` is an ``(n, n_rhs)`` matrix and ``n_rhs``
    problems sharing the same rows are solved together.
    """
    if n < 1:
        raise InvalidInputError("need at least one unknown")
    if lam < 0:
        raise InvalidInputError("regularization weight must be nonnegative")
    z = np.zeros(n) if n_rhs is None else np.zeros((n, n_rhs))
    return RecursiveQRState(np.sqrt(lam) * np.eye(n), z, 0, float(lam))


def update(state: RecursiveQRState, F, d) -> RecursiveQRState:
    """Fold the rows ``F x ~ d`` into the factor."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    d = np.asarray(d, dtype=float)
    n = state.n
    if F.shape[1] != n:
        raise InvalidInputError(f"batch has {F.shape[1]} columns, expected {n}")
    multi = state.z.ndim == 2
    d = d.reshape(F.shape[0], -1) if multi else d.reshape(F.shape[0], 1)
    z = state.z if multi else state.z[:, None]
    if d.shape[1] != z.shape[1]:
        raise InvalidInputError("right-hand side column count mismatch")

    stacked = np.block([[state.U, z], [F, d]])
    R = np.linalg.qr(stacked, mode="r")
    U = np.zeros((n, n))
    zn = np.zeros_like(z)
    rows = min(n, R.shape[0])
    U[:rows] = np.triu(R[:rows, :n])
    zn[:rows] = R[:rows, n:]
    # fix the sign ambiguity of QR so the factor is unique
    sign = np.where(np.diag(U) < 0, -1.0, 1.0)
    U *= sign[:, None]
    zn *= sign[:, None]
    return RecursiveQRState(U, zn if multi else zn[:, 0],
                            state.rows_seen + F.shape[0], state.lam)


def update_all(state: RecursiveQRState, batches: Iterable) -> RecursiveQRState:
    for F, d in batches:
        state = update(state, F, d)
    return state


def _check_pivots(U):
    diag = np.abs(np.diag(U))
    tol = max(diag.max(initial=0.0), 1.0) * U.shape[0] * np.finfo(float).eps
    bad = np.flatnonzero(diag <= tol)
    if bad.size:
        raise RankDeficiencyError(int(bad[0]))


def solve(state: RecursiveQRState) -> np.ndarray:
    """Back-substitute ``U x = z``; minimizes ``lam |x|^2 + sum |F_k x - d_k|^2``."""
    _check_pivots(state.U)
    return solve_triangular(state.U, state.z, lower=False)


def solve_multi_rhs(state: RecursiveQRState) -> np.ndarray:
    """Solve every right-hand-side column carried by the state."""
    if state.z.ndim != 2:
        raise InvalidInputError("state was initialized with a single right-hand side")
    return solve(state)


def lstsq(batches: Iterable, n: int, lam: float = 0.0, n_rhs: Optional[int] = None):
    """Solve a regularized problem given an iterable of ``(F, d)`` batches."""
    return solve(update_all(init(n, lam, n_rhs), batches))


def gram_residual(state: RecursiveQRState, F) -> float:
    """Relative Frobenius error of ``U^T U`` against ``lam I + F^T F``."""
    F = np.asarray(F, dtype=float)
    ref = state.lam * np.eye(state.n) + F.T @ F
    return float(np.linalg.norm(state.U.T @ state.U - ref) / np.linalg.norm(ref))


def dump_factor(state: RecursiveQRState, path) -> None:
    """Write ``U`` as a Matrix Market text file for debugging."""
    from scipy.io import mmwrite

    mmwrite(str(path), state.U, comment=f"rows_seen={state.rows_seen} lam={state.lam!r}")
