"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c·x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and
``x >= 0``. Problems in this package have at most a few hundred rows and a few
thousand columns, so a dense tableau is adequate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpNumericalFailure


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    fun: float | None
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0


def _iterate(T, basis, n_cols, tol, max_iter, start):
    """Run Bland-rule pivots on tableau T whose last row holds reduced costs.

    Returns (status, iterations).
    """
    it = start
    m = T.shape[0] - 1
    while True:
        cost = T[-1, :n_cols]
        candidates = np.nonzero(cost < -tol)[0]
        if candidates.size == 0:
            return "optimal", it
        col = int(candidates[0])
        column = T[:m, col]
        rows = np.nonzero(column > tol)[0]
        if rows.size == 0:
            return "unbounded", it
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise LpNumericalFailure(f"simplex exceeded {max_iter} pivots")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = 1e-9,
            max_iter: int = 200_000) -> LpResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Standard form: [A_ub I; A_eq 0] [x; s] = b.
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    n_std = n + m_ub
    basis = [-1] * m
    needs_art = []
    for i in range(m):
        if i < m_ub and not flip[i]:
            basis[i] = n + i
        else:
            needs_art.append(i)
    n_art = len(needs_art)
    n_cols = n_std + n_art

    T = np.zeros((m + 1, n_cols + 1))
    T[:m, :n_std] = A
    T[:m, -1] = b
    for k, i in enumerate(needs_art):
        T[i, n_std + k] = 1.0
        basis[i] = n_std + k

    iterations = 0
    if n_art:
        # Phase 1: minimise the sum of artificials.
        T[-1, :] = 0.0
        T[-1, n_std:n_cols] = 1.0
        for i in needs_art:
            T[-1] -= T[i]
        status, iterations = _iterate(T, basis, n_cols, tol, max_iter, iterations)
        if status != "optimal":
            raise LpNumericalFailure("phase 1 did not terminate at an optimum")
        infeasibility = -T[-1, -1]
        if infeasibility > tol * max(1.0, np.abs(b).max(initial=0.0)) * 10:
            return LpResult("infeasible", None, None, iterations)
        # Drive remaining artificials out of the basis; drop redundant rows.
        keep = []
        for i in range(m):
            if basis[i] >= n_std:
                row = T[i, :n_std]
                cols = np.nonzero(np.abs(row) > 1e-9)[0]
                if cols.size:
                    col = int(cols[np.argmax(np.abs(row[cols]))])
                    _pivot(T, i, col)
                    basis[i] = col
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.hstack([T[:, :n_std], T[:, -1:]])
        m = len(keep)

    # Phase 2.
    cost = np.zeros(n_std)
    cost[:n] = c
    T[-1, :] = 0.0
    T[-1, :n_std] = cost
    for i, j in enumerate(basis):
        if cost[j] != 0.0:
            T[-1] -= cost[j] * T[i]
    status, iterations = _iterate(T, basis, n_std, tol, max_iter, iterations)
    if status == "unbounded":
        return LpResult("unbounded", None, None, iterations)
    x = np.zeros(n_std)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = np.maximum(x[:n], 0.0)
    return LpResult("optimal", x, float(c @ x), iterations)
