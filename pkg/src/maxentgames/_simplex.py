"""Dense two-phase primal simplex with Bland's rule.  Desk-scale sizes only."""

from __future__ import annotations

import numpy as np

from .core import Infeasible

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


class Unbounded(OverflowError):
    """LP objective is unbounded below."""


def _pivot(tableau: np.ndarray, basis: list, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and abs(tableau[r, col]) > 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]
    basis[row] = col


def _iterate(tableau: np.ndarray, basis: list, n_cols: int, max_iter: int) -> None:
    # Bland's rule: entering = lowest-index column with negative reduced cost,
    # leaving = lowest-index basic variable among the minimum ratios.
    for _ in range(max_iter):
        cost = tableau[-1, :n_cols]
        entering = -1
        for j in range(n_cols):
            if cost[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return
        col = tableau[:-1, entering]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise Unbounded("no positive pivot entry in the entering column")
        ratios = tableau[rows, -1] / col[rows]
        best = ratios.min()
        tie = rows[ratios <= best + 1e-12]
        leaving = min(tie, key=lambda r: basis[r])
        _pivot(tableau, basis, int(leaving), entering)
    raise RuntimeError("simplex iteration limit exceeded")


def solve_lp(c, a_eq, b_eq, max_iter: int = 50000):
    """min c @ x  subject to  a_eq @ x = b_eq, x >= 0.

    Returns (x, value).  Raises Infeasible or Unbounded.
    """
    a = np.array(a_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.asarray(c, dtype=float)
    if a.ndim != 2:
        raise ValueError("a_eq must be a matrix")
    m, n = a.shape
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError("b_eq / c shapes do not match a_eq")

    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0

    # phase 1: minimize the sum of artificial variables
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[-1, :n] = -a.sum(axis=0)
    tableau[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _iterate(tableau, basis, n + m, max_iter)
    if tableau[-1, -1] < -FEAS_TOL:
        raise Infeasible("phase-1 optimum positive: constraints unsatisfiable")

    # drive any artificial variables out of the basis
    for r in range(m):
        if basis[r] >= n:
            row = tableau[r, :n]
            cols = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if cols.size:
                _pivot(tableau, basis, r, int(cols[0]))

    keep_rows = [r for r in range(m) if basis[r] < n]
    drop = [r for r in range(m) if basis[r] >= n]  # redundant constraints
    if drop:
        tableau = np.delete(tableau, drop, axis=0)
        basis = [basis[r] for r in keep_rows]

    # phase 2 on the original objective
    work = np.zeros((tableau.shape[0], n + 1))
    work[:-1, :n] = tableau[:-1, :n]
    work[:-1, -1] = tableau[:-1, -1]
    work[-1, :n] = c
    for r, bv in enumerate(basis):
        if abs(work[-1, bv]) > 0.0:
            work[-1] -= work[-1, bv] * work[r]
    _iterate(work, basis, n, max_iter)

    x = np.zeros(n)
    for r, bv in enumerate(basis):
        x[bv] = work[r, -1]
    return x, float(c @ x)
