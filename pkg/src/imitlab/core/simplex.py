"""
Embedded dense tableau simplex.

Solves   min c^T x   s.t.   A_ub x <= b_ub,   A_eq x = b_eq,   x >= 0

with the two-phase method and Bland's anti-cycling rule (lowest-index
entering column, lowest-index basic variable on ratio ties). Sizes in this
lab stay at a few thousand columns, where a dense numpy tableau is both
exact enough for vertex certificates and fast enough.

Shared by the Kantorovich transport LP, the compatible-coefficient LP and
the occupancy-matching LP.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .config import settings
from .errors import InfeasibleError, ShapeError, SolverError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearProgramResult:
    x: np.ndarray
    value: float
    iterations: int


class _Tableau:
    """Constraint rows on top, reduced-cost row last, right-hand side in the last column."""

    def __init__(self, matrix: np.ndarray, basis: list[int]) -> None:
        self.T = matrix
        self.basis = basis

    @property
    def n_rows(self) -> int:
        return self.T.shape[0] - 1

    @property
    def rhs(self) -> np.ndarray:
        return self.T[:-1, -1]

    @property
    def costs(self) -> np.ndarray:
        return self.T[-1, :-1]

    @property
    def objective(self) -> float:
        return -float(self.T[-1, -1])

    def pivot(self, row: int, column: int) -> None:
        T = self.T
        T[row] /= T[row, column]
        factors = T[:, column].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        self.basis[row] = column

    def solution(self, n_columns: int) -> np.ndarray:
        x = np.zeros(n_columns)
        for row, column in enumerate(self.basis):
            if column < n_columns:
                x[column] = max(self.T[row, -1], 0.0)
        return x


def _run(tab: _Tableau, n_allowed: int, tol: float, max_iterations: int, start: int) -> int:
    """Pivot with Bland's rule until optimal; returns the running iteration count."""
    iterations = start
    while True:
        costs = tab.costs[:n_allowed]
        candidates = np.flatnonzero(costs < -tol)
        if candidates.size == 0:
            return iterations
        column = int(candidates[0])

        col = tab.T[:-1, column]
        positive = col > tol
        if not positive.any():
            raise SolverError(
                "linear program is unbounded",
                iterations=iterations,
                certificate={"ray_column": column},
            )
        ratios = np.full(col.shape, np.inf)
        ratios[positive] = np.maximum(tab.rhs[positive], 0.0) / col[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: tab.basis[r]))

        tab.pivot(row, column)
        iterations += 1
        if iterations >= max_iterations:
            raise SolverError(
                f"simplex did not converge within {max_iterations} pivots",
                iterations=iterations,
            )


def solve_lp(
    c,
    *,
    a_ub=None,
    b_ub=None,
    a_eq=None,
    b_eq=None,
    tolerance: float | None = None,
    max_iterations: int | None = None,
) -> LinearProgramResult:
    """Minimize c @ x over the nonnegative orthant subject to the given rows.

    Raises:
        ShapeError: if the constraint blocks do not match len(c).
        InfeasibleError: if phase one ends with positive infeasibility.
        SolverError: if the program is unbounded or the pivot cap is hit.
    """
    tol = settings.lp_tolerance if tolerance is None else tolerance
    cap = settings.lp_max_iterations if max_iterations is None else max_iterations

    c = np.asarray(c, dtype=float)
    n = c.size
    a_ub = np.zeros((0, n)) if a_ub is None else np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    a_eq = np.zeros((0, n)) if a_eq is None else np.atleast_2d(np.asarray(a_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if a_ub.shape[1] != n or a_eq.shape[1] != n:
        raise ShapeError("constraint matrices must have len(c) columns")
    if a_ub.shape[0] != b_ub.size or a_eq.shape[0] != b_eq.size:
        raise ShapeError("constraint rows and right-hand sides disagree")

    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq
    n_struct = n + m_ub  # original columns followed by slacks

    A = np.zeros((m, n_struct))
    A[:m_ub, :n] = a_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = a_eq
    b = np.concatenate([b_ub, b_eq])
    cost = np.concatenate([c, np.zeros(m_ub)])

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # Slack columns already form an identity for unflipped <= rows.
    basis: list[int] = []
    artificial_rows: list[int] = []
    for i in range(m):
        if i < m_ub and not flip[i]:
            basis.append(n + i)
        else:
            basis.append(-1)
            artificial_rows.append(i)

    n_art = len(artificial_rows)
    T = np.zeros((m + 1, n_struct + n_art + 1))
    T[:m, :n_struct] = A
    T[:m, -1] = b
    for k, i in enumerate(artificial_rows):
        T[i, n_struct + k] = 1.0
        basis[i] = n_struct + k
    tab = _Tableau(T, basis)
    scale = tol * (1.0 + (np.abs(b).max() if m else 0.0))

    iterations = 0
    if n_art:
        # Phase one: minimize the sum of artificials.
        for i in artificial_rows:
            T[-1] -= T[i]
        T[-1, n_struct:n_struct + n_art] = 0.0
        iterations = _run(tab, n_struct + n_art, tol, cap, iterations)
        if tab.objective > scale:
            raise InfeasibleError(
                "linear program is infeasible",
                iterations=iterations,
                certificate={"phase_one_objective": tab.objective},
            )

        redundant: list[int] = []
        for row, column in enumerate(tab.basis):
            if column < n_struct:
                continue
            entries = np.abs(tab.T[row, :n_struct])
            movable = np.flatnonzero(entries > tol)
            if movable.size:
                tab.pivot(row, int(movable[0]))
                iterations += 1
            else:
                redundant.append(row)
        if redundant:
            logger.debug("Simplex: dropping %d redundant equality rows", len(redundant))
            keep = [r for r in range(m) if r not in redundant]
            tab = _Tableau(
                np.vstack([tab.T[keep], tab.T[-1:]]),
                [tab.basis[r] for r in keep],
            )

    # Phase two on the structural columns only.
    T2 = np.zeros((tab.n_rows + 1, n_struct + 1))
    T2[:-1, :n_struct] = tab.T[:-1, :n_struct]
    T2[:-1, -1] = tab.T[:-1, -1]
    T2[-1, :n_struct] = cost
    tab = _Tableau(T2, tab.basis)
    for row, column in enumerate(tab.basis):
        if cost[column] != 0.0:
            T2[-1] -= cost[column] * T2[row]
    iterations = _run(tab, n_struct, tol, cap, iterations)

    x = tab.solution(n_struct)[:n]
    logger.debug("Simplex: optimal after %d pivots (rows=%d cols=%d)", iterations, m, n)
    return LinearProgramResult(x=x, value=float(c @ x), iterations=iterations)
