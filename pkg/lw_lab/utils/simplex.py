"""
Dense-tableau primal simplex for   max c·x  s.t.  A x <= b,  0 <= x <= u,  b >= 0.

Upper bounds are folded into the constraint matrix as extra rows. With b >= 0 the slack
basis is feasible, so no phase one is needed. Bland's rule (lowest entering index, lowest
leaving basic variable on ratio ties) prevents cycling on degenerate vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lw_lab.core.config import settings
from lw_lab.core.exceptions import InputError, SolverError


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    objective: float
    pivots: int


class DenseSimplex:

    def __init__(
        self,
        c: np.ndarray,
        A: np.ndarray,
        b: np.ndarray,
        upper: np.ndarray | None = None,
        tol: float = 1e-12,
        max_pivots: int | None = None,
    ):
        c = np.asarray(c, dtype=float)
        A = np.asarray(A, dtype=float).reshape(-1, c.size)
        b = np.asarray(b, dtype=float)
        if upper is not None:
            upper = np.asarray(upper, dtype=float)
            A = np.vstack([A, np.eye(c.size)])
            b = np.concatenate([b, upper])
        if np.any(b < 0):
            raise InputError("right-hand side must be nonnegative")
        self.c = c
        self.A = A
        self.b = b
        self.tol = tol
        self.max_pivots = max_pivots or settings.SIMPLEX_MAX_PIVOTS

    def _tableau(self) -> tuple[np.ndarray, list[int]]:
        rows, cols = self.A.shape
        T = np.zeros((rows + 1, cols + rows + 1))
        T[:rows, :cols] = self.A
        T[:rows, cols:cols + rows] = np.eye(rows)
        T[:rows, -1] = self.b
        T[-1, :cols] = -self.c
        return T, list(range(cols, cols + rows))

    @staticmethod
    def _pivot(T: np.ndarray, row: int, col: int) -> None:
        T[row] /= T[row, col]
        for r in range(T.shape[0]):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]

    def solve(self) -> SimplexResult:
        T, basis = self._tableau()
        rows = len(basis)
        pivots = 0

        while True:
            reduced = T[-1, :-1]
            entering = next((j for j, r in enumerate(reduced) if r < -self.tol), None)
            if entering is None:
                break

            column = T[:rows, entering]
            candidates = [r for r in range(rows) if column[r] > self.tol]
            if not candidates:
                raise SolverError("linear program is unbounded")
            ratios = [T[r, -1] / column[r] for r in candidates]
            best = min(ratios)
            leaving = min(
                (r for r, ratio in zip(candidates, ratios) if ratio <= best + self.tol),
                key=lambda r: basis[r],
            )

            self._pivot(T, leaving, entering)
            basis[leaving] = entering
            pivots += 1
            if pivots > self.max_pivots:
                raise SolverError(f"simplex exceeded {self.max_pivots} pivots")

        x = np.zeros(self.c.size)
        for r, var in enumerate(basis):
            if var < self.c.size:
                x[var] = T[r, -1]
        return SimplexResult(x=x, objective=float(self.c @ x), pivots=pivots)
