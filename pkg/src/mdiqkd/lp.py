"""Dense two-phase simplex for small bounded linear programs.

Solves   min c.x   s.t.   A x <= b,   0 <= x <= upper

with Bland's smallest-index rule, so repeated solves of the same input
follow the same pivot sequence and return bit-identical results. Upper
bounds are handled by complementing variables (x -> u - x) rather than by
extra rows, which keeps the tableau at one row per inequality.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11
COST_TOL = 1e-11
FEAS_TOL = 1e-9
MAX_PIVOTS = 50_000


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: LPStatus
    value: float
    x: np.ndarray | None
    pivots: int = 0

    @property
    def ok(self) -> bool:
        return self.status is LPStatus.OPTIMAL


class _Tableau:
    """Tableau over standardized variables, all nonbasic at zero."""

    def __init__(self, T, basis, upper):
        self.T = T  # rows 0..m-1 constraints, row m objective; last column rhs
        self.basis = basis
        self.upper = upper  # bounds of the (possibly complemented) columns
        self.flipped = np.zeros(len(upper), dtype=bool)
        self.pivots = 0

    @property
    def m(self):
        return self.T.shape[0] - 1

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1

    def complement(self, j):
        """Replace column j's variable x by u - x (j must be nonbasic)."""
        u = self.upper[j]
        self.T[:, -1] -= self.T[:, j] * u
        self.T[:, j] = -self.T[:, j]
        self.flipped[j] = ~self.flipped[j]

    def run(self, allowed):
        """Optimize the current objective row. Returns False if unbounded."""
        T = self.T
        m = self.m
        while True:
            if self.pivots > MAX_PIVOTS:
                raise RuntimeError("simplex pivot limit exceeded")
            cost = T[m, :-1]
            candidates = np.flatnonzero((cost < -COST_TOL) & allowed)
            if candidates.size == 0:
                return True
            j = int(candidates[0])
            col = T[:m, j]
            rhs = T[:m, -1]
            best = self.upper[j]
            leave = -1
            leave_upper = False
            leave_var = None
            for r in range(m):
                a = col[r]
                if a > PIVOT_TOL:
                    t = max(rhs[r], 0.0) / a
                    at_upper = False
                elif a < -PIVOT_TOL and np.isfinite(self.upper[self.basis[r]]):
                    t = max(self.upper[self.basis[r]] - rhs[r], 0.0) / -a
                    at_upper = True
                else:
                    continue
                var = self.basis[r]
                if t < best or (t == best and leave >= 0 and var < leave_var):
                    best, leave, leave_upper, leave_var = t, r, at_upper, var
            if not np.isfinite(best):
                return False
            if leave < 0:
                # entering variable reaches its own bound first
                self.complement(j)
                continue
            out_var = self.basis[leave]
            self.pivot(leave, j)
            if leave_upper:
                self.complement(out_var)


def solve_lp(c, A_ub, b_ub, upper=None, maximize: bool = False) -> LPResult:
    """Solve a small LP with nonnegative, optionally upper-bounded variables.

    ``upper`` may contain ``np.inf``. Rows and columns are equilibrated
    before pivoting; the returned ``x`` and objective are in original units.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float)).copy()
    b = np.asarray(b_ub, dtype=float).copy()
    n = c.size
    if A.size == 0:
        A = np.zeros((0, n))
    m = A.shape[0]
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).copy()
    if np.any(upper < 0):
        return LPResult(LPStatus.INFEASIBLE, float("nan"), None)
    sign = -1.0 if maximize else 1.0
    cost = sign * c

    # equilibrate: columns first, then rows
    colscale = np.max(np.abs(A), axis=0) if m else np.ones(n)
    colscale[colscale == 0] = 1.0
    A /= colscale
    cost = cost / colscale
    upper_s = upper * colscale
    rowscale = np.max(np.abs(A), axis=1) if n else np.ones(m)
    rowscale[rowscale == 0] = 1.0
    A /= rowscale[:, None]
    b /= rowscale

    neg = b < 0
    n_art = int(neg.sum())
    ncols = n + m + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    art_cols = []
    k = n + m
    for r in np.flatnonzero(neg):
        T[r, :-1] *= -1.0
        T[r, -1] *= -1.0
        T[r, k] = 1.0
        basis[r] = k
        art_cols.append(k)
        k += 1
    up = np.concatenate([upper_s, np.full(m + n_art, np.inf)])
    tab = _Tableau(T, basis, up)

    allowed = np.ones(ncols, dtype=bool)
    if n_art:
        # phase 1: minimize the sum of artificials
        T[m, :] = 0.0
        for r in np.flatnonzero(neg):
            T[m, :] -= T[r, :]
        for col in art_cols:
            T[m, col] = 0.0
        tab.run(allowed)
        # relative to the rhs scale: decoy rows carry right-hand sides ~1e-8
        infeas = -T[m, -1]
        if infeas > FEAS_TOL * np.abs(b).max():
            return LPResult(LPStatus.INFEASIBLE, float("nan"), None, tab.pivots)
        # drive remaining artificials out of the basis
        art_set = set(art_cols)
        for r in range(m):
            if tab.basis[r] in art_set:
                row = T[r, :n + m]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
        allowed[art_cols] = False
        T[:m, art_cols] = 0.0

    # phase 2 objective row, expressed in the current (complemented) columns
    T[m, :] = 0.0
    obj_const = 0.0
    for j in range(n):
        cj = cost[j]
        if tab.flipped[j]:
            obj_const += cj * up[j]
            cj = -cj
        T[m, j] = cj
    for r, j in enumerate(tab.basis):
        if T[m, j] != 0.0:
            T[m, :] -= T[m, j] * T[r, :]
    if not tab.run(allowed):
        return LPResult(LPStatus.UNBOUNDED, sign * -np.inf, None, tab.pivots)

    xs = np.zeros(ncols)
    for r, j in enumerate(tab.basis):
        xs[j] = T[r, -1]
    xs = np.where(tab.flipped, up - xs, xs)
    x = np.clip(xs[:n], 0.0, upper_s) / colscale
    value = float(c @ x)
    return LPResult(LPStatus.OPTIMAL, value, x, tab.pivots)
