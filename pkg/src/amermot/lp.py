"""Equality-form linear programming: ``max c.z  s.t.  A z = b, z >= 0``.

Revised simplex with an explicit basis inverse, two phases (artificial
variables in phase 1), Dantzig pricing with lowest-index tie breaking and a
switch to Bland's rule after a run of degenerate pivots. Redundant equality
rows detected at the end of phase 1 are dropped and get a zero multiplier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .exceptions import LpError

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-11


@dataclass(frozen=True)
class Tolerances:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    gap_tol: float = 1e-8
    stall_threshold: int = 50
    refactor_every: int = 64

    def scaled(self, factor: float) -> "Tolerances":
        return replace(self, feas_tol=self.feas_tol * factor, opt_tol=self.opt_tol * factor,
                       gap_tol=self.gap_tol * factor)


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Program data with the constraint matrix kept as ``(row, col, value)`` triplets.

    Duplicate triplets are summed on construction.
    """

    c: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.vals, dtype=float).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= b.size):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= c.size):
            raise ValueError("column index out of range")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c)) and np.all(np.isfinite(vals))):
            raise ValueError("program data must be finite")
        if rows.size:
            key = rows * c.size + cols
            uniq, inv = np.unique(key, return_inverse=True)
            vals = np.bincount(inv, weights=vals, minlength=uniq.size)
            rows, cols = uniq // c.size, uniq % c.size
        for name, arr in (("c", c), ("b", b), ("rows", rows), ("cols", cols), ("vals", vals)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_dense(cls, A, b, c) -> "LinearProgram":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape != (np.size(b), np.size(c)):
            raise ValueError(f"dimension mismatch: A {A.shape}, b {np.shape(b)}, c {np.shape(c)}")
        r, k = np.nonzero(A)
        return cls(c, r, k, A[r, k], b)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_cons(self) -> int:
        return self.b.size

    def dense(self) -> np.ndarray:
        A = np.zeros((self.n_cons, self.n_vars))
        A[self.rows, self.cols] = self.vals
        return A

    def dump(self, fh):
        """Plain-text triplet dump (debugging aid)."""
        fh.write(f"lp {self.n_cons} {self.n_vars} {self.vals.size}\n")
        for j, v in enumerate(self.c):
            fh.write(f"c {j} {v:.17g}\n")
        for i, v in enumerate(self.b):
            fh.write(f"b {i} {v:.17g}\n")
        for r, k, v in zip(self.rows, self.cols, self.vals):
            fh.write(f"a {r} {k} {v:.17g}\n")


@dataclass
class LpSolution:
    status: str
    z: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    value: float = float("nan")
    primal_residual: float = float("nan")
    dual_violation: float = float("nan")
    slackness: float = float("nan")
    dual_value: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Simplex:
    """Revised simplex state over a dense, row-sign-normalised system."""

    def __init__(self, A, b, tol: Tolerances, feas_eps, opt_eps):
        self.A = A
        self.b = b
        self.tol = tol
        self.feas_eps = feas_eps
        self.opt_eps = opt_eps
        self.iterations = 0

    def set_basis(self, basis):
        self.basis = np.asarray(basis, dtype=np.int64)
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise LpError("singular basis during refactorisation") from None
        self.xB = self.Binv @ self.b
        self.since_refactor = 0

    def run(self, cost, allowed, max_iter):
        """Maximise ``cost`` over the current basis; returns OPTIMAL or UNBOUNDED."""
        degenerate = 0
        bland = False
        n = self.A.shape[1]
        in_basis = np.zeros(n, dtype=bool)
        in_basis[self.basis] = True
        for _ in range(max_iter):
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            cand = allowed & ~in_basis & (d > self.opt_eps)
            if not cand.any():
                return OPTIMAL
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                q = int(np.argmax(np.where(cand, d, -np.inf)))
            col = self.Binv @ self.A[:, q]
            pos = col > PIVOT_TOL
            if not pos.any():
                self.ray = q
                return UNBOUNDED
            xB = np.maximum(self.xB, 0.0)
            ratios = np.full(col.shape, np.inf)
            ratios[pos] = xB[pos] / col[pos]
            step = ratios.min()
            ties = np.flatnonzero(ratios <= step + 1e-12 * max(1.0, step))
            # prefer the largest pivot among near-ties, then lowest variable index
            best = ties[np.lexsort((self.basis[ties], -np.round(col[ties], 12)))]
            r = int(best[0]) if not bland else int(ties[np.argmin(self.basis[ties])])
            in_basis[self.basis[r]] = False
            self._pivot(r, q, col)
            in_basis[q] = True
            self.iterations += 1
            if step <= self.feas_eps:
                degenerate += 1
                if degenerate >= self.tol.stall_threshold:
                    bland = True
            else:
                degenerate = 0
                bland = False
        raise LpError(f"simplex iteration limit {max_iter} reached")

    def _pivot(self, r, q, col):
        piv = col[r]
        self.Binv[r] /= piv
        self.xB[r] /= piv
        other = np.arange(col.size) != r
        self.Binv[other] -= np.outer(col[other], self.Binv[r])
        self.xB[other] -= col[other] * self.xB[r]
        self.basis[r] = q
        self.since_refactor += 1
        if self.since_refactor >= self.tol.refactor_every:
            self.refactor()

    def drop_basic(self, r):
        keep = np.arange(self.basis.size) != r
        self.basis = self.basis[keep]


def solve_lp(lp: LinearProgram, tol: Tolerances = DEFAULT_TOL,
             max_iter: Optional[int] = None) -> LpSolution:
    """Solve ``max c.z, A z = b, z >= 0``; infeasibility and unboundedness go in ``status``."""
    A0 = lp.dense()
    b0 = lp.b.copy()
    c0 = lp.c
    m, n = A0.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    bscale = 1.0 + (np.max(np.abs(b0)) if m else 0.0)
    cscale = 1.0 + (np.max(np.abs(c0)) if n else 0.0)
    feas_eps = tol.feas_tol * bscale
    opt_eps = tol.opt_tol * cscale

    if m == 0:
        if np.any(c0 > opt_eps):
            return LpSolution(UNBOUNDED)
        z = np.zeros(n)
        return _finish(lp, z, np.zeros(0), tol, 0)

    sign = np.where(b0 < 0, -1.0, 1.0)
    A = A0 * sign[:, None]
    b = b0 * sign

    # phase 1 on [A | I]
    A1 = np.hstack((A, np.eye(m)))
    cost1 = np.concatenate((np.zeros(n), -np.ones(m)))
    sx = _Simplex(A1, b, tol, feas_eps, opt_eps)
    sx.set_basis(np.arange(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    status = sx.run(cost1, allowed, max_iter)
    if status != OPTIMAL:
        raise LpError("phase 1 reported unbounded; this cannot happen")
    sx.refactor()
    infeas = float(np.sum(sx.xB[sx.basis >= n]))
    if infeas > feas_eps * max(1, m) ** 0.5:
        return LpSolution(INFEASIBLE, iterations=sx.iterations)

    # pivot remaining artificials out of the basis, dropping redundant rows
    active_rows = np.arange(m)
    while True:
        art = np.flatnonzero(sx.basis >= n)
        if art.size == 0:
            break
        r = int(art[0])
        row = sx.Binv[r] @ sx.A[:, :n]
        row[sx.basis[sx.basis < n]] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-9 * max(1.0, np.max(np.abs(row), initial=0.0)))
        if cand.size:
            q = int(cand[np.argmax(np.abs(row[cand]))])
            col = sx.Binv @ sx.A[:, q]
            sx._pivot(r, q, col)
            continue
        # row r of B^-1 A is zero on the structural columns: the constraint
        # that artificial stands for is redundant
        art_var = int(sx.basis[r])
        drop_row = art_var - n
        keep = active_rows != drop_row
        active_rows = active_rows[keep]
        sx.A = sx.A[keep]
        sx.b = sx.b[keep]
        sx.drop_basic(r)
        sx.refactor()

    A2 = sx.A[:, :n]
    sx2 = _Simplex(A2, sx.b, tol, feas_eps, opt_eps)
    sx2.iterations = sx.iterations
    sx2.set_basis(sx.basis)
    status = sx2.run(c0, np.ones(n, dtype=bool), max_iter)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=sx2.iterations)
    sx2.refactor()
    z = np.zeros(n)
    z[sx2.basis] = np.maximum(sx2.xB, 0.0)
    y_active = c0[sx2.basis] @ sx2.Binv
    y = np.zeros(m)
    y[active_rows] = y_active
    y *= sign
    return _finish(lp, z, y, tol, sx2.iterations)


def _finish(lp, z, y, tol, iterations):
    A = lp.dense()
    value = float(lp.c @ z)
    resid = float(np.max(np.abs(A @ z - lp.b), initial=0.0))
    reduced = lp.c - A.T @ y if lp.n_cons else lp.c.copy()
    dual_violation = float(np.max(reduced, initial=0.0))
    slack = float(np.sum(z * np.maximum(0.0, -reduced)))
    dual_value = float(lp.b @ y) if lp.n_cons else 0.0
    return LpSolution(OPTIMAL, z, y, value, resid, dual_violation, slack, dual_value, iterations)


def check_solution(lp: LinearProgram, sol: LpSolution, tol: Tolerances = DEFAULT_TOL) -> dict:
    """Optimality certificate checks for an optimal solve, as a dict of booleans."""
    bscale = 1.0 + (np.max(np.abs(lp.b)) if lp.n_cons else 0.0)
    cscale = 1.0 + (np.max(np.abs(lp.c)) if lp.n_vars else 0.0)
    gap_eps = tol.gap_tol * (1.0 + abs(sol.value))
    return {
        "primal_feasible": sol.primal_residual <= tol.feas_tol * bscale and bool(np.all(sol.z >= -tol.feas_tol)),
        "dual_feasible": sol.dual_violation <= tol.opt_tol * cscale,
        "strong_duality": abs(sol.value - sol.dual_value) <= gap_eps,
        "complementary_slackness": sol.slackness <= gap_eps,
    }
