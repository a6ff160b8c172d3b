"""Left-curtain reference coupling and a left-monotonicity checker."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .lp import DEFAULT_TOL, Tolerances
from .measures import DiscreteMeasure
from .mot import TransportPlan, _prepare, _solve_mot


@dataclass
class MonotonicityReport:
    monotone: bool
    # (i, j_low, j_high, k, j_mid): rows i < k, x_i sends mass to y[j_low]
    # and y[j_high], x_k sends mass to y[j_mid] strictly between them
    violation: Optional[Tuple[int, int, int, int, int]] = None
    max_row_support: int = 0


@dataclass
class CurtainResult:
    plan: TransportPlan
    report: MonotonicityReport
    value: float


def selector_grid(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """``x * y**2``; its maximiser over martingale couplings is left-monotone."""
    return mu.atoms[:, None] * nu.atoms[None, :] ** 2


def check_left_monotone(pi: np.ndarray, mass_tol: float = 1e-9) -> MonotonicityReport:
    """Search for ``(x, y1), (x, y2), (x', y')`` with ``x < x'`` and ``y1 < y' < y2``.

    Rows and columns of ``pi`` must follow increasing atom order.
    """
    support = np.asarray(pi) > mass_tol
    counts = support.sum(axis=1)
    m = support.shape[0]
    for i in range(m):
        js = np.flatnonzero(support[i])
        if js.size < 2:
            continue
        lo, hi = js[0], js[-1]
        if hi - lo < 2:
            continue
        inner = support[i + 1:, lo + 1:hi]
        if inner.any():
            dk, dj = np.argwhere(inner)[0]
            return MonotonicityReport(False, (i, int(lo), int(hi), int(i + 1 + dk), int(lo + 1 + dj)),
                                      int(counts.max(initial=0)))
    return MonotonicityReport(True, None, int(counts.max(initial=0)))


def left_curtain(mu: DiscreteMeasure, nu: DiscreteMeasure,
                 tol: Tolerances = DEFAULT_TOL, mass_tol: float = 1e-9) -> CurtainResult:
    _prepare(mu, nu, tol)
    sol, plan = _solve_mot(mu, nu, [selector_grid(mu, nu)], tol)
    return CurtainResult(plan, check_left_monotone(plan.gammas[0], mass_tol), sol.value)
