"""Martingale transport solvers for two-date American payoffs.

The relaxed bound lets every payoff component carry its own martingale
sub-plan; the exact value shares one kernel between the exercise and
continuation parts and is found by searching over pure exercise
strategies. All problems are finite LPs over the atoms of ``mu`` x ``nu``.
"""

from __future__ import annotations

import io
import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .costs import CostSpec
from .exceptions import CostError, GridMismatch, LpError, TooManyAtoms
from .lp import DEFAULT_TOL, OPTIMAL, LinearProgram, LpSolution, Tolerances, solve_lp
from .measures import DiscreteMeasure, common_mass, require_convex_order

log = logging.getLogger(__name__)


@dataclass(eq=False)
class TransportPlan:
    """Component plans ``gammas[l]`` (shape ``m x n``) over ``mu`` x ``nu`` atoms."""

    gammas: np.ndarray
    mu: DiscreteMeasure
    nu: DiscreteMeasure

    def __post_init__(self):
        self.gammas = np.asarray(self.gammas, dtype=float)
        if self.gammas.ndim == 2:
            self.gammas = self.gammas[None]
        if self.gammas.shape[1:] != (len(self.mu), len(self.nu)):
            raise GridMismatch(
                f"plan shape {self.gammas.shape[1:]} does not match grid {len(self.mu)}x{len(self.nu)}")

    @property
    def L(self) -> int:
        return self.gammas.shape[0]

    @property
    def total(self) -> np.ndarray:
        return self.gammas.sum(axis=0)

    def x_marginal(self, l: int) -> np.ndarray:
        """Row sums of component ``l`` (1-based)."""
        return self.gammas[l - 1].sum(axis=1)

    def kernel(self) -> np.ndarray:
        """Conditional law of ``y`` given each ``x``-atom for the summed plan."""
        pi = self.total
        rows = pi.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, pi / rows, 0.0)

    def marginal_residual(self) -> float:
        pi = self.total
        rx = np.abs(pi.sum(axis=1) - self.mu.weights)
        ry = np.abs(pi.sum(axis=0) - self.nu.weights)
        return float(max(rx.max(initial=0.0), ry.max(initial=0.0)))

    def martingale_residual(self) -> float:
        """Largest per-row barycentre error ``|sum_j g(i,j)(y_j - x_i)|`` over components."""
        dy = self.nu.atoms[None, :] - self.mu.atoms[:, None]
        return float(np.abs((self.gammas * dy).sum(axis=2)).max(initial=0.0))

    def value(self, grids: Sequence[np.ndarray]) -> float:
        return float(sum(np.sum(g * c) for g, c in zip(self.gammas, grids)))

    def triplets(self, mass_tol: float = 0.0):
        """Nonzero entries of the summed plan as ``(i, j, mass)``."""
        pi = self.total
        i, j = np.nonzero(pi > mass_tol)
        return [(int(a), int(b), float(pi[a, b])) for a, b in zip(i, j)]


@dataclass
class ExerciseStrategy:
    """``s[i]`` is the fraction exercised at the first date at atom ``x_i``."""

    s: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float).ravel()
        if np.any(self.s < 0) or np.any(self.s > 1):
            raise ValueError("exercise fractions must lie in [0, 1]")

    @property
    def is_pure(self) -> bool:
        return bool(np.all((self.s == 0) | (self.s == 1)))

    def mu1(self, mu: DiscreteMeasure) -> DiscreteMeasure:
        return DiscreteMeasure(mu.atoms, self.s * mu.weights)

    def mu2(self, mu: DiscreteMeasure) -> DiscreteMeasure:
        return DiscreteMeasure(mu.atoms, (1.0 - self.s) * mu.weights)


@dataclass
class DualCertificate:
    """Static positions ``phi`` (x-atoms), ``psi`` (y-atoms) and forward positions ``theta[l]``."""

    phi: np.ndarray
    psi: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))

    def value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return float(mu.weights @ self.phi + nu.weights @ self.psi)

    def superhedge(self, l: int, mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
        """``phi(x) + psi(y) + theta_l(x)(y - x)`` on the grid."""
        dy = nu.atoms[None, :] - mu.atoms[:, None]
        return self.phi[:, None] + self.psi[None, :] + self.theta[l - 1][:, None] * dy


@dataclass
class SlackReport:
    feasibility: float
    tightness: float
    worst: Optional[tuple] = None

    def to_json(self):
        return {"feasibility": self.feasibility, "tightness": self.tightness}


@dataclass
class RelaxedResult:
    value: float
    plan: TransportPlan
    dual: DualCertificate
    lp: LpSolution


@dataclass
class EnumerationResult:
    value: float
    strategy: ExerciseStrategy
    plan: TransportPlan
    ties: List[ExerciseStrategy] = field(default_factory=list)
    lp_solves: int = 0


@dataclass
class AlternatingResult:
    value: float
    strategy: ExerciseStrategy
    plan: TransportPlan
    iterations: int = 0


@dataclass
class PurityReport:
    mu1: DiscreteMeasure
    mu2: DiscreteMeasure
    overlap_mass: float

    def is_pure(self, tol: float = 1e-6) -> bool:
        return self.overlap_mass <= tol


def _prepare(mu, nu, tol: Tolerances):
    require_convex_order(mu, nu, max(tol.feas_tol, 1e-9))


def build_mot_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, grids: Sequence[np.ndarray],
                 active: Optional[np.ndarray] = None):
    """LP for ``L = len(grids)`` component plans with per-row martingale constraints.

    Variable ``(l, i, j)`` has flat index ``(l*m + i)*n + j``. Rows are the
    ``m`` x-marginals, then the ``n`` y-marginals, then one barycentre row
    per ``(l, i)``. ``active`` (boolean ``L x m``) removes whole component
    rows from the program. Returns the program and the kept variable indices.
    """
    m, n, L = len(mu), len(nu), len(grids)
    if active is None:
        active = np.ones((L, m), dtype=bool)
    l_idx, i_idx, j_idx = np.meshgrid(np.arange(L), np.arange(m), np.arange(n), indexing="ij")
    keep = np.broadcast_to(active[:, :, None], (L, m, n)).ravel()
    l_idx, i_idx, j_idx = l_idx.ravel()[keep], i_idx.ravel()[keep], j_idx.ravel()[keep]
    var = np.arange(l_idx.size)
    dy = nu.atoms[j_idx] - mu.atoms[i_idx]
    rows = np.concatenate((i_idx, m + j_idx, m + n + l_idx * m + i_idx))
    cols = np.concatenate((var, var, var))
    vals = np.concatenate((np.ones(var.size), np.ones(var.size), dy))
    b = np.concatenate((mu.weights, nu.weights, np.zeros(L * m)))
    c = np.stack([np.asarray(g, dtype=float) for g in grids])[l_idx, i_idx, j_idx]
    flat = (l_idx * m + i_idx) * n + j_idx
    return LinearProgram(c, rows, cols, vals, b), flat


def _solve_mot(mu, nu, grids, tol, active=None):
    lp, flat = build_mot_lp(mu, nu, grids, active)
    if log.isEnabledFor(logging.DEBUG):
        buf = io.StringIO()
        lp.dump(buf)
        log.debug("martingale transport LP\n%s", buf.getvalue())
    sol = solve_lp(lp, tol)
    if sol.status != OPTIMAL:
        raise LpError(f"martingale transport LP is {sol.status}; "
                      "marginals are probably not in convex order")
    L, m, n = len(grids), len(mu), len(nu)
    g = np.zeros(L * m * n)
    g[flat] = sol.z
    plan = TransportPlan(g.reshape(L, m, n), mu, nu)
    return sol, plan


def solve_relaxed(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec,
                  tol: Tolerances = DEFAULT_TOL) -> RelaxedResult:
    """Relaxed upper bound: each component is its own (sub-probability) martingale plan.

    The LP multipliers of the x-marginal, y-marginal and barycentre rows are
    the static positions ``phi``, ``psi`` and forward positions ``theta``.
    """
    _prepare(mu, nu, tol)
    grids = cost.grids(mu, nu)
    sol, plan = _solve_mot(mu, nu, grids, tol)
    m, n, L = len(mu), len(nu), cost.L
    dual = DualCertificate(sol.y[:m], sol.y[m:m + n], sol.y[m + n:].reshape(L, m))
    return RelaxedResult(sol.value, plan, dual, sol)


def _require_american(cost):
    if not cost.is_american:
        raise CostError("this solver needs an american (two-component) cost")


def blended_grid(c1: np.ndarray, c2: np.ndarray, s: np.ndarray) -> np.ndarray:
    return s[:, None] * c1 + (1.0 - s[:, None]) * c2


def _fixed(mu, nu, grids, s, tol):
    cs = blended_grid(grids[0], grids[1], s)
    sol, pi_plan = _solve_mot(mu, nu, [cs], tol)
    pi = pi_plan.gammas[0]
    plan = TransportPlan(np.stack((s[:, None] * pi, (1.0 - s[:, None]) * pi)), mu, nu)
    return sol.value, plan


def solve_fixed_exercise(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec,
                         strategy: ExerciseStrategy, tol: Tolerances = DEFAULT_TOL):
    """Best model for a fixed exercise rule; returns ``(value, plan)``."""
    _require_american(cost)
    _prepare(mu, nu, tol)
    s = np.asarray(strategy.s, dtype=float)
    if s.size != len(mu):
        raise GridMismatch(f"strategy has {s.size} entries for {len(mu)} atoms")
    return _fixed(mu, nu, cost.grids(mu, nu), s, tol)


def solve_pure_enumeration(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec,
                           max_atoms: int = 16, tol: Tolerances = DEFAULT_TOL,
                           prune: bool = True) -> EnumerationResult:
    """Exact value over all pure exercise strategies.

    For a fixed model the objective is affine in each ``s_i``, so the best
    exercise rule can be taken pure. With ``prune=False`` every one of the
    ``2**m`` strategies is solved. With ``prune=True`` (default) the same
    maximum is found by depth-first branch and bound: a node fixes some
    ``s_i`` and is bounded by the relaxed LP restricted to those choices;
    a node whose relaxed optimum already exercises every atom purely is
    closed by one fixed-exercise solve.
    """
    _require_american(cost)
    _prepare(mu, nu, tol)
    m = len(mu)
    if m > max_atoms:
        raise TooManyAtoms(m, max_atoms)
    grids = cost.grids(mu, nu)
    if prune:
        return _branch_and_bound(mu, nu, grids, tol)

    best = None
    ties = []
    solves = 0
    for bits in itertools.product((0.0, 1.0), repeat=m):
        s = np.array(bits)
        val, plan = _fixed(mu, nu, grids, s, tol)
        solves += 1
        eps = tol.gap_tol * (1.0 + abs(val))
        if best is None or val > best[0] + eps:
            best = (val, s, plan)
            ties = [ExerciseStrategy(s)]
        elif abs(val - best[0]) <= eps:
            ties.append(ExerciseStrategy(s))
    val, s, plan = best
    return EnumerationResult(val, ExerciseStrategy(s), plan, ties, solves)


def _branch_and_bound(mu, nu, grids, tol):
    m = len(mu)
    mass_tol = tol.feas_tol
    best_val, best_s, best_plan = -np.inf, None, None
    ties: List[ExerciseStrategy] = []
    solves = 0

    def consider(val, s, plan):
        nonlocal best_val, best_s, best_plan, ties
        eps = tol.gap_tol * (1.0 + abs(val))
        if val > best_val + eps:
            best_val, best_s, best_plan = val, s, plan
            ties = [ExerciseStrategy(s)]
        elif abs(val - best_val) <= eps and not any(np.array_equal(s, t.s) for t in ties):
            ties.append(ExerciseStrategy(s))

    stack = [np.full(m, -1, dtype=np.int8)]
    while stack:
        assign = stack.pop()
        if np.all(assign >= 0):
            s = assign.astype(float)
            val, plan = _fixed(mu, nu, grids, s, tol)
            solves += 1
            consider(val, s, plan)
            continue
        active = np.vstack((assign != 0, assign != 1))
        sol, rplan = _solve_mot(mu, nu, grids, tol, active)
        solves += 1
        bound = sol.value
        if bound < best_val - tol.gap_tol * (1.0 + abs(best_val)):
            continue
        r1, r2 = rplan.x_marginal(1), rplan.x_marginal(2)
        split = np.minimum(r1, r2)
        split[assign >= 0] = -1.0
        free = np.flatnonzero(assign < 0)
        if split.max() <= mass_tol:
            s = np.where(assign >= 0, assign, (r1 >= r2).astype(np.int8)).astype(float)
            val, plan = _fixed(mu, nu, grids, s, tol)
            solves += 1
            consider(val, s, plan)
            if val >= bound - tol.gap_tol * (1.0 + abs(bound)):
                continue
        k = int(free[np.argmax(split[free])])
        first = 1 if r1[k] >= r2[k] else 0
        for choice in (1 - first, first):  # the preferred child is popped first
            child = assign.copy()
            child[k] = choice
            stack.append(child)
    return EnumerationResult(best_val, ExerciseStrategy(best_s), best_plan, ties, solves)


def exercise_update(c1: np.ndarray, c2: np.ndarray, kernel: np.ndarray,
                    tie_tol: float) -> np.ndarray:
    """Best pure rule against a fixed kernel; ties go to exercising (``s_i = 1``)."""
    cont = np.sum(kernel * c2, axis=1)
    return (c1 >= cont - tie_tol).astype(float)


def solve_alternating(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec,
                      restarts: int = 8, max_iters: int = 50, seed: int = 0,
                      tol: Tolerances = DEFAULT_TOL) -> AlternatingResult:
    """Lower bound on the exact value by alternating model and exercise updates.

    The first two starts are "always exercise" and "never exercise"; the
    remaining ``restarts - 2`` are random pure rules from a PCG64 stream
    seeded with ``seed``.
    """
    _require_american(cost)
    _prepare(mu, nu, tol)
    m = len(mu)
    grids = cost.grids(mu, nu)
    c1 = grids[0][:, 0] if len(nu) else np.zeros(m)
    rng = np.random.Generator(np.random.PCG64(seed))
    starts = [np.ones(m), np.zeros(m)]
    starts += [rng.integers(0, 2, m).astype(float) for _ in range(max(restarts - 2, 0))]

    best = None
    total_iters = 0
    for s in starts:
        prev = -np.inf
        current = None
        for _ in range(max_iters):
            val, plan = _fixed(mu, nu, grids, s, tol)
            total_iters += 1
            if val <= prev + tol.gap_tol * (1.0 + abs(prev)):
                break
            prev, current = val, (val, s, plan)
            s_new = exercise_update(c1, grids[1], plan.kernel(), tol.gap_tol)
            if np.array_equal(s_new, s):
                break
            s = s_new
        if best is None or current[0] > best[0] + tol.gap_tol * (1.0 + abs(best[0])):
            best = current
    val, s, plan = best
    return AlternatingResult(val, ExerciseStrategy(s), plan, total_iters)


def verify_certificate(plan: TransportPlan, dual: DualCertificate, cost: CostSpec) -> SlackReport:
    """Worst violation of the superhedging inequality and plan-weighted slack.

    ``feasibility`` is ``max(0, max c_l - (phi + psi + theta_l (y - x)))``
    over the whole grid; ``tightness`` is ``sum gamma_l |slack_l|``, which
    vanishes exactly when the inequality is tight wherever the plan puts mass.
    """
    mu, nu = plan.mu, plan.nu
    m, n = len(mu), len(nu)
    if dual.phi.shape != (m,) or dual.psi.shape != (n,) or dual.theta.shape != (plan.L, m):
        raise GridMismatch("certificate arrays do not match the plan grid")
    if cost.L != plan.L:
        raise GridMismatch(f"cost has {cost.L} components, plan has {plan.L}")
    worst, where, tight = 0.0, None, 0.0
    for l in range(1, plan.L + 1):
        slack = dual.superhedge(l, mu, nu) - cost.grid(l, mu, nu)
        k = int(np.argmin(slack)) if slack.size else 0
        if slack.size and -slack.flat[k] > worst:
            worst = float(-slack.flat[k])
            where = (l,) + tuple(int(v) for v in np.unravel_index(k, slack.shape))
        tight += float(np.sum(plan.gammas[l - 1] * np.abs(slack)))
    return SlackReport(worst, tight, where)


def purity_report(plan: TransportPlan) -> PurityReport:
    if plan.L != 2:
        raise GridMismatch("purity is defined for two-component plans")
    mu1 = DiscreteMeasure(plan.mu.atoms, np.maximum(plan.x_marginal(1), 0.0))
    mu2 = DiscreteMeasure(plan.mu.atoms, np.maximum(plan.x_marginal(2), 0.0))
    return PurityReport(mu1, mu2, common_mass(mu1, mu2).mass())
