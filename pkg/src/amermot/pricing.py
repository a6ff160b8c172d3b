"""End-to-end robust pricing of a two-date American payoff."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .costs import CostSpec, HypothesisReport, check_theorem_hypotheses
from .exceptions import CostError
from .lp import DEFAULT_TOL, Tolerances
from .measures import DiscreteMeasure, irreducible_decomposition, require_convex_order
from .mot import (DualCertificate, ExerciseStrategy, SlackReport, TransportPlan,
                  purity_report, solve_alternating, solve_pure_enumeration, solve_relaxed,
                  verify_certificate)


@dataclass
class PriceOptions:
    max_enum: int = 16
    tol: Tolerances = DEFAULT_TOL
    purity_tol: float = 1e-6
    restarts: int = 8
    max_iters: int = 50
    seed: int = 0
    prune: bool = True
    decompose: bool = True


@dataclass
class ComponentReport:
    index: int
    interval: Optional[tuple]
    mu_mass: float
    p_bar: float
    p_c: float
    p_c_is_exact: bool
    overlap_mass: float
    s: List[float]

    @property
    def gap(self) -> float:
        return self.p_bar - self.p_c

    def to_json(self):
        return {
            "index": self.index,
            "interval": None if self.interval is None else list(self.interval),
            "mu_mass": self.mu_mass,
            "p_bar": self.p_bar,
            "p_c": self.p_c,
            "p_c_is_exact": self.p_c_is_exact,
            "gap": self.gap,
            "overlap_mass": self.overlap_mass,
            "s": list(self.s),
        }


@dataclass
class SolveReport:
    p_bar: float
    p_c: Optional[float]
    p_c_is_exact: bool
    strategy: Optional[ExerciseStrategy]
    plan: TransportPlan
    dual: DualCertificate
    overlap_mass: float
    slack: SlackReport
    hypotheses: Optional[HypothesisReport]
    components: List[ComponentReport] = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)
    purity_tol: float = 1e-6
    seed: int = 0
    ties: int = 0

    @property
    def gap(self) -> Optional[float]:
        return None if self.p_c is None else self.p_bar - self.p_c

    @property
    def pure(self) -> bool:
        return self.overlap_mass <= self.purity_tol

    @property
    def dual_value(self) -> float:
        return self.dual.value(self.plan.mu, self.plan.nu)

    def summary(self) -> str:
        pc = "nan" if self.p_c is None else f"{self.p_c:.10g}"
        if not self.p_c_is_exact:
            pc += "(lower-bound)"
        gap = "nan" if self.gap is None else f"{_clean(self.gap):.3g}"
        return (f"p_bar={self.p_bar:.10g} p_c={pc} gap={gap} "
                f"overlap={_clean(self.overlap_mass):.3g} pure={'yes' if self.pure else 'no'}")

    def to_json(self) -> dict:
        return {
            "p_bar": self.p_bar,
            "p_c": self.p_c,
            "p_c_is_exact": self.p_c_is_exact,
            "gap": self.gap,
            "strategy": {"s": None if self.strategy is None else self.strategy.s.tolist()},
            "overlap_mass": self.overlap_mass,
            "pure": self.pure,
            "dual": {
                "phi": self.dual.phi.tolist(),
                "psi": self.dual.psi.tolist(),
                "theta": self.dual.theta.tolist(),
                "value": self.dual_value,
            },
            "slack": self.slack.to_json(),
            "components": [c.to_json() for c in self.components],
            "hypotheses": None if self.hypotheses is None else self.hypotheses.to_json(),
            "seed": self.seed,
            "ties": self.ties,
            "timings_ms": dict(self.timings_ms),
        }


def _clean(v: float, eps: float = 1e-12) -> float:
    return 0.0 if abs(v) < eps else v


def identity_value(cost: CostSpec, mu: DiscreteMeasure) -> float:
    """Value when every model keeps ``y = x``: exercise wherever ``c1 >= c2(x, x)``."""
    x = mu.atoms
    best = np.maximum(np.asarray(cost.evaluate(1, x, x)), np.asarray(cost.evaluate(2, x, x)))
    return float(mu.weights @ best)


def _exact_or_bound(mu, nu, cost, opts):
    if len(mu) <= opts.max_enum:
        res = solve_pure_enumeration(mu, nu, cost, opts.max_enum, opts.tol, opts.prune)
        return res.value, res.strategy, True, len(res.ties)
    res = solve_alternating(mu, nu, cost, opts.restarts, opts.max_iters, opts.seed, opts.tol)
    return res.value, res.strategy, False, 0


def _component_report(comp, cost, opts) -> ComponentReport:
    mu_k, nu_k = comp.mu_part, comp.nu_part
    if comp.index == 0:
        x = mu_k.atoms
        c1 = np.asarray(cost.evaluate(1, x, x), dtype=float)
        c2 = np.asarray(cost.evaluate(2, x, x), dtype=float)
        v = identity_value(cost, mu_k)
        return ComponentReport(0, None, mu_k.mass(), v, v, True, 0.0,
                               (c1 >= c2).astype(float).tolist())
    rel = solve_relaxed(mu_k, nu_k, cost, opts.tol)
    p_c, strat, exact, _ = _exact_or_bound(mu_k, nu_k, cost, opts)
    return ComponentReport(comp.index, comp.interval, mu_k.mass(), rel.value, p_c, exact,
                           purity_report(rel.plan).overlap_mass, strat.s.tolist())


def price_american(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec,
                   options: Optional[PriceOptions] = None) -> SolveReport:
    """Relaxed bound, exact (or lower-bound) value, certificate and diagnostics."""
    opts = options or PriceOptions()
    if not cost.is_american:
        raise CostError("price_american needs an american cost")
    require_convex_order(mu, nu)
    cost = cost.bind(mu, nu)
    timings = {}

    t0 = time.perf_counter()
    rel = solve_relaxed(mu, nu, cost, opts.tol)
    slack = verify_certificate(rel.plan, rel.dual, cost)
    overlap = purity_report(rel.plan).overlap_mass
    timings["relaxed"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    p_c, strategy, exact, ties = _exact_or_bound(mu, nu, cost, opts)
    timings["p_c"] = 1e3 * (time.perf_counter() - t0)

    hyp = check_theorem_hypotheses(cost, mu, nu)

    comps = []
    if opts.decompose:
        t0 = time.perf_counter()
        comps = [_component_report(c, cost, opts) for c in irreducible_decomposition(mu, nu)]
        timings["components"] = 1e3 * (time.perf_counter() - t0)
    timings["total"] = sum(timings.values())

    return SolveReport(rel.value, p_c, exact, strategy, rel.plan, rel.dual, overlap, slack, hyp,
                       comps, timings, opts.purity_tol, opts.seed, ties)
