"""Model-free price bounds for two-date American options via discrete martingale transport."""

from .costs import (CostSpec, HypothesisReport, american, american_put, check_theorem_hypotheses,
                    constant, cost_from_json, put_plus_quadratic, quadratic_spread, table)
from .curtain import check_left_monotone, left_curtain
from .exceptions import AmerMotError, NotInConvexOrder, TooManyAtoms
from .experiments import Density, discretize_density, random_convex_pair, refinement_study
from .lp import LinearProgram, LpSolution, Tolerances, solve_lp
from .measures import (DiscreteMeasure, IrreducibleComponent, check_convex_order, common_mass,
                       irreducible_decomposition, potential)
from .mot import (DualCertificate, ExerciseStrategy, TransportPlan, purity_report,
                  solve_alternating, solve_fixed_exercise, solve_pure_enumeration, solve_relaxed,
                  verify_certificate)
from .pricing import PriceOptions, SolveReport, price_american

__version__ = "0.1.0"

__all__ = [
    "AmerMotError", "CostSpec", "Density", "DiscreteMeasure", "DualCertificate",
    "ExerciseStrategy", "HypothesisReport", "IrreducibleComponent", "LinearProgram",
    "LpSolution", "NotInConvexOrder", "PriceOptions", "SolveReport", "Tolerances",
    "TooManyAtoms", "TransportPlan", "american", "american_put", "check_convex_order",
    "check_left_monotone", "check_theorem_hypotheses", "common_mass", "constant",
    "cost_from_json", "discretize_density", "irreducible_decomposition", "left_curtain",
    "potential", "price_american", "purity_report", "put_plus_quadratic", "quadratic_spread",
    "random_convex_pair", "refinement_study", "solve_alternating", "solve_fixed_exercise",
    "solve_lp", "solve_pure_enumeration", "solve_relaxed", "table", "verify_certificate",
]
