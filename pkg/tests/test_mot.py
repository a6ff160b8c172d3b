import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from amermot import (DiscreteMeasure, DualCertificate, ExerciseStrategy, PriceOptions,
                     TransportPlan, american_put, constant, price_american, purity_report,
                     put_plus_quadratic, quadratic_spread, random_convex_pair, solve_alternating,
                     solve_fixed_exercise, solve_pure_enumeration, solve_relaxed,
                     verify_certificate)
from amermot.costs import Constant, Diagonal, Power, Put, Sum, american, table
from amermot.exceptions import CostError, NotInConvexOrder, TooManyAtoms
from amermot.mot import exercise_update
from amermot.pricing import identity_value
from conftest import const_square
from oracles import fixed_exercise_by_vertices, mot_matrices, pure_value_by_vertices

TOL = 1e-8


def relaxed_by_highs(mu, nu, grids):
    """Independent relaxed value: build the constraint matrix from scratch and call HiGHS."""
    A, b = mot_matrices(mu.atoms, mu.weights, nu.atoms, nu.weights, len(grids))
    c = np.concatenate([g.ravel() for g in grids])
    res = linprog(-c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0
    return -res.fun


class TestRelaxed:
    def test_constant_two_goes_to_exercise(self, split_pair):
        mu, nu = split_pair
        res = solve_relaxed(mu, nu, const_square(2.0))
        assert res.value == pytest.approx(2.0, abs=TOL)
        assert res.plan.gammas[0].sum() == pytest.approx(1.0)
        assert res.plan.gammas[0][0] == pytest.approx([0.5, 0.5])

    def test_constant_half_goes_to_continuation(self, split_pair):
        mu, nu = split_pair
        res = solve_relaxed(mu, nu, const_square(0.5))
        assert res.value == pytest.approx(1.0, abs=TOL)
        assert res.plan.gammas[1].sum() == pytest.approx(1.0)

    def test_single_component_constant_cost(self):
        for seed in range(5):
            mu, nu = random_convex_pair(seed, 4, 6)
            res = solve_relaxed(mu, nu, constant(1.0, L=1))
            assert res.value == pytest.approx(1.0, abs=TOL)

    def test_generic_cost(self):
        mu, nu = random_convex_pair(5, 3, 5)
        res = solve_relaxed(mu, nu, quadratic_spread())
        # every martingale coupling has the same E[(Y-X)^2] = var(nu) - var(mu)
        var = lambda d: d.integrate(lambda t: t * t) - d.mean() ** 2
        assert res.value == pytest.approx(var(nu) - var(mu), abs=1e-9)

    def test_rejects_unordered(self, split_pair):
        mu, nu = split_pair
        with pytest.raises(NotInConvexOrder):
            solve_relaxed(nu, mu, const_square(1.0))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 7))
    def test_matches_independent_lp(self, seed, m, n):
        mu, nu = random_convex_pair(seed, m, n)
        cost = put_plus_quadratic(0.5, -0.5, 0.1)
        res = solve_relaxed(mu, nu, cost)
        expected = relaxed_by_highs(mu, nu, cost.grids(mu, nu))
        assert res.value == pytest.approx(expected, abs=1e-8 * (1 + abs(expected)))
        assert res.plan.marginal_residual() <= 1e-9
        assert res.plan.martingale_residual() <= 1e-9


class TestFixedExercise:
    def test_always_exercise(self):
        mu, nu = random_convex_pair(1, 4, 6)
        cost = american_put(1.0, -1.0)
        val, _ = solve_fixed_exercise(mu, nu, cost, ExerciseStrategy(np.ones(len(mu))))
        assert val == pytest.approx(mu.integrate(lambda x: np.maximum(1.0 - x, 0.0)), abs=TOL)

    def test_never_exercise_is_plain_mot(self):
        mu, nu = random_convex_pair(2, 4, 6)
        cost = put_plus_quadratic(1.0, 0.0, 0.3)
        val, _ = solve_fixed_exercise(mu, nu, cost, ExerciseStrategy(np.zeros(len(mu))))
        assert val == pytest.approx(relaxed_by_highs(mu, nu, [cost.grid(2, mu, nu)]), abs=TOL)

    def test_half_exercise(self, split_pair):
        mu, nu = split_pair
        val, plan = solve_fixed_exercise(mu, nu, const_square(2.0), ExerciseStrategy([0.5]))
        assert val == pytest.approx(1.5, abs=TOL)
        assert purity_report(plan).overlap_mass == pytest.approx(0.5)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_vertex_oracle(self, seed):
        mu, nu = random_convex_pair(seed, 3, 4)
        cost = american_put(0.5, -0.5)
        g1, g2 = cost.grids(mu, nu)
        s = np.random.default_rng(seed).integers(0, 2, len(mu))
        val, _ = solve_fixed_exercise(mu, nu, cost, ExerciseStrategy(s))
        oracle, _ = fixed_exercise_by_vertices(mu.atoms, mu.weights, nu.atoms, nu.weights,
                                               g1[:, 0], g2, s)
        assert val == pytest.approx(oracle, abs=1e-7)


class TestEnumeration:
    def test_identity_pointwise_max(self):
        d = DiscreteMeasure.dirac(0.0)
        cost = american(Constant(3.0), Constant(1.0))
        res = solve_pure_enumeration(d, d, cost)
        assert res.value == pytest.approx(3.0)
        assert res.strategy.s.tolist() == [1.0]

    def test_split_pair(self, split_pair):
        mu, nu = split_pair
        res = solve_pure_enumeration(mu, nu, const_square(2.0))
        assert res.value == pytest.approx(2.0, abs=TOL)
        assert res.strategy.s.tolist() == [1.0]

    def test_put_example_four_strategies(self):
        mu = DiscreteMeasure([1.0, 3.0], [0.5, 0.5])
        nu = DiscreteMeasure([0.0, 2.0, 4.0], [0.25, 0.5, 0.25])
        cost = american_put(3, 1)
        g1, g2 = cost.grids(mu, nu)
        oracle, _ = pure_value_by_vertices(mu.atoms, mu.weights, nu.atoms, nu.weights, g1[:, 0], g2)
        res = solve_pure_enumeration(mu, nu, cost)
        full = solve_pure_enumeration(mu, nu, cost, prune=False)
        assert res.value == pytest.approx(oracle, abs=1e-9)
        assert full.value == pytest.approx(oracle, abs=1e-9)
        assert full.lp_solves == 4

    def test_too_many_atoms(self):
        mu, nu = random_convex_pair(0, 5, 6)
        with pytest.raises(TooManyAtoms):
            solve_pure_enumeration(mu, nu, american_put(1, 0), max_atoms=4)

    def test_generic_cost_rejected(self, split_pair):
        with pytest.raises(CostError):
            solve_pure_enumeration(*split_pair, quadratic_spread())

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8))
    def test_pruned_equals_exhaustive(self, seed, m, n):
        mu, nu = random_convex_pair(seed, m, n)
        cost = put_plus_quadratic(0.3, -0.2, 0.05)
        a = solve_pure_enumeration(mu, nu, cost)
        b = solve_pure_enumeration(mu, nu, cost, prune=False)
        assert a.value == pytest.approx(b.value, abs=1e-8 * (1 + abs(b.value)))
        assert b.lp_solves == 2 ** len(mu)

    def test_ties_are_reported(self):
        # c1 == c2 on the diagonal of an identity instance: both choices tie
        d = DiscreteMeasure.dirac(0.0)
        res = solve_pure_enumeration(d, d, constant(1.0), prune=False)
        assert len(res.ties) == 2


def jensen_cost(K):
    c2 = Sum((Power(2.0, "y"), Put(K, "y")))
    return american(Diagonal(c2, -1.0), c2)


class TestInvariants:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8))
    def test_relaxation_duality_tightness(self, seed, m, n):
        mu, nu = random_convex_pair(seed, m, n)
        cost = american_put(0.4, -0.3)
        rel = solve_relaxed(mu, nu, cost)
        enum = solve_pure_enumeration(mu, nu, cost)
        eps = 1e-8 * (1 + abs(rel.value))
        assert enum.value <= rel.value + eps
        assert abs(rel.dual.value(mu, nu) - rel.value) <= eps
        slack = verify_certificate(rel.plan, rel.dual, cost)
        assert slack.feasibility <= 1e-8
        assert slack.tightness <= eps
        alt = solve_alternating(mu, nu, cost, seed=seed)
        assert alt.value <= enum.value + eps

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
    def test_jensen_degeneracy(self, seed, K):
        mu, nu = random_convex_pair(seed, 4, 6)
        cost = jensen_cost(K)
        enum = solve_pure_enumeration(mu, nu, cost)
        rel = solve_relaxed(mu, nu, cost)
        assert enum.strategy.s.tolist() == [0.0] * len(mu)
        assert enum.value == pytest.approx(rel.value, abs=1e-8 * (1 + abs(rel.value)))
        plain = relaxed_by_highs(mu, nu, [cost.grid(2, mu, nu)])
        assert enum.value == pytest.approx(plain, abs=1e-8 * (1 + abs(plain)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_identity_marginals(self, seed, m):
        mu, _ = random_convex_pair(seed, m, m)
        cost = american_put(0.2, -0.4)
        rel = solve_relaxed(mu, mu, cost)
        total = rel.plan.total
        assert np.allclose(total, np.diag(mu.weights), atol=1e-9)
        x = mu.atoms
        expected = float(np.sum(mu.weights * np.maximum(np.maximum(0.2 - x, 0), np.maximum(-0.4 - x, 0))))
        assert rel.value == pytest.approx(expected, abs=1e-10)
        assert identity_value(cost, mu) == pytest.approx(expected, abs=1e-15)


class TestAlternating:
    def test_update_on_identity_kernel(self):
        c1 = np.array([1.0, 2.0, 3.0])
        c2 = np.diag([2.0, 2.0, 1.0])
        s = exercise_update(c1, c2, np.eye(3), 1e-12)
        assert s.tolist() == [0.0, 1.0, 1.0]  # tie at atom 1 goes to exercise

    def test_single_atom(self, split_pair):
        mu, nu = split_pair
        for a in (0.5, 2.0):
            alt = solve_alternating(mu, nu, const_square(a), restarts=2)
            enum = solve_pure_enumeration(mu, nu, const_square(a))
            assert alt.value == pytest.approx(enum.value, abs=TOL)

    def test_seed_is_deterministic(self):
        mu, nu = random_convex_pair(4, 7, 9)
        cost = put_plus_quadratic(0.1, -0.3, 0.02)
        a = solve_alternating(mu, nu, cost, seed=123)
        b = solve_alternating(mu, nu, cost, seed=123)
        assert a.value == b.value and np.array_equal(a.strategy.s, b.strategy.s)


class TestCertificate:
    def test_corrupted_dual(self, split_pair):
        mu, nu = split_pair
        cost = const_square(2.0)
        rel = solve_relaxed(mu, nu, cost)
        psi = rel.dual.psi.copy()
        psi[0] -= 1.0
        bad = DualCertificate(rel.dual.phi, psi, rel.dual.theta)
        assert verify_certificate(rel.plan, bad, cost).feasibility > 0.5

    def test_zero_plan_is_tight(self, split_pair):
        mu, nu = split_pair
        cost = const_square(2.0)
        rel = solve_relaxed(mu, nu, cost)
        zero = TransportPlan(np.zeros_like(rel.plan.gammas), mu, nu)
        assert verify_certificate(zero, rel.dual, cost).tightness == 0.0

    def test_dual_is_a_superhedge(self):
        mu, nu = random_convex_pair(8, 5, 7)
        cost = put_plus_quadratic(0.0, -1.0, 0.2)
        rel = solve_relaxed(mu, nu, cost)
        for l in (1, 2):
            assert np.all(rel.dual.superhedge(l, mu, nu) >= cost.grid(l, mu, nu) - 1e-9)


class TestPurity:
    def test_pure_strategy_plan(self, split_pair):
        mu, nu = split_pair
        _, plan = solve_fixed_exercise(mu, nu, const_square(2.0), ExerciseStrategy([1.0]))
        assert purity_report(plan).overlap_mass == 0.0

    def test_half_split(self, split_pair):
        mu, nu = split_pair
        pi = np.array([[0.5, 0.5]])
        plan = TransportPlan(np.stack((pi / 2, pi / 2)), mu, nu)
        rep = purity_report(plan)
        assert rep.overlap_mass == pytest.approx(0.5)
        assert not rep.is_pure()


class TestPriceAmerican:
    def test_identity(self):
        mu = DiscreteMeasure([-1.0, 0.0, 2.0], [0.2, 0.5, 0.3])
        cost = american_put(0.5, -0.5)
        rep = price_american(mu, mu, cost)
        expected = identity_value(cost, mu)
        assert rep.p_bar == pytest.approx(expected, abs=1e-10)
        assert rep.p_c == pytest.approx(expected, abs=1e-10)

    def test_split_pair_report(self, split_pair):
        rep = price_american(*split_pair, const_square(2.0))
        assert rep.p_bar == pytest.approx(2.0, abs=TOL)
        assert rep.p_c == pytest.approx(2.0, abs=TOL)
        assert abs(rep.gap) <= TOL
        assert rep.overlap_mass <= 1e-9 and rep.pure

    def test_heuristic_when_over_limit(self, split_pair):
        rep = price_american(*split_pair, const_square(2.0), PriceOptions(max_enum=0))
        assert not rep.p_c_is_exact
        assert "(lower-bound)" in rep.summary()

    def test_components_add_up(self, two_component_pair):
        mu, nu = two_component_pair
        cost = put_plus_quadratic(0.5, -0.5, 0.1)
        rep = price_american(mu, nu, cost)
        assert len(rep.components) == 2
        assert sum(c.p_bar for c in rep.components) == pytest.approx(rep.p_bar, abs=2e-8)
        assert sum(c.p_c for c in rep.components) == pytest.approx(rep.p_c, abs=2e-8)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8),
           st.sampled_from([0.0, 0.2, 1.0]))
    def test_decomposition_additivity(self, seed, m, n, spread):
        mu, nu = random_convex_pair(seed, m, n, spread)
        cost = american_put(0.3, -0.6)
        rep = price_american(mu, nu, cost)
        eps = max(m, 1) * 1e-8 * (1 + abs(rep.p_bar))
        assert sum(c.p_bar for c in rep.components) == pytest.approx(rep.p_bar, abs=eps)
        assert sum(c.p_c for c in rep.components) == pytest.approx(rep.p_c, abs=eps)

    def test_table_cost(self, split_pair):
        mu, nu = split_pair
        cost = table([2.0], [[1.0, 1.0]])
        assert price_american(mu, nu, cost).p_bar == pytest.approx(2.0, abs=TOL)

    def test_json_field_names(self, split_pair):
        obj = price_american(*split_pair, const_square(2.0)).to_json()
        for key in ("p_bar", "p_c", "gap", "overlap_mass", "components", "hypotheses", "timings_ms"):
            assert key in obj
        assert set(obj["strategy"]) == {"s"}
        assert {"phi", "psi", "theta"} <= set(obj["dual"])
        assert len(obj["dual"]["theta"]) == 2
        assert set(obj["slack"]) == {"feasibility", "tightness"}
