import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amermot import DiscreteMeasure, check_left_monotone, left_curtain, random_convex_pair
from amermot.exceptions import NotInConvexOrder
from oracles import lp_max_by_vertices, mot_matrices

MU_2x3 = DiscreteMeasure([-1.0, 1.0], [0.5, 0.5])
NU_2x3 = DiscreteMeasure([-2.0, 0.0, 2.0], [0.25, 0.5, 0.25])
# x = -1 takes its shadow first: the narrowest mean -1 sub-measure of nu,
# which is 1/4 at -2 and 1/4 at 0; x = 1 gets what is left.
HAND_PLAN = np.array([[0.25, 0.25, 0.0], [0.0, 0.25, 0.25]])


def naive_left_monotone(pi, tol=1e-9):
    m, n = pi.shape
    for i in range(m):
        for k in range(i + 1, m):
            for a in range(n):
                for c in range(a + 2, n):
                    for b in range(a + 1, c):
                        if pi[i, a] > tol and pi[i, c] > tol and pi[k, b] > tol:
                            return False
    return True


def test_identity_plan():
    mu = DiscreteMeasure([0.0, 1.0, 3.0], [0.2, 0.3, 0.5])
    res = left_curtain(mu, mu)
    assert np.allclose(res.plan.gammas[0], np.diag(mu.weights), atol=1e-12)
    assert res.report.monotone


def test_split_pair_unique_coupling(split_pair):
    res = left_curtain(*split_pair)
    assert res.plan.gammas[0] == pytest.approx(np.array([[0.5, 0.5]]))
    assert res.report.monotone


def test_two_by_three_matches_hand_plan():
    # the hand plan must be one of the vertices of the martingale polytope
    A, b = mot_matrices(MU_2x3.atoms, MU_2x3.weights, NU_2x3.atoms, NU_2x3.weights)
    _, vertices = lp_max_by_vertices(A, b, np.zeros(A.shape[1]))
    assert any(np.allclose(v.reshape(2, 3), HAND_PLAN) for v in vertices)
    monotone = {tuple(np.round(v, 12)) for v in vertices if naive_left_monotone(v.reshape(2, 3))}
    assert len(monotone) == 1  # degenerate bases may repeat a vertex
    res = left_curtain(MU_2x3, NU_2x3)
    assert res.plan.gammas[0] == pytest.approx(HAND_PLAN, abs=1e-12)
    assert res.report.monotone
    assert res.report.max_row_support <= 2


def test_checker_finds_violation():
    pi = np.array([[0.25, 0.0, 0.25], [0.0, 0.5, 0.0]])
    rep = check_left_monotone(pi)
    assert not rep.monotone
    assert rep.violation == (0, 0, 2, 1, 1)


def test_checker_ignores_earlier_rows():
    # the row inside the spread is to the left of the spreading row: allowed
    pi = np.array([[0.0, 0.5, 0.0], [0.25, 0.0, 0.25]])
    assert check_left_monotone(pi).monotone


def test_rejects_unordered(split_pair):
    mu, nu = split_pair
    with pytest.raises(NotInConvexOrder):
        left_curtain(nu, mu)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
def test_checker_agrees_with_naive(seed, m, n):
    rng = np.random.default_rng(seed)
    pi = rng.random((m, n)) * (rng.random((m, n)) < 0.4)
    assert check_left_monotone(pi).monotone == naive_left_monotone(pi)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 10))
def test_random_pairs_are_monotone(seed, m, n):
    mu, nu = random_convex_pair(seed, m, n)
    res = left_curtain(mu, nu)
    assert res.report.monotone, res.report.violation
    assert naive_left_monotone(res.plan.gammas[0])
    assert res.plan.marginal_residual() <= 1e-9
    assert res.plan.martingale_residual() <= 1e-9
