"""Independent reference computations used by the tests.

Nothing here calls the package's LP solver: LP optima come from exhaustive
basis enumeration, potentials from explicit loops.
"""

import itertools

import numpy as np


def potential_loop(atoms, weights, x):
    return sum(w * abs(x - a) for a, w in zip(atoms, weights))


def independent_rows(A, tol=1e-10):
    rows = []
    basis = np.zeros((0, A.shape[1]))
    for i, row in enumerate(A):
        cand = np.vstack((basis, row))
        if np.linalg.matrix_rank(cand, tol) > basis.shape[0]:
            basis = cand
            rows.append(i)
    return rows


def lp_max_by_vertices(A, b, c, tol=1e-9):
    """``max c.z`` over ``{A z = b, z >= 0}`` by trying every basis.

    Returns ``(value, vertices)`` where ``vertices`` lists every feasible
    basic solution; ``value`` is ``-inf`` when none exists.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    c = np.asarray(c, float)
    rows = independent_rows(A)
    Ar, br = A[rows], b[rows]
    r, n = Ar.shape
    if r == 0:
        z = np.zeros(n)
        ok = np.allclose(A @ z, b, atol=tol)
        return (float(c @ z), [z]) if ok else (-np.inf, [])
    combos = np.array(list(itertools.combinations(range(n), r)))
    Bs = np.transpose(Ar[:, combos], (1, 0, 2))
    dets = np.linalg.det(Bs)
    good = np.abs(dets) > 1e-12
    combos, Bs = combos[good], Bs[good]
    if not len(combos):
        return -np.inf, []
    zs = np.linalg.solve(Bs, np.broadcast_to(br, (len(Bs), r))[..., None])[..., 0]
    feas = np.all(zs >= -tol, axis=1)
    vertices = []
    best = -np.inf
    for S, zS in zip(combos[feas], zs[feas]):
        z = np.zeros(n)
        z[S] = np.maximum(zS, 0.0)
        if np.max(np.abs(A @ z - b)) > 1e-8:
            continue
        vertices.append(z)
        best = max(best, float(c @ z))
    return best, vertices


def mot_matrices(x, wx, y, wy, L=1):
    """Dense constraints for ``L`` component plans on an ``m x n`` grid (row-major per component)."""
    m, n = len(x), len(y)
    N = L * m * n
    A = np.zeros((m + n + L * m, N))
    for l in range(L):
        for i in range(m):
            for j in range(n):
                k = (l * m + i) * n + j
                A[i, k] = 1.0
                A[m + j, k] = 1.0
                A[m + n + l * m + i, k] = y[j] - x[i]
    b = np.concatenate((wx, wy, np.zeros(L * m)))
    return A, b


def fixed_exercise_by_vertices(x, wx, y, wy, c1, c2, s):
    """Best single model for pure rule ``s``; ``c1`` over x-atoms, ``c2`` an m x n grid."""
    A, b = mot_matrices(x, wx, y, wy, 1)
    s = np.asarray(s, float)[:, None]
    cost = (s * np.asarray(c1)[:, None] + (1 - s) * np.asarray(c2)).ravel()
    return lp_max_by_vertices(A, b, cost)


def pure_value_by_vertices(x, wx, y, wy, c1, c2):
    best, best_s = -np.inf, None
    for bits in itertools.product((0, 1), repeat=len(x)):
        v, _ = fixed_exercise_by_vertices(x, wx, y, wy, c1, c2, bits)
        if v > best:
            best, best_s = v, bits
    return best, best_s
