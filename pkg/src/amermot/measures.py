"""Finite atomic measures on the real line and convex-order tools.

Everything here works on :class:`DiscreteMeasure`, an immutable pair of
sorted atoms and nonnegative weights. The convex-order test, potential
functions, common mass and the irreducible decomposition are exact for
atomic measures because all potentials involved are piecewise linear with
kinks only at atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .exceptions import NotInConvexOrder

MERGE_TOL = 1e-12
PROB_TOL = 1e-12


class MeasureFormatError(ValueError):
    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atomic measure ``sum_i weights[i] * delta(atoms[i])``.

    Construction sorts the atoms, merges atoms closer than ``1e-12`` by
    adding their weights and drops zero-weight atoms. Negative weights are
    rejected.
    """

    atoms: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape != weights.shape:
            raise ValueError("atoms and weights must have the same length")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        if atoms.size > 1:
            keep = np.concatenate(([True], np.diff(atoms) > MERGE_TOL))
            group = np.cumsum(keep) - 1
            weights = np.bincount(group, weights=weights)
            atoms = atoms[keep]
        nz = weights > 0
        atoms, weights = atoms[nz].copy(), weights[nz].copy()
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        meta = dict(self.meta)
        meta.setdefault("absolutely_continuous_origin", False)
        object.__setattr__(self, "meta", meta)

    @classmethod
    def dirac(cls, x: float, weight: float = 1.0) -> "DiscreteMeasure":
        return cls([x], [weight])

    @classmethod
    def zero(cls) -> "DiscreteMeasure":
        return cls(np.empty(0), np.empty(0))

    def __len__(self):
        return self.atoms.size

    def __repr__(self):
        parts = ", ".join(f"{w:g}@{a:g}" for a, w in zip(self.atoms, self.weights))
        return f"DiscreteMeasure({parts})"

    def mass(self) -> float:
        return float(math.fsum(self.weights))

    def first_moment(self) -> float:
        return float(math.fsum(self.atoms * self.weights))

    def mean(self) -> float:
        m = self.mass()
        if m == 0:
            raise ValueError("mean of the zero measure is undefined")
        return self.first_moment() / m

    def is_probability(self, tol: float = PROB_TOL) -> bool:
        return abs(self.mass() - 1.0) <= tol

    def normalized(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms, self.weights / self.mass(), self.meta)

    def shifted(self, delta: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms + delta, self.weights, self.meta)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms, self.weights * factor, self.meta)

    def restrict(self, lo: float, hi: float) -> "DiscreteMeasure":
        """Restriction to the open interval ``(lo, hi)``."""
        inside = (self.atoms > lo) & (self.atoms < hi)
        return DiscreteMeasure(self.atoms[inside], self.weights[inside])

    def integrate(self, f) -> float:
        return float(math.fsum(self.weights * np.asarray(f(self.atoms), dtype=float)))

    def weight_at(self, x: float, tol: float = MERGE_TOL) -> float:
        idx = np.searchsorted(self.atoms, x - tol)
        if idx < self.atoms.size and abs(self.atoms[idx] - x) <= tol:
            return float(self.weights[idx])
        return 0.0

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(
            np.concatenate((self.atoms, other.atoms)),
            np.concatenate((self.weights, other.weights)),
        )

    def allclose(self, other: "DiscreteMeasure", tol: float = 1e-10) -> bool:
        """Atom-wise comparison; atoms carrying at most ``tol`` are ignored."""
        grid = union_atoms(self, other)
        return bool(np.all(np.abs(on_grid(self, grid) - on_grid(other, grid)) <= tol))


def union_atoms(*measures: DiscreteMeasure) -> np.ndarray:
    pts = np.sort(np.concatenate([m.atoms for m in measures] + [np.empty(0)]))
    if pts.size > 1:
        pts = pts[np.concatenate(([True], np.diff(pts) > MERGE_TOL))]
    return pts


def on_grid(measure: DiscreteMeasure, grid: np.ndarray) -> np.ndarray:
    """Weights of ``measure`` laid out on ``grid`` (atoms off the grid raise)."""
    out = np.zeros(len(grid))
    if len(measure) == 0:
        return out
    idx = np.searchsorted(grid, measure.atoms - MERGE_TOL)
    idx = np.minimum(idx, len(grid) - 1)
    if np.any(np.abs(grid[idx] - measure.atoms) > MERGE_TOL):
        raise ValueError("measure has atoms off the grid")
    np.add.at(out, idx, measure.weights)
    return out


def potential(xi: DiscreteMeasure, x):
    """``u(x) = sum_i w_i |x - a_i|``; scalar in, scalar out."""
    xs = np.asarray(x, dtype=float)
    if len(xi) == 0:
        vals = np.zeros(xs.shape)
    else:
        vals = np.abs(xs[..., None] - xi.atoms) @ xi.weights
    return float(vals) if vals.ndim == 0 else vals


@dataclass(frozen=True)
class ConvexOrderResult:
    ordered: bool
    reason: Optional[str] = None
    witness: Optional[float] = None
    max_violation: float = 0.0

    def __bool__(self):
        return self.ordered


def check_convex_order(mu: DiscreteMeasure, nu: DiscreteMeasure,
                       tol: float = 1e-9) -> ConvexOrderResult:
    dm = mu.mass() - nu.mass()
    if abs(dm) > tol:
        return ConvexOrderResult(False, "mass", None, abs(dm))
    df = mu.first_moment() - nu.first_moment()
    if abs(df) > tol:
        return ConvexOrderResult(False, "mean", None, abs(df))
    pts = union_atoms(mu, nu)
    if pts.size == 0:
        return ConvexOrderResult(True)
    diff = potential(mu, pts) - potential(nu, pts)
    k = int(np.argmax(diff))
    if diff[k] > tol:
        return ConvexOrderResult(False, "potential", float(pts[k]), float(diff[k]))
    return ConvexOrderResult(True, max_violation=max(float(diff[k]), 0.0))


def require_convex_order(mu, nu, tol=1e-9):
    res = check_convex_order(mu, nu, tol)
    if not res.ordered:
        raise NotInConvexOrder(res.reason, res.witness)
    return res


def common_mass(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> DiscreteMeasure:
    """Largest measure dominated by both arguments (atom-wise minimum)."""
    grid = union_atoms(mu1, mu2)
    return DiscreteMeasure(grid, np.minimum(on_grid(mu1, grid), on_grid(mu2, grid)))


@dataclass(frozen=True)
class IrreducibleComponent:
    """One piece ``(mu_k, nu_k)`` of the decomposition.

    ``interval`` is the open interval ``(lo, hi)`` for ``k >= 1`` and
    ``None`` for the diagonal part ``k = 0``, where ``mu_part == nu_part``.
    """

    index: int
    interval: Optional[Tuple[float, float]]
    mu_part: DiscreteMeasure
    nu_part: DiscreteMeasure


def irreducible_decomposition(mu: DiscreteMeasure, nu: DiscreteMeasure,
                              tol: float = 1e-9) -> List[IrreducibleComponent]:
    require_convex_order(mu, nu, tol)
    pts = union_atoms(mu, nu)
    gap = potential(nu, pts) - potential(mu, pts)
    positive = gap > tol
    # the potentials agree outside the convex hull of both supports
    positive[0] = positive[-1] = False

    # u_nu - u_mu is linear between test points and nonnegative, so every
    # component of {u_mu < u_nu} is (pts[a], pts[b]) with zeros at a and b
    # and positive values at every test point strictly between them; a
    # segment whose two ends are zero carries no positive part.
    spans = []
    a = 0
    while a < pts.size - 1:
        if positive[a + 1]:
            b = a + 1
            while positive[b]:
                b += 1
            spans.append((a, b))
            a = b
        else:
            a += 1

    nu_grid = on_grid(nu, pts)
    nu_left = nu_grid.copy()
    comps = []
    for k, (a, b) in enumerate(spans, start=1):
        lo, hi = float(pts[a]), float(pts[b])
        mu_k = mu.restrict(lo, hi)
        inner = slice(a + 1, b)
        m_in = math.fsum(nu_grid[inner])
        f_in = math.fsum(nu_grid[inner] * pts[inner])
        m_rest = mu_k.mass() - m_in
        f_rest = mu_k.first_moment() - f_in
        # endpoint split: solve mass and barycenter balance for (alpha, beta)
        beta = (f_rest - lo * m_rest) / (hi - lo)
        alpha = m_rest - beta
        alpha, beta = max(alpha, 0.0), max(beta, 0.0)
        w = np.zeros(pts.size)
        w[inner] = nu_grid[inner]
        w[a], w[b] = alpha, beta
        nu_left -= w
        comps.append(IrreducibleComponent(k, (lo, hi), mu_k, DiscreteMeasure(pts, w)))

    nu_left[np.abs(nu_left) <= tol] = 0.0
    mu_0 = DiscreteMeasure(pts[~positive], on_grid(mu, pts)[~positive])
    if np.any(nu_left < 0):
        raise NotInConvexOrder("decomposition produced negative residual mass",
                               float(pts[int(np.argmin(nu_left))]))
    nu_0 = DiscreteMeasure(pts, nu_left)
    if len(mu_0) or len(nu_0):
        comps.insert(0, IrreducibleComponent(0, None, mu_0, nu_0))
    return comps


def read_measure_csv(path, absolutely_continuous_origin: bool = False) -> DiscreteMeasure:
    """Load ``x,weight`` lines; ``#`` starts a comment, blank lines are skipped."""
    atoms, weights = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise MeasureFormatError(path, lineno, f"expected 'x,weight', got {raw.strip()!r}")
            try:
                x, w = float(parts[0]), float(parts[1])
            except ValueError:
                raise MeasureFormatError(path, lineno, f"not a number: {raw.strip()!r}") from None
            if not (math.isfinite(x) and math.isfinite(w)):
                raise MeasureFormatError(path, lineno, "non-finite value")
            if w < 0:
                raise MeasureFormatError(path, lineno, f"negative weight {w!r}")
            atoms.append(x)
            weights.append(w)
    return DiscreteMeasure(atoms, weights,
                           {"absolutely_continuous_origin": absolutely_continuous_origin})


def write_measure_csv(measure: DiscreteMeasure, path_or_fh, header: Optional[str] = None):
    lines = [] if header is None else [f"# {h}" for h in header.splitlines()]
    lines += [f"{a:.17g},{w:.17g}" for a, w in zip(measure.atoms, measure.weights)]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(text)
    else:
        with open(path_or_fh, "w") as fh:
            fh.write(text)

