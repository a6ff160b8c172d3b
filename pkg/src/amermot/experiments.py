"""Instance generation, density discretisation and grid-refinement studies."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from .costs import CostSpec, check_theorem_hypotheses
from .exceptions import AmerMotError
from .fmt import fmt_float
from .measures import DiscreteMeasure
from .pricing import PriceOptions, price_american

STUDY_HEADER = ["n", "p_bar", "p_c", "p_c_is_exact", "gap", "overlap_mass",
                "strict_convexity", "diagonal_separated", "runtime_ms"]


@dataclass(frozen=True)
class Density:
    """One of the built-in densities on a bounded interval ``[a, b]``."""

    family: str
    params: tuple

    @classmethod
    def uniform(cls, a, b):
        if not b > a:
            raise ValueError("uniform needs a < b")
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def triangular(cls, a, c, b):
        if not (a <= c <= b and b > a):
            raise ValueError("triangular needs a <= c <= b and a < b")
        return cls("triangular", (float(a), float(c), float(b)))

    @classmethod
    def truncated_gaussian(cls, m, sigma, a, b):
        if not (sigma > 0 and b > a):
            raise ValueError("truncated gaussian needs sigma > 0 and a < b")
        return cls("gaussian", (float(m), float(sigma), float(a), float(b)))

    @classmethod
    def from_json(cls, obj) -> "Density":
        t = obj.get("type")
        try:
            if t == "uniform":
                return cls.uniform(obj["a"], obj["b"])
            if t == "triangular":
                return cls.triangular(obj["a"], obj["c"], obj["b"])
            if t in ("gaussian", "gaussian-truncated", "truncated_gaussian"):
                return cls.truncated_gaussian(obj["m"], obj["sigma"], obj["a"], obj["b"])
        except KeyError as exc:
            raise ValueError(f"density {t!r} is missing field {exc.args[0]!r}") from None
        raise ValueError(f"unknown density type {t!r}")

    def to_json(self) -> dict:
        keys = {"uniform": ("a", "b"), "triangular": ("a", "c", "b"),
                "gaussian": ("m", "sigma", "a", "b")}[self.family]
        return {"type": self.family, **dict(zip(keys, self.params))}

    @property
    def support(self):
        p = self.params
        return (p[0], p[1]) if self.family == "uniform" else (p[-3], p[-1]) if self.family == "triangular" else (p[2], p[3])

    def frozen(self):
        p = self.params
        if self.family == "uniform":
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if self.family == "triangular":
            a, c, b = p
            return stats.triang((c - a) / (b - a), loc=a, scale=b - a)
        m, s, a, b = p
        return stats.truncnorm((a - m) / s, (b - m) / s, loc=m, scale=s)

    def mean(self) -> float:
        return float(self.frozen().mean())


def discretize_density(density: Density, n: int, method: str = "quantile") -> DiscreteMeasure:
    """``n``-atom proxy of ``density``, shifted so its mean equals the exact mean.

    ``quantile`` puts equal weights at the ``(k - 1/2)/n`` quantiles;
    ``midpoint`` uses ``n`` equal cells on the support with atoms at cell
    midpoints and weights equal to cell probabilities. The applied shift is
    stored in ``meta["mean_shift"]``.
    """
    if n < 2:
        raise ValueError("need at least two atoms")
    dist = density.frozen()
    if method == "quantile":
        atoms = dist.ppf((np.arange(1, n + 1) - 0.5) / n)
        weights = np.full(n, 1.0 / n)
    elif method == "midpoint":
        a, b = density.support
        edges = np.linspace(a, b, n + 1)
        atoms = 0.5 * (edges[:-1] + edges[1:])
        weights = np.diff(dist.cdf(edges))
        weights = weights / math.fsum(weights)
    else:
        raise ValueError(f"unknown discretisation method {method!r}")
    target = density.mean()
    shift = target - math.fsum(atoms * weights)
    if abs(shift) <= 1e-15 * (1.0 + abs(target)):
        shift = 0.0
    meta = {"absolutely_continuous_origin": True, "mean_shift": shift,
            "density": density.to_json(), "method": method}
    return DiscreteMeasure(atoms + shift, weights, meta)


def mean_match(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    """Shift ``nu`` so its mean equals the mean of ``mu``."""
    delta = mu.mean() - nu.mean()
    meta = dict(nu.meta)
    meta["mean_match_shift"] = delta
    return DiscreteMeasure(nu.atoms + delta, nu.weights, meta)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def random_convex_pair(seed: int, m: int, n: int, spread: float = 0.5,
                       multi_point: float = 0.3, width: float = 10.0):
    """Random ``(mu, nu)`` in convex order by construction.

    ``nu`` lives on a random ``n``-point grid and is the image of ``mu``
    under a mean-preserving kernel: each atom of ``mu`` is split between a
    pair of grid points around it, widened by up to ``spread * n`` grid
    steps on either side, and with probability ``multi_point`` mixed with a
    second such pair. ``spread = 0`` snaps ``mu`` to the grid and returns
    ``nu == mu``. The generator is PCG64 seeded with ``seed``.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = _rng(seed)
    gaps = rng.uniform(0.5, 1.5, n - 1)
    grid = np.concatenate(([0.0], np.cumsum(gaps)))
    grid = width * (grid / grid[-1] - 0.5) if n > 1 else np.zeros(1)
    w = rng.dirichlet(np.ones(m))
    nu_w = np.zeros(n)

    if spread <= 0 or n == 1:
        idx = rng.integers(0, n, m)
        np.add.at(nu_w, idx, w)
        mu = DiscreteMeasure(grid[idx], w)
        return mu, DiscreteMeasure(grid, nu_w)

    xs = rng.uniform(grid[0], grid[-1], m)
    reach = int(np.floor(spread * n))

    def two_point(x):
        a = int(np.clip(np.searchsorted(grid, x, side="right") - 1, 0, n - 2))
        lo = max(a - int(rng.integers(0, reach + 1)), 0)
        hi = min(a + 1 + int(rng.integers(0, reach + 1)), n - 1)
        p = (grid[hi] - x) / (grid[hi] - grid[lo])
        return lo, hi, p

    for x, wi in zip(xs, w):
        lo, hi, p = two_point(x)
        if rng.random() < multi_point:
            lo2, hi2, p2 = two_point(x)
            u = rng.uniform(0.2, 0.8)
            nu_w[[lo, hi]] += wi * u * np.array([p, 1 - p])
            nu_w[[lo2, hi2]] += wi * (1 - u) * np.array([p2, 1 - p2])
        else:
            nu_w[[lo, hi]] += wi * np.array([p, 1 - p])
    return DiscreteMeasure(xs, w), DiscreteMeasure(grid, nu_w)


@dataclass
class StudyRow:
    n: int
    p_bar: float
    p_c: float
    p_c_is_exact: bool
    gap: float
    overlap_mass: float
    strict_convexity: Optional[bool]
    diagonal_separated: Optional[bool]
    runtime_ms: float
    pure: Optional[bool] = None
    error: Optional[str] = None

    def cells(self, timing: bool = True) -> List[str]:
        def b(v):
            return "" if v is None else ("true" if v else "false")
        return [str(self.n), fmt_float(self.p_bar), fmt_float(self.p_c), b(self.p_c_is_exact),
                fmt_float(self.gap), fmt_float(self.overlap_mass), b(self.strict_convexity),
                b(self.diagonal_separated), fmt_float(self.runtime_ms) if timing else "0"]


def refinement_study(mu_density: Density, nu_density: Density, cost: CostSpec,
                     sizes: Sequence[int], mu_atoms: Optional[int] = None,
                     method: str = "quantile",
                     options: Optional[PriceOptions] = None) -> List[StudyRow]:
    """Price the discretised problem at each size ``n`` of the ``nu`` grid.

    ``mu`` uses ``mu_atoms`` atoms when given, otherwise ``n``. Rows that
    fail (for example a pair that is not in convex order) are kept with
    NaN values and the error text.
    """
    opts = options or PriceOptions()
    rows = []
    for n in sorted(sizes):
        t0 = time.perf_counter()
        mu = discretize_density(mu_density, mu_atoms or n, method)
        nu = mean_match(mu, discretize_density(nu_density, n, method))
        try:
            rep = price_american(mu, nu, cost, opts)
        except AmerMotError as exc:
            hyp = check_theorem_hypotheses(cost, mu, nu)
            nan = float("nan")
            rows.append(StudyRow(n, nan, nan, False, nan, nan, hyp.strict_convexity,
                                 hyp.diagonal_separated, 1e3 * (time.perf_counter() - t0),
                                 None, str(exc)))
            continue
        rows.append(StudyRow(n, rep.p_bar, rep.p_c, rep.p_c_is_exact, rep.gap, rep.overlap_mass,
                             rep.hypotheses.strict_convexity, rep.hypotheses.diagonal_separated,
                             1e3 * (time.perf_counter() - t0), rep.pure))
    return rows


def study_csv(rows: Sequence[StudyRow], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STUDY_HEADER)
    for r in rows:
        w.writerow(r.cells(timing))
    return buf.getvalue()

