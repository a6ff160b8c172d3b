"""Payoff specifications ``(c_1, ..., c_L)`` and their grid evaluation.

A cost is a tuple of *terms*, each a vectorised function of ``(x, y)``.
The ``american`` kind has exactly two terms, the first independent of
``y`` (payout on exercise at the first date). Terms are built from a small
set of parametric families or from tables tied to a pair of atom grids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .exceptions import CostError
from .measures import MERGE_TOL, DiscreteMeasure

CONVEXITY_RTOL = 1e-10


def _arg(on, x, y):
    if on == "x":
        return x
    if on == "y":
        return y
    if on == "spread":
        return y - x
    raise CostError(f"unknown argument selector {on!r}")


class Term:
    depends_on_y = True

    def __call__(self, x, y):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Term):
    a: float
    depends_on_y = False

    def __call__(self, x, y):
        return np.full(np.broadcast(x, y).shape, float(self.a))

    def to_json(self):
        return {"type": "constant", "a": self.a}


@dataclass(frozen=True)
class Put(Term):
    strike: float
    on: str = "y"

    @property
    def depends_on_y(self):
        return self.on != "x"

    def __call__(self, x, y):
        v = _arg(self.on, np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.maximum(self.strike - v, 0.0), np.broadcast(x, y).shape)

    def to_json(self):
        return {"type": "put", "strike": self.strike, "on": self.on}


@dataclass(frozen=True)
class Call(Term):
    strike: float
    on: str = "y"

    @property
    def depends_on_y(self):
        return self.on != "x"

    def __call__(self, x, y):
        v = _arg(self.on, np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.maximum(v - self.strike, 0.0), np.broadcast(x, y).shape)

    def to_json(self):
        return {"type": "call", "strike": self.strike, "on": self.on}


@dataclass(frozen=True)
class Power(Term):
    p: float
    on: str = "y"
    scale: float = 1.0

    @property
    def depends_on_y(self):
        return self.on != "x"

    def __call__(self, x, y):
        v = _arg(self.on, np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(self.scale * v ** self.p, np.broadcast(x, y).shape)

    def to_json(self):
        return {"type": "power", "p": self.p, "on": self.on, "scale": self.scale}


@dataclass(frozen=True)
class Sum(Term):
    terms: Tuple[Term, ...]

    @property
    def depends_on_y(self):
        return any(t.depends_on_y for t in self.terms)

    def __call__(self, x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for t in self.terms:
            out = out + t(x, y)
        return out

    def to_json(self):
        return {"type": "sum", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Diagonal(Term):
    """``x -> of(x, x) + offset``."""

    of: Term
    offset: float = 0.0
    depends_on_y = False

    def __call__(self, x, y):
        x = np.asarray(x, float)
        return np.broadcast_to(self.of(x, x) + self.offset, np.broadcast(x, y).shape)

    def to_json(self):
        return {"type": "diagonal", "of": self.of.to_json(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Table(Term):
    """Tabulated term: a vector over x-atoms or a matrix over (x, y) atoms.

    Lookups off the bound grids raise :class:`CostError`; nothing is
    interpolated.
    """

    values: np.ndarray
    x_atoms: Optional[np.ndarray] = None
    y_atoms: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise CostError("table values must be a vector or a matrix")
        if not np.all(np.isfinite(v)):
            raise CostError("table values must be finite")
        object.__setattr__(self, "values", v)
        for name in ("x_atoms", "y_atoms"):
            a = getattr(self, name)
            if a is not None:
                object.__setattr__(self, name, np.asarray(a, dtype=float))

    @property
    def depends_on_y(self):
        return self.values.ndim == 2

    def bound(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "Table":
        m = len(mu)
        if self.values.shape[0] != m or (self.values.ndim == 2 and self.values.shape[1] != len(nu)):
            raise CostError(
                f"table of shape {self.values.shape} does not match grid {m}x{len(nu)}")
        return Table(self.values, mu.atoms, nu.atoms)

    @staticmethod
    def _index(grid, pts, axis):
        if grid is None:
            raise CostError("table is not bound to an atom grid")
        pts = np.asarray(pts, dtype=float)
        idx = np.clip(np.searchsorted(grid, pts - MERGE_TOL), 0, len(grid) - 1)
        if np.any(np.abs(grid[idx] - pts) > MERGE_TOL):
            raise CostError(f"tabulated cost queried off-grid in {axis}")
        return idx

    def __call__(self, x, y):
        shape = np.broadcast(x, y).shape
        i = self._index(self.x_atoms, x, "x")
        if self.values.ndim == 1:
            return np.broadcast_to(self.values[i], shape)
        j = self._index(self.y_atoms, y, "y")
        return np.broadcast_to(self.values[i, j], shape)

    def to_json(self):
        return {"type": "table", "values": self.values.tolist()}


_TERM_TYPES = {"constant", "put", "call", "power", "sum", "diagonal"}


def term_from_json(obj) -> Term:
    if isinstance(obj, (int, float)):
        return Constant(float(obj))
    try:
        t = obj["type"]
        if t == "constant":
            return Constant(float(obj["a"]))
        if t == "put":
            return Put(float(obj["strike"]), obj.get("on", "y"))
        if t == "call":
            return Call(float(obj["strike"]), obj.get("on", "y"))
        if t == "power":
            return Power(float(obj["p"]), obj.get("on", "y"), float(obj.get("scale", 1.0)))
        if t == "sum":
            return Sum(tuple(term_from_json(o) for o in obj["terms"]))
        if t == "diagonal":
            return Diagonal(term_from_json(obj["of"]), float(obj.get("offset", 0.0)))
    except (KeyError, TypeError) as exc:
        raise CostError(f"malformed term {obj!r}: {exc}") from None
    raise CostError(f"unknown term type {obj.get('type')!r}; expected one of {sorted(_TERM_TYPES)}")


@dataclass(frozen=True)
class CostSpec:
    """Vector payoff ``(c_1, ..., c_L)``.

    ``kind == "american"`` means ``L == 2`` and ``c_1`` does not depend on
    ``y``. ``source`` keeps the JSON object the cost was built from so it
    can be written back unchanged.
    """

    kind: str
    terms: Tuple[Term, ...]
    source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.terms:
            raise CostError("a cost needs at least one component")
        if self.kind not in ("american", "generic"):
            raise CostError(f"unknown cost kind {self.kind!r}")
        if self.kind == "american":
            if len(self.terms) != 2:
                raise CostError("american costs have exactly two components")
            if self.terms[0].depends_on_y:
                raise CostError("american c1 must not depend on y")

    @property
    def L(self) -> int:
        return len(self.terms)

    @property
    def is_american(self) -> bool:
        return self.kind == "american"

    def evaluate(self, l: int, x, y):
        """``c_l(x, y)`` with 1-based ``l``."""
        if not 1 <= l <= self.L:
            raise CostError(f"component index {l} out of range 1..{self.L}")
        out = self.terms[l - 1](x, y)
        return float(out) if np.ndim(out) == 0 else np.asarray(out)

    def grid(self, l: int, mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
        """Matrix ``c_l(x_i, y_j)`` over the atoms of ``mu`` x ``nu``."""
        if not 1 <= l <= self.L:
            raise CostError(f"component index {l} out of range 1..{self.L}")
        term = self.terms[l - 1]
        if isinstance(term, Table) and term.x_atoms is None:
            term = term.bound(mu, nu)
        vals = np.array(term(mu.atoms[:, None], nu.atoms[None, :]), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise CostError(f"component {l} is not finite on the grid")
        return vals

    def grids(self, mu, nu) -> List[np.ndarray]:
        return [self.grid(l, mu, nu) for l in range(1, self.L + 1)]

    def bind(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "CostSpec":
        """Attach tabulated terms to the atom grids of ``mu`` and ``nu``."""
        terms = tuple(t.bound(mu, nu) if isinstance(t, Table) else t for t in self.terms)
        return CostSpec(self.kind, terms, self.source)

    def tabulate(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "CostSpec":
        terms = []
        for l, t in enumerate(self.terms, start=1):
            g = self.grid(l, mu, nu)
            vals = g[:, 0] if (not t.depends_on_y and len(nu)) else g
            terms.append(Table(vals, mu.atoms, nu.atoms))
        return CostSpec(self.kind, tuple(terms))

    def to_json(self) -> dict:
        if self.source:
            return dict(self.source)
        if self.is_american:
            return {"type": "american", "c1": self.terms[0].to_json(), "c2": self.terms[1].to_json()}
        return {"type": "generic", "components": [t.to_json() for t in self.terms]}


def american(c1: Term, c2: Term, source: Optional[dict] = None) -> CostSpec:
    return CostSpec("american", (c1, c2), source or {})


def american_put(K1: float, K2: float) -> CostSpec:
    if not K1 > K2:
        raise CostError("american_put requires K1 > K2")
    return american(Put(K1, "x"), Put(K2, "y"),
                    {"type": "american_put", "K1": K1, "K2": K2})


def put_plus_quadratic(K1: float, K2: float, eps: float) -> CostSpec:
    if not eps > 0:
        raise CostError("put_plus_quadratic requires eps > 0")
    return american(Put(K1, "x"), Sum((Put(K2, "y"), Power(2.0, "y", eps))),
                    {"type": "put_plus_quadratic", "K1": K1, "K2": K2, "eps": eps})


def quadratic_spread() -> CostSpec:
    return CostSpec("generic", (Power(2.0, "spread"),), {"type": "quadratic_spread"})


def constant(a: float, L: int = 2) -> CostSpec:
    terms = tuple(Constant(a) for _ in range(L))
    kind = "american" if L == 2 else "generic"
    src = {"type": "constant", "a": a} if L == 2 else {"type": "constant", "a": a, "L": L}
    return CostSpec(kind, terms, src)


def table(c1, c2, x_atoms=None, y_atoms=None) -> CostSpec:
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if c1.ndim != 1 or c2.ndim != 2 or c2.shape[0] != c1.size:
        raise CostError("table costs need c1 of length m and c2 of shape m x n")
    return american(Table(c1, x_atoms, y_atoms), Table(c2, x_atoms, y_atoms),
                    {"type": "table", "c1": c1.tolist(), "c2": c2.tolist()})


def cost_from_json(obj) -> CostSpec:
    if not isinstance(obj, dict) or "type" not in obj:
        raise CostError("cost must be a JSON object with a 'type' field")
    t = obj["type"]
    try:
        if t == "american_put":
            spec = american_put(float(obj["K1"]), float(obj["K2"]))
        elif t == "put_plus_quadratic":
            spec = put_plus_quadratic(float(obj["K1"]), float(obj["K2"]), float(obj["eps"]))
        elif t == "quadratic_spread":
            spec = quadratic_spread()
        elif t == "constant":
            spec = constant(float(obj["a"]), int(obj.get("L", 2)))
        elif t == "table":
            spec = table(obj["c1"], obj["c2"], obj.get("x"), obj.get("y"))
        elif t == "american":
            spec = american(term_from_json(obj["c1"]), term_from_json(obj["c2"]))
        elif t == "generic":
            spec = CostSpec("generic", tuple(term_from_json(o) for o in obj["components"]))
        else:
            raise CostError(f"unknown cost type {t!r}")
    except KeyError as exc:
        raise CostError(f"cost of type {t!r} is missing field {exc.args[0]!r}") from None
    return CostSpec(spec.kind, spec.terms, dict(obj))


def read_cost_json(path) -> CostSpec:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CostError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return cost_from_json(obj)


@dataclass
class HypothesisReport:
    strict_convexity: bool
    diagonal_separated: Optional[bool]
    nu_absolutely_continuous: bool
    diagonal_sign: List[int]
    min_second_difference: Optional[float]

    def to_json(self):
        return {
            "strict_convexity": self.strict_convexity,
            "diagonal_separated": self.diagonal_separated,
            "nu_absolutely_continuous": self.nu_absolutely_continuous,
            "diagonal_sign": list(self.diagonal_sign),
            "min_second_difference": self.min_second_difference,
        }


def second_differences(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Scaled second differences along the last axis.

    On an even grid this is ``c(y1) - 2 c(y2) + c(y3)``; on uneven grids
    it is the same expression after replacing the midpoint by the linear
    interpolation weights, so its sign decides strict convexity.
    """
    y1, y2, y3 = y[:-2], y[1:-1], y[2:]
    c1, c2, c3 = values[..., :-2], values[..., 1:-1], values[..., 2:]
    return 2.0 * ((y3 - y2) * c1 + (y2 - y1) * c3 - (y3 - y1) * c2) / (y3 - y1)


def check_theorem_hypotheses(cost: CostSpec, mu: DiscreteMeasure,
                             nu: DiscreteMeasure) -> HypothesisReport:
    if not cost.is_american:
        raise CostError("hypothesis checks are defined for american costs only")
    c2 = cost.grid(2, mu, nu)
    scale = float(np.max(np.abs(c2))) if c2.size else 0.0
    if len(nu) >= 3:
        d2 = second_differences(c2, nu.atoms)
        min_d2 = float(d2.min())
        strict = bool(min_d2 > CONVEXITY_RTOL * scale)
    else:
        min_d2, strict = None, True

    c1 = cost.grid(1, mu, nu)[:, 0] if len(nu) else cost.evaluate(1, mu.atoms, mu.atoms)
    try:
        diag = np.asarray(cost.evaluate(2, mu.atoms, mu.atoms), dtype=float)
    except CostError:
        return HypothesisReport(strict, None, bool(nu.meta.get("absolutely_continuous_origin")),
                                [], min_d2)
    dscale = max(float(np.max(np.abs(c1), initial=0.0)), float(np.max(np.abs(diag), initial=0.0)), 1.0)
    delta = c1 - diag
    sign = np.where(np.abs(delta) > CONVEXITY_RTOL * dscale, np.sign(delta), 0).astype(int)
    return HypothesisReport(
        strict_convexity=strict,
        diagonal_separated=bool(np.all(sign != 0)),
        nu_absolutely_continuous=bool(nu.meta.get("absolutely_continuous_origin")),
        diagonal_sign=sign.tolist(),
        min_second_difference=min_d2,
    )
