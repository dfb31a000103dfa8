"""Conformal IFS geometry and certified measure bounds of balls and annuli.

Geometric predicates are decided on cylinder hulls, so every reported
``MeasureInterval`` brackets the projected measure with one-sided errors that
shrink with the cover generation.  Similarity systems with rational data are
evaluated in exact ``Fraction`` arithmetic; everything else uses floats.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Optional, Sequence

import numpy as np

from .symbolic import CylinderMeasure, SymbolicSpace, Word, admissible_words, sample_sequences
from .thermo import Potential, pressure

DEFAULT_NODE_BUDGET = 10**6


class PrefixTooShortError(ValueError):
    def __init__(self, diameter):
        super().__init__(f"cylinder diameter {float(diameter):.3e} exceeds the tolerance")
        self.diameter = diameter


class NoSignChangeError(ValueError):
    pass


def _exact(v) -> bool:
    return isinstance(v, Rational)


def _as_number(v):
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    return float(v)


@dataclass(frozen=True, eq=False)
class ContractionMap:
    """One generator of an IFS.

    ``kind == "similarity"``: ``x -> ratio * orientation x + translation``
    (orientation is ``+-1`` in 1D or an orthogonal matrix).
    ``kind == "smooth"``: a monotone C^1 map of an interval with user
    supplied ``deriv_bounds = (inf |phi'|, sup |phi'|)`` on its domain.
    """

    kind: str
    ratio: object = None
    translation: object = 0
    orientation: object = 1
    func: Optional[Callable] = None
    deriv: Optional[Callable] = None
    deriv_bounds: Optional[tuple] = None
    increasing: bool = True
    domain: Optional[tuple] = None
    distortion: Optional[tuple] = None
    name: str = ""

    @classmethod
    def similarity(cls, ratio, translation=0, orientation=1, domain=None, name=""):
        ratio = _as_number(ratio)
        if not 0 < ratio < 1:
            raise ValueError("similarity ratio must lie in (0, 1)")
        if np.ndim(translation) == 0:
            translation = _as_number(translation)
            if orientation not in (1, -1):
                raise ValueError("1D orientation must be +1 or -1")
        else:
            translation = np.asarray(translation, dtype=float)
            orientation = np.asarray(orientation if np.ndim(orientation) else np.eye(len(translation)), dtype=float)
            if not np.allclose(orientation @ orientation.T, np.eye(len(translation)), atol=1e-12):
                raise ValueError("orientation must be orthogonal")
        return cls("similarity", ratio, translation, orientation, domain=domain, name=name,
                   deriv_bounds=(ratio, ratio), increasing=(np.ndim(orientation) == 0 and orientation == 1))

    @classmethod
    def smooth(cls, func, deriv, deriv_bounds, increasing=True, domain=None, distortion=None, name=""):
        lo, hi = (float(b) for b in deriv_bounds)
        if not 0 < lo <= hi:
            raise ValueError("derivative bounds must satisfy 0 < inf <= sup")
        return cls("smooth", None, 0, 1, func, deriv, (lo, hi), bool(increasing), domain, distortion, name)

    @property
    def sup_derivative(self):
        return self.deriv_bounds[1]

    @property
    def inf_derivative(self):
        return self.deriv_bounds[0]

    def __call__(self, x):
        if self.kind == "similarity":
            if np.ndim(self.translation) == 0:
                return self.ratio * self.orientation * x + self.translation
            return self.ratio * (self.orientation @ np.asarray(x, dtype=float)) + self.translation
        return self.func(x)

    def derivative(self, x):
        if self.kind == "similarity":
            return self.ratio
        return abs(self.deriv(x))


@dataclass(frozen=True)
class CylinderGeometry:
    word: Word
    diameter: object
    relative_diameter: object
    hull: tuple
    derivative_range: tuple


@dataclass(frozen=True)
class MeasureInterval:
    """Certified bracket ``[lower, upper]`` on a projected measure."""

    lower: float
    upper: float
    generation: int
    resolved: bool
    nodes: int = 0
    history: tuple = field(default=(), repr=False, compare=False)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class _Node:
    word: Word
    lo: object
    hi: object
    diameter: object
    comp: object


class ConformalIFS:
    """Contractions of a seed interval or box, with optional Markov constraints.

    In 1D each map may carry a ``domain`` (its interval of definition);
    this is how Markov-partition systems collapse to a single ambient seed.
    ``parabolic`` maps indices to petal exponents.
    """

    def __init__(self, seed, maps: Sequence[ContractionMap], space: Optional[SymbolicSpace] = None,
                 parabolic: Optional[dict] = None, name: str = ""):
        self.maps = tuple(maps)
        if not self.maps:
            raise ValueError("an IFS needs at least one map")
        self.space = space or SymbolicSpace.full_shift(len(self.maps))
        if self.space.alphabet_size != len(self.maps):
            raise ValueError("incidence matrix does not match the number of maps")
        self.parabolic = dict(parabolic or {})
        self.name = name
        if np.ndim(seed) == 1 and len(seed) == 2 and np.ndim(seed[0]) == 0:
            self.dim = 1
            self.seed = (_as_number(seed[0]), _as_number(seed[1]))
            self.diam = self.seed[1] - self.seed[0]
        else:
            box = np.asarray(seed, dtype=float)
            self.dim = box.shape[0]
            self.seed = box
            self.diam = float(np.linalg.norm(box[:, 1] - box[:, 0]))
        if self.dim > 1 and any(m.kind != "similarity" for m in self.maps):
            raise ValueError("nonlinear maps are supported in dimension 1 only")
        self.similarity = all(m.kind == "similarity" for m in self.maps)
        self.exact = self.dim == 1 and self.similarity and _exact(self.seed[0]) and _exact(self.seed[1]) and all(
            _exact(m.ratio) and _exact(m.translation) for m in self.maps
        )
        self.lam = max(m.sup_derivative for m in self.maps)

    def __repr__(self):
        return f"ConformalIFS({self.name or len(self.maps)} maps, dim={self.dim})"

    # -- cylinders -------------------------------------------------------

    def _domain(self, e):
        d = self.maps[e].domain
        return self.seed if d is None else (_as_number(d[0]), _as_number(d[1]))

    def root(self) -> _Node:
        if self.dim == 1:
            comp = (1, 0) if (self.similarity) else ()
            if self.exact:
                comp = (Fraction(1), Fraction(0))
            return _Node((), self.seed[0], self.seed[1], self.diam, comp)
        return _Node((), self.seed[:, 0].copy(), self.seed[:, 1].copy(), self.diam,
                     (1.0, np.eye(self.dim), np.zeros(self.dim)))

    def apply_word(self, word: Word, x):
        for e in reversed(word):
            x = self.maps[e](x)
        return x

    def child(self, node: _Node, e: int) -> _Node:
        word = node.word + (e,)
        m = self.maps[e]
        if self.dim == 1 and self.similarity:
            S, T = node.comp
            s = m.ratio * m.orientation
            S2, T2 = S * s, S * m.translation + T
            a, b = self._domain(e)
            p, q = S2 * a + T2, S2 * b + T2
            lo, hi = (p, q) if p <= q else (q, p)
            return _Node(word, lo, hi, hi - lo, (S2, T2))
        if self.dim == 1:
            a, b = self._domain(e)
            p, q = self.apply_word(word, a), self.apply_word(word, b)
            lo, hi = (p, q) if p <= q else (q, p)
            return _Node(word, lo, hi, hi - lo, ())
        r, O, t = node.comp
        r2 = r * m.ratio
        O2 = O @ m.orientation
        t2 = r * (O @ m.translation) + t
        corners = np.array(list(itertools.product(*self.seed)))
        img = r2 * corners @ O2.T + t2
        return _Node(word, img.min(axis=0), img.max(axis=0), r2 * self.diam, (r2, O2, t2))

    def node(self, word: Sequence[int]) -> _Node:
        n = self.root()
        for e in word:
            n = self.child(n, e)
        return n

    def derivative_range(self, word: Sequence[int]) -> tuple:
        lo = hi = Fraction(1) if self.exact else 1.0
        for e in word:
            lo = lo * self.maps[e].inf_derivative
            hi = hi * self.maps[e].sup_derivative
        return lo, hi

    def followers(self, word: Word) -> tuple:
        if not word:
            return tuple(range(self.space.alphabet_size))
        return self.space.followers(word[-1])


# -- cylinder-level operations ------------------------------------------------


def cylinder_geometry(ifs: ConformalIFS, word: Sequence[int]) -> CylinderGeometry:
    word = ifs.space.check(word)
    n = ifs.node(word)
    if ifs.dim == 1:
        hull = (n.lo, n.hi)
    else:
        hull = tuple(zip(n.lo.tolist(), n.hi.tolist()))
    return CylinderGeometry(word, n.diameter, n.diameter / ifs.diam, hull, ifs.derivative_range(word))


@dataclass(frozen=True)
class CodedPoint:
    point: object
    error: object


def code_point(ifs: ConformalIFS, word: Sequence[int], tol: float) -> CodedPoint:
    """Center of the hull of ``[word]``; within ``D(word)/2`` of pi of any extension."""
    n = ifs.node(tuple(word))
    if n.diameter / 2 > tol:
        raise PrefixTooShortError(n.diameter)
    if ifs.dim == 1:
        return CodedPoint((n.lo + n.hi) / 2, n.diameter / 2)
    return CodedPoint((n.lo + n.hi) / 2, n.diameter / 2)


def sample_points(ifs: ConformalIFS, measure: CylinderMeasure, n: int, rng: np.random.Generator,
                  depth: int = 40) -> list:
    """Centers of random depth-``depth`` cylinders drawn from ``measure``."""
    seqs = sample_sequences(measure, n, depth, rng)
    out = []
    for row in seqs:
        node = ifs.node(tuple(int(s) for s in row))
        out.append((node.lo + node.hi) / 2)
    return out


def distortion_constant(ifs: ConformalIFS, max_len: int = 10, budget: int = 200_000) -> float:
    """Empirical bounded-distortion constant Q over admissible word pairs."""
    words = []
    for k in range(1, max_len + 1):
        block = admissible_words(ifs.space, k)
        if len(words) + len(block) > int(math.isqrt(budget)) + 1:
            break
        words.extend(block)
    rel = {w: ifs.node(w).diameter / ifs.diam for w in words}
    worst = 1.0
    for w in words:
        for t in words:
            if not ifs.space.allowed(w[-1], t[0]):
                continue
            joint = ifs.node(w + t).diameter / ifs.diam
            q = joint / (rel[w] * rel[t])
            worst = max(worst, float(q), float(1 / q))
    return worst


# -- regions and certified bounds ---------------------------------------------


class Shell:
    """The set ``{y : inner <= |y - x| < outer}`` (an open ball when inner is 0)."""

    def __init__(self, center, inner, outer):
        self.x = center
        self.inner = inner
        self.outer = outer

    def classify(self, lo, hi) -> int:
        """1 if the box ``[lo, hi]`` lies inside, -1 if disjoint, 0 otherwise."""
        x = self.x
        if np.ndim(lo) == 0:
            dmin = max(0, lo - x, x - hi)
            dmax = max(x - lo, hi - x)
        else:
            dmin = float(np.linalg.norm(np.maximum(0.0, np.maximum(lo - x, x - hi))))
            dmax = float(np.linalg.norm(np.maximum(np.abs(x - lo), np.abs(hi - x))))
        if dmin >= self.inner and dmax < self.outer:
            return 1
        if dmax < self.inner or dmin >= self.outer:
            return -1
        return 0


class IntervalUnion:
    """Finite union of 1D intervals ``(a, b, a_closed, b_closed)``."""

    def __init__(self, pieces):
        self.pieces = [p for p in pieces if p[0] < p[1] or (p[0] == p[1] and p[2] and p[3])]

    def classify(self, lo, hi) -> int:
        meets = False
        for a, b, ac, bc in self.pieces:
            left_in = lo > a or (lo == a and ac)
            right_in = hi < b or (hi == b and bc)
            if left_in and right_in:
                return 1
            if (hi > a or (hi == a and ac)) and (lo < b or (lo == b and bc)):
                meets = True
        return 0 if meets else -1

    def intersect(self, a, b, ac=True, bc=True) -> "IntervalUnion":
        out = []
        for p, q, pc, qc in self.pieces:
            if a > p or (a == p and not ac):
                lo, loc = a, ac
            else:
                lo, loc = p, pc if a != p else (pc and ac)
            if b < q or (b == q and not bc):
                hi, hic = b, bc
            else:
                hi, hic = q, qc if b != q else (qc and bc)
            out.append((lo, hi, loc, hic))
        return IntervalUnion(out)


def _threshold(n: int, exact: bool):
    return Fraction(1, 2**n) if exact else 2.0 ** (-n)


def region_measure_bounds(ifs: ConformalIFS, measure: CylinderMeasure, region, generation_cap: int = 40,
                          node_budget: int = DEFAULT_NODE_BUDGET, rel_tol: float = 0.0) -> MeasureInterval:
    """Bracket ``measure o pi^-1 (region)`` with the generation-n cylinder covers.

    Only cylinders whose hull straddles the region boundary are refined;
    hulls inside the region contribute to both ends, hulls outside to none.
    Generations are completed in order; if the node budget runs out, the
    last completed generation is returned unresolved.
    """
    root = ifs.root()
    c = region.classify(root.lo, root.hi)
    if c == 1:
        return MeasureInterval(1.0, 1.0, 0, True, 1)
    if c == -1:
        return MeasureInterval(0.0, 0.0, 0, True, 1)
    frontier = [(root, 1.0)]
    lower, upper = 0.0, 1.0
    done = -1
    nodes = 1
    history = []
    over_budget = False
    for n in range(generation_cap + 1):
        thr = _threshold(n, ifs.exact)
        stack = list(reversed(frontier))
        kept = []
        inside = []
        while stack:
            node, m = stack.pop()
            if node.diameter <= thr:
                kept.append((node, m))
                continue
            for e in ifs.followers(node.word):
                cm = measure.child_mass(node.word, m, e)
                if cm == 0.0:
                    continue
                child = ifs.child(node, e)
                nodes += 1
                k = region.classify(child.lo, child.hi)
                if k == 1:
                    inside.append(cm)
                elif k == 0:
                    stack.append((child, cm))
            if nodes > node_budget:
                over_budget = True
                break
        if over_budget:
            break
        lower = math.fsum([lower] + inside)
        frontier = kept
        upper = max(lower, min(upper, math.fsum([lower] + [m for _, m in frontier])))
        done = n
        history.append((n, lower, upper))
        if not frontier or upper - lower <= rel_tol * upper:
            break
    resolved = lower > 0 or upper == 0
    return MeasureInterval(lower, upper, done, resolved, nodes, tuple(history))


def _to_ifs_number(ifs: ConformalIFS, v):
    if ifs.exact:
        return Fraction(v) if not isinstance(v, Fraction) else v
    if ifs.dim > 1:
        return np.asarray(v, dtype=float)
    return float(v)


def _power(ifs: ConformalIFS, r, kappa):
    if ifs.exact and float(kappa).is_integer():
        return r ** int(kappa)
    value = float(r) ** float(kappa)
    return Fraction(value) if ifs.exact else value


def ball_measure_bounds(ifs: ConformalIFS, measure: CylinderMeasure, x, r, generation_cap: int = 40,
                        node_budget: int = DEFAULT_NODE_BUDGET, rel_tol: float = 0.0) -> MeasureInterval:
    """Certified bounds on the projected measure of the open ball ``B(x, r)``."""
    x = _to_ifs_number(ifs, x)
    r = _to_ifs_number(ifs, r) if ifs.exact else float(r)
    if r <= 0:
        raise ValueError("radius must be positive")
    return region_measure_bounds(ifs, measure, Shell(x, 0, r), generation_cap, node_budget, rel_tol)


def annulus_measure_bounds(ifs: ConformalIFS, measure: CylinderMeasure, x, r, kappa: float,
                           generation_cap: int = 40, node_budget: int = DEFAULT_NODE_BUDGET,
                           rel_tol: float = 0.0) -> MeasureInterval:
    """Certified bounds for ``B(x, r + r^kappa) minus B(x, r)``."""
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    x = _to_ifs_number(ifs, x)
    r = _to_ifs_number(ifs, r) if ifs.exact else float(r)
    return region_measure_bounds(ifs, measure, Shell(x, r, r + _power(ifs, r, kappa)), generation_cap,
                                 node_budget, rel_tol)


# -- separation ---------------------------------------------------------------


@dataclass(frozen=True)
class OscReport:
    holds: bool
    strong: bool
    decidable: bool
    witness: object


def check_osc(ifs: ConformalIFS, strong_depth: int = 8) -> OscReport:
    """Open set condition on first-level hulls, plus the strong form.

    Hulls are exact images for 1D monotone maps and for similarities whose
    orientation preserves axes; otherwise an overlap of hulls is reported
    as undecidable rather than as a failure.
    """
    nodes = [ifs.child(ifs.root(), e) for e in range(len(ifs.maps))]
    exact_hulls = ifs.dim == 1 or all(
        np.allclose(np.abs(m.orientation), np.round(np.abs(m.orientation))) for m in ifs.maps
    )
    for (i, a), (j, b) in itertools.combinations(enumerate(nodes), 2):
        lo = np.maximum(a.lo, b.lo) if ifs.dim > 1 else max(a.lo, b.lo)
        hi = np.minimum(a.hi, b.hi) if ifs.dim > 1 else min(a.hi, b.hi)
        if np.all(np.asarray(lo) < np.asarray(hi)):
            if not exact_hulls:
                return OscReport(False, False, False, (i, j))
            witness = (lo, hi) if ifs.dim == 1 else (lo.tolist(), hi.tolist())
            return OscReport(False, False, True, {"pair": (i, j), "overlap": witness})
    # strong form: some cylinder hull sits inside the open seed
    if ifs.dim == 1:
        inner = IntervalUnion([(ifs.seed[0], ifs.seed[1], False, False)])
    else:
        inner = None
    level = [ifs.root()]
    for _ in range(strong_depth):
        nxt = []
        for node in level:
            for e in ifs.followers(node.word):
                ch = ifs.child(node, e)
                if inner is not None:
                    ins = inner.classify(ch.lo, ch.hi) == 1
                else:
                    ins = bool(np.all(ch.lo > ifs.seed[:, 0]) and np.all(ch.hi < ifs.seed[:, 1]))
                if ins:
                    return OscReport(True, True, True, ch.word)
                nxt.append(ch)
        level = nxt[:4096]
    return OscReport(True, False, True, None)


# -- Bowen parameter -----------------------------------------------------------


def geometric_potential(ifs: ConformalIFS, depth: int = 1) -> Potential:
    """Locally constant approximation of ``log |phi'_{w_1}(pi(sigma w))|``.

    Similarities give ``log ratio`` exactly at depth 1.  For smooth maps
    the derivative is evaluated at the center of the hull of ``w_2..w_k``.
    """
    if ifs.similarity:
        return Potential.from_symbols([math.log(float(m.ratio)) for m in ifs.maps], ifs.space)

    def value(w):
        tail = ifs.node(w[1:]) if len(w) > 1 else None
        if tail is None:
            a, b = ifs._domain(w[0])
            y = (float(a) + float(b)) / 2
        else:
            a, b = ifs._domain(w[-1])
            lo = float(tail.lo)
            hi = float(tail.hi)
            y = (lo + hi) / 2
        return math.log(ifs.maps[w[0]].derivative(y))

    return Potential.from_function(ifs.space, depth, value)


def bisect_root(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12, maxiter: int = 200) -> float:
    """Root of a decreasing function with ``fn(lo) > 0 > fn(hi)``."""
    for _ in range(maxiter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bowen_parameter(ifs: ConformalIFS, depth: int = 1, tol: float = 1e-12) -> float:
    """Zero of ``t -> P(t zeta)`` by bisection."""
    zeta = geometric_potential(ifs, depth)

    def P(t):
        return pressure(ifs.space, zeta.scaled(t))

    p0 = P(0.0)
    if abs(p0) <= 1e-14:
        return 0.0
    if p0 < 0:
        raise NoSignChangeError("P(0) < 0: no zero of the pressure function")
    hi = float(ifs.dim + 1)
    while P(hi) > 0:
        hi *= 2
        if hi > 1e6:
            raise NoSignChangeError("pressure stays positive")
    return bisect_root(P, 0.0, hi, tol)


# -- geometric irreducibility -------------------------------------------------


@dataclass(frozen=True)
class IrreducibilityProbe:
    dimension: int
    trivially_satisfied: bool
    line_residual: float
    sphere_residual: float
    residual: float
    likely_reducible: bool
    heuristic: bool = True


def geometric_irreducibility_probe(ifs: ConformalIFS, sample_count: int = 500, seed: int = 0,
                                   depth: int = 30) -> IrreducibilityProbe:
    """Heuristic: max residual of best hyperplane and best sphere through samples.

    Never a certificate.  In 1D the condition holds by convention whenever
    the limit set is infinite.
    """
    if ifs.dim == 1:
        infinite = len(ifs.maps) >= 2
        return IrreducibilityProbe(1, infinite, math.nan, math.nan, math.nan, not infinite)
    rng = np.random.default_rng(seed)
    n = len(ifs.maps)
    mu = CylinderMeasure.bernoulli(np.full(n, 1.0 / n)) if ifs.space.is_full_shift else None
    if mu is None:
        from .thermo import parry_measure

        mu = parry_measure(ifs.space).cylinder_measure()
    pts = np.array(sample_points(ifs, mu, sample_count, rng, depth), dtype=float)
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    line_res = float(np.max(np.abs(centered @ normal)))
    # algebraic sphere fit |y|^2 = 2 c.y + k
    A = np.hstack([2 * pts, np.ones((len(pts), 1))])
    b = np.sum(pts**2, axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    c = sol[:-1]
    rad = math.sqrt(max(sol[-1] + c @ c, 0.0))
    sphere_res = float(np.max(np.abs(np.linalg.norm(pts - c, axis=1) - rad)))
    res = min(line_res, sphere_res)
    return IrreducibilityProbe(ifs.dim, False, line_res, sphere_res, res, res < 1e-9)
