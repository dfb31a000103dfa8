"""Thin-annuli diagnostics on projected IFS measures.

Every ratio here is an interval built from certified ball and annulus
brackets.  Radii sets are finite unions of half-open intervals ``(a, b]``
with ``Fraction`` endpoints so densities are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    ConformalIFS,
    IntervalUnion,
    MeasureInterval,
    Shell,
    annulus_measure_bounds,
    ball_measure_bounds,
    region_measure_bounds,
    sample_points,
)
from .symbolic import CylinderMeasure

BESICOVITCH_1D = 2
LOG2 = math.log(2.0)


class NotSubpolynomialError(ValueError):
    pass


class InconsistentThresholdError(ValueError):
    pass


class UnresolvedMassError(ValueError):
    pass


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


# -- subpolynomial exponents ---------------------------------------------------


@dataclass(frozen=True)
class SubpolynomialFn:
    """``kappa(r) = alpha * ln(1/r)**beta + c0`` on ``(0, r_max]``.

    ``kind == "constant"`` is the case ``alpha = 0``.  Both kinds are
    nonincreasing in ``r``, so the infimum is attained at ``r_max`` and must
    exceed 1.
    """

    kind: str
    alpha: float = 0.0
    beta: float = 0.0
    c0: float = 3.0
    r_max: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "logpower"):
            raise NotSubpolynomialError(f"unsupported form {self.kind!r}")
        if self.alpha < 0 or self.beta < 0:
            raise NotSubpolynomialError("alpha and beta must be nonnegative for monotonicity")
        if not 0 < self.r_max <= 1:
            raise ValueError("r_max must lie in (0, 1]")
        if self.infimum <= 1:
            raise NotSubpolynomialError(f"inf kappa = {self.infimum} must exceed 1")

    @classmethod
    def constant(cls, c: float) -> "SubpolynomialFn":
        return cls("constant", 0.0, 0.0, c)

    @classmethod
    def logpower(cls, alpha: float, beta: float, c0: float = 0.0, r_max: float = 1.0) -> "SubpolynomialFn":
        return cls("logpower", float(alpha), float(beta), float(c0), float(r_max))

    @classmethod
    def power(cls, *args, **kwargs):
        raise NotSubpolynomialError("negative powers of r grow polynomially and are not subpolynomial")

    @classmethod
    def from_dict(cls, d: dict) -> "SubpolynomialFn":
        d = dict(d)
        kind = d.pop("kind", "constant")
        if kind == "constant":
            return cls.constant(d.pop("c", d.pop("c0", 3)))
        if kind == "logpower":
            return cls.logpower(**d)
        raise NotSubpolynomialError(f"unsupported form {kind!r}")

    @property
    def infimum(self) -> float:
        return self.log_value(math.log(self.r_max)) if self.kind == "logpower" else self.c0

    def log_value(self, log_r: float) -> float:
        """``kappa`` evaluated from ``ln r`` (usable far below float underflow)."""
        if self.kind == "constant":
            return self.c0
        return self.alpha * (-log_r) ** self.beta + self.c0

    def __call__(self, r):
        if self.kind == "constant":
            c = self.c0
            return int(c) if float(c).is_integer() else c
        return self.log_value(math.log(float(r)))


@dataclass(frozen=True)
class SubpolyVerdict:
    eps: float
    passed: bool
    monotone_tail: bool
    final_log_value: float


DEFAULT_LOG2_GRID = tuple(float(j) for j in np.unique(np.round(np.geomspace(1, 2**17, 400))))


def subpolynomial_check(kappa: SubpolynomialFn, eps_list: Sequence[float] = (0.5, 0.1, 0.01),
                        exponents: Optional[Sequence[float]] = None, threshold: float = 1e-6) -> dict:
    """Decay verdict of ``kappa(r) r^eps`` along ``r = 2^-j``.

    Values are compared in the log domain so the grid can reach far below
    the float range.  Passing requires the second half of the grid to be
    nonincreasing and the final value to be below ``threshold``.
    """
    js = np.asarray(DEFAULT_LOG2_GRID if exponents is None else exponents, dtype=float)
    if np.any(np.diff(js) <= 0):
        raise ValueError("exponents must increase (radii decreasing)")
    log_r = -js * LOG2
    out = {}
    for eps in eps_list:
        vals = np.array([math.log(kappa.log_value(lr)) + eps * lr for lr in log_r])
        tail = vals[len(vals) // 2:]
        mono = bool(np.all(np.diff(tail) <= 1e-12))
        final = float(vals[-1])
        out[eps] = SubpolyVerdict(eps, mono and final < math.log(threshold), mono, final)
    return out


# -- doubling bounds -----------------------------------------------------------


@dataclass(frozen=True)
class DoublingBound:
    """``G(r) = max(floor, log2(1/r)**(2 + eps))`` or a constant, with certified ``gamma``."""

    kind: str
    eps: float = 0.5
    value: float = 0.0
    floor: float = 1.0 + 1e-9
    gamma: float = 1.0
    grid: tuple = field(default=(), repr=False)

    def __call__(self, r) -> float:
        if self.kind == "constant":
            return self.value
        return max(self.floor, math.log2(1.0 / float(r)) ** (2.0 + self.eps))

    def certified_gamma(self, grid: Sequence[float]) -> float:
        g = max(self(r / 2) / self(r) for r in grid)
        return max(1.0, g)

    @classmethod
    def log_power(cls, eps: float, grid: Sequence[float]) -> "DoublingBound":
        grid = tuple(float(r) for r in grid)
        if not grid:
            raise ValueError("a certification grid is required")
        b = cls("logpower", eps=float(eps))
        gamma = b.certified_gamma(grid)
        if not 1 <= gamma < 2:
            raise ValueError(f"halving factor {gamma} not in [1, 2) on the grid")
        vals = [b(r) for r in sorted(grid, reverse=True)]
        if any(v2 < v1 for v1, v2 in zip(vals, vals[1:])):
            raise ValueError("G is not nonincreasing on the grid")
        return cls("logpower", eps=float(eps), gamma=gamma, grid=grid)

    @classmethod
    def constant(cls, c: float) -> "DoublingBound":
        if c <= 1:
            raise ValueError("doubling bound must exceed 1")
        return cls("constant", value=float(c), gamma=1.0)


# -- radii sets ----------------------------------------------------------------


@dataclass(frozen=True)
class RadiiSet:
    """Sorted disjoint union of intervals ``(a, b]`` inside ``(0, 1]``."""

    intervals: tuple = ()

    @classmethod
    def of(cls, pieces) -> "RadiiSet":
        ps = sorted((_frac(a), _frac(b)) for a, b in pieces if _frac(a) < _frac(b))
        for a, b in ps:
            if a < 0 or b > 1:
                raise ValueError("radii must lie in (0, 1]")
        merged = []
        for a, b in ps:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return cls(tuple(merged))

    @classmethod
    def full(cls, r1=1) -> "RadiiSet":
        return cls.of([(0, r1)])

    def union(self, other: "RadiiSet") -> "RadiiSet":
        return RadiiSet.of(self.intervals + other.intervals)

    def intersect(self, a, b) -> "RadiiSet":
        a, b = _frac(a), _frac(b)
        return RadiiSet.of([(max(p, a), min(q, b)) for p, q in self.intervals])

    def difference(self, other: "RadiiSet") -> "RadiiSet":
        out = list(self.intervals)
        for c, d in other.intervals:
            nxt = []
            for a, b in out:
                if d <= a or c >= b:
                    nxt.append((a, b))
                    continue
                if a < c:
                    nxt.append((a, c))
                if d < b:
                    nxt.append((d, b))
            out = nxt
        return RadiiSet.of(out)

    def length_upto(self, r) -> Fraction:
        r = _frac(r)
        return sum((min(b, r) - a for a, b in self.intervals if a < r), Fraction(0))

    @property
    def length(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    def density(self, r) -> Fraction:
        r = _frac(r)
        if not 0 < r <= 1:
            raise ValueError("r must lie in (0, 1]")
        return self.length_upto(r) / r

    def __contains__(self, r) -> bool:
        r = _frac(r)
        return any(a < r <= b for a, b in self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals


def _decay_flag(log_ratios: Sequence[float], threshold: float) -> bool:
    v = np.asarray(log_ratios, dtype=float)
    if v.size == 0:
        return False
    tail = v[len(v) // 2:]
    fin = np.isfinite(tail)
    mono = bool(np.all(np.diff(tail[fin]) <= 1e-12)) if fin.sum() > 1 else True
    return bool(mono and (v[-1] == -np.inf or v[-1] < math.log(threshold)))


@dataclass(frozen=True)
class RadiiClassReport:
    density: Fraction
    full: bool
    almost_full: bool
    dense: bool
    super_dense: dict
    beta_thick: dict
    grid: tuple = field(repr=False)


def radii_class_density(T: RadiiSet, r, grid: Optional[Sequence] = None, alphas=(0.25, 0.5, 1.0),
                        betas=(0.5, 1.0), threshold: float = 1e-6) -> RadiiClassReport:
    """Exact ``Leb(T cap (0, r]) / r`` plus class flags along a grid tending to 0.

    The limit flags inspect ``|density - 1| / w(s)`` along the grid: the
    tail must be nonincreasing and end below ``threshold``.  Super-density
    is reported per tested exponent since "every alpha" is not checkable.
    """
    r = _frac(r)
    if grid is None:
        grid = [r / 2**j for j in range(0, 41)]
    grid = sorted((_frac(s) for s in grid), reverse=True)
    full = bool(T.intervals) and T.intervals[0][0] == 0
    defects = [abs(1 - T.density(s)) for s in grid]
    logd = [math.log(d) if d > 0 else -math.inf for d in defects]
    logs = [math.log(s) for s in grid]
    dense = _decay_flag(logd, threshold)
    sd = {a: _decay_flag([ld - a * ls for ld, ls in zip(logd, logs)], threshold) for a in alphas}
    bt = {
        b: _decay_flag([ld - (-ls) ** b * ls for ld, ls in zip(logd, logs)], threshold) for b in betas
    }
    return RadiiClassReport(T.density(r), full, full, dense, sd, bt, tuple(grid))


# -- annuli ratios ---------------------------------------------------------------


@dataclass(frozen=True)
class AnnuliRatio:
    lower: float
    upper: float
    resolved: bool
    ball: MeasureInterval
    annulus: MeasureInterval
    kappa: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def thin_annuli_ratio(ifs: ConformalIFS, mu: CylinderMeasure, x, r, kappa: SubpolynomialFn,
                      generation_cap: int = 40, node_budget: int = 10**6) -> AnnuliRatio:
    """Interval for ``mu(B(x, r + r^kappa) minus B(x, r)) / mu(B(x, r))``."""
    k = kappa(r)
    ball = ball_measure_bounds(ifs, mu, x, r, generation_cap, node_budget)
    ann = annulus_measure_bounds(ifs, mu, x, r, k, generation_cap, node_budget)
    if ball.lower <= 0:
        return AnnuliRatio(0.0 if ann.upper == 0 else ann.lower, math.inf, False, ball, ann, k)
    lo = ann.lower / ball.upper if ball.upper > 0 else 0.0
    return AnnuliRatio(lo, ann.upper / ball.lower, True, ball, ann, k)


# -- doubling ------------------------------------------------------------------


def dyadic_level(r) -> int:
    """The integer ``k`` with ``2^-(k+1) < r <= 2^-k``."""
    r = _frac(r)
    k = 0
    while Fraction(1, 2 ** (k + 1)) >= r:
        k += 1
    while Fraction(1, 2**k) < r:
        k -= 1
    return k


def _compare(lhs: MeasureInterval, factor: float, rhs: MeasureInterval):
    """Decide ``lhs <= factor * rhs`` from interval ends: True, False or None."""
    if lhs.upper <= factor * rhs.lower:
        return True
    if lhs.lower > factor * rhs.upper:
        return False
    return None


@dataclass(frozen=True)
class DoublingRow:
    r: float
    k: int
    ball: MeasureInterval
    ball2: MeasureInterval
    shell_top: MeasureInterval
    G: float
    doubling: Optional[bool]
    shell: Optional[bool]
    shell_implied: Optional[bool]

    @property
    def resolved(self) -> bool:
        return self.ball.lower > 0


@dataclass(frozen=True)
class ZRow:
    n: int
    alpha: float
    member: Optional[bool]


@dataclass(frozen=True)
class DoublingReport:
    rows: tuple
    z_rows: tuple
    eps: float

    @property
    def violations(self) -> list:
        return [row for row in self.rows if row.doubling is False]


def alpha_sequence(n: int, eps: float, refined: bool = False) -> float:
    if refined:
        return 1.0 / (n * math.log(n) ** 2) if n >= 2 else 1.0
    return n ** (-1.0 - eps / 2)


def doubling_report(ifs: ConformalIFS, mu: CylinderMeasure, x, r_grid: Sequence, eps: float,
                    generation_cap: int = 40, z_levels: Sequence[int] = (), refined_alpha: bool = False,
                    node_budget: int = 10**6) -> DoublingReport:
    """Certify the log-power doubling inequality and the dyadic shell comparison.

    For each ``r`` with ``2^-(k+1) < r <= 2^-k`` the shell comparison uses
    ``s = 2^-k``.  ``shell_implied`` records the consequence
    ``mu(B(s)) <= G(r) mu(B(r))`` that follows from ``B(s) subset B(2r)``.
    """
    cap, budget = generation_cap, node_budget
    G = DoublingBound("logpower", eps=eps)
    rows = []
    for r in r_grid:
        r = _frac(r) if ifs.exact else float(r)
        if not 0 < r < Fraction(1, 4):
            raise ValueError("grid radii must lie in (0, 1/4)")
        k = dyadic_level(r)
        s = Fraction(1, 2**k) if ifs.exact else 2.0**-k
        b = ball_measure_bounds(ifs, mu, x, r, cap, budget)
        b2 = ball_measure_bounds(ifs, mu, x, 2 * r, cap, budget)
        bs = ball_measure_bounds(ifs, mu, x, s, cap, budget)
        g = G(r)
        f = float(k) ** (1 + eps)
        low_side = _compare(b, f, bs)
        high_side = _compare(bs, f, b)
        shell = None if None in (low_side, high_side) else (low_side and high_side)
        rows.append(DoublingRow(float(r), k, b, b2, bs, g, _compare(b2, g, b), shell, _compare(bs, g, b)))
    z_rows = []
    for n in z_levels:
        a = alpha_sequence(n, eps, refined_alpha)
        big = ball_measure_bounds(ifs, mu, x, Fraction(1, 2**n) if ifs.exact else 2.0**-n, cap, budget)
        small = ball_measure_bounds(ifs, mu, x, Fraction(1, 2 ** (n + 1)) if ifs.exact else 2.0 ** (-n - 1),
                                    cap, budget)
        if big.lower * a > small.upper:
            member = True
        elif big.upper * a <= small.lower:
            member = False
        else:
            member = None
        z_rows.append(ZRow(n, a, member))
    return DoublingReport(tuple(rows), tuple(z_rows), eps)


# -- bad radii -----------------------------------------------------------------


@dataclass(frozen=True)
class BadRadiiRow:
    r: float
    lower: float
    upper: float
    status: str  # "in", "out" or "inconclusive"


@dataclass(frozen=True)
class BoundRow:
    r: float
    measured: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.measured / self.bound if self.bound > 0 else math.inf


@dataclass(frozen=True)
class BadRadiiScan:
    A: float
    rows: tuple
    Z: RadiiSet
    bound_rows: tuple
    gamma: float
    grid_floor: float

    @property
    def inconclusive(self) -> int:
        return sum(row.status == "inconclusive" for row in self.rows)

    @property
    def worst_bound_ratio(self) -> float:
        return max((b.ratio for b in self.bound_rows), default=0.0)


def bad_radii_scan(ifs: ConformalIFS, mu: CylinderMeasure, x, A: float, kappa: SubpolynomialFn,
                   r_grid: Sequence, G: DoublingBound, generation_cap: int = 40,
                   node_budget: int = 10**6, ratios: Optional[Sequence[AnnuliRatio]] = None) -> BadRadiiScan:
    """Grid estimate of ``Z_x(A) = {r : annulus ratio > A}`` and its density bound.

    The grid ``r_0 > r_1 > ...`` is cut into cells ``(r_{i+1}, r_i]``; a
    cell belongs to Z unless both of its endpoints are certified out.
    The cell ``(0, r_min]`` below the grid is not scanned.  At each grid
    scale the measured ``l(Z cap (0, r])`` is compared with
    ``2 / ((1 - gamma/2) ln(1 + A)) * r^kappa(r) * ln G(r)``.
    """
    if A <= 0:
        raise ValueError("A must be positive")
    grid = sorted((_frac(r) for r in r_grid), reverse=True)
    if ratios is None:
        ratios = [thin_annuli_ratio(ifs, mu, x, r if ifs.exact else float(r), kappa, generation_cap, node_budget)
                  for r in grid]
    rows = []
    for r, q in zip(grid, ratios):
        if q.resolved and q.lower > A:
            st = "in"
        elif q.resolved and q.upper <= A:
            st = "out"
        else:
            st = "inconclusive"
        rows.append(BadRadiiRow(float(r), q.lower, q.upper, st))
    cells = [(grid[i + 1], grid[i]) for i in range(len(grid) - 1)
             if rows[i].status != "out" or rows[i + 1].status != "out"]
    Z = RadiiSet.of(cells)
    coef = 2.0 / ((1 - G.gamma / 2) * math.log1p(A))
    bounds = []
    for r in grid:
        kv = float(kappa(r))
        bound = coef * float(r) ** kv * math.log(G(r))
        bounds.append(BoundRow(float(r), float(Z.length_upto(r)), bound))
    return BadRadiiScan(A, tuple(rows), Z, tuple(bounds), G.gamma, float(grid[-1]))


@dataclass(frozen=True)
class GoodRadii:
    R: RadiiSet
    Z: RadiiSet
    profile: tuple  # (r, density) pairs at grid scales
    classes: RadiiClassReport


def good_radii_construct(bad_scans: Sequence[tuple], grid: Optional[Sequence] = None) -> GoodRadii:
    """Assemble ``R_x = (0, r_1] minus union_n Z_x(A_n) cap (r_{n+1}, r_n]``.

    ``bad_scans`` holds ``(A_n, r_n, scan)`` triples with ``r_n`` strictly
    decreasing; each scan may be a ``BadRadiiScan`` or a ``RadiiSet``.
    The last threshold band is ``(0, r_N]``.
    """
    if not bad_scans:
        raise ValueError("at least one scan is required")
    thresholds = [_frac(r) for _, r, _ in bad_scans]
    if any(b >= a for a, b in zip(thresholds, thresholds[1:])):
        raise InconsistentThresholdError("thresholds r_n must be strictly decreasing")
    Z = RadiiSet()
    for i, (_, r_n, scan) in enumerate(bad_scans):
        zset = scan.Z if isinstance(scan, BadRadiiScan) else scan
        lo = thresholds[i + 1] if i + 1 < len(thresholds) else Fraction(0)
        Z = Z.union(zset.intersect(lo, thresholds[i]))
    r1 = thresholds[0]
    R = RadiiSet.full(r1).difference(Z)
    if grid is None:
        pts = set()
        for _, _, scan in bad_scans:
            if isinstance(scan, BadRadiiScan):
                pts.update(_frac(row.r) for row in scan.rows)
        grid = sorted((p for p in pts if p <= r1), reverse=True) or [r1 / 2**j for j in range(20)]
    grid = sorted((_frac(g) for g in grid), reverse=True)
    profile = tuple((float(g), float(R.density(g))) for g in grid)
    return GoodRadii(R, Z, profile, radii_class_density(R, r1, grid))


# -- T_A^B -------------------------------------------------------------------------


def _exact_child(measure: CylinderMeasure, word, mass, e):
    if len(word) < measure.order:
        return Fraction(measure.mass(word + (e,)))
    i = measure.index.get(word[len(word) - measure.order:])
    if i is None:
        return Fraction(0)
    return mass * Fraction(float(measure.transition[i, e]))


@dataclass(frozen=True)
class TabResult:
    lower: object
    upper: object
    exact: bool
    nodes: int
    bound_shape: float
    ratio: float


def tab_measure(ifs: ConformalIFS, mu: CylinderMeasure, A, B, depth_cap: int = 200, beta: float = 1.0,
                node_budget: int = 10**7) -> TabResult:
    """Mass of sequences none of whose prefix diameters lie in ``(A, B)``.

    Pruned traversal: ``D <= A`` accepts the whole subtree (diameters
    decrease along branches), ``A < D < B`` rejects it.  Masses are
    accumulated as exact rationals of the float parameters.  The reported
    ratio is ``mass / ((A/B)^beta ln(diam X / A))``.
    """
    A, B = (_frac(A), _frac(B)) if ifs.exact else (float(A), float(B))
    if not 0 < A < B <= ifs.diam:
        raise ValueError("need 0 < A < B <= diam X")
    lower = Fraction(0)
    pending = Fraction(0)
    stack = [(ifs.root(), Fraction(1))]
    nodes = 0
    while stack:
        node, m = stack.pop()
        nodes += 1
        D = node.diameter
        if D <= A:
            lower += m
            continue
        if D < B:
            continue
        if len(node.word) >= depth_cap or nodes > node_budget:
            pending += m
            continue
        for e in ifs.followers(node.word):
            cm = _exact_child(mu, node.word, m, e)
            if cm:
                stack.append((ifs.child(node, e), cm))
    shape = (float(A) / float(B)) ** beta * math.log(float(ifs.diam) / float(A))
    return TabResult(lower, lower + pending, pending == 0, nodes, shape,
                     float(lower + pending) / shape if shape > 0 else math.inf)


# -- concentration sets ---------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationResult:
    estimate: float
    inside: int
    outside: int
    inconclusive: int
    bound: float
    nu_F: MeasureInterval

    @property
    def upper_estimate(self) -> float:
        n = self.inside + self.outside + self.inconclusive
        return (self.inside + self.inconclusive) / n


def concentration_set_mass(ifs: ConformalIFS, nu: CylinderMeasure, F: IntervalUnion, c: float, rho,
                           sample_count: int, seed: int = 0, generation_cap: int = 24,
                           besicovitch: float = BESICOVITCH_1D, depth: int = 40) -> ConcentrationResult:
    """Monte Carlo rate of ``nu(B(x, rho) cap F) > c nu(B(x, rho)) nu(F)`` over ``nu``-samples."""
    if ifs.dim != 1:
        raise ValueError("concentration sets are supported in dimension 1")
    nF = region_measure_bounds(ifs, nu, F, generation_cap)
    if nF.lower <= 0:
        raise UnresolvedMassError("nu(F) is not bounded away from 0")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0])))
    conv = _frac if ifs.exact else float
    rho = conv(rho)
    pts = sample_points(ifs, nu, sample_count, rng, depth)
    inside = outside = unknown = 0
    for x in pts:
        x = conv(x)
        ball = region_measure_bounds(ifs, nu, Shell(x, 0, rho), generation_cap)
        meet = region_measure_bounds(ifs, nu, F.intersect(x - rho, x + rho, False, False), generation_cap)
        if meet.lower > c * ball.upper * nF.upper:
            inside += 1
        elif meet.upper <= c * ball.lower * nF.lower:
            outside += 1
        else:
            unknown += 1
    return ConcentrationResult(inside / sample_count, inside, outside, unknown, besicovitch / c, nF)
