"""Named example systems: shifts, similarity IFSs, Gauss truncations,
Markov-partition maps and the Farey parabolic pair with its inducing scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .geometry import ConformalIFS, ContractionMap
from .symbolic import CylinderMeasure, SymbolicSpace, weak_independence_constant
from .thermo import Potential, gibbs_measure, parry_measure


class NonMarkovError(ValueError):
    def __init__(self, branch: int, other: int):
        super().__init__(f"image of branch {branch} neither contains nor avoids domain {other}")
        self.branch = branch
        self.other = other


class NonSummableError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GallerySystem:
    name: str
    space: SymbolicSpace
    measure: CylinderMeasure
    ifs: Optional[ConformalIFS] = None
    forward_map: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    weak_independence: float = 1.0
    condition_b_beta: Optional[float] = None
    condition_b_sum: Optional[float] = None
    tail_mass: float = 0.0
    notes: str = ""


def condition_b_sum(ifs: ConformalIFS, measure: CylinderMeasure, beta: float) -> float:
    """``sum_e mu([e]) / D(e)^beta`` over the first-level cylinders."""
    total = 0.0
    for e in range(ifs.space.alphabet_size):
        m = measure.mass((e,))
        if m > 0:
            total += m / float(ifs.node((e,)).diameter) ** beta
    return total


def _similarity_ifs(ratios, translations, name) -> ConformalIFS:
    maps = [ContractionMap.similarity(r, t) for r, t in zip(ratios, translations)]
    return ConformalIFS((Fraction(0), Fraction(1)), maps, name=name)


def _with_ifs(name, ifs, measure, params, beta=1.0, notes="", forward=None) -> GallerySystem:
    P = weak_independence_constant(measure, 6) if measure.order > 1 or not _iid(measure) else 1.0
    return GallerySystem(name, ifs.space, measure, ifs, forward, params, P, beta,
                         condition_b_sum(ifs, measure, beta), 0.0, notes)


def _iid(measure: CylinderMeasure) -> bool:
    t = measure.transition
    return measure.order == 1 and bool(np.allclose(t, t[0]))


def bernoulli(p=(0.5, 0.5)) -> GallerySystem:
    m = CylinderMeasure.bernoulli(p)
    return GallerySystem("bernoulli", m.space, m, params={"p": list(map(float, p))}, weak_independence=1.0)


def markov(P=((0.9, 0.1), (0.1, 0.9)), pi=None) -> GallerySystem:
    m = CylinderMeasure.markov(P, pi)
    return GallerySystem("markov", m.space, m, params={"P": np.asarray(P, dtype=float).tolist()},
                         weak_independence=weak_independence_constant(m, 8))


def golden_mean() -> GallerySystem:
    space = SymbolicSpace.golden_mean()
    m = parry_measure(space).cylinder_measure()
    return GallerySystem("golden_mean", space, m, weak_independence=weak_independence_constant(m, 8),
                         notes="maximal entropy measure of the golden-mean shift")


def two_cycle() -> GallerySystem:
    m = CylinderMeasure.markov([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5])
    return GallerySystem("two_cycle", m.space, m, weak_independence=math.inf,
                         notes="deterministic periodic control; not mixing")


def cantor() -> GallerySystem:
    ifs = _similarity_ifs([Fraction(1, 3)] * 2, [0, Fraction(2, 3)], "cantor")
    return _with_ifs("cantor", ifs, CylinderMeasure.bernoulli([0.5, 0.5]), {}, forward=lambda x: (3 * x) % 1)


def two_ratio(r1=Fraction(1, 2), r2=Fraction(1, 4), p=(0.5, 0.5)) -> GallerySystem:
    r1, r2 = Fraction(r1).limit_denominator(10**12), Fraction(r2).limit_denominator(10**12)
    if r1 + r2 > 1:
        raise ValueError("ratios must satisfy r1 + r2 <= 1 for the open set condition")
    ifs = _similarity_ifs([r1, r2], [0, 1 - r2], "two_ratio")
    return _with_ifs("two_ratio", ifs, CylinderMeasure.bernoulli(p), {"r1": float(r1), "r2": float(r2)})


def binary_lebesgue(p=(0.5, 0.5)) -> GallerySystem:
    ifs = _similarity_ifs([Fraction(1, 2)] * 2, [0, Fraction(1, 2)], "binary")
    name = "binary_lebesgue" if np.allclose(p, 0.5) else "binary_bernoulli"
    return _with_ifs(name, ifs, CylinderMeasure.bernoulli(p), {"p": list(map(float, p))},
                     forward=lambda x: (2 * x) % 1)


def gauss_branch(n: int) -> ContractionMap:
    return ContractionMap.smooth(
        lambda x, n=n: 1.0 / (n + x),
        lambda x, n=n: -1.0 / (n + x) ** 2,
        (1.0 / (n + 1) ** 2, 1.0 / n**2),
        increasing=False,
        name=f"1/({n}+x)",
    )


def gauss_truncated(N: int = 100, t: float = 1.0) -> GallerySystem:
    """Gauss maps ``1/(n + x)``, ``n <= N``, with weights ``n^(-2t) / zeta(2t)``.

    ``sup |phi_1'| = 1``, so uniform contraction holds at level two
    (``sup |(phi_a phi_b)'| <= 1/4``) rather than level one.  The reported
    condition-(B) exponent is ``(t - 1/2) / 2``.
    """
    if not 1 <= N <= 10**4:
        raise ValueError("N must lie in [1, 10^4]")
    if t <= 0.5:
        raise NonSummableError("weights n^(-2t) are summable only for t > 1/2")
    ifs = ConformalIFS((0.0, 1.0), [gauss_branch(n) for n in range(1, N + 1)], name=f"gauss[{N}]")
    n = np.arange(1, N + 1, dtype=float)
    total = zeta(2 * t)
    w = n ** (-2 * t) / total
    tail = float(zeta(2 * t, N + 1) / total)
    measure = CylinderMeasure.bernoulli(w / w.sum())
    beta = (t - 0.5) / 2
    D = 1.0 / n - 1.0 / (n + 1)
    bsum = float(np.sum(w / w.sum() / D**beta))
    return GallerySystem("gauss_truncated", ifs.space, measure, ifs, lambda x: (1.0 / x) % 1 if x else 0.0,
                         {"N": N, "t": t}, 1.0, beta, bsum, tail,
                         "level-two contraction 1/2; Bernoulli approximation of the geometric Gibbs state")


# -- Markov partitions ---------------------------------------------------------------


@dataclass(frozen=True)
class Branch:
    """Monotone branch of a piecewise expanding map.

    Either ``slope`` and ``offset`` for ``T(x) = slope x + offset`` or an
    ``inverse`` with ``inverse_deriv`` and bounds ``(inf, sup)`` of
    ``|inverse'|`` on ``image``.
    """

    domain: tuple
    image: tuple
    slope: object = None
    offset: object = 0
    inverse: Optional[Callable] = None
    inverse_deriv: Optional[Callable] = None
    inverse_bounds: Optional[tuple] = None
    increasing: bool = True


def markov_partition_1d(branches: Sequence[Branch], name: str = "markov_map") -> tuple:
    """Inverse branches as an IFS plus the covering incidence matrix.

    ``A[i, j] = 1`` iff the image of branch ``i`` contains the domain of
    branch ``j``; an image that only partly covers a domain is rejected.
    Returns ``(ifs, incidence)``.
    """
    dom = [tuple(map(Fraction, b.domain)) if b.slope is not None else tuple(map(float, b.domain)) for b in branches]
    img = [tuple(map(Fraction, b.image)) if b.slope is not None else tuple(map(float, b.image)) for b in branches]
    q = len(branches)
    A = np.zeros((q, q), dtype=int)
    for i in range(q):
        covered = Fraction(0) if isinstance(img[i][0], Fraction) else 0.0
        for j in range(q):
            a, b = dom[j]
            c, d = img[i]
            if c <= a and b <= d:
                A[i, j] = 1
                covered += b - a
            elif max(a, c) < min(b, d):
                raise NonMarkovError(i, j)
        if covered != img[i][1] - img[i][0]:
            raise NonMarkovError(i, -1)
    maps = []
    for b, d_i, im in zip(branches, dom, img):
        if b.slope is not None:
            s = Fraction(b.slope)
            if abs(s) <= 1:
                raise ValueError("branches must be expanding")
            maps.append(ContractionMap.similarity(1 / abs(s), -Fraction(b.offset) / s, 1 if s > 0 else -1, domain=im))
        else:
            lo, hi = b.inverse_bounds
            if hi >= 1:
                raise ValueError("inverse branches must contract")
            maps.append(ContractionMap.smooth(b.inverse, b.inverse_deriv, (lo, hi), b.increasing, domain=im))
    lo = min(d[0] for d in dom)
    hi = max(d[1] for d in dom)
    space = SymbolicSpace(A)
    return ConformalIFS((lo, hi), maps, space, name=name), A


def doubling_map_branches() -> list:
    return [Branch((0, Fraction(1, 2)), (0, 1), 2, 0), Branch((Fraction(1, 2), 1), (0, 1), 2, -1)]


# -- parabolic Farey pair ---------------------------------------------------------------


BETA_FAREY = 1.0


def farey_parabolic_iterate(n: int, x: float) -> float:
    """``phi_1^n(x)`` with ``phi_1(x) = x / (1 + x)``, in closed form."""
    return x / (1 + n * x)


def farey_chain_derivative(n: int, x: float) -> float:
    """``(phi_1^n)'(x)`` by the chain rule along the orbit."""
    d = 1.0
    y = x
    for _ in range(n):
        d *= 1.0 / (1.0 + y) ** 2
        y = y / (1.0 + y)
    return d


def farey_closed_derivative(n: int, x: float) -> float:
    return 1.0 / (1.0 + n * x) ** 2


def induced_summable(t: float, beta: float = BETA_FAREY) -> bool:
    """Summability of the induced geometric potential: ``t > beta / (beta + 1)``."""
    return t > beta / (beta + 1)


def finite_measure_case(t: float, bowen: float = 1.0, beta: float = BETA_FAREY) -> Optional[str]:
    """``"a"`` for ``beta/(beta+1) < t < b_S``, ``"b"`` for ``t = b_S > 2 beta/(beta+1)``, else None."""
    if beta / (beta + 1) < t < bowen:
        return "a"
    if t == bowen and bowen > 2 * beta / (beta + 1):
        return "b"
    return None


def farey_induced_map(n: int) -> ContractionMap:
    """Block ``1^n 2``: ``x -> (x + 1) / (2 + n (x + 1))``; ``n = 0`` is ``phi_2``."""
    return ContractionMap.smooth(
        lambda x, n=n: (x + 1) / (2 + n * (x + 1)),
        lambda x, n=n: 2.0 / (2 + n * (x + 1)) ** 2,
        (2.0 / (2 + 2 * n) ** 2, 2.0 / (n + 2) ** 2),
        increasing=True,
        name=f"1^{n}2",
    )


@dataclass(frozen=True)
class ParabolicSpec:
    parabolic: dict
    beta: float
    symbols: tuple
    zeta_star: np.ndarray
    tail: float
    total: float
    t: float
    bowen: float
    finite_case: Optional[str]

    @property
    def tail_fraction(self) -> float:
        return self.tail / self.total


def farey_weights(t: float, N: int) -> tuple:
    """Weights ``sup |psi_n'|^t = (2 / (n + 2)^2)^t`` for ``n <= N``, tail and total."""
    if not induced_summable(t):
        raise NonSummableError("the induced potential is summable only for t > beta / (beta + 1) = 1/2")
    n = np.arange(0, N + 1, dtype=float)
    w = (2.0 / (n + 2) ** 2) ** t
    tail = float(2.0**t * zeta(2 * t, N + 3))
    total = float(2.0**t * zeta(2 * t, 2))
    return w, tail, total


def make_parabolic_farey(t: float, N_trunc: int = 1000, gibbs: bool = True) -> tuple:
    """Induced Farey system on blocks ``1^n 2`` (``1 <= n <= N``) and ``2``.

    The induced potential on block ``n`` is the Birkhoff sum of
    ``t ln |phi'|`` along the block, taken at its supremum so the Gibbs
    state is Bernoulli with weights ``(2/(n+2)^2)^t``.  The Bowen parameter
    of the Farey pair is 1 (Lebesgue-equivalent infinite measure).
    """
    w, tail, total = farey_weights(t, N_trunc)
    zstar = np.log(w)
    symbols = tuple(["2"] + [f"1^{n}2" for n in range(1, N_trunc + 1)])
    spec = ParabolicSpec({0: BETA_FAREY}, BETA_FAREY, symbols, zstar, tail, total, float(t), 1.0,
                         finite_measure_case(t))
    maps = [farey_induced_map(n) for n in range(N_trunc + 1)]
    ifs = ConformalIFS((0.0, 1.0), maps, name=f"farey*[{N_trunc}]")
    if gibbs:
        f = Potential.from_symbols(list(zstar), ifs.space)
        measure = gibbs_measure(ifs.space, f, n_cert=1, cert_budget=N_trunc + 2).measure
    else:
        measure = CylinderMeasure.bernoulli(w / w.sum())
    system = GallerySystem("farey_induced", ifs.space, measure, ifs, None, {"t": t, "N_trunc": N_trunc},
                           1.0, None, None, tail / total, "first-return inducing of the Farey pair")
    return spec, system


def farey_base_ifs() -> ConformalIFS:
    phi1 = ContractionMap.smooth(lambda x: x / (1 + x), lambda x: 1 / (1 + x) ** 2, (0.25, 1.0), name="x/(1+x)")
    phi2 = ContractionMap.smooth(lambda x: (x + 1) / 2, lambda x: 0.5, (0.5, 0.5), name="(x+1)/2")
    return ConformalIFS((0.0, 1.0), [phi1, phi2], parabolic={0: BETA_FAREY}, name="farey")


# -- registry --------------------------------------------------------------------------


SYSTEMS = {
    "bernoulli": bernoulli,
    "markov": markov,
    "golden_mean": golden_mean,
    "two_cycle": two_cycle,
    "cantor": cantor,
    "two_ratio": two_ratio,
    "binary_lebesgue": binary_lebesgue,
    "gauss_truncated": gauss_truncated,
}


def make_hyperbolic(name: str, params: Optional[dict] = None) -> GallerySystem:
    if name not in SYSTEMS:
        raise KeyError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}")
    return SYSTEMS[name](**(params or {}))


def list_systems() -> list:
    return sorted(SYSTEMS) + ["farey_induced"]


def _coerce(v):
    if isinstance(v, str) and "/" in v:
        return Fraction(v)
    if isinstance(v, list):
        return tuple(_coerce(a) for a in v)
    return v


def build_system(name: str, params: Optional[dict] = None) -> GallerySystem:
    """Construct any registered system; string ratios such as ``"1/2"`` become Fractions."""
    params = {k: _coerce(v) for k, v in (params or {}).items()}
    if name == "farey_induced":
        return make_parabolic_farey(**params)[1]
    return make_hyperbolic(name, params)
