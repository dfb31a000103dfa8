"""Potentials, pressure and Gibbs states on finite subshifts.

A depth-``k`` potential is recoded to a transfer matrix on admissible
``m``-blocks with ``m = max(k - 1, 1)``; pressure is the log of its Perron
root and the Gibbs state is the Parry-type Markov chain built from the left
and right Perron vectors.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .symbolic import (
    BudgetExceededError,
    CylinderMeasure,
    SymbolicSpace,
    Word,
    admissible_words,
    stationary_vector,
)

POWER_TOL = 1e-13
POWER_MAXITER = 10**5


class ReducibleWarning(UserWarning):
    pass


class ReducibleMatrixError(ValueError):
    pass


class InsufficientPrefixError(ValueError):
    def __init__(self, required: int, got: int):
        super().__init__(f"need a prefix of length {required}, got {got}")
        self.required = required


@dataclass(frozen=True, eq=False)
class Potential:
    """Locally constant potential depending on the first ``depth`` symbols.

    ``values`` maps every admissible word of length ``depth`` to a real
    number.  ``holder`` optionally records ``(xi, v_xi)`` for the potential
    this one approximates; it is documentation only.
    """

    space: SymbolicSpace
    depth: int
    values: Mapping
    holder: Optional[tuple] = None
    _sup_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be positive")
        for w in admissible_words(self.space, self.depth):
            v = self.values.get(w)
            if v is None or not math.isfinite(v):
                raise ValueError(f"potential undefined or infinite on {w}")

    @classmethod
    def constant(cls, space: SymbolicSpace, c: float) -> "Potential":
        return cls(space, 1, {(a,): float(c) for a in range(space.alphabet_size)})

    @classmethod
    def from_symbols(cls, values: Sequence[float], space: Optional[SymbolicSpace] = None) -> "Potential":
        space = space or SymbolicSpace.full_shift(len(values))
        return cls(space, 1, {(a,): float(v) for a, v in enumerate(values)})

    @classmethod
    def from_function(cls, space: SymbolicSpace, depth: int, fn: Callable[[Word], float], holder=None) -> "Potential":
        return cls(space, depth, {w: float(fn(w)) for w in admissible_words(space, depth)}, holder)

    def __call__(self, word: Sequence[int]) -> float:
        return self.values[tuple(word[: self.depth])]

    def shifted(self, c: float) -> "Potential":
        return Potential(self.space, self.depth, {w: v + c for w, v in self.values.items()}, self.holder)

    def scaled(self, t: float) -> "Potential":
        return Potential(self.space, self.depth, {w: t * v for w, v in self.values.items()}, self.holder)

    @property
    def summability(self) -> float:
        """``sum_e exp(sup f|[e])``; finite for every finite alphabet."""
        return sum(math.exp(sup_birkhoff(self, (e,), 1)) for e in range(self.space.alphabet_size))

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for v in self.values.values())


def birkhoff_sum(f: Potential, word: Sequence[int], n: int) -> float:
    """``sum_{j<n} f(sigma^j word)`` evaluated on the available prefix."""
    word = tuple(word)
    need = n + f.depth - 1
    if len(word) < need:
        raise InsufficientPrefixError(need, len(word))
    return math.fsum(f.values[word[j:j + f.depth]] for j in range(n))


def sup_birkhoff(f: Potential, word: Sequence[int], n: Optional[int] = None) -> float:
    """Supremum of ``S_n f`` over the cylinder ``[word]`` (``n`` defaults to ``len(word)``).

    Exact when the word is long enough; otherwise the maximum over admissible
    completions to length ``n + depth - 1``.
    """
    word = tuple(word)
    n = len(word) if n is None else n
    need = n + f.depth - 1
    if len(word) >= need:
        return birkhoff_sum(f, word, n)
    key = (word, n)
    hit = f._sup_cache.get(key)
    if hit is not None:
        return hit
    space = f.space
    best = -math.inf
    stack = [word]
    while stack:
        w = stack.pop()
        if len(w) == need:
            best = max(best, birkhoff_sum(f, w, n))
            continue
        followers = range(space.alphabet_size) if not w else space.followers(w[-1])
        stack.extend(w + (b,) for b in followers)
    f._sup_cache[key] = best
    return best


@dataclass(frozen=True)
class TransferMatrix:
    """Recoded transfer matrix on admissible ``block``-length words."""

    states: tuple
    matrix: np.ndarray
    block: int

    @property
    def irreducible(self) -> bool:
        n, labels = connected_components(self.matrix > 0, directed=True, connection="strong")
        return n == 1


def transfer_matrix(space: SymbolicSpace, f: Potential) -> TransferMatrix:
    m = max(f.depth - 1, 1)
    states = admissible_words(space, m)
    index = {s: i for i, s in enumerate(states)}
    M = np.zeros((len(states), len(states)))
    for u, i in index.items():
        for b in space.followers(u[-1]):
            v = u[1:] + (b,)
            arg = u[:1] if f.depth == 1 else u + (b,)
            M[i, index[v]] = math.exp(f.values[arg])
    return TransferMatrix(tuple(states), M, m)


def perron_root(M: np.ndarray, tol: float = POWER_TOL, maxiter: int = POWER_MAXITER):
    """Perron root and right vector by shifted power iteration.

    The shift ``M + I`` keeps the iteration aperiodic; the Collatz-Wielandt
    quotients bracket the root and set the stopping rule.  Returns
    ``(root, vector, converged)``.
    """
    n = M.shape[0]
    shift = float(np.abs(M).max()) or 1.0
    A = M + shift * np.eye(n)
    x = np.ones(n)
    lo, hi = 0.0, math.inf
    for _ in range(maxiter):
        y = A @ x
        y /= y.max()
        Mx = M @ y
        pos = y > 0
        if pos.all():
            q = Mx / y
            lo, hi = q.min(), q.max()
            if hi - lo <= tol * hi:
                return 0.5 * (lo + hi), y, True
        x = y
    return 0.5 * (lo + hi) if math.isfinite(hi) else float(np.max(np.abs(np.linalg.eigvals(M)))), x, False


def _spectral(tm: TransferMatrix):
    root, right, ok = perron_root(tm.matrix)
    if not ok:
        root = float(np.max(np.abs(np.linalg.eigvals(tm.matrix))))
    return root, right, ok


def pressure(space: SymbolicSpace, f: Potential) -> float:
    """Topological pressure as the log of the recoded Perron root."""
    tm = transfer_matrix(space, f)
    if not tm.irreducible:
        warnings.warn("recoded transfer matrix is reducible", ReducibleWarning, stacklevel=2)
    root, _, _ = _spectral(tm)
    return math.log(root)


def pressure_partition_sum(space: SymbolicSpace, f: Potential, n: int) -> float:
    """``(1/n) log sum_{|w|=n} exp(sup S_n f|[w])`` by direct enumeration."""
    terms = [sup_birkhoff(f, w, n) for w in admissible_words(space, n)]
    top = max(terms)
    return (top + math.log(math.fsum(math.exp(t - top) for t in terms))) / n


@dataclass(frozen=True)
class MarkovMeasure:
    """Stationary first-order Markov chain on states ``0..n-1``."""

    P: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("P must be row-stochastic")
        if np.max(np.abs(pi @ P - pi)) > 1e-10 or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi is not stationary for P")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def from_matrix(cls, P) -> "MarkovMeasure":
        P = np.asarray(P, dtype=float)
        return cls(P, stationary_vector(P))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def cylinder_measure(self) -> CylinderMeasure:
        return CylinderMeasure.markov(self.P, self.pi)

    def entropy(self) -> float:
        P, pi = self.P, self.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
        return float(-np.sum(pi[:, None] * P * logs))


@dataclass(frozen=True, eq=False)
class GibbsState:
    measure: CylinderMeasure
    pressure: float
    gibbs_constant: float
    certified_length: int
    eigenvalue: float
    left: np.ndarray
    right: np.ndarray
    chain: MarkovMeasure
    block_states: tuple
    eigenvector_ratio_bound: float


def _left_right(tm: TransferMatrix):
    root, right, _ = _spectral(tm)
    rootT, left, _ = _spectral(TransferMatrix(tm.states, tm.matrix.T.copy(), tm.block))
    left = left / float(left @ right)
    return root, left, right


def gibbs_measure(
    space: SymbolicSpace,
    f: Potential,
    n_cert: int = 12,
    cert_budget: int = 200_000,
) -> GibbsState:
    """Equilibrium/Gibbs state of a locally constant potential.

    The Gibbs constant is certified over all admissible words up to the
    largest length ``<= n_cert`` whose enumeration fits ``cert_budget``.
    """
    tm = transfer_matrix(space, f)
    if not tm.irreducible:
        raise ReducibleMatrixError("recoded transfer matrix is not irreducible")
    lam, left, right = _left_right(tm)
    M = tm.matrix
    P = M * right[None, :] / (lam * right[:, None])
    P = P / P.sum(axis=1, keepdims=True)
    pi = left * right
    pi = pi / pi.sum()
    chain = MarkovMeasure(P, stationary_vector(P) if np.max(np.abs(pi @ P - pi)) > 1e-12 else pi)
    states = tm.states
    trans = np.zeros((len(states), space.alphabet_size))
    index = {s: i for i, s in enumerate(states)}
    for u, i in index.items():
        for b in space.followers(u[-1]):
            trans[i, b] = P[i, index[u[1:] + (b,)]]
    measure = CylinderMeasure(space, tm.block, states, chain.pi, trans)
    ratio = float(np.max(right) / np.min(right) * np.max(left) / np.min(left))
    log_lam = math.log(lam)
    n = 0
    count = 0
    while n < n_cert:
        count += space.count_words(n + 1)
        if count > cert_budget:
            break
        n += 1
    state = GibbsState(measure, log_lam, 1.0, n, lam, left, right, chain, states, ratio)
    C = gibbs_deviation(state, f, n) if n else 1.0
    return GibbsState(measure, log_lam, C, n, lam, left, right, chain, states, ratio)


def gibbs_deviation(state: GibbsState, f: Potential, n_max: int) -> float:
    """Largest ``max(q, 1/q)`` with ``q = mass(w) / exp(sup S_n f|[w] - P n)``."""
    space = state.measure.space
    worst = 1.0
    P = state.pressure
    for n in range(1, n_max + 1):
        for w in admissible_words(space, n):
            m = state.measure.mass(w)
            q = m / math.exp(sup_birkhoff(f, w, n) - P * n)
            worst = max(worst, q, 1.0 / q)
    return worst


def variational_gap(space: SymbolicSpace, m: MarkovMeasure, f: Potential) -> float:
    """``h_m + integral f dm - P(f)``; never positive, zero at equilibrium."""
    if f.depth > 2:
        raise ValueError("variational_gap supports potentials of depth <= 2")
    if m.n_states != space.alphabet_size:
        raise ValueError("measure and space have different alphabets")
    if np.any((m.P > 0) & ~space.matrix):
        raise ValueError("measure charges inadmissible transitions")
    n = space.alphabet_size
    if f.depth == 1:
        integral = math.fsum(m.pi[i] * f.values[(i,)] for i in range(n))
    else:
        integral = math.fsum(
            m.pi[i] * m.P[i, j] * f.values[(i, j)]
            for i, j in itertools.product(range(n), repeat=2)
            if m.P[i, j] > 0
        )
    return m.entropy() + integral - pressure(space, f)


def parry_measure(space: SymbolicSpace) -> MarkovMeasure:
    """Maximal-entropy Markov measure of an irreducible subshift."""
    return gibbs_measure(space, Potential.constant(space, 0.0), n_cert=0).chain


def random_markov_measure(space: SymbolicSpace, rng: np.random.Generator) -> MarkovMeasure:
    """Random stationary chain supported on the admissible transitions."""
    A = space.matrix.astype(float)
    W = rng.random(A.shape) * A + 1e-3 * A
    P = W / W.sum(axis=1, keepdims=True)
    return MarkovMeasure.from_matrix(P)


__all__ = [
    "BudgetExceededError",
    "GibbsState",
    "InsufficientPrefixError",
    "MarkovMeasure",
    "Potential",
    "ReducibleMatrixError",
    "ReducibleWarning",
    "birkhoff_sum",
    "gibbs_deviation",
    "gibbs_measure",
    "parry_measure",
    "perron_root",
    "pressure",
    "pressure_partition_sum",
    "random_markov_measure",
    "sup_birkhoff",
    "transfer_matrix",
    "variational_gap",
]
