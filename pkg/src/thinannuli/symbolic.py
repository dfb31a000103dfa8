"""Words, cylinders and cylinder measures over a finite alphabet.

A word is a plain ``tuple`` of symbol indices; a cylinder is identified with
the word that defines it.  Enumeration order is lexicographic and part of the
contract, so experiments are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

Word = tuple  # tuple[int, ...]

DEFAULT_WORD_BUDGET = 10**7


class BudgetExceededError(RuntimeError):
    """Raised when an enumeration would produce more items than allowed."""

    def __init__(self, count: int, budget: int):
        super().__init__(f"enumeration needs {count} words, budget is {budget}")
        self.count = count
        self.budget = budget


class InadmissibleWordError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SymbolicSpace:
    """Subshift of finite type given by a 0/1 incidence matrix.

    ``incidence[a][b]`` is true when the juxtaposition ``ab`` is allowed.
    """

    incidence: tuple

    def __init__(self, incidence):
        a = np.asarray(incidence, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError("incidence matrix must be square and non-empty")
        if not a.any(axis=1).all() or not a.any(axis=0).all():
            raise ValueError("incidence matrix has a dead symbol (empty row or column)")
        object.__setattr__(self, "incidence", tuple(tuple(bool(v) for v in row) for row in a))

    @classmethod
    def full_shift(cls, n: int) -> "SymbolicSpace":
        return cls(np.ones((n, n), dtype=bool))

    @classmethod
    def golden_mean(cls) -> "SymbolicSpace":
        return cls([[1, 1], [1, 0]])

    def __eq__(self, other):
        return isinstance(other, SymbolicSpace) and self.incidence == other.incidence

    def __hash__(self):
        return hash(self.incidence)

    def __repr__(self):
        return f"SymbolicSpace({self.matrix.astype(int).tolist()})"

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.array(self.incidence, dtype=bool)
        m.setflags(write=False)
        return m

    @property
    def alphabet_size(self) -> int:
        return len(self.incidence)

    @property
    def is_full_shift(self) -> bool:
        return all(all(row) for row in self.incidence)

    def allowed(self, a: int, b: int) -> bool:
        return self.incidence[a][b]

    def followers(self, a: int) -> tuple:
        return tuple(b for b, ok in enumerate(self.incidence[a]) if ok)

    def is_admissible(self, word: Sequence[int]) -> bool:
        n = self.alphabet_size
        if any(not (0 <= s < n) for s in word):
            return False
        return all(self.incidence[a][b] for a, b in zip(word, word[1:]))

    def check(self, word: Sequence[int]) -> Word:
        word = tuple(int(s) for s in word)
        if not self.is_admissible(word):
            raise InadmissibleWordError(f"word {word} is not admissible")
        return word

    def count_words(self, n: int) -> int:
        """Exact number of admissible words of length ``n`` (integer matrix power)."""
        if n == 0:
            return 1
        m = np.array(self.incidence, dtype=object).astype(int)
        v = [1] * self.alphabet_size
        for _ in range(n - 1):
            v = [sum(int(m[a][b]) * v[b] for b in range(len(v))) for a in range(len(v))]
        return int(sum(v))


def admissible_words(space: SymbolicSpace, n: int, budget: int = DEFAULT_WORD_BUDGET) -> list:
    """All admissible words of length ``n`` in lexicographic order."""
    if n < 0:
        raise ValueError("n must be non-negative")
    count = space.count_words(n)
    if count > budget:
        raise BudgetExceededError(count, budget)
    if n == 0:
        return [()]
    words = [(a,) for a in range(space.alphabet_size)]
    for _ in range(n - 1):
        words = [w + (b,) for w in words for b in space.followers(w[-1])]
    return words


def words_up_to(space: SymbolicSpace, n: int, budget: int = DEFAULT_WORD_BUDGET) -> list:
    """Admissible words of lengths ``0..n``, grouped by length."""
    total = sum(space.count_words(k) for k in range(n + 1))
    if total > budget:
        raise BudgetExceededError(total, budget)
    out = []
    for k in range(n + 1):
        out.extend(admissible_words(space, k))
    return out


def finitely_irreducible_witness(space: SymbolicSpace, max_len: int):
    """Finite connecting set Lambda, or ``None`` if none exists up to ``max_len``.

    For each ordered pair ``(a, b)`` the shortest (then lexicographically
    smallest) word ``w`` with ``a w b`` admissible is chosen; the empty word
    counts as length zero.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    n = space.alphabet_size
    chosen = set()
    for a in range(n):
        # breadth-first over connecting words; level k holds words of length k
        level = [()]
        found = {}
        for k in range(max_len + 1):
            for w in level:
                last = w[-1] if w else a
                for b in space.followers(last):
                    found.setdefault(b, w)
            if len(found) == n:
                break
            level = sorted({w + (s,) for w in level for s in space.followers(w[-1] if w else a)})
        if len(found) < n:
            return None
        chosen.update(found.values())
    return frozenset(chosen)


def word_self_overlap(space: SymbolicSpace, word: Sequence[int]) -> int:
    """Least shift ``k >= 1`` after which ``[word]`` can meet itself, capped at ``len(word)``."""
    word = tuple(word)
    n = len(word)
    if n == 0:
        raise ValueError("word must be non-empty")
    for k in range(1, n):
        if word[k:] == word[: n - k] and space.is_admissible(word[:k] + word):
            return k
    return n


@dataclass(frozen=True, eq=False)
class CylinderMeasure:
    """Markov measure of memory ``order`` on a subshift, given on cylinders.

    The chain lives on admissible ``order``-blocks: ``initial[i]`` is the
    mass of block ``states[i]`` and ``transition[i, e]`` the probability that
    symbol ``e`` follows it.  Bernoulli measures are the ``order == 1`` case
    with identical rows.
    """

    space: SymbolicSpace
    order: int
    states: tuple
    initial: np.ndarray
    transition: np.ndarray
    index: dict = field(repr=False)

    def __init__(self, space, order, states, initial, transition):
        if order < 1:
            raise ValueError("order must be at least 1")
        states = tuple(tuple(s) for s in states)
        initial = np.asarray(initial, dtype=float).copy()
        transition = np.asarray(transition, dtype=float).copy()
        if transition.shape != (len(states), space.alphabet_size):
            raise ValueError("transition table has the wrong shape")
        if initial.shape != (len(states),):
            raise ValueError("initial vector has the wrong shape")
        initial.setflags(write=False)
        transition.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "order", int(order))
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "index", {s: i for i, s in enumerate(states)})

    @classmethod
    def bernoulli(cls, p: Sequence[float]) -> "CylinderMeasure":
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("Bernoulli weights must be positive and sum to 1")
        space = SymbolicSpace.full_shift(len(p))
        return cls(space, 1, [(a,) for a in range(len(p))], p, np.tile(p, (len(p), 1)))

    @classmethod
    def markov(cls, P, pi=None) -> "CylinderMeasure":
        """First-order Markov measure; support of ``P`` defines the incidence."""
        P = np.asarray(P, dtype=float)
        space = SymbolicSpace(P > 0)
        if pi is None:
            pi = stationary_vector(P)
        return cls(space, 1, [(a,) for a in range(len(P))], pi, P)

    @property
    def alphabet_size(self) -> int:
        return self.space.alphabet_size

    @cached_property
    def _short_masses(self) -> dict:
        masses = {}
        for s, m in zip(self.states, self.initial):
            for k in range(self.order):
                masses[s[:k]] = masses.get(s[:k], 0.0) + float(m)
        return masses

    def mass(self, word: Sequence[int]) -> float:
        word = tuple(word)
        m = self.order
        if len(word) < m:
            return self._short_masses.get(word, 0.0)
        i = self.index.get(word[:m])
        if i is None:
            return 0.0
        value = float(self.initial[i])
        for j in range(m, len(word)):
            i = self.index.get(word[j - m:j])
            if i is None:
                return 0.0
            value *= float(self.transition[i, word[j]])
            if value == 0.0:
                return 0.0
        return value

    def child_mass(self, word: Word, mass: float, symbol: int) -> float:
        """Mass of ``word + (symbol,)`` given the mass of ``word``."""
        if len(word) < self.order:
            return self.mass(word + (symbol,))
        i = self.index.get(word[len(word) - self.order:])
        if i is None:
            return 0.0
        return mass * float(self.transition[i, symbol])

    def state_of(self, word: Word) -> int:
        return self.index[word[len(word) - self.order:]]


def stationary_vector(P) -> np.ndarray:
    """Stationary row vector of an irreducible stochastic matrix."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    a = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def additivity_defect(measure: CylinderMeasure, max_len: int, budget: int = 10**6) -> float:
    """Largest |mass(w) - sum_e mass(we)| over admissible words up to ``max_len``."""
    worst = 0.0
    for w in words_up_to(measure.space, max_len, budget):
        last = w[-1] if w else None
        followers = range(measure.alphabet_size) if last is None else measure.space.followers(last)
        total = sum(measure.mass(w + (e,)) for e in followers)
        worst = max(worst, abs(measure.mass(w) - total))
    return worst


def shift_invariance_defect(measure: CylinderMeasure, max_len: int, budget: int = 10**6) -> float:
    worst = 0.0
    for w in words_up_to(measure.space, max_len, budget):
        total = sum(measure.mass((e,) + w) for e in range(measure.alphabet_size))
        worst = max(worst, abs(measure.mass(w) - total))
    return worst


def weak_independence_constant(measure: CylinderMeasure, max_len: int, budget: int = 10**6) -> float:
    """Smallest P with P^-1 m(w)m(t) <= m(wt) <= P m(w)m(t) over tested pairs.

    Pairs range over admissible non-empty ``w, t`` of length ``<= max_len``
    whose concatenation is admissible.
    """
    words = [w for w in words_up_to(measure.space, max_len, budget) if w]
    masses = {w: measure.mass(w) for w in words}
    by_first: dict = {}
    for w in words:
        by_first.setdefault(w[0], []).append(w)
    worst = 1.0
    pairs = 0
    for w in words:
        for b in measure.space.followers(w[-1]):
            for t in by_first.get(b, ()):
                pairs += 1
                if pairs > budget:
                    raise BudgetExceededError(pairs, budget)
                joint = measure.mass(w + t)
                prod = masses[w] * masses[t]
                if joint == 0.0 or prod == 0.0:
                    continue
                worst = max(worst, joint / prod, prod / joint)
    return worst


def sample_sequences(measure: CylinderMeasure, n: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent ``measure``-distributed words of the given length, as rows."""
    m = measure.order
    if length < m:
        full = sample_sequences(measure, n, m, rng)
        return full[:, :length]
    out = np.empty((n, length), dtype=np.int64)
    cum0 = np.cumsum(measure.initial)
    start = np.searchsorted(cum0, rng.random(n) * cum0[-1], side="right")
    start = np.minimum(start, len(measure.states) - 1)
    out[:, :m] = np.asarray(measure.states, dtype=np.int64)[start]
    table = block_index_table(measure)
    base = measure.alphabet_size
    codes = np.zeros(n, dtype=np.int64)
    for j in range(m):
        codes = codes * base + out[:, j]
    cum = np.cumsum(measure.transition, axis=1)
    modulus = base ** (m - 1) if m > 1 else 1
    for j in range(m, length):
        state = table[codes]
        u = rng.random(n)
        sym = (u[:, None] >= cum[state]).sum(axis=1)
        sym = np.minimum(sym, base - 1)
        out[:, j] = sym
        codes = (codes % modulus) * base + sym
    return out


def block_index_table(measure: CylinderMeasure) -> np.ndarray:
    """Map from base-|E| code of an ``order``-block to its state index (-1 if absent)."""
    base = measure.alphabet_size
    table = np.full(base ** measure.order, -1, dtype=np.int64)
    for i, s in enumerate(measure.states):
        code = 0
        for a in s:
            code = code * base + a
        table[code] = i
    return table
