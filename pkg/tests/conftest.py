import itertools
from fractions import Fraction

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


class PathOracle:
    """Every state path ``x_0..x_k`` of a chain, with transition-product weights, for each ``k``."""

    def __init__(self, P):
        self.P = np.asarray(P, dtype=float)
        self.n = self.P.shape[0]
        self._cache = {}

    def paths(self, k):
        if k not in self._cache:
            idx = np.arange(self.n ** (k + 1))
            paths = np.stack(np.unravel_index(idx, (self.n,) * (k + 1)), axis=1).astype(np.int8)
            w = np.ones(idx.size)
            for j in range(k):
                w *= self.P[paths[:, j], paths[:, j + 1]]
            self._cache[k] = (paths, w)
        return self._cache[k]

    def survival(self, pi, U, k_max):
        """Entry and return survival ``s_k`` for ``k = 1..k_max`` by summing over every path."""
        pi = np.asarray(pi, dtype=float)
        U = sorted(U)
        mu = pi[U].sum()
        entry, ret = [], []
        for k in range(1, k_max + 1):
            paths, w = self.paths(k)
            prob = pi[paths[:, 0]] * w
            avoid = ~np.isin(paths[:, 1:], U).any(axis=1)
            entry.append(float(np.sum(prob[avoid])))
            ret.append(float(np.sum(prob[avoid & np.isin(paths[:, 0], U)])) / mu)
        return entry, ret

    def b(self, pi, U, N):
        """``sup_V |mu_U(x_N in V) - mu(x_0 in V)|`` with V ranging over every set of states."""
        pi = np.asarray(pi, dtype=float)
        U = sorted(U)
        start = np.zeros(self.n)
        start[U] = pi[U] / pi[U].sum()
        paths, w = self.paths(N)
        prob = start[paths[:, 0]] * w
        law = np.array([np.sum(prob[paths[:, N] == j]) for j in range(self.n)])
        best = 0.0
        for size in range(self.n + 1):
            for V in itertools.combinations(range(self.n), size):
                V = list(V)
                best = max(best, abs(law[V].sum() - pi[V].sum()))
        return best


def exhaustive_tab(ratios, probs, A, B, depth):
    """Exact ``mu(T_A^B)`` for a similarity IFS on [0, 1] by enumerating every depth-``depth`` word."""
    total = Fraction(0)
    for w in itertools.product(range(len(ratios)), repeat=depth):
        d, m, ok = Fraction(1), Fraction(1), not A < 1 < B
        for e in w:
            d *= ratios[e]
            m *= probs[e]
            if A < d < B:
                ok = False
        if ok:
            total += m
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
