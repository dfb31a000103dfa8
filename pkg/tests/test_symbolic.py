import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinannuli.gallery import golden_mean, markov, two_cycle
from thinannuli.symbolic import (BudgetExceededError, CylinderMeasure, SymbolicSpace, additivity_defect,
                                 admissible_words, finitely_irreducible_witness, sample_sequences,
                                 shift_invariance_defect, weak_independence_constant, word_self_overlap)

FULL2 = SymbolicSpace.full_shift(2)
GOLDEN = SymbolicSpace.golden_mean()


@st.composite
def spaces(draw, max_n=3):
    n = draw(st.integers(1, max_n))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    perm = draw(st.permutations(range(n)))
    # a permutation matrix guarantees no dead symbol
    A = np.array(bits).reshape(n, n) | np.eye(n, dtype=bool)[list(perm)]
    return SymbolicSpace(A)


def test_admissible_words_examples():
    assert admissible_words(FULL2, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert admissible_words(GOLDEN, 2) == [(0, 0), (0, 1), (1, 0)]
    assert admissible_words(GOLDEN, 0) == [()]


def test_admissible_words_budget():
    with pytest.raises(BudgetExceededError):
        admissible_words(SymbolicSpace.full_shift(4), 12, budget=1000)


def test_dead_symbol_rejected():
    with pytest.raises(ValueError):
        SymbolicSpace([[1, 0], [1, 0]])


def test_full_shift_flag():
    assert FULL2.is_full_shift and not GOLDEN.is_full_shift


@settings(max_examples=40, deadline=None)
@given(spaces(), st.integers(1, 8))
def test_word_count_matches_matrix_power(space, n):
    A = space.matrix.astype(object)
    expected = int(np.linalg.matrix_power(A, n - 1).sum()) if n > 1 else space.alphabet_size
    words = admissible_words(space, n)
    assert len(words) == expected == space.count_words(n)
    assert words == sorted(words)


def test_finitely_irreducible_examples():
    assert finitely_irreducible_witness(FULL2, 1) == frozenset({()})
    assert finitely_irreducible_witness(GOLDEN, 1) == frozenset({(), (0,)})
    assert finitely_irreducible_witness(SymbolicSpace([[1, 0], [0, 1]]), 5) is None


def test_self_overlap_examples():
    assert word_self_overlap(FULL2, (0, 0, 0)) == 1
    assert word_self_overlap(FULL2, (0, 1)) == 2
    assert word_self_overlap(FULL2, (0, 1, 0)) == 2


def _brute_overlap(space, w):
    # least k such that some admissible word of length k + |w| starts and ends with w
    n = len(w)
    for k in range(1, n + 1):
        for tail in itertools.product(range(space.alphabet_size), repeat=k):
            z = tuple(w) + tail
            if z[k:k + n] == tuple(w) and space.is_admissible(z):
                return k
    return n


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([FULL2, GOLDEN]), st.data())
def test_self_overlap_brute_force(space, data):
    n = data.draw(st.integers(1, 8))
    w = data.draw(st.sampled_from(admissible_words(space, n)))
    assert word_self_overlap(space, w) == _brute_overlap(space, w)


@pytest.mark.parametrize("measure", [
    CylinderMeasure.bernoulli([0.3, 0.7]),
    CylinderMeasure.bernoulli([0.2, 0.5, 0.3]),
    golden_mean().measure,
    two_cycle().measure,
    markov().measure,
])
def test_gallery_measure_additivity(measure):
    assert measure.mass(()) == 1
    assert additivity_defect(measure, 10) <= 1e-12
    assert shift_invariance_defect(measure, 8) <= 1e-10


def test_bernoulli_independence_constant_is_one():
    assert weak_independence_constant(CylinderMeasure.bernoulli([0.3, 0.7]), 6) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=2, max_size=3))
def test_weak_independence_bounds_hold(w):
    P = np.outer(np.ones(len(w)), np.array(w) / sum(w)) * 0.5 + np.eye(len(w)) * 0.5
    m = CylinderMeasure.markov(P)
    C = weak_independence_constant(m, 4)
    for a in admissible_words(m.space, 2):
        for b in admissible_words(m.space, 2):
            ab = m.mass(a + b)
            assert m.mass(a) * m.mass(b) / C <= ab * (1 + 1e-12)
            assert ab <= C * m.mass(a) * m.mass(b) * (1 + 1e-12)


def test_sampler_frequencies():
    m = CylinderMeasure.bernoulli([0.25, 0.75])
    seqs = sample_sequences(m, 20_000, 3, np.random.default_rng(0))
    assert abs(np.mean(seqs[:, 0] == 0) - 0.25) < 0.02
    assert seqs.shape == (20_000, 3)
