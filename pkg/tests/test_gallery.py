import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinannuli.gallery import (Branch, NonMarkovError, NonSummableError, build_system, cantor,
                                doubling_map_branches, farey_chain_derivative, farey_closed_derivative,
                                farey_induced_map, farey_parabolic_iterate, farey_weights, finite_measure_case,
                                gauss_truncated, golden_mean, induced_summable, list_systems, make_hyperbolic,
                                make_parabolic_farey, markov_partition_1d, two_ratio)
from thinannuli.symbolic import additivity_defect, shift_invariance_defect

PHI = (1 + math.sqrt(5)) / 2


def test_cantor_example():
    c = cantor()
    assert [m.ratio for m in c.ifs.maps] == [Fraction(1, 3)] * 2
    assert c.weak_independence == 1.0 and c.condition_b_sum == pytest.approx(3.0)


def test_golden_mean_condition_a():
    g = golden_mean()
    assert 1 <= g.weak_independence <= PHI**2 + 1e-12


def test_gauss_tail_and_condition_b():
    g = gauss_truncated(100)
    c = 6 / math.pi**2
    assert 0 < g.tail_mass <= c / 100
    # partial sum plus the midpoint integral of the remainder
    M = 200_000
    assert g.tail_mass == pytest.approx(c * (sum(n**-2 for n in range(101, M)) + 1 / (M - 0.5)), rel=1e-6)
    sums = [gauss_truncated(N).condition_b_sum for N in (100, 1000, 10_000)]
    assert sums[0] < sums[1] < sums[2] and sums[2] - sums[1] < sums[1] - sums[0]
    with pytest.raises(ValueError):
        gauss_truncated(10**4 + 1)
    with pytest.raises(NonSummableError):
        gauss_truncated(10, t=0.5)


def test_two_ratio_rejects_overlap():
    with pytest.raises(ValueError):
        two_ratio(Fraction(2, 3), Fraction(1, 2))


@pytest.mark.parametrize("name", sorted(set(list_systems()) - {"farey_induced"}))
def test_measures_consistent(name):
    s = make_hyperbolic(name)
    depth = 2 if s.space.alphabet_size > 10 else 5
    assert additivity_defect(s.measure, depth) <= 1e-12
    assert shift_invariance_defect(s.measure, depth) <= 1e-12


def test_markov_partition_examples():
    ifs, A = markov_partition_1d(doubling_map_branches())
    assert [m.ratio for m in ifs.maps] == [Fraction(1, 2)] * 2 and A.tolist() == [[1, 1], [1, 1]]
    tent = [Branch((0, Fraction(1, 3)), (0, 1), 3, 0), Branch((Fraction(1, 3), Fraction(2, 3)), (0, 1), -3, 2),
            Branch((Fraction(2, 3), 1), (0, 1), 3, -2)]
    ifs, A = markov_partition_1d(tent)
    assert [m.ratio for m in ifs.maps] == [Fraction(1, 3)] * 3 and A.min() == 1
    mixed = [Branch((0, Fraction(1, 4)), (0, Fraction(1, 2)), 2, 0),
             Branch((Fraction(1, 4), Fraction(1, 2)), (0, 1), 4, -1),
             Branch((Fraction(1, 2), 1), (0, 1), 2, -1)]
    ifs, A = markov_partition_1d(mixed)
    assert A.tolist() == [[1, 1, 0], [1, 1, 1], [1, 1, 1]]
    with pytest.raises(NonMarkovError) as exc:
        markov_partition_1d([Branch((0, Fraction(1, 2)), (0, Fraction(3, 4)), Fraction(3, 2), 0),
                             Branch((Fraction(1, 2), 1), (0, 1), 2, -1)])
    assert (exc.value.branch, exc.value.other) == (0, 1)


def test_farey_derivative_closed_form():
    n = 10
    assert farey_closed_derivative(n, 1.0) == pytest.approx(1 / 121, abs=1e-15)
    assert n**2 * farey_closed_derivative(n, 1.0) == pytest.approx(100 / 121)
    for n in (1, 2, 7, 50, 999, 10_000):
        for x in (0.1, 0.5, 1.0):
            assert abs(farey_chain_derivative(n, x) - farey_closed_derivative(n, x)) <= 1e-10
            y = x
            for _ in range(n):
                y = y / (1 + y)
            assert y == pytest.approx(farey_parabolic_iterate(n, x), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(9, 10**6))
def test_farey_asymptotic_window(n):
    v = n**2 * farey_closed_derivative(n, 1.0)
    assert 0.8 <= v <= 1.0 and v == pytest.approx((n / (1 + n)) ** 2, rel=1e-12)


def test_farey_induced_maps():
    for n in (0, 1, 5, 40):
        m = farey_induced_map(n)
        lo, hi = m.deriv_bounds
        xs = np.linspace(0, 1, 101)
        d = np.array([m.deriv(x) for x in xs])
        assert np.all(d >= lo - 1e-15) and np.all(d <= hi + 1e-15) and hi < 1
        # the block 1^n 2 is phi_1^n after phi_2
        assert m.func(0.3) == pytest.approx(farey_parabolic_iterate(n, (0.3 + 1) / 2), rel=1e-12)


def test_farey_parabolic_examples():
    spec, sys_ = make_parabolic_farey(0.8, N_trunc=50, gibbs=False)
    assert len(spec.symbols) == 51 and sys_.space.alphabet_size == 51
    spec, _ = make_parabolic_farey(0.8, N_trunc=1000, gibbs=False)
    M = 2_000_000
    partial = sum((2 / (n + 2) ** 2) ** 0.8 for n in range(1001, M)) + 2**0.8 * (M + 1.5) ** -0.6 / 0.6
    assert spec.tail == pytest.approx(partial, rel=1e-6)
    w, tail, total = farey_weights(0.8, 1000)
    assert w.sum() + tail == pytest.approx(total, rel=1e-12)
    with pytest.raises(NonSummableError):
        make_parabolic_farey(0.5)
    assert induced_summable(0.500001) and not induced_summable(0.5)
    assert finite_measure_case(0.8) == "a" and finite_measure_case(1.0) is None and finite_measure_case(0.4) is None


def test_farey_gibbs_build():
    _, s = make_parabolic_farey(0.8, N_trunc=20)
    assert additivity_defect(s.measure, 2) <= 1e-12
    assert s.tail_mass == pytest.approx(farey_weights(0.8, 20)[1] / farey_weights(0.8, 20)[2])


def test_build_system_coercion():
    s = build_system("two_ratio", {"r1": "1/3", "r2": "1/3"})
    assert [m.ratio for m in s.ifs.maps] == [Fraction(1, 3)] * 2
    assert build_system("farey_induced", {"t": 0.8, "N_trunc": 10, "gibbs": False}).space.alphabet_size == 11
    with pytest.raises(KeyError):
        make_hyperbolic("nope")
    assert list_systems()[-1] == "farey_induced"
