import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mildlab import multiindex as mi
from oracles import bell, brute_partitions

index2 = st.tuples(st.integers(0, 4), st.integers(0, 4))


def test_lex_examples():
    assert mi.lex_precedes((1, 0), (0, 2))
    assert mi.lex_precedes((0, 2), (1, 1))
    assert not mi.lex_precedes((1, 1), (0, 2))
    assert not mi.lex_precedes((1, 1), (1, 1))


def test_lex_length_mismatch():
    with pytest.raises(ValueError):
        mi.lex_precedes((1,), (1, 0))


@given(index2, index2)
def test_lex_is_strict_total_order(a, b):
    if a == b:
        assert not mi.lex_precedes(a, b)
    else:
        assert mi.lex_precedes(a, b) != mi.lex_precedes(b, a)


@given(index2, index2, index2)
def test_lex_transitive(a, b, c):
    if mi.lex_precedes(a, b) and mi.lex_precedes(b, c):
        assert mi.lex_precedes(a, c)


def test_factorial_exact_for_large_entries():
    assert mi.mfactorial((30, 25)) == math.factorial(30) * math.factorial(25)
    assert mi.degree((3, 0, 2)) == 5


def test_negative_entry_rejected():
    with pytest.raises(ValueError):
        mi.enumerate_partitions((2, -1), (1, 0))


def test_enumerate_examples():
    (t,) = mi.enumerate_partitions((2,), (1,))
    assert (t.s, t.k, t.l) == (1, ((1,),), ((2,),))
    (t,) = mi.enumerate_partitions((3,), (2,))
    assert (t.s, t.k, t.l) == (2, ((1,), (1,)), ((1,), (2,)))
    assert mi.enumerate_partitions((2,), (3,)) == []
    assert mi.enumerate_partitions((2,), (0,)) == []


def _canon(terms):
    return {(t.k, t.l) for t in terms}


@pytest.mark.parametrize("m,nmax", [(1, 6), (2, 6), (3, 4)])
def test_partitions_match_brute_force(m, nmax):
    for n in range(1, nmax + 1):
        for nu in mi.indices_of_degree(m, n):
            oracle = brute_partitions(nu, m)
            for lam in mi.indices_up_to(m, n):
                got = mi.enumerate_partitions(nu, lam)
                assert _canon(got) == oracle.get(lam, set()), (nu, lam)
                assert len(got) == len(_canon(got))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=3).filter(lambda v: 0 < sum(v) <= 5))
def test_partition_term_invariants(nu):
    nu = tuple(nu)
    m = len(nu)
    for lam in mi.indices_up_to(m, sum(nu)):
        terms = mi.enumerate_partitions(nu, lam)
        assert terms == sorted(terms, key=mi.PartitionTerm.sort_key)
        for t in terms:
            assert all(sum(k) > 0 for k in t.k)
            assert all(mi.lex_precedes(a, b) for a, b in zip(t.l, t.l[1:]))
            assert tuple(map(sum, zip(*t.k))) == lam
            assert tuple(sum(sum(k) * l[i] for k, l in zip(t.k, t.l)) for i in range(m)) == nu


def test_outer_dimension_may_differ():
    # f of two variables composed with a curve: nu in N^1, lam in N^2
    terms = mi.enumerate_partitions((2,), (1, 1))
    assert _canon(terms) == {(((1, 1),), ((1,),))}


def test_coefficients_are_exact():
    nu = (3,)
    (t,) = mi.enumerate_partitions(nu, (2,))
    assert mi.term_coefficient(nu, t) == Fraction(3)


@pytest.mark.parametrize("n", range(1, 8))
def test_bell_column_sums(n):
    total = sum(mi.term_coefficient((n,), t) for lam in range(1, n + 1)
                for t in mi.enumerate_partitions((n,), (lam,)))
    assert total == bell(n)


def test_faa_x4():
    # f(y) = y^2, g(x) = x^2 at x = 1
    outer = {(0,): 1.0, (1,): 2.0, (2,): 2.0, (3,): 0.0}
    inner = [{(1,): 2.0, (2,): 2.0, (3,): 0.0}]
    assert mi.faa_di_bruno(outer, inner, (3,)) == 24.0


def test_faa_chain_rule():
    outer = {(0, 0): 0.0, (1, 0): 3.0, (0, 1): -2.0}
    inner = [{(1, 0): 5.0, (0, 1): 1.0}, {(1, 0): 7.0, (0, 1): 1.0}]
    assert mi.faa_di_bruno(outer, inner, (1, 0)) == 3.0 * 5.0 - 2.0 * 7.0


def test_faa_identity_inner():
    nu = (2, 1)
    outer = {l: float(i + 1) for i, l in enumerate(mi.indices_up_to(2, 3))}
    inner = [{l: float(l == e) for l in mi.indices_up_to(2, 3) if sum(l) > 0}
             for e in ((1, 0), (0, 1))]
    assert mi.faa_di_bruno(outer, inner, nu) == outer[nu]


def test_faa_missing_entry():
    with pytest.raises(KeyError, match="missing"):
        mi.faa_di_bruno({(0,): 1.0, (1,): 1.0}, [{(1,): 1.0}], (2,))


def test_faa_exp_exp_gives_bell():
    # d^4/dx^4 exp(e^x - 1) at 0 = B_4 = 15
    outer = {(k,): 1.0 for k in range(5)}
    inner = [{(k,): 1.0 for k in range(1, 5)}]
    assert mi.faa_di_bruno(outer, inner, (4,)) == pytest.approx(15.0, rel=1e-15)
