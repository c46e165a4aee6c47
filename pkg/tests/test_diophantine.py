import math
from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings, strategies as st

from mildlab.diophantine import (FIXTURES, PolyGraph, RationalPoint, c2_exponent, count_vs_bound,
                                 degree_bound, enumerate_points, farey_count, farey_interior,
                                 full_square, height, hypersurface_cover, monomials, nullspace_vector)
from mildlab.golden import load_golden

parabola = PolyGraph((0, 0, 1))


def test_height_examples():
    assert height(RationalPoint((Fr(1, 2), Fr(1, 4)))) == 4
    assert height((Fr(1, 2),)) == 2
    assert RationalPoint(("2/3", "3/5")).height == 5


def test_point_validation():
    with pytest.raises(ValueError):
        RationalPoint((Fr(3, 2),))
    with pytest.raises(TypeError):
        RationalPoint((0.5,))


def test_enumerate_examples():
    assert enumerate_points(parabola, 4, 2) == [RationalPoint((Fr(1, 2), Fr(1, 4)))]
    assert enumerate_points(full_square, 1, 2) == []
    pts = enumerate_points(full_square, 3, 2)
    assert len(pts) == 9
    assert {q for p in pts for q in p.coords} == {Fr(1, 2), Fr(1, 3), Fr(2, 3)}


def test_float_predicate_rejected():
    with pytest.raises(TypeError):
        enumerate_points(lambda p: float(p[0]) ** 2 == float(p[1]), 5, 2)
    with pytest.raises(TypeError):
        enumerate_points(lambda p: 1, 5, 1)


@pytest.mark.parametrize("H", [1, 2, 5, 13, 30])
def test_farey_completeness(H):
    brute = {Fr(a, b) for b in range(1, H + 1) for a in range(1, b)}
    assert farey_interior(H) == sorted(brute)
    assert farey_count(H) == len(brute)
    assert len(enumerate_points(full_square, H, 2)) == farey_count(H) ** 2 if H <= 13 else True


@pytest.mark.parametrize("H", [4, 10, 20])
def test_graph_fast_path_agrees(H):
    assert parabola.points(H) == enumerate_points(parabola, H, 2)


def test_degree_bound_examples():
    assert degree_bound(21, 1, 2) == 3
    assert degree_bound(3, 1, 2) == 1
    for bad in [(2, 1, 2), (10, 2, 2), (10, 3, 2), (10, 0, 2)]:
        with pytest.raises(ValueError):
            degree_bound(*bad)


def test_c2_examples():
    assert c2_exponent(1, 2) == 4
    assert c2_exponent(2, 3) == 12
    with pytest.raises(ValueError):
        c2_exponent(2, 2)


@given(st.integers(3, 10 ** 6), st.integers(1, 3), st.integers(1, 3))
def test_bounds_monotone(H, m, k):
    n = m + k
    assert degree_bound(H + 1, m, n) >= degree_bound(H, m, n)
    c2 = float(c2_exponent(m, n))
    assert math.log(H + 1) ** c2 >= math.log(H) ** c2


def test_monomial_count():
    for n, d in [(1, 3), (2, 1), (2, 3), (3, 2)]:
        assert len(monomials(n, d)) == math.comb(n + d, n)


def test_nullspace_exact():
    rows = [[Fr(1), Fr(2), Fr(3)], [Fr(0), Fr(1), Fr(1)]]
    v = nullspace_vector(rows, 3)
    assert any(v) and all(sum(a * b for a, b in zip(r, v)) == 0 for r in rows)
    assert nullspace_vector([[Fr(1), Fr(0)], [Fr(0), Fr(1)]], 2) is None


def test_cover_empty():
    assert hypersurface_cover([], 2, 2).size == 0


def test_cover_lines():
    pts = [RationalPoint(p) for p in [("1/2", "1/3"), ("1/5", "3/7"), ("2/3", "1/9"),
                                      ("1/4", "1/4"), ("5/6", "4/5")]]
    cov = hypersurface_cover(pts, 1, 2, exact_fit=False)
    assert cov.size == 3 and cov.verify(pts)
    assert max(cov.assignment.count(k) for k in range(3)) <= 2


def test_cover_parabola_single_curve():
    pts = parabola.points(50)
    d = degree_bound(50, 1, 2)
    cov = hypersurface_cover(pts, d, 2)
    assert d == 3 and cov.size == 1 and cov.verify(pts)
    # the curve found is x1^2 - x2 up to scaling
    h = cov.hypersurfaces[0]
    nz = {mu: c for mu, c in zip(cov.monomials, h) if c}
    assert set(nz) == {(2, 0), (0, 1)} and nz[(2, 0)] == -nz[(0, 1)]


def test_cover_degree_error():
    with pytest.raises(ValueError):
        hypersurface_cover([], 0, 2)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 20), st.integers(1, 20)), min_size=1, max_size=12),
       st.integers(1, 3))
def test_cover_soundness(raw, d):
    pts = [RationalPoint((Fr(a, 21), Fr(b, 23))) for a, b in raw]
    cov = hypersurface_cover(pts, d, 2)
    assert cov.verify(pts)
    if cov.size > 1:
        assert cov.size == math.ceil(len(pts) / (len(cov.monomials) - 1))


def test_count_vs_bound_parabola_golden():
    g = load_golden()["parabola"]
    heights = [int(h) for h in g["cover_sizes"]]
    out = count_vs_bound(parabola, heights, 1, 2, points_fn=parabola.points)
    assert out["pass"] and out["c2"] == 4
    assert {str(r["H"]): r["cover_size"] for r in out["rows"]} == g["cover_sizes"]
    assert out["c1"] >= 1 / math.log(10) ** 4


def test_count_vs_bound_empty_and_square():
    out = count_vs_bound(lambda p: False, [5, 10], 1, 2)
    assert out["pass"] and all(r["points"] == 0 and r["cover_size"] == 0 for r in out["rows"])
    pred, m, n = FIXTURES["square"]
    with pytest.raises(ValueError):
        count_vs_bound(pred, [5], m, n)


def test_float_comparison_rejected():
    with pytest.raises(TypeError):
        enumerate_points(lambda p: p[0] == 0.5, 3, 1)
