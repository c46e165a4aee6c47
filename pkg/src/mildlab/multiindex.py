"""Multi-indices, the graded-lex order and Faà di Bruno combinatorics.

Multi-indices are plain tuples of non-negative ints. Everything here is exact:
coefficients are :class:`fractions.Fraction` and only become floats at the
final multiply in :func:`faa_di_bruno`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

MultiIndex = tuple


def degree(nu: Sequence[int]) -> int:
    return sum(nu)


def mfactorial(nu: Sequence[int]) -> int:
    """nu! = nu_1! ... nu_m! as an exact integer."""
    return math.prod(math.factorial(n) for n in nu)


def _check_index(nu):
    if any(n < 0 for n in nu):
        raise ValueError(f"multi-index has negative entries: {nu}")


def lex_precedes(a: Sequence[int], b: Sequence[int]) -> bool:
    """True iff ``a`` comes strictly before ``b``: lower degree first, ties broken lexicographically."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    da, db = sum(a), sum(b)
    if da != db:
        return da < db
    return tuple(a) < tuple(b)


def graded_key(nu: Sequence[int]):
    return (sum(nu), tuple(nu))


@lru_cache(maxsize=None)
def indices_of_degree(m: int, n: int) -> tuple:
    """All multi-indices in N^m of total degree n, in lexicographic order."""
    if m == 0:
        return ((),) if n == 0 else ()
    out = []
    for c in itertools.combinations(range(n + m - 1), m - 1):
        # stars and bars
        parts, prev = [], -1
        for p in c:
            parts.append(p - prev - 1)
            prev = p
        parts.append(n + m - 1 - prev - 1)
        out.append(tuple(parts))
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def indices_up_to(m: int, r: int) -> tuple:
    """All multi-indices in N^m with |nu| <= r in graded-lex order."""
    return tuple(nu for n in range(r + 1) for nu in indices_of_degree(m, n))


@lru_cache(maxsize=None)
def index_table(m: int, r: int) -> dict:
    """Map multi-index -> dense rank in :func:`indices_up_to`."""
    return {nu: i for i, nu in enumerate(indices_up_to(m, r))}


def leq(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b))


def add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


@dataclass(frozen=True)
class PartitionTerm:
    """One element (s; k_1..k_s; l_1..l_s) of p_s(nu, lam)."""

    k: tuple
    l: tuple

    @property
    def s(self) -> int:
        return len(self.k)

    def sort_key(self):
        return (self.s, tuple(itertools.chain.from_iterable(self.l + self.k)))


@lru_cache(maxsize=None)
def _nonzero_below(nu: tuple) -> tuple:
    cands = [l for l in itertools.product(*(range(n + 1) for n in nu)) if any(l)]
    return tuple(sorted(cands, key=graded_key))


@lru_cache(maxsize=None)
def _terms_by_lambda(nu: tuple, d: int) -> dict:
    # every l_j satisfies l_j <= nu since |k_j| >= 1; used as pruning only
    cands = _nonzero_below(nu)
    out = {}

    def rec(start, rem_nu, ks, ls):
        if not any(rem_nu):
            lam = tuple(map(sum, zip(*ks)))
            out.setdefault(lam, []).append(PartitionTerm(tuple(ks), tuple(ls)))
            return
        for ci in range(start, len(cands)):
            l = cands[ci]
            if not leq(l, rem_nu):
                continue
            c = 1
            while True:
                used = tuple(c * x for x in l)
                if not leq(used, rem_nu):
                    break
                rest = sub(rem_nu, used)
                for k in indices_of_degree(d, c):
                    ks.append(k)
                    ls.append(l)
                    rec(ci + 1, rest, ks, ls)
                    ks.pop()
                    ls.pop()
                c += 1

    if any(nu) and d > 0:
        rec(0, nu, [], [])
    return {lam: tuple(sorted(ts, key=PartitionTerm.sort_key)) for lam, ts in out.items()}


def enumerate_partitions(nu: Sequence[int], lam: Sequence[int]) -> list[PartitionTerm]:
    """All terms of p_s(nu, lam), every s pooled, in canonical order.

    ``nu`` lives in N^e (the inner variables), ``lam`` in N^d (the outer
    variables). Returns ``[]`` when ``|lam| == 0`` or ``|lam| > |nu|``.
    """
    nu, lam = tuple(nu), tuple(lam)
    _check_index(nu)
    _check_index(lam)
    if sum(lam) == 0 or sum(lam) > sum(nu):
        return []
    return list(_terms_by_lambda(nu, len(lam)).get(lam, ()))


def term_coefficient(nu, term: PartitionTerm) -> Fraction:
    """nu! / prod_j (k_j! (l_j!)^{|k_j|}) exactly."""
    den = 1
    for k, l in zip(term.k, term.l):
        den *= mfactorial(k) * mfactorial(l) ** sum(k)
    return Fraction(mfactorial(nu), den)


@lru_cache(maxsize=None)
def faa_di_bruno_table(nu: tuple, d: int) -> tuple:
    """Flattened Faà di Bruno terms for ``nu`` with a d-dimensional outer function.

    Returns ``(lams, coeffs, factors)``: for each term the outer index, the exact
    coefficient and a tuple of ``(component, l)`` factors, one per unit power.
    """
    lams, coeffs, factors = [], [], []
    by_lam = _terms_by_lambda(nu, d)
    for n in range(1, sum(nu) + 1):
        for lam in indices_of_degree(d, n):
            for term in by_lam.get(lam, ()):
                fac = []
                for k, l in zip(term.k, term.l):
                    for comp, power in enumerate(k):
                        fac.extend([(comp, l)] * power)
                lams.append(lam)
                coeffs.append(term_coefficient(nu, term))
                factors.append(tuple(fac))
    return tuple(lams), tuple(coeffs), tuple(factors)


def faa_di_bruno(outer_derivs: Mapping, inner_derivs: Sequence[Mapping], nu: Sequence[int],
                 return_magnitude: bool = False):
    """Evaluate (f o g)^{(nu)} from derivative tables.

    ``outer_derivs[lam]`` holds f^{(lam)}(g(x)) and ``inner_derivs[i][l]`` holds
    g_i^{(l)}(x). For ``|nu| = 0`` the value f(g(x)) is returned. With
    ``return_magnitude`` the sum of absolute term values is returned as well,
    which bounds the floating-point error of the result.
    """
    nu = tuple(nu)
    _check_index(nu)
    d = len(inner_derivs)
    if sum(nu) == 0:
        val = float(_lookup(outer_derivs, (0,) * d, "outer"))
        return (val, abs(val)) if return_magnitude else val
    lams, coeffs, factors = faa_di_bruno_table(nu, d)
    total, mag = 0.0, 0.0
    for lam, c, fac in zip(lams, coeffs, factors):
        prod = float(_lookup(outer_derivs, lam, "outer"))
        for comp, l in fac:
            prod *= _lookup(inner_derivs[comp], l, f"inner[{comp}]")
        term = float(c) * prod
        total += term
        mag += abs(term)
    return (total, mag) if return_magnitude else total


def _lookup(table, key, name):
    try:
        return table[key]
    except KeyError:
        raise KeyError(f"missing {name} derivative for index {key}") from None


def derivative_table(values: np.ndarray, m: int, r: int) -> dict:
    """Turn a dense derivative vector (graded-lex) into a dict keyed by multi-index."""
    return {nu: values[..., i] for i, nu in enumerate(indices_up_to(m, r))}
