"""Truncated multivariate Taylor expansions ("jets") at a point.

A :class:`Jet` stores normalized coefficients f^{(nu)}(x)/nu! for all
|nu| <= order, densely, in graded-lex order. Coefficient arrays may carry
leading batch dimensions, so one Jet can hold the expansions of a function
at a whole grid of points at once; all arithmetic broadcasts over them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Real
from typing import Sequence

import numpy as np

from .multiindex import index_table, indices_up_to, mfactorial

BASE_POINT_TOL = 1e-12


def as_exponent(mu):
    """Parse an exponent; decimal strings and ints become exact Fractions."""
    if isinstance(mu, (Fraction, int)):
        return Fraction(mu)
    if isinstance(mu, str):
        return Fraction(mu)
    if isinstance(mu, Real):
        return float(mu)
    raise TypeError(f"unsupported exponent {mu!r}")


def falling_factorial(mu, k: int):
    """mu (mu-1) ... (mu-k+1); exact when mu is a Fraction."""
    out = Fraction(1) if isinstance(mu, Fraction) else 1.0
    for j in range(k):
        out *= mu - j
    return out


@lru_cache(maxsize=None)
def _layout(m: int, r: int):
    idx = indices_up_to(m, r)
    table = index_table(m, r)
    fact = np.array([float(mfactorial(nu)) for nu in idx])
    degs = np.array([sum(nu) for nu in idx])
    ii, jj, tt = [], [], []
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            if degs[i] + degs[j] <= r:
                ii.append(i)
                jj.append(j)
                tt.append(table[tuple(x + y for x, y in zip(a, b))])
    order = np.argsort(tt, kind="stable")
    ii, jj, tt = np.array(ii)[order], np.array(jj)[order], np.array(tt)[order]
    starts = np.flatnonzero(np.r_[True, tt[1:] != tt[:-1]])
    return idx, table, fact, degs, ii, jj, starts


@dataclass(frozen=True, eq=False)
class Jet:
    """Truncated Taylor expansion of a scalar function at ``point``.

    ``point`` has shape ``batch + (m,)`` and ``coeffs`` shape ``batch + (K,)``
    with K the number of multi-indices of degree <= ``order`` in m variables.
    """

    point: np.ndarray
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape[-1] != len(indices_up_to(self.m, self.order)):
            raise ValueError("coefficient array does not match (m, order)")

    @property
    def m(self) -> int:
        return self.point.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    @property
    def indices(self) -> tuple:
        return indices_up_to(self.m, self.order)

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def coeff(self, nu) -> np.ndarray:
        return self.coeffs[..., index_table(self.m, self.order)[tuple(nu)]]

    def derivative(self, nu) -> np.ndarray:
        return self.coeff(nu) * mfactorial(nu)

    def derivatives(self) -> np.ndarray:
        """All f^{(nu)} in graded-lex order, shape ``batch + (K,)``."""
        return self.coeffs * _layout(self.m, self.order)[2]

    def degrees(self) -> np.ndarray:
        return _layout(self.m, self.order)[3]

    # construction

    @classmethod
    def constant(cls, c, point, order: int) -> "Jet":
        point = np.asarray(point, dtype=float)
        K = len(indices_up_to(point.shape[-1], order))
        coeffs = np.zeros(point.shape[:-1] + (K,))
        coeffs[..., 0] = c
        return cls(point, order, coeffs)

    @classmethod
    def variable(cls, i: int, point, order: int) -> "Jet":
        point = np.asarray(point, dtype=float)
        m = point.shape[-1]
        jet = cls.constant(point[..., i], point, order)
        if order >= 1:
            e = tuple(int(j == i) for j in range(m))
            jet.coeffs[..., index_table(m, order)[e]] = 1.0
        return jet

    @classmethod
    def identity(cls, point, order: int) -> list:
        point = np.asarray(point, dtype=float)
        return [cls.variable(i, point, order) for i in range(point.shape[-1])]

    def _like(self, coeffs) -> "Jet":
        return Jet(self.point, self.order, coeffs)

    def _check(self, other: "Jet"):
        if self.order != other.order or self.m != other.m:
            raise ValueError("jets have different order or dimension")
        if self.point is other.point:
            return
        if not np.allclose(self.point, other.point, rtol=0, atol=BASE_POINT_TOL):
            raise ValueError("jets are taken at different base points")

    # arithmetic

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self._like(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[..., 0] += other
        return self._like(c)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self._like(self.coeffs * np.asarray(other)[..., None])
        self._check(other)
        _, _, _, _, ii, jj, starts = _layout(self.m, self.order)
        prod = self.coeffs[..., ii] * other.coeffs[..., jj]
        return self._like(np.add.reduceat(prod, starts, axis=-1))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * jet_reciprocal(other)
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return jet_reciprocal(self) * other

    def __pow__(self, mu):
        return jet_power(self, mu)

    def scaled(self, factor) -> "Jet":
        """Jet of y -> f(factor * y) re-expanded at point/factor (used by charts)."""
        degs = self.degrees()
        return Jet(self.point / factor, self.order, self.coeffs * float(factor) ** degs)

    def __repr__(self):
        return f"Jet(m={self.m}, order={self.order}, batch={self.batch_shape})"


def jet_add(a: Jet, b: Jet) -> Jet:
    return a + b


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def _series(u: Jet, coeffs: Sequence) -> Jet:
    """Horner evaluation of sum_k coeffs[k] (u - u0)^k, truncated."""
    h = u - u.value
    out = Jet.constant(coeffs[-1], u.point, u.order)
    for c in reversed(coeffs[:-1]):
        out = out * h + c
    return out


def jet_exp(a: Jet) -> Jet:
    ea = np.exp(a.value)
    series = _series(a, [1.0 / math.factorial(k) for k in range(a.order + 1)])
    return series * ea


def jet_power(a: Jet, mu) -> Jet:
    """a^mu for a jet with strictly positive constant term.

    Expanded as a0^mu (1 + h/a0)^mu with exact binomial coefficients, which
    stays well scaled when a0 is tiny.
    """
    mu = as_exponent(mu)
    a0 = np.asarray(a.value)
    if np.any(~(a0 > 0)):
        if isinstance(mu, Fraction) and mu.denominator == 1 and mu >= 0:
            return _int_power(a, int(mu))
        raise ValueError("power of a non-positive argument")
    binoms = [float(falling_factorial(mu, k) / math.factorial(k)) for k in range(a.order + 1)]
    normalized = a / a0
    series = _series(normalized, binoms)
    return series * np.exp(float(mu) * np.log(a0))


def _int_power(a: Jet, n: int) -> Jet:
    out = Jet.constant(1.0, a.point, a.order)
    for _ in range(n):
        out = out * a
    return out


def jet_reciprocal(a: Jet) -> Jet:
    a0 = np.asarray(a.value)
    if np.any(a0 == 0) or not np.all(np.isfinite(a0)):
        raise ValueError("reciprocal of a jet with zero constant term")
    h = (a - a0) / a0
    series = _series(h + 1.0, [(-1.0) ** k for k in range(a.order + 1)])
    return series / a0


def jet_monomial(mu, x, r: int, coefficient=1.0) -> Jet:
    """Jet of coefficient * x^mu from exact falling factorials.

    coeffs[nu] = coefficient * c(nu, mu) x^{mu - nu} / nu! with
    c(nu, mu) = prod_i mu_i (mu_i - 1) ... (mu_i - nu_i + 1).
    """
    x = np.asarray(x, dtype=float)
    mu = [as_exponent(e) for e in mu]
    if x.shape[-1] != len(mu):
        raise ValueError("exponent vector and point have different lengths")
    if np.any(x <= 0):
        raise ValueError("monomial jets need strictly positive coordinates")
    m = len(mu)
    idx = indices_up_to(m, r)
    logx = np.log(x)
    coeffs = np.empty(x.shape[:-1] + (len(idx),))
    for col, nu in enumerate(idx):
        c = 1
        for mi, ni in zip(mu, nu):
            c *= falling_factorial(mi, ni) / math.factorial(ni)
        expo = sum((float(mi) - ni) * logx[..., i] for i, (mi, ni) in enumerate(zip(mu, nu))) if m else 0.0
        coeffs[..., col] = float(c) * np.exp(expo) if c != 0 else 0.0
    return Jet(x, r, coeffs * np.asarray(coefficient, dtype=float)[..., None])


def monomial_of_jets(jets: Sequence[Jet], mu, coefficient=1.0, template: Jet | None = None) -> Jet:
    """coefficient * prod_i jets[i]^mu[i], composed through jets (all positive)."""
    mu = [as_exponent(e) for e in mu]
    if len(jets) != len(mu):
        raise ValueError("one exponent per inner jet required")
    base = template if template is not None else jets[0]
    out = Jet.constant(1.0, base.point, base.order)
    logs = 0.0
    for u, e in zip(jets, mu):
        if e == 0:
            continue
        u0 = np.asarray(u.value)
        if np.any(~(u0 > 0)):
            raise ValueError("monomial of a non-positive argument")
        binoms = [float(falling_factorial(e, k) / math.factorial(k)) for k in range(u.order + 1)]
        out = out * _series(u / u0, binoms)
        logs = logs + float(e) * np.log(u0)
    return out * (np.asarray(coefficient, dtype=float) * np.exp(logs))


def jet_compose(outer: Jet, inner: Sequence[Jet], template: Jet | None = None) -> Jet:
    """Jet of f o g from the jet of f at g(x) and the jets of the components of g at x.

    Implemented as truncated power-series substitution
    f(g0 + h) = sum_lam c_lam h^lam.
    """
    d = len(inner)
    if outer.m != d:
        raise ValueError(f"outer jet has {outer.m} variables but {d} inner jets were given")
    if d == 0:
        if template is None:
            raise ValueError("composition with no inner jets needs a template")
        c = np.broadcast_to(outer.value, template.batch_shape)
        return Jet.constant(c, template.point, template.order)
    r = inner[0].order
    if outer.order != r or any(g.order != r for g in inner):
        raise ValueError("outer and inner jets must have the same order")
    g0 = np.stack([np.broadcast_to(g.value, inner[0].batch_shape) for g in inner], axis=-1)
    if not np.allclose(outer.point, g0, rtol=0, atol=BASE_POINT_TOL):
        raise ValueError("outer base point differs from the inner constant terms")
    hs = [g - g.value for g in inner]
    powers = []
    for h in hs:
        p = [None, h]
        for _ in range(2, r + 1):
            p.append(p[-1] * h)
        powers.append(p)
    out_coeffs = np.zeros(inner[0].coeffs.shape)
    out_coeffs[..., 0] = outer.value
    for col, lam in enumerate(outer.indices):
        if col == 0:
            continue
        term = None
        for i, k in enumerate(lam):
            if k:
                term = powers[i][k] if term is None else term * powers[i][k]
        out_coeffs = out_coeffs + term.coeffs * outer.coeffs[..., col][..., None]
    return Jet(inner[0].point, r, out_coeffs)
