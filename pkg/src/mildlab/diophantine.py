"""Rational points of bounded height and explicit hypersurface covers.

Membership is decided in exact rational arithmetic only. Covers are built from
exact kernels of monomial evaluation matrices: any D - 1 points admit a nonzero
polynomial of degree <= d through them, with D the number of monomials.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .multiindex import indices_up_to

Predicate = Callable[[tuple], bool]


def _frac(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, int):
        return Fraction(q)
    if isinstance(q, str):
        return Fraction(q)
    raise TypeError(f"not an exact rational: {q!r}")


@dataclass(frozen=True)
class RationalPoint:
    coords: tuple

    def __post_init__(self):
        c = tuple(_frac(q) for q in self.coords)
        for q in c:
            if not 0 < q < 1:
                raise ValueError(f"coordinate {q} not in (0,1)")
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def height(self) -> int:
        return height(self)

    def __str__(self):
        return "(" + ", ".join(str(q) for q in self.coords) + ")"


def height(q) -> int:
    """max(|a|, |b|) over the coordinates a/b in lowest terms."""
    coords = q.coords if isinstance(q, RationalPoint) else (q if isinstance(q, (tuple, list)) else (q,))
    return max(max(abs(c.numerator), c.denominator) for c in map(_frac, coords))


def farey_interior(H: int) -> list[Fraction]:
    """All a/b in (0,1) with b <= H, lowest terms, ascending."""
    out = [Fraction(a, b) for b in range(2, H + 1) for a in range(1, b) if math.gcd(a, b) == 1]
    return sorted(out)


def farey_count(H: int) -> int:
    """sum_{b=2}^H phi(b) via a totient sieve."""
    if H < 2:
        return 0
    phi = list(range(H + 1))
    for p in range(2, H + 1):
        if phi[p] == p:
            for k in range(p, H + 1, p):
                phi[k] -= phi[k] // p
    return sum(phi[2:])


class _Exact(Fraction):
    """Coordinate handed to predicates: refuses to become or meet a float."""

    def __float__(self):
        raise TypeError("membership must be decided in exact arithmetic")

    def _guard(self, other):
        if isinstance(other, float):
            raise TypeError("membership must be decided in exact arithmetic")

    def __eq__(self, other):
        self._guard(other)
        return super().__eq__(other)

    def __lt__(self, other):
        self._guard(other)
        return super().__lt__(other)

    def __le__(self, other):
        self._guard(other)
        return super().__le__(other)

    def __gt__(self, other):
        self._guard(other)
        return super().__gt__(other)

    def __ge__(self, other):
        self._guard(other)
        return super().__ge__(other)

    __hash__ = Fraction.__hash__


def _decide(pred: Predicate, pt) -> bool:
    v = pred(tuple(_Exact(q) for q in pt))
    if not isinstance(v, bool):
        raise TypeError("membership predicate must return an exact bool, got "
                        f"{type(v).__name__}; floating point membership is not allowed")
    return v


def enumerate_points(pred: Predicate, H: int, n: int) -> list[RationalPoint]:
    """X(Q, H): every q in (0,1)^n with H(q) <= H and pred(q), in lexicographic order."""
    if H < 2:
        return []
    axis = farey_interior(H)
    return [RationalPoint(p) for p in itertools.product(axis, repeat=n) if _decide(pred, p)]


@dataclass(frozen=True)
class PolyGraph:
    """The graph y = P(x) of a polynomial with rational coefficients, as a set in (0,1)^2."""

    coeffs: tuple  # P = sum c_k x^k

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(_frac(c) for c in self.coeffs))

    def __call__(self, p) -> bool:
        x, y = p
        return sum(c * x ** k for k, c in enumerate(self.coeffs)) == y

    def points(self, H: int) -> list[RationalPoint]:
        """Same set as enumerate_points, walking abscissae instead of the square."""
        out = []
        for x in farey_interior(H):
            y = sum(c * x ** k for k, c in enumerate(self.coeffs))
            if 0 < y < 1 and height((y,)) <= H:
                out.append(RationalPoint((x, y)))
        return out


def full_square(p) -> bool:
    return True


FIXTURES = {
    "parabola": (PolyGraph((0, 0, 1)), 1, 2),
    "square": (full_square, 2, 2),
}


def degree_bound(H, m: int, n: int) -> int:
    """floor(log(H)^{m/(n-m)}), natural log."""
    if n <= m:
        raise ValueError("need n > m")
    if m < 1:
        raise ValueError("need m >= 1")
    if not H > math.e:
        raise ValueError("need H > e")
    return math.floor(math.log(H) ** (m / (n - m)))


def c2_exponent(m: int, n: int) -> Fraction:
    if n <= m:
        raise ValueError("need n > m")
    return Fraction(2 * m * n, n - m)


def monomials(n: int, d: int) -> list[tuple]:
    return list(indices_up_to(n, d))


def _eval_monomial(mu, q) -> Fraction:
    v = Fraction(1)
    for e, c in zip(mu, q):
        if e:
            v *= c ** e
    return v


def nullspace_vector(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[Fraction] | None:
    """A nonzero exact kernel vector of the matrix, or None if the kernel is trivial."""
    M = [list(map(Fraction, r)) for r in rows]
    pivots = []
    row = 0
    for col in range(ncols):
        piv = next((i for i in range(row, len(M)) if M[i][col] != 0), None)
        if piv is None:
            continue
        M[row], M[piv] = M[piv], M[row]
        p = M[row][col]
        M[row] = [v / p for v in M[row]]
        for i in range(len(M)):
            if i != row and M[i][col] != 0:
                f = M[i][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[row])]
        pivots.append(col)
        row += 1
        if row == len(M):
            break
    free = next((c for c in range(ncols) if c not in pivots), None)
    if free is None:
        return None
    v = [Fraction(0)] * ncols
    v[free] = Fraction(1)
    for i, pc in enumerate(pivots):
        v[pc] = -M[i][free]
    # clear denominators for readable output
    den = math.lcm(*(x.denominator for x in v))
    g = math.gcd(*(int(x * den) for x in v))
    return [x * den / g for x in v]


@dataclass
class HypersurfaceCover:
    degree: int
    n: int
    monomials: list
    hypersurfaces: list = field(default_factory=list)
    assignment: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.hypersurfaces)

    def evaluate(self, k: int, q) -> Fraction:
        return sum(c * _eval_monomial(mu, q) for c, mu in zip(self.hypersurfaces[k], self.monomials))

    def verify(self, points) -> bool:
        """Every point is an exact zero of its assigned nonzero polynomial."""
        if any(all(c == 0 for c in h) for h in self.hypersurfaces):
            return False
        return all(self.evaluate(k, p.coords) == 0 for p, k in zip(points, self.assignment))

    def polynomial_str(self, k: int) -> str:
        names = [f"x{i + 1}" for i in range(self.n)]
        terms = []
        for c, mu in zip(self.hypersurfaces[k], self.monomials):
            if c:
                mono = "*".join(f"{v}^{e}" if e > 1 else v for v, e in zip(names, mu) if e)
                terms.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(terms)


def hypersurface_cover(points: Sequence[RationalPoint], d: int, n: int,
                       exact_fit: bool = True) -> HypersurfaceCover:
    """Cover the points by degree <= d hypersurfaces.

    First a single hypersurface through all points is tried at degrees 1..d;
    otherwise points are chunked greedily D - 1 at a time.
    """
    if d < 1:
        raise ValueError("degree must be >= 1")
    pts = list(points)
    mons = monomials(n, d)
    cover = HypersurfaceCover(d, n, mons)
    if not pts:
        return cover
    if exact_fit:
        for e in range(1, d + 1):
            sub = monomials(n, e)
            v = nullspace_vector([[_eval_monomial(mu, p.coords) for mu in sub] for p in pts], len(sub))
            if v is not None:
                lookup = dict(zip(sub, v))
                cover.hypersurfaces.append([lookup.get(mu, Fraction(0)) for mu in mons])
                cover.assignment = [0] * len(pts)
                return cover
    D = len(mons)
    for start in range(0, len(pts), D - 1):
        chunk = pts[start:start + D - 1]
        v = nullspace_vector([[_eval_monomial(mu, p.coords) for mu in mons] for p in chunk], D)
        assert v is not None, "underdetermined system must have a kernel"
        cover.assignment.extend([len(cover.hypersurfaces)] * len(chunk))
        cover.hypersurfaces.append(v)
    return cover


def count_vs_bound(pred, heights: Sequence[int], m: int, n: int, points_fn=None) -> dict:
    """|X(Q,H)|, cover size at degree_bound(H) and log(H)^{c2} over a height sweep.

    c1 is fixed as cover/log(H)^{c2} at the smallest H (at least the value
    making a single hypersurface admissible) and every row is tested against it.
    """
    c2 = c2_exponent(m, n)
    rows = []
    for H in sorted(heights):
        pts = points_fn(H) if points_fn is not None else enumerate_points(pred, H, n)
        d = degree_bound(H, m, n)
        cov = hypersurface_cover(pts, d, n)
        if not cov.verify(pts):
            raise AssertionError("cover polynomial does not vanish on an assigned point")
        rows.append({"H": H, "points": len(pts), "degree_d": d, "cover_size": cov.size,
                     "logH_pow_c2": math.log(H) ** float(c2)})
    if not rows:
        return {"c2": c2, "c1": 0.0, "rows": [], "pass": True}
    c1 = max(rows[0]["cover_size"], 1) / rows[0]["logH_pow_c2"]
    ok = all(r["cover_size"] <= c1 * r["logH_pow_c2"] * (1 + 1e-12) for r in rows)
    return {"c2": c2, "c1": c1, "rows": rows, "pass": ok}
