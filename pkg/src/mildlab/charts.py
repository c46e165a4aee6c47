"""C^r charts by uniform affine subdivision of (0,1)^m.

A map g with |g^(nu)| <= (A r)^|nu| |nu|! restricted to a cube of side 1/N and
rescaled to (0,1)^m has derivatives (A r / N)^|nu| |nu|!, so N = ceil(A r)
charts per axis give C^r norm at most 1. The sup-norm variant needs the extra
(r!)^{1/r} factor.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .jets import Jet
from .substitution import PhiR, composed_jets

NORM_MODES = ("crnorm", "supnorm")
REL_SAMPLES = (0.05, 0.5, 0.95)


def subdivision_factor(A: float, r: int, norm_mode: str = "crnorm") -> int:
    if r < 1:
        raise ValueError("r must be >= 1")
    if not A > 0:
        raise ValueError("A must be positive")
    if norm_mode == "crnorm":
        x = A * r
    elif norm_mode == "supnorm":
        x = A * r * math.factorial(r) ** (1.0 / r)
    else:
        raise ValueError(f"unknown norm mode {norm_mode!r}")
    # guard against 3.0000000000000004 style round-up
    return max(1, math.ceil(x - 1e-12))


@dataclass(frozen=True)
class Chart:
    offset: tuple
    scale: float
    norm_mode: str

    def embed(self, s) -> np.ndarray:
        return np.asarray(self.offset) + self.scale * np.asarray(s, dtype=float)

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        lo = np.asarray(self.offset)
        return np.all((y >= lo) & (y <= lo + self.scale), axis=-1)


def crnorm(jet: Jet) -> np.ndarray:
    """max over |nu| <= r of |g^(nu)| / |nu|!, per batch entry."""
    d = np.abs(jet.derivatives())
    fact = np.array([math.factorial(int(k)) for k in jet.degrees()], dtype=float)
    return np.max(d / fact, axis=-1)


def supnorm(jet: Jet) -> np.ndarray:
    return np.max(np.abs(jet.derivatives()), axis=-1)


JetFn = Callable[[np.ndarray, int], "Jet | list[Jet]"]


def composed_map(f, phi) -> JetFn:
    """The jet provider of f o phi on (0,1)^m."""
    return lambda pts, order: composed_jets(f, phi, pts, order)


def identity_map(m: int) -> JetFn:
    return lambda pts, order: list(Jet.identity(pts, order))


@dataclass
class ChartSet:
    charts: list
    N: int
    r: int
    norm_mode: str
    A: float
    worst_norm: float

    @property
    def count(self) -> int:
        return len(self.charts)

    @property
    def passed(self) -> bool:
        return self.worst_norm <= 1 + 1e-9

    def csv_row(self) -> dict:
        return {"r": self.r, "norm_mode": self.norm_mode, "N": self.N, "count": self.count,
                "worst_norm": self.worst_norm, "pass": self.passed}


def make_charts(mild_map: JetFn, A: float, r: int, norm_mode: str = "crnorm", m: int | None = None,
                check: bool = True) -> ChartSet:
    """N^m charts in row-major cube order, each checked at 3^m relative sample points.

    All cube samples are evaluated in one batch of the shared composed map; a
    chart's jet is that jet rescaled by 1/N.
    """
    if m is None:
        m = getattr(mild_map, "m", None)
        if m is None:
            raise ValueError("dimension m is required")
    N = subdivision_factor(A, r, norm_mode)
    h = 1.0 / N
    charts = [Chart(tuple(h * float(k) for k in c), h, norm_mode)
              for c in itertools.product(range(N), repeat=m)]
    worst = 0.0
    if check:
        rel = np.array(list(itertools.product(REL_SAMPLES, repeat=m)))
        offs = np.array([c.offset for c in charts])
        pts = (offs[:, None, :] + h * rel[None, :, :]).reshape(-1, m)
        out = mild_map(pts, r)
        jets = out if isinstance(out, list) else [out]
        norm = crnorm if norm_mode == "crnorm" else supnorm
        for j in jets:
            # chart(s) = g(offset + h s), so each derivative picks up h^|nu|
            local = Jet(j.point, j.order, j.coeffs * h ** j.degrees())
            worst = max(worst, float(np.max(norm(local))))
    return ChartSet(charts, N, r, norm_mode, A, worst)


def fixture_map(cell, f, r: int) -> JetFn:
    fn = composed_map(f, PhiR(cell, r))
    fn.m = cell.dim
    return fn


def covering_check(charts: list, grid) -> bool:
    """Every grid point lies in at least one closed cube."""
    grid = np.asarray(grid, dtype=float)
    hit = np.zeros(len(grid), dtype=bool)
    for c in charts:
        hit |= c.contains(grid)
    return bool(hit.all())
