"""Mildness parameters, their closure rules, and sampled certificates.

A function is (A, B, C)-mild up to order r when every derivative with
|nu| <= r obeys |f^{(nu)}| <= B A^{|nu|} |nu|!^{1+C}. Certificates here are
checked at sample points only; reports say so.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import multiindex as mi
from ._parallel import map_points
from .jets import Jet

TOL = 1e-9


@dataclass(frozen=True)
class MildParams:
    A: float
    B: float
    C: float = 0.0
    order: float = math.inf

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError(f"mildness needs A > 0 and B > 0, got A={self.A}, B={self.B}")
        if self.C < 0:
            raise ValueError(f"mildness needs C >= 0, got {self.C}")
        if self.order < 0:
            raise ValueError("order must be non-negative")

    def bound(self, n):
        """B A^n n!^{1+C}, vectorized over the total degree n."""
        n = np.asarray(n, dtype=float)
        logb = math.log(self.B) + n * math.log(self.A) + (1 + self.C) * _lgamma(n + 1)
        return np.exp(logb)

    def to_json(self):
        order = None if math.isinf(self.order) else int(self.order)
        return {"A": self.A, "B": self.B, "C": self.C, "order": order}


_lgamma = np.vectorize(math.lgamma, otypes=[float])


def unify(p: MildParams, q: MildParams) -> MildParams:
    """Largest A, B, C and smallest order of the two."""
    return MildParams(max(p.A, q.A), max(p.B, q.B), max(p.C, q.C), min(p.order, q.order))


def mild_sum(p: MildParams, q: MildParams) -> MildParams:
    u = unify(p, q)
    return replace(u, B=2 * u.B)


def mild_product(p: MildParams, q: MildParams) -> MildParams:
    u = unify(p, q)
    return replace(u, A=2 * u.A, B=u.B * u.B)


def mild_compose(f: MildParams, g: MildParams, m: int) -> MildParams:
    """Parameters of f o g where g maps an m-dimensional domain into that of f.

    Only C and the order are unified; A and B of the two factors enter the
    formula A_g (m B_g A_f + 1)^{1+C} separately.
    """
    if m < 1:
        raise ValueError("inner dimension m must be >= 1")
    C = max(f.C, g.C)
    A = g.A * (m * g.B * f.A + 1) ** (1 + C)
    return MildParams(A, f.B, C, min(f.order, g.order))


def lemma_ab_closed_form(A1, B1, A2, B2, m: int, nu) -> float:
    """(m A1 B1 B2)/(m A1 B2 + 1) * (A2 (m A1 B2 + 1))^{|nu|} |nu|!."""
    n = sum(nu)
    q = m * A1 * B2 + 1
    return m * A1 * B1 * B2 / q * (A2 * q) ** n * math.factorial(n)


def lemma_ab_brute_force(A1, B1, A2, B2, m: int, nu) -> float:
    """The Faà di Bruno sum with f-derivatives B1 A1^|lam| |lam|! and
    g-derivatives B2 A2^|l| |l|!, enumerated term by term over lam in N^m."""
    nu = tuple(nu)
    lams, coeffs, factors = mi.faa_di_bruno_table(nu, m)
    total = 0.0
    for lam, c, fac in zip(lams, coeffs, factors):
        n = sum(lam)
        term = B1 * A1 ** n * math.factorial(n)
        for _, l in fac:
            dl = sum(l)
            term *= B2 * A2 ** dl * math.factorial(dl)
        total += float(c) * term
    return total


@dataclass
class VerificationReport:
    params: MildParams
    order: int
    samples: int
    worst_ratio: float
    worst_nu: tuple
    worst_point: tuple
    fitted_A_star: float
    passed: bool
    note: str = field(default="")

    @property
    def label(self) -> str:
        return f"verified at {self.samples} samples"

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "order": self.order,
            "samples": self.samples,
            "worst_ratio": self.worst_ratio,
            "worst_nu": list(self.worst_nu),
            "fitted_A_star": self.fitted_A_star,
            "pass": self.passed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def _derivatives(source, samples, order):
    if isinstance(source, Jet):
        jet = source
    else:
        jet = map_points(source, np.asarray(samples, dtype=float))
    if jet.order < order:
        raise ValueError(f"jets of order {jet.order} cannot certify order {order}")
    K = len(mi.indices_up_to(jet.m, order))
    derivs = jet.derivatives()[..., :K]
    return jet, derivs.reshape(-1, K), jet.degrees()[:K]


def verify_certificate(deriv_source: Callable | Jet, params: MildParams, samples, order: int,
                       tol: float = TOL) -> VerificationReport:
    """Check |f^{(nu)}(x)| <= B A^|nu| |nu|!^{1+C} at every sample and |nu| <= order.

    ``deriv_source`` maps an (n, m) array of points to a batched :class:`Jet`
    (or is such a Jet already). Non-finite derivatives count as violations.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empty sample set")
    order = int(min(order, params.order))
    jet, derivs, degs = _derivatives(deriv_source, samples, order)
    absd = np.abs(derivs)
    absd = np.where(np.isfinite(absd), absd, np.inf)
    ratios = absd / params.bound(degs)
    flat = int(np.argmax(ratios))
    si, ni = divmod(flat, ratios.shape[1])
    worst = float(ratios.flat[flat])
    a_star = fitted_A_star(absd, degs, params.B, params.C)
    points = samples.reshape(-1, samples.shape[-1])
    return VerificationReport(
        params=params, order=order, samples=len(points), worst_ratio=worst,
        worst_nu=mi.indices_up_to(jet.m, order)[ni], worst_point=tuple(points[si].tolist()),
        fitted_A_star=a_star, passed=bool(worst <= 1 + tol),
    )


def fitted_A_star(absd: np.ndarray, degs: np.ndarray, B: float, C: float = 0.0) -> float:
    """Smallest A with |f^{(nu)}| <= B A^|nu| |nu|!^{1+C} on all |nu| >= 1 entries."""
    mask = degs >= 1
    if not mask.any():
        return 0.0
    n = degs[mask].astype(float)
    scaled = absd[..., mask] / (B * np.exp((1 + C) * _lgamma(n + 1)))
    with np.errstate(divide="ignore"):
        vals = scaled ** (1.0 / n)
    return float(np.max(vals))


def fit_AB(q: np.ndarray, degs: np.ndarray) -> tuple[float, float]:
    """Fit (A, B) to normalized quantities q ~ B A^|nu|.

    B is the largest degree-0 entry (at least 1), then A the smallest value
    making every higher entry fit with that B.
    """
    q = np.abs(np.asarray(q, dtype=float))
    degs = np.asarray(degs)
    zero = degs == 0
    B = max(1.0, float(np.max(q[..., zero]))) if zero.any() else 1.0
    pos = ~zero
    if not pos.any():
        return 0.0, B
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (q[..., pos] / B) ** (1.0 / degs[pos])
    vals = np.where(np.isnan(vals), 0.0, vals)
    return float(np.max(vals)), B


def fit_params(jet: Jet, C: float = 0.0, order: float = math.inf) -> MildParams:
    """Smallest sampled parameters: B = max(1, sup |f|), then A = A* for that B."""
    absd = np.abs(jet.derivatives()).reshape(-1, jet.coeffs.shape[-1])
    B = max(1.0, float(np.max(absd[:, 0])))
    A = fitted_A_star(absd, jet.degrees(), B, C)
    return MildParams(max(A, 1e-12), B, C, order)
