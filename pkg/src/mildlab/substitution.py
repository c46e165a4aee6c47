"""Substitution maps (0,1)^m -> cell and sampled checks of their derivative bounds.

* :class:`PowerMap` -- x -> (x_1^r, ..., x_m^r).
* :class:`PhiR` -- x_i -> alpha_i + (beta_i - alpha_i) x_i^r, applied variable by
  variable so that the walls see the already substituted x_<i.
* :class:`PhiInf` -- the same with the kernel exp(1 - 1/x_i^kappa).
* :class:`NaiveCellMap` -- the affine cell map followed by a power map; the
  construction that fails to stay mild.

All verifiers sample a grid, fit the constants (A, B) of the bound they test
and, when constants are declared, report pass/fail against them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import multiindex as mi
from .geometry import Cell, boundary_grid, PreparedFunction, lemma_ab_closed_form, prepared_constants, unit_square
from .jets import Jet, falling_factorial, jet_exp, jet_monomial, jet_power
from .mildness import TOL, MildParams, fit_AB, verify_certificate
from ._parallel import map_points


def c_mild(kappa: float) -> float:
    """Mildness constant A of exp(1 - 1/x^kappa), which is (c, e, 1/kappa)-mild."""
    return 6 * kappa if kappa >= 1 else 3 * (2 / kappa) ** (1 / kappa)


def c_inner(kappa: float) -> float:
    return kappa if kappa >= 1 else 1.0


def _check_interior(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= 1):
        raise ValueError("substitution maps are evaluated at interior points of (0,1)^m only")
    return x


@dataclass(frozen=True)
class PowerMap:
    r: int
    m: int

    name = "P_r"

    def values(self, x):
        return _check_interior(x) ** self.r

    def jets(self, x, order: int) -> list[Jet]:
        x = _check_interior(x)
        return [jet_monomial([self.r if j == i else 0 for j in range(self.m)], x, order)
                for i in range(self.m)]


def _kernel_power(r):
    def kernel(xi: Jet) -> Jet:
        return jet_power(xi, r)
    return kernel


def _kernel_exp(kappa):
    def kernel(xi: Jet) -> Jet:
        return jet_exp(1.0 - jet_power(xi, -kappa))
    return kernel


class _CellMap:
    cell: Cell

    @property
    def m(self) -> int:
        return self.cell.dim

    def kernel_value(self, s):
        raise NotImplementedError

    def kernel_jet(self, xi: Jet) -> Jet:
        raise NotImplementedError

    def values(self, x):
        x = _check_interior(x)
        y = np.empty_like(x)
        for i in range(self.m):
            lo, hi = self.cell.wall_values(i, y)
            y[..., i] = lo + (hi - lo) * self.kernel_value(x[..., i])
        return y

    def jets(self, x, order: int) -> list[Jet]:
        """Stage i replaces x_i by alpha_i(phi_<i) + (beta_i - alpha_i)(phi_<i) k(x_i)."""
        x = _check_interior(x)
        template = Jet.constant(0.0, x, order)
        ident = Jet.identity(x, order)
        out = []
        for i in range(self.m):
            lo, hi = self.cell.walls[i]
            a = lo.compose(out, template)
            b = hi.compose(out, template)
            out.append(a + (b - a) * self.kernel_jet(ident[i]))
        return out


@dataclass(frozen=True)
class PhiR(_CellMap):
    cell: Cell
    r: int

    name = "phi^r"

    def kernel_value(self, s):
        return s ** self.r

    def kernel_jet(self, xi):
        return jet_power(xi, self.r)


@dataclass(frozen=True)
class PhiInf(_CellMap):
    cell: Cell
    kappa: float

    name = "phi^inf"

    def kernel_value(self, s):
        return np.exp(1.0 - s ** -self.kappa)

    def kernel_jet(self, xi):
        return jet_exp(1.0 - jet_power(xi, -self.kappa))

    @property
    def c_mild(self) -> float:
        return c_mild(self.kappa)

    @property
    def c_inner(self) -> float:
        return c_inner(self.kappa)


@dataclass(frozen=True)
class NaiveCellMap:
    """P_r o (affine cell map): x -> (alpha_i + (beta_i - alpha_i) x_i)^r componentwise."""

    cell: Cell
    r: int

    name = "naive"

    @property
    def m(self):
        return self.cell.dim

    def values(self, x):
        return PhiR(self.cell, 1).values(x) ** self.r

    def jets(self, x, order):
        return [jet_power(j, self.r) for j in PhiR(self.cell, 1).jets(x, order)]


def phi_jet(phi, x, order: int) -> list[Jet]:
    return phi.jets(np.asarray(x, dtype=float), order)


def recursion_residual(phi: PhiR, x, order: int) -> float:
    """Largest relative gap between the jet of phi_m and the two-term expansion

    (phi_m)^{(nu)} = (alpha_m o phibar)^{(nu)}
                     + ((beta_m - alpha_m) o phibar)^{(nubar)} r...(r - nu_m + 1) x_m^{r - nu_m},

    the right side assembled from jets in the first m - 1 variables only.
    """
    x = _check_interior(x)
    m, r = phi.m, phi.r
    full = phi.jets(x, order)[m - 1]
    head = x[..., :m - 1]
    lower = PhiR(phi.cell.project(m - 1), r)
    template = Jet.constant(0.0, head, order)
    bar = lower.jets(head, order) if m > 1 else []
    lo, hi = phi.cell.walls[m - 1]
    a = lo.compose(bar, template)
    d = hi.compose(bar, template) - a
    worst = 0.0
    for nu in mi.indices_up_to(m, order):
        nubar, nm = nu[:m - 1], nu[m - 1]
        lhs = full.derivative(nu)
        rhs = d.derivative(nubar) * float(falling_factorial(r, nm)) * x[..., m - 1] ** (r - nm)
        if nm == 0:
            rhs = rhs + a.derivative(nubar)
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        rel = np.where(scale > 0, np.abs(lhs - rhs) / np.where(scale > 0, scale, 1), 0.0)
        worst = max(worst, float(np.max(rel)))
    return worst


@dataclass
class LemmaReport:
    lemma: str
    fixture: str
    param: dict
    order: int
    fitted_A: float
    fitted_B: float
    worst_point: tuple
    worst_nu: tuple
    passed: bool
    declared: tuple | None = None
    samples: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"lemma": self.lemma, "fixture": self.fixture, **self.param, "order": self.order,
               "fitted_A": self.fitted_A, "fitted_B": self.fitted_B,
               "worst_point": list(self.worst_point), "worst_nu": list(self.worst_nu),
               "pass": self.passed, "samples": self.samples}
        if self.declared is not None:
            out["declared_A"], out["declared_B"] = self.declared
        out.update(self.extra)
        return out


def _xpow(x, nus, scale=1.0):
    """x^{scale * nu} for every nu (columns), shape batch + (K,)."""
    nus = np.asarray(nus, dtype=float)
    return np.exp(np.log(x) @ (scale * nus).T)


def _finish(lemma, fixture, param, order, q, degs, grid, nus, declared, extra=None):
    """Fit (A, B) to q ~ B A^|nu| and test the declared pair."""
    q = np.where(np.isfinite(q), q, np.inf)
    A, B = fit_AB(q, degs)
    if declared is not None:
        Ad, Bd = declared
        ratio = q / (Bd * np.power(Ad, degs.astype(float)))
    else:
        ratio = q / (B * np.power(A if A > 0 else 1.0, degs.astype(float)))
    ratio = np.where(np.isnan(ratio), 0.0, ratio)
    flat = int(np.argmax(ratio))
    K = ratio.shape[-1]
    pi, ni = divmod(flat, K)
    pi = pi % len(grid)
    passed = bool(np.all(ratio <= 1 + TOL)) and math.isfinite(A)
    return LemmaReport(lemma, fixture, param, order, A, B, tuple(grid[pi].tolist()), nus[ni],
                       passed, declared, len(grid), extra or {})


def usable_points(phi, grid):
    """Mask of grid points whose image lies strictly inside the target in floating point.

    Near 0 the kernel exp(1 - 1/x^kappa) underflows and the image lands on a wall.
    """
    y = phi.values(grid)
    if isinstance(phi, PowerMap):
        return np.all(y > 0, axis=-1)
    return phi.cell.contains(y)


def _phi_derivs(phi, grid, order):
    ok = usable_points(phi, grid)
    grid = grid[ok]
    jets = map_points(lambda p: phi.jets(p, order), grid)
    return (np.stack([j.derivatives() for j in jets]), np.stack([j.value for j in jets]), jets[0],
            grid, int((~ok).sum()))


def verify_weak_mildness(phi: PhiR, grid, order: int | None = None, declared=None,
                         fixture: str = "") -> LemmaReport:
    """|phi_l^{(nu)} / phi_l| <= x^{-nu} B (A r)^|nu| |nu|! for every component l."""
    grid = _check_interior(grid)
    order = phi.r if order is None else order
    derivs, vals, j0, grid, nx = _phi_derivs(phi, grid, order)
    nus = j0.indices
    degs = j0.degrees()
    fact = np.array([math.factorial(int(n)) for n in degs], dtype=float)
    q = np.abs(derivs) * _xpow(grid, nus) / (np.abs(vals)[..., None] * float(phi.r) ** degs * fact)
    return _finish("weak_mildness", fixture, {"r": phi.r}, order, q.reshape(-1, len(nus)),
                   degs, grid, nus, declared, {"excluded": nx})


def _argmin_I(grid, nus):
    """Per (point, nu): argmin of x_i over the i with nu_i != 0 (-1 for nu = 0)."""
    nus = np.asarray(nus)
    big = np.where(nus[None, :, :] != 0, grid[:, None, :], np.inf)
    I = np.argmin(big, axis=-1)
    return np.where(nus.sum(axis=1)[None, :] > 0, I, -1)


def _select(grid, nus, I):
    nus_a = np.asarray(nus)
    if I is None or I == "argmin":
        Iarr = _argmin_I(grid, nus)
    else:
        if not 0 <= int(I) < grid.shape[-1]:
            raise ValueError(f"I must be a coordinate in 0..{grid.shape[-1] - 1} or 'argmin'")
        Iarr = np.broadcast_to(np.int64(I), (len(grid), len(nus)))
    valid = (Iarr >= 0) & (np.take_along_axis(
        np.broadcast_to(nus_a[None], (len(grid),) + nus_a.shape), np.maximum(Iarr, 0)[..., None], -1
    )[..., 0] != 0)
    xI = np.take_along_axis(grid, np.maximum(Iarr, 0), axis=-1)
    return Iarr, valid, xI


def verify_factor_xr(phi: PhiR, I="argmin", grid=None, order: int | None = None, declared=None,
                     fixture: str = "") -> LemmaReport:
    """|phi_l^{(nu)}| <= x_I^r x^{-nu} B (A r)^|nu| |nu|! for nu with nu_I != 0.

    ``I`` is a 0-based coordinate or ``"argmin"`` for the per-term choice
    I = argmin{x_i : nu_i != 0}. Entries with nu_I = 0 are excluded.
    """
    grid = _check_interior(grid)
    order = phi.r if order is None else order
    derivs, _, j0, grid, nx = _phi_derivs(phi, grid, order)
    nus, degs = j0.indices, j0.degrees()
    fact = np.array([math.factorial(int(n)) for n in degs], dtype=float)
    _, valid, xI = _select(grid, nus, I)
    q = np.abs(derivs) * _xpow(grid, nus) / (xI ** phi.r * float(phi.r) ** degs * fact)
    q = np.where(valid[None], q, 0.0)
    return _finish("factor_xr", fixture, {"r": phi.r, "I": str(I)}, order,
                   q.reshape(-1, len(nus)), degs, grid, nus, declared, {"excluded": nx})


def verify_weak_mildness_inf(phi: PhiInf, grid, order: int = 6, declared=None,
                             fixture: str = "") -> LemmaReport:
    """|phi_l^{(nu)} / phi_l| <= x^{-(kappa+1) nu} B (c(kappa) A)^|nu| |nu|!."""
    grid = _check_interior(grid)
    derivs, vals, j0, grid, nx = _phi_derivs(phi, grid, order)
    nus, degs = j0.indices, j0.degrees()
    fact = np.array([math.factorial(int(n)) for n in degs], dtype=float)
    q = (np.abs(derivs) * _xpow(grid, nus, phi.kappa + 1)
         / (np.abs(vals)[..., None] * phi.c_inner ** degs * fact))
    return _finish("weak_mildness_inf", fixture, {"kappa": phi.kappa}, order,
                   q.reshape(-1, len(nus)), degs, grid, nus, declared, {"excluded": nx})


def verify_factor_exp(phi: PhiInf, I="argmin", grid=None, order: int = 6, declared=None,
                      fixture: str = "") -> LemmaReport:
    """|phi_l^{(nu)}| <= e^{1 - 1/x_I^kappa} x^{-(kappa+1) nu} B (c(kappa) A)^|nu| |nu|!."""
    grid = _check_interior(grid)
    derivs, _, j0, grid, nx = _phi_derivs(phi, grid, order)
    nus, degs = j0.indices, j0.degrees()
    fact = np.array([math.factorial(int(n)) for n in degs], dtype=float)
    _, valid, xI = _select(grid, nus, I)
    # the kernel factor is folded into the x-power in log space to avoid underflow
    logq_den = (1.0 - xI ** -phi.kappa) + np.log(float(phi.c_inner)) * degs + np.log(fact)
    with np.errstate(divide="ignore"):
        logq = np.log(np.abs(derivs)) + np.log(grid) @ ((phi.kappa + 1) * np.asarray(nus, float)).T - logq_den
    q = np.where(valid[None], np.exp(logq), 0.0)
    return _finish("factor_exp", fixture, {"kappa": phi.kappa, "I": str(I)}, order,
                   q.reshape(-1, len(nus)), degs, grid, nus, declared, {"excluded": nx})


def exp_kernel_bound(kappa: float, nu: int, x):
    """x^{-(kappa+1) nu} e^{1 - 1/x^kappa} (2 c(kappa))^nu nu! for the nu-th derivative of the kernel."""
    x = np.asarray(x, dtype=float)
    return x ** (-(kappa + 1) * nu) * np.exp(1 - x ** -kappa) * (2 * c_inner(kappa)) ** nu * math.factorial(nu)


def sup_bound_check(kappa: float, n: int) -> tuple[float, float]:
    """(sup over (0,1) of e^{1 - 1/x^kappa} x^{-(kappa+1) n}, e ((kappa+1) n / (e kappa))^{(kappa+1) n / kappa}).

    The supremum is found numerically by bounded 1-D maximization of the log.
    """
    def neg_log(x):
        return -(1 - x ** -kappa - (kappa + 1) * n * math.log(x))

    res = minimize_scalar(neg_log, bounds=(1e-6, 1.0), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 2000})
    lhs = math.exp(max(-res.fun, -neg_log(1.0)))
    if n == 0:
        rhs = math.e
    else:
        p = (kappa + 1) * n / kappa
        rhs = math.e * (p / math.e) ** p
    if lhs > rhs * (1 + TOL):
        raise AssertionError(f"sup bound violated: {lhs} > {rhs}")
    return lhs, rhs


# composed maps


def composed_jets(f: PreparedFunction, phi, grid, order: int) -> Jet:
    def fn(p):
        inner = phi.jets(p, order)
        return f.compose(inner, Jet.constant(0.0, p, order))
    return map_points(fn, grid)


def verify_main_crpara(f: PreparedFunction, cell: Cell, r: int, grid, A: float | None = None,
                       B: float = 1.0, phi=None, fixture: str = "") -> dict:
    """Sampled (A r, B, 0)-mildness up to order r of f o phi^r.

    Without a declared A the fitted A*(r) / r is reported and the certificate is
    checked against it. Grid points whose image leaves the cell numerically are
    dropped and counted.
    """
    grid = _check_interior(grid)
    phi = PhiR(cell, r) if phi is None else phi
    ok = usable_points(phi, grid)
    pts = grid[ok]
    jet = composed_jets(f, phi, pts, r)
    absd = np.abs(jet.derivatives())
    from .mildness import fitted_A_star
    a_star = fitted_A_star(absd, jet.degrees(), B)
    A_used = A if A is not None else max(a_star / r, 1e-300)
    rep = verify_certificate(jet, MildParams(A_used * r, B, 0.0, r), pts, r)
    return {"lemma": "crpara", "fixture": fixture, "map": phi.name, "r": r, "order": r,
            "fitted_A": a_star / r, "fitted_A_star": a_star, "declared_A": A, "B": B,
            "worst_ratio": rep.worst_ratio, "worst_point": list(rep.worst_point),
            "worst_nu": list(rep.worst_nu), "samples": rep.samples,
            "excluded": int((~ok).sum()), "pass": rep.passed}


def weak_constants(phi, grid, order: int) -> tuple[float, float]:
    """(A_C, B_C) fitted jointly from the weak-mildness and factor lemmas."""
    if isinstance(phi, PhiInf):
        w = verify_weak_mildness_inf(phi, grid, order)
        fct = verify_factor_exp(phi, "argmin", grid, order)
    else:
        w = verify_weak_mildness(phi, grid, order)
        fct = verify_factor_xr(phi, "argmin", grid, order)
    return max(w.fitted_A, fct.fitted_A, 1e-12), max(w.fitted_B, fct.fitted_B)


def _lead_constants(f: PreparedFunction) -> tuple[float, float]:
    """(A1, B1) for the outer function: M_b and the C^1 bound for a bare monomial."""
    A1 = f.monomials[f.lead].M_b if f.unit.is_constant else prepared_constants(f)[0]
    B1 = f.c1_bound if f.c1_bound is not None else max(b.range_bound for b in f.monomials)
    return A1, B1


def assemble_crpara_constant(f: PreparedFunction, A_C: float, B_C: float) -> tuple[float, float]:
    """(A, B) from one composite-bound application with A1 = M_b, B1 = C^1 bound, A2 = A_C r, B2 = B_C."""
    m = f.m
    A1, B1 = _lead_constants(f)
    A = A_C * (m * A1 * B_C + 1)
    B = lemma_ab_closed_form(A1, B1, 1.0, B_C, m, ())
    return A, B


def assemble_mildpara_constant(f: PreparedFunction, kappa: float, A_C: float, B_C: float) -> dict:
    """The (A, B, 1 + 1/kappa) constants of f o phi^inf as the proof assembles them.

    A~ = A_C (m A1 B_C + 1); A = 4 kappa A~ for kappa >= 1 and
    ((kappa+1)/kappa)^{(kappa+1)/kappa} A~ for kappa <= 1; B = e times the
    composite-bound prefactor. ``A_normalized`` absorbs B into A so that B = 1.
    """
    m = f.m
    A1, B1 = _lead_constants(f)
    A_tilde = A_C * (m * A1 * B_C + 1)
    if kappa >= 1:
        A = 4 * kappa * A_tilde
    else:
        A = ((kappa + 1) / kappa) ** ((kappa + 1) / kappa) * A_tilde
    B = math.e * lemma_ab_closed_form(A1, B1, 1.0, B_C, m, ())
    return {"A_tilde": A_tilde, "A": A, "B": B, "C": 1 + 1 / kappa, "A_normalized": A * max(1.0, B)}


def verify_main_mildpara(f: PreparedFunction, cell: Cell, kappa: float, grid, order: int = 8,
                         A: float | None = None, weak=None, fixture: str = "") -> dict:
    """Sampled (A, 1, 1 + 1/kappa)-mildness of f o phi^inf up to ``order``.

    Only a finite prefix of derivatives can be sampled; the report says which.
    Without a declared A the proof-assembled A = 4 kappa A~ (or its kappa < 1 variant) is used,
    with (A_C, B_C) fitted on the same grid unless ``weak`` supplies them.
    """
    grid = _check_interior(grid)
    phi = PhiInf(cell, kappa)
    if weak is None:
        weak = weak_constants(phi, grid, min(order, 6))
    assembled = assemble_mildpara_constant(f, kappa, *weak)
    A_used = assembled["A"] if A is None else A
    ok = usable_points(phi, grid)
    pts = grid[ok]
    jet = composed_jets(f, phi, pts, order)
    C = 1 + 1 / kappa
    rep = verify_certificate(jet, MildParams(A_used, 1.0, C, order), pts, order)
    return {"lemma": "mildpara", "fixture": fixture, "kappa": kappa, "order": order, "C": C,
            "A": A_used, "assembled": assembled, "A_C": weak[0], "B_C": weak[1],
            "fitted_A_star": rep.fitted_A_star, "worst_ratio": rep.worst_ratio,
            "worst_point": list(rep.worst_point), "worst_nu": list(rep.worst_nu),
            "samples": rep.samples, "excluded": int((~ok).sum()), "pass": rep.passed,
            "note": f"derivatives checked up to order {order} only"}


# the hyperbola family xy = t


def zero_mild_constants(scene, density: int = 64, order: int = 4) -> list[dict]:
    """Per fiber, the fitted A* (B = 1, C = 0) of the affine chart of every function.

    For y = t/x on (t, 1) the k-th derivative of the chart is about k!/t^k, so
    A*(t) grows like 1/t: no t-uniform 0-mild chart comes out of this cell.
    """
    from .mildness import fitted_A_star

    rows = []
    for fiber in scene.fibers():
        cells, funcs = scene.instantiate(fiber)
        worst = 0.0
        for ci, f in funcs:
            phi = PhiR(cells[ci], 1)
            grid = boundary_grid(phi.m, density)
            jet = composed_jets(f, phi, grid[usable_points(phi, grid)], order)
            worst = max(worst, fitted_A_star(np.abs(jet.derivatives()), jet.degrees(), 1.0))
        rows.append({"t": list(fiber.t), "A_star": worst})
    return rows


def uniform_mildpara(scene, kappa: float = 1.0, density: int = 16, order: int = 8,
                     A: float | None = None) -> dict:
    """Check every fiber of a family against one (A, 1, 1 + 1/kappa) certificate.

    Without a declared A, the largest proof-assembled constant over the fibers is used.
    """
    per = []
    for fiber in scene.fibers():
        cells, funcs = scene.instantiate(fiber)
        for ci, f in funcs:
            grid = boundary_grid(cells[ci].dim, density)
            per.append((fiber, ci, f, cells[ci], grid, weak_constants(PhiInf(cells[ci], kappa), grid, min(order, 6))))
    if A is None:
        A = max(assemble_mildpara_constant(f, kappa, *w)["A"] for _, _, f, _, _, w in per)
    rows = []
    for fiber, ci, f, cell, grid, w in per:
        rep = verify_main_mildpara(f, cell, kappa, grid, order, A=A, weak=w)
        rows.append({"t": list(fiber.t), "cell": ci, "fitted_A_star": rep["fitted_A_star"],
                     "worst_ratio": rep["worst_ratio"], "pass": rep["pass"]})
    return {"kappa": kappa, "order": order, "A": A, "fibers": rows,
            "pass": all(r["pass"] for r in rows)}
