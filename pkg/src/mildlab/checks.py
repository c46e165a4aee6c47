"""Randomized cross-checks shared by the command line and the test suite."""
from __future__ import annotations

import numpy as np

from . import multiindex as mi
from .expr import eval_on_jets, jet_eval_expr, random_positive_expr
from .jets import Jet, jet_compose
from .mildness import MildParams
from .mildness import lemma_ab_brute_force, lemma_ab_closed_form


def faa_vs_jets(outer_expr, inner_exprs, x, r: int) -> float:
    """Largest relative gap between the Faa di Bruno sum and jet composition at x.

    The gap is measured against the sum of absolute Faa di Bruno terms, the
    natural scale of its floating-point error.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    var = Jet.identity(x, r)
    inner = [eval_on_jets(e, var, Jet.constant(0.0, x, r)) for e in inner_exprs]
    y = np.array([float(g.value) for g in inner])
    outer = jet_eval_expr(outer_expr, y, r)
    comp = jet_compose(outer, inner)
    outer_tab = mi.derivative_table(outer.derivatives(), len(inner), r)
    inner_tabs = [mi.derivative_table(g.derivatives(), m, r) for g in inner]
    worst = 0.0
    for k, nu in enumerate(mi.indices_up_to(m, r)):
        want, mag = mi.faa_di_bruno(outer_tab, inner_tabs, nu, return_magnitude=True)
        got = float(comp.derivatives()[k])
        scale = max(mag, abs(got), 1e-300)
        worst = max(worst, abs(got - want) / scale)
    return worst


def _nonconstant(rng, m, depth):
    while True:
        e = random_positive_expr(rng, m, depth)
        if e.n_vars() > 0:
            return e


def faa_sweep(m: int, order: int, trials: int, seed: int = 0, depth: int = 3) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        outer = _nonconstant(rng, m, depth)
        inner = [_nonconstant(rng, m, depth) for _ in range(m)]
        x = rng.uniform(0.2, 0.8, size=m)
        worst = max(worst, faa_vs_jets(outer, inner, x, order))
    return {"m": m, "order": order, "trials": trials, "max_rel_error": float(worst), "pass": bool(worst <= 1e-10)}


def lemma_ab_sweep(m: int, nu_max: int, draws: int, seed: int = 0) -> dict:
    """Brute-force vs closed form of the composite bound sum over all 1 <= |nu| <= nu_max."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        A1, B1, A2, B2 = rng.uniform(0.1, 5.0, size=4)
        for n in range(1, nu_max + 1):
            for nu in mi.indices_of_degree(m, n):
                c = lemma_ab_closed_form(A1, B1, A2, B2, m, nu)
                b = lemma_ab_brute_force(A1, B1, A2, B2, m, nu)
                worst = max(worst, abs(b - c) / c)
    return {"m": m, "nu_max": nu_max, "draws": draws, "max_rel_deviation": float(worst), "pass": bool(worst <= 1e-9)}


def _tame_jet(rng, m, var, tmpl, limit=1e8):
    """A random expression jet whose derivatives stay below ``limit``."""
    while True:
        with np.errstate(all="ignore"):
            j = eval_on_jets(_nonconstant(rng, m, 3), var, tmpl)
            d = np.abs(j.derivatives())
        if np.all(np.isfinite(d)) and d.max() < limit:
            return j


def closure_trial(rng, m: int = 2, order: int = 4, n_points: int = 8, C: float | None = None) -> dict:
    """One random fixture for the sum, product and composition rules.

    Component parameters are fitted at the sample points (so their
    certificates pass there by construction); the rule's parameters are then
    checked on the combined jets at the same points.
    """
    from .mildness import fit_params, mild_compose, mild_product, mild_sum, verify_certificate

    if C is None:
        C = float(rng.choice([0.0, 0.5, 1.0]))
    x = rng.uniform(0.1, 0.9, size=(n_points, m))
    tmpl = Jet.constant(0.0, x, order)
    var = Jet.identity(x, order)
    f1 = _tame_jet(rng, m, var, tmpl)
    f2 = _tame_jet(rng, m, var, tmpl)
    p1, p2 = fit_params(f1, C, order), fit_params(f2, C, order)
    out = {"C": C}
    out["component"] = (verify_certificate(f1, p1, x, order).passed
                        and verify_certificate(f2, p2, x, order).passed)
    out["sum"] = verify_certificate(f1 + f2, mild_sum(p1, p2), x, order).passed
    out["product"] = verify_certificate(f1 * f2, mild_product(p1, p2), x, order).passed
    # composition: outer F of d = m variables evaluated at g(x)
    inner = [_tame_jet(rng, m, var, tmpl) for _ in range(m)]
    pg = [fit_params(g, C, order) for g in inner]
    pg = MildParams(max(p.A for p in pg), max(p.B for p in pg), C, order)
    y = np.stack([g.value for g in inner], axis=-1)
    while True:
        with np.errstate(all="ignore"):
            outer = jet_eval_expr(_nonconstant(rng, m, 3), y, order)
            d = np.abs(outer.derivatives())
        if np.all(np.isfinite(d)) and d.max() < 1e8:
            break
    pf = fit_params(outer, C, order)
    out["component"] = out["component"] and all(
        verify_certificate(g, pg, x, order).passed for g in inner) and verify_certificate(
        outer, pf, y, order).passed
    comp = jet_compose(outer, inner)
    out["compose"] = verify_certificate(comp, mild_compose(pf, pg, m), x, order).passed
    return out


def bound_dominance(f, cell, grid, order: int = 6) -> dict:
    """Count sampled violations of the monomial and prepared-function derivative bounds.

    Points are the images of ``grid`` in ``cell``; every monomial of f and f
    itself are checked for all |nu| <= order.
    """
    from .geometry import bm_derivative_bound, prepared_derivative_bound

    pts = cell.affine_map(grid)
    idx = mi.indices_up_to(pts.shape[-1], order)
    bm_bad = 0
    for b in f.monomials:
        d = np.abs(b.jet(pts, order).derivatives())
        for k, nu in enumerate(idx):
            bm_bad += int(np.sum(d[:, k] > bm_derivative_bound(b, nu, pts) * (1 + 1e-12)))
    d = np.abs(f.jet(pts, order).derivatives())
    pf_bad = 0
    worst = 0.0
    for k, nu in enumerate(idx):
        bound = prepared_derivative_bound(f, nu, pts)[0]
        pf_bad += int(np.sum(d[:, k] > bound * (1 + 1e-9)))
        worst = max(worst, float(np.max(d[:, k] / bound)))
    return {"checked": len(pts) * len(idx), "bm_violations": bm_bad,
            "prepared_violations": pf_bad, "worst_prepared_ratio": worst}
