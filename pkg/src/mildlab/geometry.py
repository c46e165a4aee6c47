"""Bounded monomials, prepared functions, cells and scene files.

These are the objects a preparation result hands over: functions of the
form b_j(x) F(b(x)) on open cells alpha_i(x_<i) < x_i < beta_i(x_<i) inside
(0,1)^m whose walls are themselves prepared. Nothing here derives such a
presentation; it is supplied (scene file or fixture) and validated by
sampling.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import expr as ex
from .jets import Jet, as_exponent, jet_monomial, monomial_of_jets
from .mildness import MildParams, lemma_ab_closed_form, verify_certificate

UNIT_MARGIN = 1e-6


class SceneError(ValueError):
    """Invalid scene input; ``invariant`` names the rule that failed."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
        self.message = message

    def to_json(self):
        return {"error": "validation", "invariant": self.invariant, "message": self.message}


@dataclass(frozen=True)
class BoundedMonomial:
    """x -> coefficient * x^exponents with |value| <= range_bound on its domain."""

    coefficient: float
    exponents: tuple
    range_bound: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(as_exponent(e) for e in self.exponents))
        if not self.range_bound > 0:
            raise ValueError("range_bound must be positive")

    @property
    def m(self) -> int:
        return len(self.exponents)

    @property
    def M_b(self) -> float:
        return max([abs(float(e)) for e in self.exponents] + [1.0])

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], float(self.coefficient))
        for i, e in enumerate(self.exponents):
            if e != 0:
                out = out * x[..., i] ** float(e)
        return out

    def jet(self, x, r: int) -> Jet:
        return jet_monomial(self.exponents, x, r, self.coefficient)

    def compose(self, inner: Sequence[Jet], template: Jet) -> Jet:
        if self.coefficient == 0:
            return Jet.constant(0.0, template.point, template.order)
        return monomial_of_jets(inner, self.exponents, self.coefficient, template)


def bm_exact_derivative(b: BoundedMonomial, nu, x) -> float:
    return b.jet(np.asarray(x, dtype=float), sum(nu)).derivative(tuple(nu))


def bm_derivative_bound(b: BoundedMonomial, nu, x):
    """x^{-nu} |b(x)| M_b^{|nu|} |nu|!."""
    x = np.asarray(x, dtype=float)
    n = sum(nu)
    xpow = np.prod(x ** -np.asarray(nu, dtype=float), axis=-1)
    return xpow * np.abs(b.value(x)) * b.M_b ** n * math.factorial(n)


@dataclass(frozen=True)
class Unit:
    """An analytic non-vanishing function F of the monomial vector, with declared mildness."""

    expr: ex.ExprNode
    mild_params: MildParams = MildParams(1.0, 1.0, 0.0)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.expr, ex.Const)


@dataclass(frozen=True)
class PreparedFunction:
    """f(x) = b_lead(x) * F(b(x))."""

    monomials: tuple
    lead: int = 0
    unit: Unit = Unit(ex.Const(1.0))
    c1_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "monomials", tuple(self.monomials))
        if not self.monomials:
            raise ValueError("a prepared function needs at least one monomial")
        if not 0 <= self.lead < len(self.monomials):
            raise ValueError("lead index out of range")
        dims = {b.m for b in self.monomials}
        if len(dims) != 1:
            raise ValueError("monomials have inconsistent dimensions")

    @property
    def m(self) -> int:
        return self.monomials[0].m

    def b_values(self, x) -> np.ndarray:
        return np.stack([b.value(x) for b in self.monomials], axis=-1)

    def value(self, x) -> np.ndarray:
        bv = self.b_values(x)
        F = self.unit.expr.evaluate(bv)
        return bv[..., self.lead] * F

    def compose(self, inner: Sequence[Jet], template: Jet) -> Jet:
        """Jet of f o g from the jets of the components of g."""
        lead = self.monomials[self.lead].compose(inner, template)
        if self.unit.is_constant:
            return lead * self.unit.expr.value
        bj = [b.compose(inner, template) for b in self.monomials]
        Fv = np.asarray(self.unit.expr.evaluate(np.stack([j.value for j in bj], axis=-1)))
        if np.any(np.abs(Fv) < UNIT_MARGIN):
            raise ValueError("unit vanishes at the monomial image")
        return lead * ex.eval_on_jets(self.unit.expr, bj, template)

    def jet(self, x, r: int) -> Jet:
        x = np.asarray(x, dtype=float)
        template = Jet.constant(0.0, x, r)
        return self.compose(Jet.identity(x, r), template)


def constant_function(c: float, m: int) -> PreparedFunction:
    return PreparedFunction((BoundedMonomial(float(c), (0,) * m, max(abs(c), 1e-300)),))


def prepared_jet(f: PreparedFunction, x, r: int, cell: "Cell | None" = None) -> Jet:
    x = np.asarray(x, dtype=float)
    if cell is not None and not np.all(cell.contains(x)):
        raise ValueError("point outside the cell")
    return f.jet(x, r)


def prepared_constants(f: PreparedFunction) -> tuple[float, float]:
    """(A_f, B_f) from the product rule and the composite bound.

    The unit is (A_F, B_F, 0)-mild; each monomial obeys
    |b^{(nu)}| <= x^{-nu} B_b A_b^|nu| |nu|!. lemma_ab_closed_form then bounds F o b with
    A = A_b (N A_F B_b + 1); the nu = 0 term needs |F| <= B_F, so
    B = max(B_F, closed-form prefactor). Finally A_f = 2 max(A, M_{b_j}).
    """
    N = len(f.monomials)
    AF, BF = f.unit.mild_params.A, f.unit.mild_params.B
    Ab = max(b.M_b for b in f.monomials)
    Bb = max(b.range_bound for b in f.monomials)
    q = N * AF * Bb + 1
    A = Ab * q
    B = max(BF, lemma_ab_closed_form(AF, BF, 1.0, Bb, N, ()))
    return 2 * max(A, f.monomials[f.lead].M_b), B


def prepared_derivative_bound(f: PreparedFunction, nu, x):
    """x^{-nu} |b_j(x)| B_f A_f^{|nu|} |nu|!, returned with (A_f, B_f)."""
    x = np.asarray(x, dtype=float)
    Af, Bf = prepared_constants(f)
    n = sum(nu)
    xpow = np.prod(x ** -np.asarray(nu, dtype=float), axis=-1)
    bj = np.abs(f.monomials[f.lead].value(x))
    return xpow * bj * Bf * Af ** n * math.factorial(n), Af, Bf


def c1_norm_check(funcs, grid, B: float) -> dict:
    """max over grid and |nu| <= 1 of |d^nu g| for every component g; pass iff <= B."""
    if not isinstance(funcs, (list, tuple)):
        funcs = [funcs]
    grid = np.asarray(grid, dtype=float)
    worst, where = 0.0, None
    for g in funcs:
        c = np.abs(g.jet(grid, 1).coeffs)
        c = np.where(np.isfinite(c), c, np.inf)
        flat = int(np.argmax(c))
        if c.flat[flat] > worst or where is None:
            worst = float(c.flat[flat])
            where = tuple(grid.reshape(-1, grid.shape[-1])[flat // c.shape[-1]].tolist())
    return {"norm": worst, "bound": B, "worst_point": where, "pass": bool(worst <= B)}


@dataclass(frozen=True)
class FamilyFiber:
    t: tuple = ()
    description: str = ""


@dataclass(frozen=True)
class Cell:
    """Open cell in (0,1)^m; ``walls[i] = (lower, upper)`` as prepared functions of x_<i."""

    walls: tuple
    base: FamilyFiber = FamilyFiber()

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(tuple(w) for w in self.walls))
        for i, (lo, hi) in enumerate(self.walls):
            if lo.m != i or hi.m != i:
                raise ValueError(f"walls of x_{i + 1} must be functions of {i} variables")

    @property
    def dim(self) -> int:
        return len(self.walls)

    def project(self, k: int) -> "Cell":
        return Cell(self.walls[:k], self.base)

    def wall_values(self, i: int, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        lo, hi = self.walls[i]
        head = x[..., :i]
        return lo.value(head), hi.value(head)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i in range(self.dim):
            lo, hi = self.wall_values(i, x)
            ok &= (lo < x[..., i]) & (x[..., i] < hi)
        return ok

    def affine_map(self, s) -> np.ndarray:
        """Image of s in (0,1)^m under x_i = alpha_i + (beta_i - alpha_i) s_i."""
        s = np.asarray(s, dtype=float)
        y = np.empty_like(s)
        for i in range(self.dim):
            lo, hi = self.wall_values(i, y)
            y[..., i] = lo + (hi - lo) * s[..., i]
        return y

    def validate(self, grid) -> float:
        """Check 0 <= alpha_i < beta_i <= 1 on sampled base points; return the minimal gap."""
        pts = self.affine_map(grid)
        margin = math.inf
        for i in range(self.dim):
            lo, hi = self.wall_values(i, pts)
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise SceneError("wall-finite", f"wall of x_{i + 1} is not finite on the sample")
            if np.any(lo < -1e-12) or np.any(hi > 1 + 1e-12):
                raise SceneError("wall-range", f"walls of x_{i + 1} leave [0, 1]")
            gap = float(np.min(hi - lo))
            if not gap > 0:
                raise SceneError("wall-order", f"lower wall of x_{i + 1} is not below the upper wall")
            margin = min(margin, gap)
        return margin


def unit_square(m: int) -> Cell:
    walls = [(constant_function(0.0, i), constant_function(1.0, i)) for i in range(m)]
    return Cell(walls)


def boundary_grid(m: int, density: int = 16) -> np.ndarray:
    """Tensor grid x_i = s^2, s uniform in (0,1); clusters toward the faces x_i = 0."""
    s = np.arange(1, density + 1) / (density + 1)
    axis = s ** 2
    mesh = np.meshgrid(*([axis] * m), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def validate_function(f: PreparedFunction, cell: Cell, grid, order: int = 4) -> dict:
    """Sampled checks of range bounds, unit non-vanishing/mildness and the declared C^1 bound."""
    pts = cell.affine_map(grid)
    bv = f.b_values(pts)
    for k, b in enumerate(f.monomials):
        if np.any(np.abs(bv[..., k]) > b.range_bound * (1 + 1e-9)):
            raise SceneError("range-bound", f"monomial {k} exceeds its range bound")
    F = np.asarray(f.unit.expr.evaluate(bv))
    if np.any(np.abs(F) < UNIT_MARGIN):
        raise SceneError("unit-nonvanishing", "unit is (nearly) zero on the monomial image")
    out = {"unit_margin": float(np.min(np.abs(F)))}
    if not f.unit.is_constant:
        rep = verify_certificate(lambda y: ex.jet_eval_expr(f.unit.expr, y, order),
                                 f.unit.mild_params, bv.reshape(-1, bv.shape[-1]), order)
        if not rep.passed:
            raise SceneError("unit-mild", f"declared unit mildness fails (ratio {rep.worst_ratio:.3g})")
        out["unit_worst_ratio"] = rep.worst_ratio
    if f.c1_bound is not None:
        rep = c1_norm_check(list(f.monomials), pts, f.c1_bound)
        if not rep["pass"]:
            raise SceneError("c1-bound", f"C^1 norm {rep['norm']:.6g} exceeds declared {f.c1_bound}")
        out["c1_norm"] = rep["norm"]
    return out


# scene files


@dataclass
class Scene:
    """A family of cells and prepared functions, instantiated per fiber t."""

    dim: int
    raw: dict
    t_grid: list = field(default_factory=list)
    name: str = ""

    def fibers(self) -> list:
        return [FamilyFiber(tuple(np.atleast_1d(t).tolist()), f"t={t}") for t in self.t_grid] or [FamilyFiber()]

    def instantiate(self, fiber: FamilyFiber = FamilyFiber()):
        """Concrete (cells, [(cell_index, PreparedFunction)]) at one fiber."""
        t = np.asarray(fiber.t, dtype=float)
        cells = []
        for ci, c in enumerate(self.raw["cells"]):
            walls = c.get("walls")
            if not isinstance(walls, list) or len(walls) != self.dim:
                raise SceneError("cell-walls", f"cell {ci} needs {self.dim} wall pairs")
            ws = []
            for i, w in enumerate(walls):
                try:
                    ws.append((_parse_fn(w["lower"], i, t), _parse_fn(w["upper"], i, t)))
                except KeyError as e:
                    raise SceneError("cell-walls", f"cell {ci} wall {i} misses {e}") from None
            cells.append(Cell(ws, fiber))
        funcs = []
        for k, fs in enumerate(self.raw.get("functions", [])):
            ci = int(fs.get("cell", 0))
            if not 0 <= ci < len(cells):
                raise SceneError("function-cell", f"function {k} refers to missing cell {ci}")
            f = _parse_fn(fs, self.dim, t)
            funcs.append((ci, f))
        return cells, funcs

    def validate(self, density: int = 8) -> list:
        notes = []
        for fiber in self.fibers():
            cells, funcs = self.instantiate(fiber)
            grid = boundary_grid(self.dim, density)
            for cell in cells:
                notes.append({"fiber": list(fiber.t), "wall_margin": cell.validate(grid)})
            for ci, f in funcs:
                notes.append({"fiber": list(fiber.t), **validate_function(f, cells[ci], grid)})
        return notes


def _parse_coeff(obj, t):
    if "coeff_of_t" in obj:
        e = ex.from_json(obj["coeff_of_t"])
        if e.n_vars() > len(t):
            raise SceneError("coeff-of-t", "coefficient uses more t variables than supplied")
        return float(e.evaluate(t[None, :] if len(t) else np.zeros((1, 0)))[0])
    return float(as_exponent(str(obj.get("coeff", 1))))


def _parse_fn(obj, m: int, t) -> PreparedFunction:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return constant_function(float(obj), m)
    if not isinstance(obj, dict) or "monomials" not in obj:
        raise SceneError("function-format", f"cannot read function {obj!r}")
    monos = []
    for ms in obj["monomials"]:
        exps = tuple(as_exponent(str(e)) for e in ms.get("exponents", []))
        if len(exps) != m:
            raise SceneError("exponent-length", f"expected {m} exponents, got {len(exps)}")
        a = _parse_coeff(ms, t)
        monos.append(BoundedMonomial(a, exps, float(ms.get("range_bound", max(1.0, abs(a))))))
    unit_mild = obj.get("unit_mild", {"A": 1.0, "B": 1.0, "C": 0.0})
    try:
        mp = MildParams(float(unit_mild["A"]), float(unit_mild["B"]), float(unit_mild.get("C", 0.0)))
    except (KeyError, ValueError) as e:
        raise SceneError("unit-mild-format", str(e)) from None
    unit = Unit(ex.from_json(obj.get("unit", 1.0)), mp)
    c1 = obj.get("c1_bound")
    try:
        return PreparedFunction(tuple(monos), int(obj.get("lead", 0)), unit,
                                None if c1 is None else float(c1))
    except ValueError as e:
        raise SceneError("function-format", str(e)) from None


def load_scene(source) -> Scene:
    """Load a scene from a dict, a JSON path, or the name of a bundled fixture."""
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.exists():
            name = str(source)
            try:
                text = resources.files("mildlab.data").joinpath(f"{name}.json").read_text()
            except FileNotFoundError:
                raise SceneError("scene-path", f"no scene file or fixture named {source!r}") from None
        else:
            text = path.read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise SceneError("scene-json", str(e)) from None
    if not isinstance(raw, dict) or not isinstance(raw.get("dim"), int) or raw["dim"] < 1:
        raise SceneError("scene-dim", "scene needs an integer dim >= 1")
    if not isinstance(raw.get("cells"), list) or not raw["cells"]:
        raise SceneError("scene-cells", "scene needs a non-empty cells list")
    return Scene(raw["dim"], raw, list(raw.get("t_grid", [])), raw.get("name", ""))


def fixture_cell_43() -> tuple[Cell, PreparedFunction]:
    """{x1^{3/2} < x2 < 1} with f = x1^3 / x2."""
    cells, funcs = load_scene("fixture43").instantiate()
    return cells[0], funcs[0][1]
