"""A small expression language evaluated to floats or to jets.

Trees are built from :class:`Const`, :class:`Var`, :class:`Add`, :class:`Mul`,
:class:`Power`, :class:`Exp`, :class:`Recip` and :class:`Affine`. They stand
in for the definable functions (units, walls, test fixtures) of the theory.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .jets import Jet, as_exponent, jet_exp, jet_power, jet_reciprocal


class ExprNode:
    def n_vars(self) -> int:
        return max((c.n_vars() for c in self.children()), default=0)

    def children(self) -> tuple:
        return ()

    def __add__(self, other):
        return Add((self, _wrap(other)))

    __radd__ = __add__

    def __mul__(self, other):
        return Mul((self, _wrap(other)))

    __rmul__ = __mul__

    def __pow__(self, mu):
        return Power(self, as_exponent(mu))

    def __truediv__(self, other):
        return Mul((self, Recip(_wrap(other))))

    def __neg__(self):
        return Affine(self, -1.0, 0.0)

    def __sub__(self, other):
        return Add((self, -_wrap(other)))


def _wrap(x) -> ExprNode:
    return x if isinstance(x, ExprNode) else Const(float(x))


@dataclass(frozen=True)
class Const(ExprNode):
    value: float

    def evaluate(self, x):
        return np.full(np.shape(x)[:-1], self.value, dtype=float)

    def jet(self, var_jets, template):
        return Jet.constant(self.value, template.point, template.order)

    def to_json(self):
        return self.value


@dataclass(frozen=True)
class Var(ExprNode):
    index: int

    def n_vars(self):
        return self.index + 1

    def evaluate(self, x):
        return np.asarray(x, dtype=float)[..., self.index]

    def jet(self, var_jets, template):
        return var_jets[self.index]

    def to_json(self):
        return {"op": "var", "index": self.index}


@dataclass(frozen=True)
class Add(ExprNode):
    args: tuple

    def children(self):
        return self.args

    def evaluate(self, x):
        return sum(a.evaluate(x) for a in self.args)

    def jet(self, var_jets, template):
        out = self.args[0].jet(var_jets, template)
        for a in self.args[1:]:
            out = out + a.jet(var_jets, template)
        return out

    def to_json(self):
        return {"op": "add", "args": [a.to_json() for a in self.args]}


@dataclass(frozen=True)
class Mul(ExprNode):
    args: tuple

    def children(self):
        return self.args

    def evaluate(self, x):
        out = 1.0
        for a in self.args:
            out = out * a.evaluate(x)
        return out

    def jet(self, var_jets, template):
        out = self.args[0].jet(var_jets, template)
        for a in self.args[1:]:
            out = out * a.jet(var_jets, template)
        return out

    def to_json(self):
        return {"op": "mul", "args": [a.to_json() for a in self.args]}


@dataclass(frozen=True)
class Power(ExprNode):
    arg: ExprNode
    mu: object

    def children(self):
        return (self.arg,)

    def evaluate(self, x):
        v = self.arg.evaluate(x)
        if np.any(~(v > 0)):
            raise ValueError("power node evaluated at a non-positive argument")
        return v ** float(self.mu)

    def jet(self, var_jets, template):
        return jet_power(self.arg.jet(var_jets, template), self.mu)

    def to_json(self):
        return {"op": "pow", "arg": self.arg.to_json(), "mu": str(self.mu)}


@dataclass(frozen=True)
class Exp(ExprNode):
    arg: ExprNode

    def children(self):
        return (self.arg,)

    def evaluate(self, x):
        return np.exp(self.arg.evaluate(x))

    def jet(self, var_jets, template):
        return jet_exp(self.arg.jet(var_jets, template))

    def to_json(self):
        return {"op": "exp", "arg": self.arg.to_json()}


@dataclass(frozen=True)
class Recip(ExprNode):
    arg: ExprNode

    def children(self):
        return (self.arg,)

    def evaluate(self, x):
        v = self.arg.evaluate(x)
        if np.any(v == 0):
            raise ValueError("reciprocal node evaluated at zero")
        return 1.0 / v

    def jet(self, var_jets, template):
        return jet_reciprocal(self.arg.jet(var_jets, template))

    def to_json(self):
        return {"op": "recip", "arg": self.arg.to_json()}


@dataclass(frozen=True)
class Affine(ExprNode):
    """a * arg + b."""

    arg: ExprNode
    a: float
    b: float

    def children(self):
        return (self.arg,)

    def evaluate(self, x):
        return self.a * self.arg.evaluate(x) + self.b

    def jet(self, var_jets, template):
        return self.arg.jet(var_jets, template) * self.a + self.b

    def to_json(self):
        return {"op": "affine", "arg": self.arg.to_json(), "a": self.a, "b": self.b}


def monomial_expr(mu: Sequence, coefficient=1.0) -> ExprNode:
    factors = [Power(Var(i), as_exponent(e)) for i, e in enumerate(mu) if as_exponent(e) != 0]
    if coefficient != 1.0 or not factors:
        factors.insert(0, Const(float(coefficient)))
    return factors[0] if len(factors) == 1 else Mul(tuple(factors))


def jet_eval_expr(e: ExprNode, x, r: int) -> Jet:
    """Jet of the expression at point(s) ``x`` up to order ``r``."""
    x = np.asarray(x, dtype=float)
    template = Jet.constant(0.0, x, r)
    return e.jet(Jet.identity(x, r), template)


def eval_on_jets(e: ExprNode, var_jets: Sequence[Jet], template: Jet | None = None) -> Jet:
    """Substitute jets for the variables of ``e`` (composition through the tree)."""
    template = template if template is not None else var_jets[0]
    return e.jet(list(var_jets), template)


def from_json(obj) -> ExprNode:
    """Parse the scene-file expression format.

    Numbers are constants; objects carry ``op`` in {const, var, add, mul,
    pow, exp, recip, affine}.
    """
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return Const(float(obj))
    if isinstance(obj, str):
        return Const(float(Fraction(obj)))
    if not isinstance(obj, dict) or "op" not in obj:
        raise ValueError(f"not an expression: {obj!r}")
    op = obj["op"]
    if op == "const":
        return Const(float(Fraction(str(obj["value"]))))
    if op == "var":
        return Var(int(obj["index"]))
    if op in ("add", "mul"):
        args = tuple(from_json(a) for a in obj["args"])
        if not args:
            raise ValueError(f"{op} needs at least one argument")
        return (Add if op == "add" else Mul)(args)
    if op == "pow":
        return Power(from_json(obj["arg"]), as_exponent(str(obj["mu"])))
    if op == "exp":
        return Exp(from_json(obj["arg"]))
    if op == "recip":
        return Recip(from_json(obj["arg"]))
    if op == "affine":
        return Affine(from_json(obj["arg"]), float(obj["a"]), float(obj["b"]))
    raise ValueError(f"unknown expression op {op!r}")


def random_positive_expr(rng, n_vars: int, depth: int = 3) -> ExprNode:
    """A random tree that is positive on (0,1)^n_vars, so powers and reciprocals stay defined."""
    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return Var(int(rng.integers(n_vars)))
        return Const(float(rng.uniform(0.2, 1.5)))
    kind = rng.choice(["add", "mul", "pow", "exp", "recip", "affine"])
    sub = lambda: random_positive_expr(rng, n_vars, depth - 1)
    if kind == "add":
        return Add((sub(), sub()))
    if kind == "mul":
        return Mul((sub(), sub()))
    if kind == "pow":
        return Power(sub(), Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 3))))
    if kind == "exp":
        # keep the exponent of order one
        return Exp(Affine(sub(), float(rng.uniform(-0.5, 0.5)), 0.0))
    if kind == "recip":
        return Recip(sub())
    return Affine(sub(), float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.0, 1.0)))
