import json

import numpy as np
import pytest

from mildlab import expr as ex
from mildlab.checks import bound_dominance
from mildlab.geometry import (BoundedMonomial, Cell, PreparedFunction, SceneError, Unit,
                              bm_derivative_bound, bm_exact_derivative, boundary_grid,
                              c1_norm_check, constant_function, fixture_cell_43, load_scene,
                              prepared_derivative_bound, prepared_jet, unit_square)
from mildlab.mildness import MildParams


def quotient_fn():
    # x / (1 + x) written as b * F(b) with b = x and F(y) = 1/(1+y)
    F = Unit(ex.Recip(ex.Affine(ex.Var(0), 1.0, 1.0)), MildParams(1.0, 1.0, 0.0))
    return PreparedFunction((BoundedMonomial(1.0, (1,)),), 0, F)


def test_bm_exact_derivatives():
    b = BoundedMonomial(1.0, (3, -1), 8.0)
    assert bm_exact_derivative(b, (1, 0), (0.5, 0.5)) == pytest.approx(1.5)
    assert bm_exact_derivative(b, (0, 0), (0.5, 0.5)) == pytest.approx(0.25)
    h = BoundedMonomial(1.0, ("1/2",))
    assert bm_exact_derivative(h, (2,), (0.25,)) == pytest.approx(-2.0)


def test_bm_bound_examples():
    h = BoundedMonomial(1.0, ("1/2",))
    assert bm_derivative_bound(h, (2,), np.array([0.25])) == pytest.approx(16.0)
    b = BoundedMonomial(1.0, (3, -1), 8.0)
    x = np.array([0.5, 0.5])
    assert bm_derivative_bound(b, (0, 0), x) == pytest.approx(0.25)
    assert BoundedMonomial(1.0, (2, 3)).M_b == 3
    assert BoundedMonomial(1.0, ("-1/2",)).M_b == 1


def test_prepared_jet_examples():
    c, f = fixture_cell_43()
    assert prepared_jet(f, np.array([0.5, 0.8]), 0, c).value == pytest.approx(0.15625)
    plain = PreparedFunction((BoundedMonomial(1.0, (3, -1), 8.0),))
    x = np.array([0.4, 0.7])
    assert np.allclose(plain.jet(x, 3).coeffs, plain.monomials[0].jet(x, 3).coeffs)
    assert quotient_fn().jet(np.array([0.5]), 1).derivative((1,)) == pytest.approx(4 / 9)


def test_prepared_jet_outside_cell():
    c, f = fixture_cell_43()
    with pytest.raises(ValueError):
        prepared_jet(f, np.array([0.5, 0.1]), 1, c)


def test_unit_vanishing_rejected():
    F = Unit(ex.Affine(ex.Var(0), -1.0, 0.5))
    f = PreparedFunction((BoundedMonomial(1.0, (1,)),), 0, F)
    with pytest.raises(ValueError):
        f.jet(np.array([0.5]), 1)


def test_prepared_bound_fixture():
    _, f = fixture_cell_43()
    x = np.array([0.5, 0.8])
    bound, Af, Bf = prepared_derivative_bound(f, (1, 0), x)
    assert 0.9375 <= bound
    assert prepared_derivative_bound(f, (0, 0), x)[0] >= f.value(x)


def test_prepared_constants_with_unit():
    f = quotient_fn()
    for nu in [(0,), (1,), (3,), (6,)]:
        for x in (0.01, 0.3, 0.99):
            bound = prepared_derivative_bound(f, nu, np.array([x]))[0]
            assert abs(f.jet(np.array([x]), sum(nu)).derivative(nu)) <= bound


def test_bound_dominance_on_fixtures():
    c, f = fixture_cell_43()
    rep = bound_dominance(f, c, boundary_grid(2, 12), 6)
    assert rep["bm_violations"] == 0 and rep["prepared_violations"] == 0
    rep = bound_dominance(quotient_fn(), unit_square(1), boundary_grid(1, 64), 6)
    assert rep["bm_violations"] == 0 and rep["prepared_violations"] == 0


def test_c1_norm_examples():
    grid = boundary_grid(1, 64)
    rep = c1_norm_check(BoundedMonomial(1.0, ("3/2",)), grid, 2.0)
    assert rep["pass"] and rep["norm"] <= 1.5 and rep["norm"] > 1.4
    fine = np.logspace(-12, -0.01, 50)[:, None]
    rep = c1_norm_check(BoundedMonomial(1.0, ("1/2",)), fine, 1e5)
    assert not rep["pass"]
    rep = c1_norm_check(BoundedMonomial(0.3, (0,)), grid, 1.0)
    assert rep["norm"] == pytest.approx(0.3)


def test_cell_fixture_and_walls():
    c, _ = fixture_cell_43()
    assert c.validate(boundary_grid(2, 16)) > 0
    assert np.allclose(c.affine_map(np.array([[0.25, 0.5]])), [[0.25, 0.5625]])


def test_degenerate_cell_rejected():
    half = constant_function(0.5, 1)
    c = Cell([(constant_function(0.0, 0), constant_function(1.0, 0)), (half, half)])
    with pytest.raises(SceneError) as e:
        c.validate(boundary_grid(2, 4))
    assert e.value.invariant == "wall-order"


def test_wall_leaving_unit_interval():
    c = Cell([(constant_function(0.0, 0), constant_function(2.0, 0))])
    with pytest.raises(SceneError) as e:
        c.validate(boundary_grid(1, 4))
    assert e.value.invariant == "wall-range"


@pytest.mark.parametrize("name", ["fixture43", "hyperbola", "hyperbola_prepared"])
def test_bundled_scenes_validate(name):
    scene = load_scene(name)
    notes = scene.validate(16)
    assert all(n.get("wall_margin", 1) > 0 for n in notes)


def test_t_uniform_family(tmp_path):
    # b = t * x on (0,1): the declared range bound 1 and C^1 bound 1 hold on every fiber
    scene = {"dim": 1, "name": "linear",
             "cells": [{"walls": [{"lower": 0, "upper": 1}]}],
             "functions": [{"monomials": [{"coeff_of_t": {"op": "var", "index": 0}, "exponents": ["1"],
                                           "range_bound": 1}], "c1_bound": 1}],
             "t_grid": [0.1 * k for k in range(1, 10)]}
    s = load_scene(scene)
    s.validate(16)
    for fiber in s.fibers():
        cells, funcs = s.instantiate(fiber)
        (_, f), = funcs
        x = boundary_grid(1, 16)
        bound = prepared_derivative_bound(f, (1,), x)[0]
        assert np.all(np.abs(f.jet(x, 1).derivative((1,))) <= bound)


def test_scene_errors(tmp_path):
    with pytest.raises(SceneError) as e:
        load_scene({"dim": 0, "cells": []})
    assert e.value.invariant == "scene-dim"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SceneError) as e:
        load_scene(str(bad))
    assert e.value.invariant == "scene-json"
    s = load_scene({"dim": 1, "cells": [{"walls": [{"lower": 0, "upper": 1}]}],
                    "functions": [{"monomials": [{"coeff": 5, "exponents": ["1"], "range_bound": 1}]}]})
    with pytest.raises(SceneError) as e:
        s.validate(8)
    assert e.value.invariant == "range-bound"
    assert json.loads(json.dumps(e.value.to_json()))["invariant"] == "range-bound"


def test_declared_c1_bound_checked():
    s = load_scene({"dim": 1, "cells": [{"walls": [{"lower": 0, "upper": 1}]}],
                    "functions": [{"monomials": [{"exponents": ["1/2"]}], "c1_bound": 2}]})
    with pytest.raises(SceneError) as e:
        s.validate(64)
    assert e.value.invariant == "c1-bound"
