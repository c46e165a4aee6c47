"""mildlab command line.

Exit codes: 0 when every requested check passes, 1 when a check fails, 2 on
bad input (an error JSON naming the failed invariant goes to stdout).
Logarithms are natural. Floats are written with 17 significant digits in JSON
and 9 in CSV.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import checks, diophantine as dio
from .charts import NORM_MODES, fixture_map, make_charts
from .geometry import SceneError, boundary_grid, load_scene
from .golden import load_golden
from .mildness import MildParams, mild_compose, mild_product, mild_sum
from .substitution import (PhiInf, PhiR, uniform_mildpara, verify_factor_exp, verify_factor_xr,
                           verify_main_crpara, verify_main_mildpara, verify_weak_mildness,
                           verify_weak_mildness_inf, zero_mild_constants)


class InputError(Exception):
    def __init__(self, invariant: str, message: str):
        super().__init__(message)
        self.invariant = invariant
        self.message = message


# output


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _json_text(obj) -> str:
    """Deterministic JSON with floats at 17 significant digits; non-finite floats become strings."""
    def enc(x, ind):
        pad = "  " * (ind + 1)
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, ind + 1)}" for k, v in x.items()]
            return "{\n" + ",\n".join(items) + "\n" + "  " * ind + "}"
        if isinstance(x, list):
            if not x:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in x):
                return "[" + ", ".join(enc(v, ind) for v in x) + "]"
            return "[\n" + ",\n".join(pad + enc(v, ind + 1) for v in x) + "\n" + "  " * ind + "]"
        if isinstance(x, bool) or x is None:
            return json.dumps(x)
        if isinstance(x, float):
            if not math.isfinite(x):
                return json.dumps(str(x))
            return format(x, ".17g")
        return json.dumps(x)
    return enc(_plain(obj), 0) + "\n"


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format(v, ".9g") if isinstance(v, float) else
                    str(v).lower() if isinstance(v, bool) else v for v in (_plain(r[c]) for c in columns)])
    return buf.getvalue()


def write_atomic(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, payload, rows=None, columns=None):
    if args.format == "csv":
        if rows is None:
            raise InputError("format", f"{args.command} has no CSV form")
        write_atomic(args.output, _csv_text(rows, columns))
    else:
        write_atomic(args.output, _json_text(payload))


# argument parsing


def _int_list(s: str) -> list[int]:
    try:
        out = []
        for part in s.split(","):
            if "-" in part.strip()[1:]:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {s!r}") from None


def _params(s: str) -> MildParams:
    try:
        vals = [float(v) for v in s.split(",")]
        if len(vals) not in (3, 4):
            raise ValueError
        order = vals[3] if len(vals) == 4 else math.inf
        if math.isfinite(order):
            if order != int(order):
                raise ValueError("order must be an integer")
            order = int(order)
        return MildParams(*vals[:3], order=order)
    except (ValueError, TypeError) as e:
        why = f" ({e})" if str(e) else ""
        raise argparse.ArgumentTypeError(f"expected A,B,C[,order]: {s!r}{why}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError("arguments", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mildlab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt="json"):
        sp.add_argument("--output", "-o", default=None, help="report path (default: stdout)")
        sp.add_argument("--format", choices=["json", "csv"], default=fmt)

    sp = sub.add_parser("verify-faa", help="jet composition vs Faa di Bruno on random expressions")
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--order", type=int, default=4)
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    common(sp)

    sp = sub.add_parser("verify-lemma-ab", help="brute-force vs closed form of the composite derivative bound sum")
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--nu-max", type=int, default=4)
    sp.add_argument("--draws", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    common(sp)

    sp = sub.add_parser("mild-compose", help="mild parameters of f+g, f*g or f o g")
    sp.add_argument("--f", type=_params, required=True, help="A,B,C[,order] of f (outer)")
    sp.add_argument("--g", type=_params, required=True, help="A,B,C[,order] of g (inner)")
    sp.add_argument("--op", choices=["compose", "sum", "product"], default="compose")
    sp.add_argument("--m", type=int, default=1, help="dimension for composition")
    common(sp)

    sp = sub.add_parser("verify-lemmas", help="substitution lemmas and main theorems on a scene")
    sp.add_argument("--scene", default="fixture43", help="scene JSON path or bundled fixture name")
    sp.add_argument("--r", type=_int_list, default=list(range(1, 7)), help="r sweep, e.g. 1-6")
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--order", type=int, default=8, help="derivative order for the phi^inf checks")
    sp.add_argument("--grid-density", type=int, default=16)
    common(sp)

    for name in ("build-charts", "charts"):
        sp = sub.add_parser(name, help="affine C^r charts of f o phi^r (CSV)")
        sp.add_argument("--scene", default="fixture43")
        sp.add_argument("--r", type=_int_list, default=[3])
        sp.add_argument("--norm-mode", choices=NORM_MODES, default="crnorm")
        sp.add_argument("--A", type=float, default=None,
                        help="mild constant; default: golden value for fixture43, else fitted")
        sp.add_argument("--grid-density", type=int, default=64)
        common(sp, "csv")

    sp = sub.add_parser("count-points", help="rational points of bounded height and covers (CSV)")
    sp.add_argument("--fixture", choices=sorted(dio.FIXTURES), default="parabola")
    sp.add_argument("--height", type=int, default=None)
    sp.add_argument("--sweep", type=_int_list, default=None, help="heights, e.g. 10,20,50,100")
    common(sp, "csv")

    sp = sub.add_parser("demo-counterexample", help="hyperbola xy = t: 0-mild blow-up vs phi^inf")
    sp.add_argument("--scene", default="hyperbola")
    sp.add_argument("--prepared-scene", default="hyperbola_prepared")
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--order", type=int, default=8)
    sp.add_argument("--grid-density", type=int, default=64)
    common(sp)
    return p


def _check_config(args):
    for r in getattr(args, "r", []) or []:
        if r < 1:
            raise InputError("r_sweep", "r values must be >= 1")
    if getattr(args, "order", 1) < 1:
        raise InputError("order", "order must be >= 1")
    if getattr(args, "grid_density", 4) < 4:
        raise InputError("grid_density", "grid density must be >= 4")
    if getattr(args, "kappa", 1.0) <= 0:
        raise InputError("kappa", "kappa must be positive")
    if getattr(args, "m", 1) < 1:
        raise InputError("m", "dimension must be >= 1")


def _scene(src, density):
    scene = load_scene(src)
    scene.validate(min(density, 16))
    return scene


# commands


def cmd_verify_faa(args):
    rep = checks.faa_sweep(args.m, args.order, args.trials, args.seed)
    _emit(args, rep, [rep], list(rep))
    return rep["pass"]


def cmd_verify_lemma_ab(args):
    rep = checks.lemma_ab_sweep(args.m, args.nu_max, args.draws, args.seed)
    _emit(args, rep, [rep], list(rep))
    return rep["pass"]


def cmd_mild_compose(args):
    op = {"sum": lambda: mild_sum(args.f, args.g), "product": lambda: mild_product(args.f, args.g),
          "compose": lambda: mild_compose(args.f, args.g, args.m)}[args.op]
    res = op()
    payload = {"op": args.op, "f": args.f.to_json(), "g": args.g.to_json(), "result": res.to_json()}
    _emit(args, payload, [res.to_json()], ["A", "B", "C", "order"])
    return True


def _golden_for(scene):
    return load_golden().get("fixture43") if scene.name == "fixture43" else None


def cmd_verify_lemmas(args):
    scene = _scene(args.scene, args.grid_density)
    gold = _golden_for(scene)
    decl = (lambda k: (gold[k]["A"], gold[k]["B"])) if gold else (lambda k: None)
    grid = boundary_grid(scene.dim, args.grid_density)
    crgrid = boundary_grid(scene.dim, gold["crpara_grid_density"]) if gold else grid
    reports = []
    for fiber in scene.fibers():
        cells, funcs = scene.instantiate(fiber)
        for ci, cell in enumerate(cells):
            for r in args.r:
                phi = PhiR(cell, r)
                reports.append(verify_weak_mildness(phi, grid, declared=decl("weak_mildness"),
                                                    fixture=scene.name).to_json())
                reports.append(verify_factor_xr(phi, "argmin", grid, declared=decl("factor_xr"),
                                                fixture=scene.name).to_json())
            pinf = PhiInf(cell, args.kappa)
            order = min(args.order, 6)
            reports.append(verify_weak_mildness_inf(pinf, grid, order, declared=decl("weak_mildness_inf"),
                                                    fixture=scene.name).to_json())
            reports.append(verify_factor_exp(pinf, "argmin", grid, order, declared=decl("factor_exp"),
                                             fixture=scene.name).to_json())
            weak = decl("weak_mildness_inf")
            for fi, (fc, f) in enumerate(funcs):
                if fc != ci:
                    continue
                for r in args.r:
                    rep = verify_main_crpara(f, cell, r, crgrid, A=gold["crpara_A"] if gold else None,
                                             fixture=scene.name)
                    reports.append({**rep, "function": fi, "t": list(fiber.t)})
                rep = verify_main_mildpara(f, cell, args.kappa, grid, args.order, weak=weak,
                                           fixture=scene.name)
                reports.append({**rep, "function": fi, "t": list(fiber.t)})
    ok = all(r["pass"] for r in reports)
    cols = ["lemma", "fixture", "order", "pass"]
    _emit(args, {"scene": scene.name, "pass": ok, "reports": reports}, reports, cols)
    return ok


def cmd_build_charts(args):
    scene = _scene(args.scene, 16)
    gold = _golden_for(scene)
    rows = []
    for fiber in scene.fibers():
        cells, funcs = scene.instantiate(fiber)
        for fi, (ci, f) in enumerate(funcs):
            for r in args.r:
                A = args.A
                if A is None and gold is not None:
                    A = gold["chart_A"]
                if A is None:
                    grid = boundary_grid(scene.dim, args.grid_density)
                    A = verify_main_crpara(f, cells[ci], r, grid)["fitted_A"]
                if not A > 0:
                    raise InputError("A", "mild constant must be positive")
                cs = make_charts(fixture_map(cells[ci], f, r), A, r, args.norm_mode)
                rows.append({**cs.csv_row(), "A": A, "function": fi,
                             "t": ";".join(str(v) for v in fiber.t)})
    cols = ["r", "norm_mode", "N", "count", "worst_norm", "pass"]
    if len(rows) > len(args.r):
        cols += ["function", "t"]
    _emit(args, {"scene": scene.name, "rows": rows}, rows, cols)
    return all(r["pass"] for r in rows)


def cmd_count_points(args):
    pred, m, n = dio.FIXTURES[args.fixture]
    heights = args.sweep or ([args.height] if args.height is not None else [10, 20, 50, 100])
    if any(H <= math.e for H in heights):
        raise InputError("height", "heights must exceed e")
    try:
        dio.c2_exponent(m, n)
    except ValueError as e:
        raise InputError("dimension", f"fixture {args.fixture}: {e}") from None
    points_fn = pred.points if isinstance(pred, dio.PolyGraph) else None
    res = dio.count_vs_bound(pred, heights, m, n, points_fn=points_fn)
    cols = ["H", "points", "degree_d", "cover_size", "logH_pow_c2"]
    _emit(args, {"fixture": args.fixture, **res}, res["rows"], cols)
    return res["pass"]


def cmd_demo(args):
    zero = zero_mild_constants(_scene(args.scene, 16), args.grid_density)
    growth = [b["A_star"] / a["A_star"] / math.log10(a["t"][0] / b["t"][0])
              for a, b in zip(zero, zero[1:])]
    uni = uniform_mildpara(_scene(args.prepared_scene, 16), args.kappa, 16, args.order)
    ok = bool(all(g >= 3.0 for g in growth) and uni["pass"])
    payload = {"zero_mild": zero, "growth_per_decade": growth, "phi_inf": uni, "pass": ok}
    rows = [{"t": z["t"][0], "A_star": z["A_star"]} for z in zero]
    _emit(args, payload, rows, ["t", "A_star"])
    return ok


COMMANDS = {"verify-faa": cmd_verify_faa, "verify-lemma-ab": cmd_verify_lemma_ab,
            "mild-compose": cmd_mild_compose, "verify-lemmas": cmd_verify_lemmas,
            "build-charts": cmd_build_charts, "charts": cmd_build_charts,
            "count-points": cmd_count_points, "demo-counterexample": cmd_demo}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _check_config(args)
        ok = COMMANDS[args.command](args)
    except InputError as e:
        sys.stdout.write(_json_text({"error": "input", "invariant": e.invariant, "message": e.message}))
        return 2
    except SceneError as e:
        sys.stdout.write(_json_text(e.to_json()))
        return 2
    except (ValueError, KeyError, TypeError) as e:
        sys.stdout.write(_json_text({"error": "input", "invariant": "scene-parse", "message": str(e)}))
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
