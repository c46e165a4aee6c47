import json
import subprocess
import sys

import pytest

from mildlab.cli import main
from mildlab.mildness import MildParams, mild_compose


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_verify_faa(capsys):
    code, out = run(capsys, "verify-faa", "--m", "2", "--order", "3", "--trials", "4")
    d = json.loads(out)
    assert code == 0 and d["pass"] and d["max_rel_error"] < 1e-12


def test_verify_lemma_ab(capsys):
    code, out = run(capsys, "verify-lemma-ab", "--m", "2", "--nu-max", "3", "--draws", "5")
    assert code == 0 and json.loads(out)["pass"]


def test_mild_compose_matches_library(capsys):
    code, out = run(capsys, "mild-compose", "--f", "1,1,0", "--g", "2,1,0.5", "--m", "2")
    want = mild_compose(MildParams(1, 1, 0), MildParams(2, 1, 0.5), 2)
    assert code == 0
    assert json.loads(out)["result"]["A"] == pytest.approx(want.A, rel=1e-15)


@pytest.mark.parametrize("bad", [["--f", "1,1"], ["--f", "1,-1,0"], ["--f", "1,1,0,2.5"], ["--op", "div"]])
def test_mild_compose_bad_input(capsys, bad):
    argv = {"--f": "1,1,0", "--g": "1,1,0"}
    extra = []
    for k, v in zip(bad[::2], bad[1::2]):
        if k in argv:
            argv[k] = v
        else:
            extra += [k, v]
    code, out = run(capsys, "mild-compose", *[x for kv in argv.items() for x in kv], *extra)
    d = json.loads(out)
    assert code == 2 and d["error"] == "input" and d["invariant"] == "arguments"


def test_verify_lemmas_fixture(capsys):
    code, out = run(capsys, "verify-lemmas", "--r", "1-2", "--order", "6")
    d = json.loads(out)
    assert code == 0 and d["pass"]
    names = {r["lemma"] for r in d["reports"]}
    assert {"weak_mildness", "factor_xr", "crpara", "mildpara"} <= names


def test_build_charts_csv(capsys):
    code, out = run(capsys, "build-charts", "--r", "1-3")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "r,norm_mode,N,count,worst_norm,pass"
    assert [l.split(",")[3] for l in lines[1:]] == ["9", "36", "81"]
    assert all(l.endswith(",true") for l in lines[1:])


def test_build_charts_failure_exit(capsys):
    code, out = run(capsys, "charts", "--r", "3", "--A", "0.4")
    assert code == 1 and out.strip().endswith(",false")


def test_count_points(capsys):
    code, out = run(capsys, "count-points", "--sweep", "10,20,50,100")
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == "H,points,degree_d,cover_size,logH_pow_c2"
    assert [r.split(",")[3] for r in rows[1:]] == ["1"] * 4
    code, out = run(capsys, "count-points", "--fixture", "square", "--height", "5")
    assert code == 2 and json.loads(out)["invariant"] == "dimension"


def test_demo_counterexample(capsys):
    code, out = run(capsys, "demo-counterexample")
    d = json.loads(out)
    assert code == 0 and d["pass"]
    assert min(d["growth_per_decade"]) >= 3


@pytest.mark.parametrize("argv,inv", [
    (["verify-lemmas", "--r", "0"], "r_sweep"),
    (["verify-lemmas", "--grid-density", "2"], "grid_density"),
    (["verify-lemmas", "--kappa", "0"], "kappa"),
    (["verify-faa", "--m", "0"], "m"),
    (["build-charts", "--r", "x"], "arguments"),
])
def test_config_errors(capsys, argv, inv):
    code, out = run(capsys, *argv)
    assert code == 2 and json.loads(out)["invariant"] == inv


def test_malformed_scene(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2, "cells": [{"walls": [{"lower": 0, "upper": 1}]}]}')
    code, out = run(capsys, "verify-lemmas", "--scene", str(bad))
    d = json.loads(out)
    assert code == 2 and d["invariant"]
    bad.write_text("[1, 2")
    code, out = run(capsys, "build-charts", "--scene", str(bad))
    assert code == 2 and json.loads(out)["invariant"] == "scene-json"


def test_csv_forms(capsys):
    code, out = run(capsys, "mild-compose", "--f", "1,1,0", "--g", "1,1,0", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "A,B,C,order"
    code, out = run(capsys, "verify-faa", "--trials", "1", "--format", "csv")
    assert code == 0 and out.startswith("m,order,trials,")


def test_output_deterministic_and_atomic(tmp_path):
    paths = [tmp_path / "out" / f"r{k}.json" for k in range(2)]
    for p in paths:
        assert main(["verify-lemmas", "--r", "2", "--output", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert sorted(x.name for x in (tmp_path / "out").iterdir()) == ["r0.json", "r1.json"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mildlab", "count-points", "--height", "4"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[1].startswith("4,1,")
