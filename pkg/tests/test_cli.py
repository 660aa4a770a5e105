import io
import json
import subprocess
import sys
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from nestedot.acceptance import cli_commands, fixture_path
from nestedot.cli import _clean, run
from nestedot.dynamics import TrajectoryEnsemble
from nestedot.measures import DiscreteMeasure, RandomMeasure


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(argv)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_dist_nested_diracs():
    code, out, _ = call(["dist", "--a", fixture_path("M_dirac0.json"), "--b", fixture_path("M_dirac1.json"), "--p", "2"])
    assert code == 0
    assert json.loads(out) == {"wp": 1.0, "wpp": 1.0}
    assert out.endswith("\n")


def test_dist_discrete_measures(tmp_path):
    a = write(tmp_path, "a.json", {"dim": 1, "atoms": [[0.0], [2.0]], "weights": [0.5, 0.5]})
    b = write(tmp_path, "b.json", {"dim": 1, "atoms": [[1.0]], "weights": [1.0]})
    code, out, _ = call(["dist", "--a", a, "--b", b])
    assert code == 0 and json.loads(out)["wpp"] == 1.0


def test_emit_coupling(tmp_path):
    target = tmp_path / "pi.json"
    code, _, _ = call(["dist", "--a", fixture_path("M.json"), "--b", fixture_path("N.json"), "--emit-coupling", str(target)])
    assert code == 0
    d = json.loads(target.read_text())
    np.testing.assert_allclose(np.sum(d["mass"], axis=1), [0.5, 0.3, 0.2], atol=1e-12)


def test_geodesic_samples():
    code, out, _ = call(["geodesic", "--a", fixture_path("M.json"), "--b", fixture_path("N.json"), "--samples", "3"])
    assert code == 0
    samples = json.loads(out)
    assert [s["t"] for s in samples] == [0.0, 0.5, 1.0]
    for s in samples:
        RandomMeasure.from_dict(s["measure"])


def test_barycenter_command():
    code, out, _ = call(["barycenter", "--m", fixture_path("M.json")])
    assert code == 0
    mu = DiscreteMeasure.from_dict(json.loads(out))
    assert mu.size == 6


def test_simulate_zero_field(tmp_path):
    init = json.loads(open(fixture_path("init.json")).read())
    field = write(tmp_path, "zero.json", {"kind": "sum", "terms": []})
    code, out, _ = call(["simulate", "--init", fixture_path("init.json"), "--field", field, "--t1", "1", "--steps", "5"])
    assert code == 0
    ens = TrajectoryEnsemble.from_dict(json.loads(out))
    for cfg, pth in zip(init["configurations"], ens.paths):
        for state in pth.states:
            np.testing.assert_array_equal(state, cfg["points"])


def test_simulate_from_random_measure(tmp_path):
    code, out, _ = call(["simulate", "--init", fixture_path("M.json"), "--field", fixture_path("field.json"), "--t1", "0.5", "--steps", "4"])
    assert code == 0
    assert len(json.loads(out)["paths"]) == 3


def test_simulate_csv():
    code, out, _ = call(["simulate", "--init", fixture_path("init.json"), "--field", fixture_path("field.json"), "--t1", "1", "--steps", "2", "--csv"])
    assert code == 0
    assert out.startswith("path,node,t,particle,x0,x1\n")


def test_verify_ce_passes_and_csv():
    args = ["verify-ce", "--ensemble", fixture_path("ensemble.json"), "--field", fixture_path("field.json"), "--cyl", fixture_path("cylinder.json")]
    code, out, _ = call(args)
    assert code == 0
    rep = json.loads(out)
    assert rep["max_abs"] <= 1e-3 and 1.8 <= rep["order"] <= 2.2
    code, out, _ = call(args + ["--csv"])
    assert code == 0 and out.startswith("t,residual\n")


def test_verify_ce_breach_exit_2(tmp_path):
    wrong = write(tmp_path, "wrong.json", {"kind": "constant", "v": [3.0, 0.0]})
    code, out, _ = call(["verify-ce", "--ensemble", fixture_path("ensemble.json"), "--field", wrong, "--cyl", fixture_path("cylinder.json")])
    assert code == 2
    assert json.loads(out)["max_abs"] > 1e-3


def test_verify_sps():
    code, out, _ = call(["verify-sps", "--ensemble", fixture_path("ensemble.json"), "--field", fixture_path("field.json")])
    assert code == 0 and json.loads(out)["residual"] <= 1e-3


def test_bb_check_command():
    code, out, _ = call(["bb-check", "--a", fixture_path("M.json"), "--b", fixture_path("N.json")])
    assert code == 0
    assert abs(json.loads(out)["gap"]) <= 1e-8


def test_gronwall_command():
    args = ["--a", fixture_path("mu_a.json"), "--b", fixture_path("mu_b.json"), "--t1", "1", "--steps", "32"]
    code, out, _ = call(["gronwall", "--field", fixture_path("field.json")] + args)
    assert code == 0 and json.loads(out)["ok"] is True
    code, out, _ = call(["gronwall", "--field", fixture_path("field.json"), "--csv"] + args)
    assert code == 0 and out.startswith("t,distance,bound\n")


def test_malformed_json_line_precise(tmp_path):
    bad = write(tmp_path, "bad.json", '{\n  "dim": 1,\n  "atoms": [[0.0]\n}')
    code, out, err = call(["barycenter", "--m", bad])
    assert code == 3 and out == ""
    assert f"{bad}:4:1:" in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nosuch"],
        ["dist", "--a", "/nonexistent.json", "--b", "/nonexistent.json"],
        ["geodesic", "--a", "X", "--b", "X", "--samples", "1"],
    ],
)
def test_input_errors_exit_3(argv):
    assert call(argv)[0] == 3


def test_invalid_measure_exit_3(tmp_path):
    bad = write(tmp_path, "m.json", {"dim": 1, "atoms": [[0.0]], "weights": [0.4]})
    code, _, err = call(["barycenter", "--m", bad])
    assert code == 3 and "expected 1" in err


def test_version_on_stderr():
    code, out, err = call(["--version"])
    assert code == 0 and out == "" and err.startswith("nestedot ")


@pytest.mark.parametrize("argv", cli_commands(), ids=lambda a: a[0])
def test_byte_identical_reruns(argv):
    a, b = call(argv), call(argv)
    assert a[0] == 0 and a[1] == b[1]
    json.loads(a[1])


def test_non_finite_values_become_null():
    assert json.dumps(_clean({"x": float("nan"), "y": [float("inf"), 1.0]})) == '{"x": null, "y": [null, 1.0]}'


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "nestedot", "barycenter", "--m", fixture_path("M_dirac0.json")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout) == {"dim": 1, "atoms": [[0.0]], "weights": [1.0]}
