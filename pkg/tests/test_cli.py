import json
import os
import math
import subprocess
import sys

import pytest

from zqft import cli


def run(capsys, *args):
    code = cli.main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_det_interval(capsys):
    code, out, _ = run(capsys, "det", "--geometry", "interval:l=1.0", "--mass", "1.0")
    assert code == 0
    data = json.loads(out)
    assert data["log_det"] == pytest.approx(math.log(2 * math.sinh(1.0)), abs=1e-12)


def test_det_csv(capsys):
    code, out, _ = run(capsys, "det", "--geometry", "circle:L=2", "--mass", "1", "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "key,value"
    values = dict(line.split(",", 1) for line in lines[1:])
    assert float(values["det"]) == pytest.approx(4 * math.sinh(1.0) ** 2, rel=1e-12)


def test_bad_geometry_exit_code(capsys):
    code, _, err = run(capsys, "det", "--geometry", "blob:r=1", "--mass", "1")
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "det", "--geometry", "interval:l=-1", "--mass", "1")
    assert code == 2


def test_unknown_subcommand(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_tadpole_schemes(capsys):
    _, z, _ = run(capsys, "tadpole", "--geometry", "torus:L1=1,L2=1.5", "--mass", "1", "--point", "0.1,0.2")
    _, s, _ = run(capsys, "tadpole", "--geometry", "torus:L1=1,L2=1.5", "--mass", "1", "--point",
                  "0.1,0.2", "--scheme", "split")
    diff = json.loads(z)["tau"] - json.loads(s)["tau"]
    assert diff == pytest.approx((0.5772156649015329 - math.log(2)) / (2 * math.pi), abs=1e-10)


def test_dn_rows_and_plot(capsys, tmp_path):
    svg = tmp_path / "dn.svg"
    code, out, _ = run(capsys, "dn", "--geometry", "disk:R=1", "--mass", "1", "--modes", "4",
                       "--plot", str(svg))
    assert code == 0
    rows = json.loads(out)["rows"]
    assert [r["n"] for r in rows] == [0, 1, 2, 3, 4]
    assert set(rows[0]) >= {"n", "lambda", "omega", "ratio"}
    text = svg.read_text()
    assert text.startswith("<svg") and "<polyline" in text


def test_delta_order(capsys):
    code, out, _ = run(capsys, "delta-order", "--geometry", "disk:R=1", "--mass", "1",
                       "--n-min", "32", "--n-max", "128")
    assert code == 0
    assert json.loads(out)["slope"] == pytest.approx(-3, abs=0.1)


def test_glue_det_cylinder_passes(capsys):
    code, out, _ = run(capsys, "glue", "det", "--left", "cylinder:L=6.283185307179586,H=1.0",
                       "--right", "cylinder:L=6.283185307179586,H=1.5", "--mass", "1",
                       "--modes", "64")
    data = json.loads(out)
    assert code == 0 and data["pass"] and data["residual"] < 1e-6


def test_glue_greens_and_tadpole(capsys):
    code, out, _ = run(capsys, "glue", "greens", "--left", "interval:l=1", "--right", "interval:l=0.8",
                       "--mass", "1", "--p", "0.3", "--q", "1.2")
    assert code == 0 and json.loads(out)["pass"]
    code, out, _ = run(capsys, "glue", "tadpole", "--left", "interval:l=1", "--right",
                       "interval:l=0.8", "--mass", "1", "--p", "0.3")
    assert code == 0 and json.loads(out)["pass"]
    assert run(capsys, "glue", "greens", "--left", "interval:l=1", "--right", "interval:l=0.8",
               "--mass", "1")[0] == 2


def test_glue_partition_split(capsys):
    code, out, _ = run(capsys, "glue", "partition", "--geometry", "interval:l=2", "--split", "1.0",
                       "--mass", "1", "--potential", "p3=1")
    assert code == 0 and json.loads(out)["residual"] < 1e-6
    code, out, _ = run(capsys, "glue", "partition", "--left", "interval:l=1", "--right",
                       "interval:l=1", "--mass", "1", "--tadpole", "zero-uncorrected")
    assert code == 1 and not json.loads(out)["pass"]
    assert run(capsys, "glue", "partition", "--geometry", "interval:l=2", "--split", "3",
               "--mass", "1")[0] == 2


def test_graphs(capsys):
    code, out, _ = run(capsys, "graphs", "--max-half-edges", "6", "--valences", "3")
    data = json.loads(out)
    assert code == 0 and data["count"] == 2
    assert sorted(r["aut"] for r in data["rows"]) == [8, 12]


def test_partition_eta_grid(capsys):
    code, out, _ = run(capsys, "partition", "--geometry", "interval:l=2", "--mass", "1",
                       "--potential", "p3=1", "--order", "1", "--eta", "-1,0,1")
    assert code == 0
    rows = json.loads(out)["rows"]
    assert len(rows) == 9
    centre = [r for r in rows if r["eta"] == [0.0, 0.0]][0]
    assert centre["hbar^0"] == pytest.approx((2 * math.sinh(2.0) / 1.0) ** -0.5, abs=1e-12)


def test_partition_table_and_2d_refused(capsys):
    code, out, _ = run(capsys, "partition", "--geometry", "circle:L=2", "--mass", "1",
                       "--potential", "p3=1")
    rows = json.loads(out)["rows"]
    assert code == 0
    assert any(r["hbar_order"] == 1.0 and abs(r["value"] - 0.0645897823) < 1e-9 for r in rows)
    assert run(capsys, "partition", "--geometry", "torus:L1=1,L2=1", "--mass", "1",
               "--potential", "p3=1")[0] == 2


def test_petal_exact(capsys):
    code, out, _ = run(capsys, "petal", "--potential", "p3=1", "--tau", "1/3")
    rows = json.loads(out)["rows"]
    assert code == 0
    assert {"k": 1, "hbar_order": 1.0, "coefficient": "1/6"} in rows


def test_reduce(capsys):
    code, out, _ = run(capsys, "reduce", "--potential", "p1=0.1,p3=0.2", "--mass", "1")
    assert code == 0
    assert json.loads(out)["phi_cr"] == pytest.approx(-0.1010205, abs=1e-7)
    assert run(capsys, "reduce", "--potential", "p1=5,p3=10", "--mass", "1")[0] == 1


def test_anomaly(capsys):
    code, out, _ = run(capsys, "anomaly", "--radius", "1", "--mass", "0.8")
    assert code == 0
    data = json.loads(out)
    assert data["residual"] < 1e-5
    assert data["expected"] == pytest.approx(-1 / 3 + 0.64)
    assert abs(data["anomaly_density"] - data["anomaly_density_formula"]) < 1e-7


def test_deterministic_output(capsys):
    args = ["partition", "--geometry", "interval:l=1", "--mass", "1", "--potential", "p3=1,p4=0.5"]
    first = run(capsys, *args)[1]
    assert run(capsys, *args)[1] == first


def test_verify_all_quick_console_script():
    proc = subprocess.run([sys.executable, "-m", "zqft.cli", "verify-all", "--quick"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    data = json.loads(proc.stdout)
    assert data["all_pass"] and len(data["checks"]) == 12


def test_verify_all_independent_of_worker_count():
    outs = []
    for threads in ("1", "3"):
        env = dict(os.environ, ZQFT_THREADS=threads)
        proc = subprocess.run([sys.executable, "-m", "zqft.cli", "verify-all", "--quick"],
                              capture_output=True, text=True, timeout=120, env=env)
        outs.append(proc.stdout)
    assert outs[0] == outs[1]
