import json
import os
import subprocess
import sys

import numpy as np
import pytest

from intermit import __version__, analysis, cli


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_acim(tmp_path, capsys):
    assert run(tmp_path, "acim", "--alpha", "0.5", "--n", "1000") == 0
    rows = cli.read_csv(tmp_path / "acim.csv")
    assert len(rows) == 1000
    dens = np.array([float(r["density"]) for r in rows])
    assert abs(dens.sum() / 1000 - 1) < 1e-10
    head = (tmp_path / "acim.csv").read_text().splitlines()[:2]
    assert head[0] == f"# intermit {__version__}" and head[1].startswith("# config ")
    doc = load_json(tmp_path / "acim.json")
    assert doc["version"] == __version__ and doc["config"]["n"] == [1000]
    assert doc["summary"]["residual"] < 1e-9


def test_acim_tail_slope(tmp_path):
    assert run(tmp_path, "acim", "--n", "10000") == 0
    assert abs(load_json(tmp_path / "acim.json")["summary"]["tail_slope"] + 0.5) < 0.1


def _snapshot(d):
    return {f: (d / f).read_bytes() for f in sorted(os.listdir(d)) if os.path.isfile(d / f)}


def test_warm_cache_identical(tmp_path):
    cache = tmp_path / "cache"
    args = ["acim", "--n", "500", "--cache", str(cache), "--out", str(tmp_path)]
    assert cli.main(args) == 0
    (entry,) = os.listdir(cache)
    stamp = os.stat(cache / entry).st_mtime_ns
    first = _snapshot(tmp_path)
    assert cli.main(args) == 0
    assert os.stat(cache / entry).st_mtime_ns == stamp
    assert _snapshot(tmp_path) == first


def test_gap_scan_self_consistent(tmp_path):
    assert run(tmp_path, "gap-scan", "--alpha", "0.5,0.75", "--n", "128:1024:x2") == 0
    rows = cli.read_csv(tmp_path / "gap_scan.csv")
    fits = load_json(tmp_path / "gap_scan.json")["summary"]["fits"]
    for a in ("0.5", "0.75"):
        pts = [(float(r["N"]), float(r["one_minus_lambda2"])) for r in rows if r["alpha"] == a]
        assert len(pts) == 4
        f = analysis.scaling_fit(pts)
        assert abs(f.slope - fits[a]["slope"]) < 1e-12
        assert abs(f.slope + float(a)) < 0.15


def test_escape_scan(tmp_path):
    assert run(tmp_path, "escape-scan", "--alpha", "0.25", "--n", "128,256,512,1024") == 0
    fits = load_json(tmp_path / "escape_scan.json")["summary"]["fits"]
    assert abs(fits["0.25"]["slope"] + 1) < 0.1
    rows = cli.read_csv(tmp_path / "escape_scan.csv")
    f = analysis.scaling_fit([(float(r["N"]), float(r["one_minus"])) for r in rows])
    assert abs(f.slope - fits["0.25"]["slope"]) < 1e-12


@pytest.mark.parametrize("cmd", ["gap-scan", "escape-scan"])
def test_scan_rejects_short_grid(tmp_path, cmd, capsys):
    assert run(tmp_path, cmd, "--n", "1000") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and err["exit_code"] == 2


def test_accim_converge(tmp_path):
    assert run(tmp_path, "accim-converge", "--n", "100,500", "--n-ref", "2000") == 0
    rows = cli.read_csv(tmp_path / "accim_converge.csv")
    assert float(rows[0]["tv"]) > float(rows[1]["tv"])
    # at N = N* the only difference is the hole
    assert run(tmp_path, "accim-converge", "--n", "100,2000", "--n-ref", "2000") == 0
    rows = cli.read_csv(tmp_path / "accim_converge.csv")
    assert 0 < float(rows[1]["tv"]) < float(rows[0]["tv"])
    assert run(tmp_path, "accim-converge", "--n", "300,500", "--n-ref", "2000") == 2


def test_bound_table(tmp_path):
    assert run(tmp_path, "bound-table", "--n", "100,200") == 0
    rows = cli.read_csv(tmp_path / "bound_table.csv")
    for r in rows:
        lo, hi = float(r["eps2_over_eps1"]), float(r["bound_hi"])
        assert lo < float(r["one_minus_lambda2_averaged"]) < hi
    doc = load_json(tmp_path / "bound_table.json")
    assert doc["summary"]["bound_holds"]
    # the older command name still works
    assert run(tmp_path, "table1", "--n", "100,200") == 0
    assert load_json(tmp_path / "bound_table.json") == doc


def test_tower(tmp_path):
    assert run(tmp_path, "tower", "--n", "4,8", "--m", "2048") == 0
    for r in cli.read_csv(tmp_path / "tower.csv"):
        assert float(r["identity_error"]) < 1e-9
        assert abs(float(r["lambda_n"]) - float(r["interval_lambda"])) < 5e-3


def test_twostate(tmp_path):
    assert run(tmp_path, "twostate", "--n", "100") == 0
    s = load_json(tmp_path / "twostate.json")["summary"]
    assert s["eigenvalue_check"] < 1e-12 and s["eps0"] == 0.01


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.75, "n": 200}))
    assert run(tmp_path, "acim", "--config", str(cfg)) == 0
    assert load_json(tmp_path / "acim.json")["config"]["alpha"] == [0.75]
    # flags override the file
    assert run(tmp_path, "acim", "--config", str(cfg), "--n", "300") == 0
    assert load_json(tmp_path / "acim.json")["config"]["n"] == [300]


@pytest.mark.parametrize(
    "args",
    [
        ["acim", "--alpha", "1.5"],
        ["acim", "--n", "100,200"],
        ["acim", "--n", "abc"],
        ["acim", "--tol", "-1"],
        ["tower", "--n", "1"],
        ["tower", "--m", "8"],
        ["twostate", "--eps0", "0.7"],
        ["escape-scan", "--n", "128,256,512,1024", "--hole-bins", "0"],
    ],
)
def test_config_errors(tmp_path, args, capsys):
    assert run(tmp_path, *args) == 2
    assert json.loads(capsys.readouterr().err)["exit_code"] == 2


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert run(tmp_path, "acim", "--config", str(cfg)) == 2
    cfg.write_text(json.dumps({"colour": 1}))
    assert run(tmp_path, "acim", "--config", str(cfg)) == 2
    assert run(tmp_path, "acim", "--config", str(tmp_path / "missing.json")) == 2


def test_numerical_failure(tmp_path, capsys):
    assert run(tmp_path, "acim", "--n", "1000", "--max-iter", "2") == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "numerical"


def test_io_failure(tmp_path, capsys):
    assert cli.main(["acim", "--out", str(tmp_path / "nope")]) == 4
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["acim", "--n", "100", "--cache", str(blocker), "--out", str(tmp_path)]) == 4
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "io"


def test_deterministic_bytes(tmp_path):
    runs = [["tower", "--n", "4,8", "--m", "512"], ["gap-scan", "--n", "64:512:x2"]]
    snaps = []
    for _ in range(2):
        for args in runs:
            assert cli.main(args + ["--out", str(tmp_path)]) == 0
        snaps.append(_snapshot(tmp_path))
    assert len(snaps[0]) == 4 and snaps[0] == snaps[1]


def test_console_script(tmp_path):
    exe = os.path.join(os.path.dirname(sys.executable), "intermit")
    cmd = [exe] if os.path.exists(exe) else [sys.executable, "-m", "intermit.cli"]
    p = subprocess.run(cmd + ["twostate", "--n", "50", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert p.returncode == 0, p.stderr
    assert json.loads(p.stdout)["eps0"] == 0.02
    p = subprocess.run(cmd + ["acim", "--alpha", "2"], capture_output=True, text=True)
    assert p.returncode == 2
