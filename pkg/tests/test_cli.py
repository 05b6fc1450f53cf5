import csv
import io
import json
from pathlib import Path

import pytest

from bddc_lfa.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, RunConfig, load_config, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# bddc-lfa ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def _body(path):
    return Path(path).read_text().splitlines()[1:]


def test_sweep_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--p", "4", "--n", "2", "--i", "1,2", "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert [r["i"] for r in rows] == ["1", "2"]
    assert rows[0]["mode"] == "real"
    assert float(rows[0]["kappa"]) == pytest.approx(4.14, abs=0.01)
    assert float(rows[1]["kappa"]) == pytest.approx(2.23, abs=0.01)
    assert "runtime" in out.read_text().splitlines()[0]


def test_sweep_deterministic_modulo_header(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--p", "2", "--n", "2", "--i", "1", "--j", "1", "--mult", "c", "--omega", "1.2"]
    assert main(args + ["--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(args + ["--out", str(b), "--threads", "2"]) == EXIT_OK
    assert _body(a) == _body(b)
    assert _rows(a)[0]["mode"] == "complex"


def test_sweep_json_and_eig_dump(tmp_path):
    out, eigs = tmp_path / "s.json", tmp_path / "e.json"
    assert main(["sweep", "--p", "2", "--n", "1", "--format", "json", "--out", str(out),
                 "--eigs-out", str(eigs)]) == EXIT_OK
    header, body = out.read_text().split("\n", 1)
    assert json.loads(header)["header"].startswith("# bddc-lfa sweep")
    assert json.loads(body)[0]["p"] == 2
    dump = json.loads(eigs.read_text())
    (entry,) = dump.values()
    assert len(entry) == 4 and all(len(v) == 4 for v in entry.values())


def test_optimize_writes_curve(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["optimize", "--p", "4", "--n", "2", "--i", "2", "--mult", "f",
                 "--grid", "0.5:1.5:0.1", "--out", str(out)]) == EXIT_OK
    (row,) = _rows(out)
    assert row["tuned"] == "omega"
    curve = _rows(tmp_path / "o.curve.csv")
    assert len(curve) == 11
    best = min(curve, key=lambda r: float(r["objective"]))
    assert best["omega"] == row["omega"]
    assert {"lam_min", "max_imag"} <= set(curve[0])


def test_optimize_surface(tmp_path):
    out, surf = tmp_path / "o.csv", tmp_path / "surf.csv"
    assert main(["optimize", "--p", "2", "--n", "1", "--i", "1", "--j", "1", "--mult", "fc",
                 "--grid", "3.0:4.0:0.5", "--grid2", "1.0:1.2:0.1", "--out", str(out),
                 "--curve-out", str(surf)]) == EXIT_OK
    assert _rows(out)[0]["tuned"] == "omega1+omega2"
    assert len(_rows(surf)) == 9


def test_histogram(tmp_path):
    out = tmp_path / "h.csv"
    assert main(["histogram", "--p", "4", "--n", "2", "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert sum(int(r["count"]) for r in rows) == 16 * 16
    assert float(rows[1]["bin_lo"]) == pytest.approx(0.1)


def test_validate(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate", "--p", "2", "--m", "4", "--i", "1,2", "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert all(r["agree"] == "True" for r in rows)
    assert all(float(r["max_deviation"]) < 1e-8 for r in rows)
    for r in rows:
        assert float(r["kappa_ritz"]) == pytest.approx(float(r["kappa_finite"]), rel=0.02)


def test_validate_fine_wrap_grid(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate", "--p", "2", "--m", "4", "--mult", "f", "--grid", "1.0:1.4:0.2",
                 "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert [r["omega"] for r in rows] == ["1", "1.2", "1.4"]
    assert all(float(r["kappa"]) > 1 for r in rows)


# ------------------------------------------------------------ exit codes
@pytest.mark.parametrize("argv", [
    ["sweep", "--n", "0"],
    ["sweep", "--i", "3"],
    ["sweep", "--p", "1"],
    ["sweep", "--mult", "f"],
    ["sweep", "--omega", "-1", "--mult", "f"],
    ["optimize"],
    ["histogram", "--j", "1", "--mult", "c", "--omega", "1.0"],
    ["validate", "--p", "4"],
    ["validate", "--p", "4", "--m", "4", "--lfa-p", "8"],
    ["validate", "--p", "32", "--m", "4"],
    ["sweep", "--stencil", "1,2,3"],
])
def test_config_errors_exit_2(tmp_path, argv, capsys):
    out = tmp_path / "x.csv"
    assert main(argv + ["--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": [4], "frobnicate": 1}))
    assert main(["sweep", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text("{not json")
    assert main(["sweep", "--config", str(cfg)]) == EXIT_CONFIG
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"command": "optimize"}))
    assert main(["sweep", "--config", str(cfg)]) == EXIT_CONFIG


def test_numerical_failure_exit_3(tmp_path, capsys):
    out = tmp_path / "x.csv"
    code = main(["optimize", "--p", "4", "--n", "1", "--mult", "f", "--grid", "20:21:1",
                 "--out", str(out)])
    assert code == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_command_line_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": [8], "n": [2]}))
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--p", "4", "--out", str(out)]) == EXIT_OK
    assert _rows(out)[0]["p"] == "4"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    data = load_config(str(path))
    cfg = RunConfig(**data).validate()
    assert cfg.specs()


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    out = tmp_path / "s.csv"
    proc = subprocess.run([sys.executable, "-m", "bddc_lfa", "sweep", "--p", "2", "--n", "1",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    assert len(_rows(out)) == 1
    proc = subprocess.run([sys.executable, "-m", "bddc_lfa", "sweep", "--n", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG
