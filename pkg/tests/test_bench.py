import csv
import subprocess
import sys

import pytest

from inexact_lyap.bench import (EXTRA_COLUMNS, RESULT_COLUMNS, ExperimentConfig, default_config_path, fill_savings,
                                load_suite, run_experiment, run_suite)
from inexact_lyap.cli import main


def _cfg(label, **kw):
    base = dict(problem="cd2d", kind="cd2d", params={"grid_n": 15})
    base.update(kw)
    return ExperimentConfig(label, **base)


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg("x", outer="smith")
    with pytest.raises(ValueError):
        _cfg("x", inner="gmres")
    with pytest.raises(ValueError):
        _cfg("x", inner="bicgstab", stop="fixed")
    assert _cfg("x").stop == "--"


def test_minres_needs_symmetric():
    with pytest.raises(ValueError):
        run_experiment(_cfg("x", inner="minres", stop="prac1"))


def test_direct_and_fixed_rows():
    d = run_experiment(_cfg("d"))
    assert d.min_tau is None and d.max_tau is None and d.it_in is None
    md = d.md_values()
    assert md[4] == md[5] == md[10] == "--" and len(md) == 13
    f = run_experiment(_cfg("f", inner="bicgstab", prec="ilut", stop="fixed", tau=1e-10))
    assert f.min_tau == f.max_tau == 1e-10
    fill_savings([f])
    assert f.save == 0.0


def test_two_row_suite_savings(tmp_path):
    rows = run_suite([_cfg("f", params={"grid_n": 50}, inner="bicgstab", prec="ilut", stop="fixed", tau=1e-10),
                      _cfg("p", params={"grid_n": 50}, inner="bicgstab", prec="ilut", stop="prac1")], tmp_path)
    assert rows[0].save == 0.0
    assert rows[1].save == pytest.approx(100 * (1 - rows[1].it_in / rows[0].it_in))
    assert rows[1].save > 10


def test_empty_suite(tmp_path):
    assert run_suite([], tmp_path) == []
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines == [",".join(RESULT_COLUMNS + EXTRA_COLUMNS)]
    md = (tmp_path / "results.md").read_text().splitlines()
    assert len(md) == 2 and md[0].count("|") == 14


def test_row_failure_isolated(tmp_path):
    rows = run_suite([_cfg("bad", inner="minres", stop="prac1"), _cfg("ok")], tmp_path)
    assert rows[0].error and "MINRES" in rows[0].error
    assert rows[1].error is None and rows[1].converged


def test_bundled_configs_parse():
    desk = load_suite(default_config_path())
    assert len(desk) == 24
    assert {c.kind for c in desk} == {"cd2d", "heat3d", "msd"}
    assert all(c.eps_hat == 1e-8 and c.j_max == 50 for c in desk)
    scaled = load_suite(default_config_path(), seed=3, desk_scale=0.5)
    assert all(c.seed == 3 for c in scaled)
    assert scaled[0].params["grid_n"] == 25


def test_cli_smoke(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["--config", str(default_config_path("smoke.ini")), "--out", str(out),
                 "--only", "cd2d-rksm-direct,heat3d-lradi-minres-prac1"]) == 0
    assert "2 rows, 2 converged" in capsys.readouterr().out
    with (out / "results.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["label"] for r in rows] == ["cd2d-rksm-direct", "heat3d-lradi-minres-prac1"]
    assert (out / "traces" / "cd2d-rksm-direct.csv").exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "inexact_lyap", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "--desk-scale" in r.stdout
