import io
import json

import numpy as np
import pytest

from cran_adf import adf, cli, coupling


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, out)
    return code, out.getvalue()


def test_solve_demo_matches_exhaustive():
    code, text = run(["solve", "--demo"])
    assert code == 0
    lines = text.splitlines()
    groups = sorted(sorted(int(i) for i in line.split(": ")[1].split(",")) for line in lines[:2])
    assert groups == [[0, 1], [2, 3]]
    _, f_star = adf.solve_exhaustive(cli.DEMO_PSI, adf.LoadingSpec.equal(4, 2))
    assert lines[2] == f"f: {f_star:.9g}" == "f: 10"
    assert lines[3].startswith("f_history: ")


def test_solve_from_csv(tmp_path):
    path = tmp_path / "psi.csv"
    with open(path, "w") as fh:
        coupling.write_psi_csv(cli.DEMO_PSI, fh)
    code, text = run(["solve", str(path), "--restarts", "5"])
    assert code == 0 and "f: 10" in text


def test_exhaustive_and_bound():
    code, text = run(["exhaustive", "--demo"])
    assert code == 0 and "f: 10" in text
    code, text = run(["bound", "--demo"])
    assert code == 0
    f_lb = float([l for l in text.splitlines() if l.startswith("f_lb")][0].split()[1])
    assert f_lb <= 10


def test_infeasible_exit_code():
    assert run(["solve", "--demo", "--gamma", "3,3"])[0] == 2
    assert run(["exhaustive", "--demo", "--gamma", "3,3"])[0] == 2


def test_config_errors_exit_one(tmp_path):
    assert run(["sweep", "--config", str(tmp_path / "nope.json")])[0] == 1
    assert run(["solve", "--demo", "--ads", "3"])[0] == 1
    assert run(["solve"])[0] == 1
    assert run(["solve", str(tmp_path / "missing.csv")])[0] == 1


def test_demo_prints_default_config():
    code, text = run(["demo"])
    cfg = json.loads(text)
    assert code == 0 and cfg["N"] == 16 and cfg["schemes"] == ["bcd", "random", "exhaustive"]


def test_sweep_writes_csv(tmp_path):
    cfg = {"N": 4, "A": 2, "M": 2, "J": 1, "trials": 2, "snr_grid_db": [0, 10],
           "restarts": 2, "realizations_per_drop": 2}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "r.csv"
    summary = tmp_path / "s.csv"
    code, _ = run(["sweep", "--config", str(path), "--out", str(out), "--summary", str(summary),
                   "--schemes", "bcd,random", "--csi", "instantaneous,statistical", "--seed", "3"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scheme,csi_mode,snr_db,trial,sum_rate,leakage_f,f_lower_bound,wall_time_ms"
    assert len(lines) == 1 + 2 * 2 * 2 * 2
    assert summary.read_text().count("\n") == 1 + 2 * 2 * 2
