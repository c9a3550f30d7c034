import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from plasmonls.cli import main
from plasmonls.config import OUT_ENV


def write(path, text):
    path.write_text(text)
    return str(path)


def data_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_solve_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--out", str(out), "--workers", "2"]) == 0
    assert {p.name for p in out.iterdir()} == {"modes.csv", "blocks.csv", "report.json", "manifest.json"}
    header = (out / "modes.csv").read_text().splitlines()[0]
    manifest = json.loads((out / "manifest.json").read_text())
    assert header == f"# config_hash={manifest['config_hash']} command=solve"
    assert manifest["seed"] == 42 and manifest["workers"] == 2 and "timestamp" in manifest
    for name in ("modes.csv", "blocks.csv", "report.json"):
        assert "timestamp" not in (out / name).read_text()
    rows = data_rows(out / "modes.csv")
    assert len(rows) == json.loads((out / "report.json").read_text())["wave_operator"]["size"]
    mantissa = rows[0]["frequency"].split("e")[0].lstrip("-").replace(".", "")
    assert len(mantissa) == 17


def test_output_directory_precedence(tmp_path, monkeypatch):
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv(OUT_ENV, str(env_dir))
    cfg = write(tmp_path / "c.ini", f"[output]\ndirectory = {tmp_path / 'from_config'}\n")
    assert main(["oracle-compare", "--config", cfg]) == 0
    assert (env_dir / "oracle.json").exists() and not (tmp_path / "from_config").exists()
    flag_dir = tmp_path / "from_flag"
    assert main(["oracle-compare", "--config", cfg, "--out", str(flag_dir)]) == 0
    assert (flag_dir / "oracle.json").exists()
    monkeypatch.delenv(OUT_ENV)
    assert main(["oracle-compare", "--config", cfg]) == 0
    assert (tmp_path / "from_config" / "oracle.json").exists()


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = write(tmp_path / "c.ini", "[grid]\nn_kk = 3\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_bad_cli_usage_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["solve", "--workers", "many"]) == 2
    assert main(["--version"]) == 0


def test_dense_cap_exits_3(tmp_path, capsys):
    cfg = write(tmp_path / "c.ini", "[solver]\ndense_cap = 20\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "reduce" in capsys.readouterr().err
    assert main(["oracle-compare", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_field_map(tmp_path):
    pts = write(tmp_path / "p.csv", "x,y,z\n1.5,0.2,0.1\n-1,1,2\n")
    out = tmp_path / "o"
    assert main(["field-map", "--points", pts, "--out", str(out)]) == 0
    rows = data_rows(out / "field_map.csv")
    side = json.loads((out / "field_map.json").read_text())
    assert len(rows) == 2 * (side["n_field"] + side["n_medium"])
    assert (out / "field_map.csv").read_text().startswith(f"# config_hash={side['config_hash']}")
    summary = data_rows(out / "field_map_summary.csv")
    assert [int(r["point"]) for r in summary] == [0, 1]


def test_field_map_rejects_interior_points(tmp_path, capsys):
    pts = write(tmp_path / "p.csv", "x,y,z\n2,0,0\n0,0,0\n5,5,5\n0.1,0.05,0\n")
    assert main(["field-map", "--points", pts, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "rows 2, 4" in err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("text", ["a,b,c\n1,2,3\n", "x,y,z\n1,2\n", "x,y,z\n", "x,y,z\n1,two,3\n"])
def test_points_file_validation(tmp_path, text):
    pts = write(tmp_path / "p.csv", text)
    assert main(["field-map", "--points", pts, "--out", str(tmp_path / "o")]) == 2


def test_field_map_requires_points(tmp_path):
    assert main(["field-map", "--out", str(tmp_path)]) == 2


def test_limit_study_coupling(tmp_path):
    out = tmp_path / "o"
    assert main(["limit-study", "--out", str(out)]) == 0
    rows = data_rows(out / "limit_study.csv")
    assert list(rows[0]) == ["scale", "volume", "m_family_norm", "e_minus_free_norm", "m_slope", "e_slope"]
    m = [float(r["m_family_norm"]) for r in rows]
    assert m[0] > m[1] > m[2]
    assert float(rows[0]["m_slope"]) == pytest.approx(1.0, abs=0.05)
    assert float(rows[0]["e_slope"]) == pytest.approx(2.0, abs=0.1)


def test_limit_study_zero_scale_row_is_exact(tmp_path):
    cfg = write(tmp_path / "c.ini", "[study]\nscales = 0.1, 0.05, 0.0\n")
    assert main(["limit-study", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    last = data_rows(tmp_path / "o" / "limit_study.csv")[-1]
    assert float(last["m_family_norm"]) == 0.0 and float(last["e_minus_free_norm"]) <= 1e-12


def test_limit_study_volume(tmp_path):
    cfg = write(tmp_path / "c.ini", "[study]\nkind = volume\nscales = 1.0, 0.5, 0.25\npoints = 2, 0, 0\n")
    assert main(["limit-study", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = data_rows(tmp_path / "o" / "limit_study.csv")
    vol = [float(r["volume"]) for r in rows]
    m = [float(r["m_family_norm"]) for r in rows]
    assert vol[0] / vol[1] == pytest.approx(8.0) and m[0] > m[1] > m[2]


def test_limit_study_needs_three_scales(tmp_path, capsys):
    cfg = write(tmp_path / "c.ini", "[study]\nscales = 0.1, 0.05\n")
    assert main(["limit-study", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "at least 3 scales" in capsys.readouterr().err


def test_verify_failure_exits_1(tmp_path):
    cfg = write(tmp_path / "c.ini", "[verify]\nchecks = zero_coupling, unitarity_refinement\nunitarity_tol = 1e-9\n")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    verdict = json.loads((tmp_path / "o" / "verdict.json").read_text())
    assert verdict["all_pass"] is False and verdict["zero_coupling"]["pass"] is True


def test_verify_unknown_check_exits_2(tmp_path):
    cfg = write(tmp_path / "c.ini", "[verify]\nchecks = nonsense\n")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    env = dict(os.environ, **{OUT_ENV: str(tmp_path / "o")})
    proc = subprocess.run([sys.executable, "-m", "plasmonls.cli", "oracle-compare"], env=env, capture_output=True,
                          text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert "PASS dense_oracle" in proc.stdout
