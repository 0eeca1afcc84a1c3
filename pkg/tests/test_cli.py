import json
import math

import pandas as pd
import pytest

from app.cli import main

PI2 = math.pi ** 2


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for variable in ("FEF_OUTPUT_DIR", "FEF_THREADS", "FEF_LOG_LEVEL"):
        monkeypatch.delenv(variable, raising=False)


def write_config(tmp_path, payload):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def error_line(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    assert len(lines) == 1
    return json.loads(lines[0])


def test_spectrum_writes_eigen_data(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["spectrum", "--out", str(out), "--grid", "401"]) == 0
    assert capsys.readouterr().err == ""
    payload = json.loads((out / "spectrum.json").read_text(encoding="utf-8"))
    for m, lam in enumerate(payload["eigenvalues"], start=1):
        assert lam == pytest.approx(m * m * PI2, rel=1e-6)
    assert all(mode["simplicity"]["passed"] for mode in payload["modes"])
    assert payload["problem"]["grid_points"] == 401
    frame = pd.read_csv(out / "eigenfunction_2.csv")
    assert list(frame.columns) == ["x", "y", "yprime"]
    assert len(frame) == 401


def test_reruns_are_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["spectrum", "--out", str(first), "--grid", "201"]) == 0
    assert main(["spectrum", "--out", str(second), "--grid", "201"]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    assert "spectrum.json" in names
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_unknown_config_key_exits_2(tmp_path, capsys):
    config = write_config(tmp_path, {"problem": {"bogus": 1}})
    assert main(["spectrum", "--config", config, "--out", str(tmp_path)]) == 2
    payload = error_line(capsys)
    assert payload["error"] == "config"
    assert payload["key"] == "problem.bogus"


def test_command_line_errors_exit_2(capsys):
    assert main(["nonsense"]) == 2
    assert error_line(capsys)["key"] == "argv"
    assert main(["spectrum", "--grid", "many"]) == 2
    assert error_line(capsys)["key"] == "argv"


def test_nan_coefficient_exits_3(tmp_path, capsys):
    table = tmp_path / "q.csv"
    table.write_text("x,value\n0,0\n0.5,nan\n1,0\n", encoding="utf-8")
    config = write_config(tmp_path, {"problem": {"potential": "q.csv"}})
    assert main(["spectrum", "--config", config, "--out", str(tmp_path / "out")]) == 3
    assert error_line(capsys)["error"] == "invalid-data"


def test_csv_coefficient_fixes_the_grid(tmp_path):
    nodes = [i / 200 for i in range(201)]
    pd.DataFrame({"x": nodes, "value": [2.0] * 201}).to_csv(tmp_path / "q.csv", index=False)
    config = write_config(tmp_path, {"problem": {"potential": "q.csv"}, "spectrum": {"count": 1}})
    out = tmp_path / "out"
    assert main(["spectrum", "--config", config, "--out", str(out)]) == 0
    payload = json.loads((out / "spectrum.json").read_text(encoding="utf-8"))
    assert payload["problem"]["grid_points"] == 201
    assert payload["eigenvalues"][0] == pytest.approx(PI2 + 2.0, rel=1e-6)


def test_surface_without_zero_column_exits_4(tmp_path, capsys):
    rows = [{"t": i / 10, "r": 0.01, "lambda": PI2 - 0.01} for i in range(11)]
    pd.DataFrame(rows).to_csv(tmp_path / "surface.csv", index=False)
    config = write_config(tmp_path, {"reconstruct": {"surface": "surface.csv"}})
    assert main(["reconstruct", "--config", config, "--out", str(tmp_path / "out"), "--grid", "201"]) == 4
    assert error_line(capsys)["error"] == "invalid-input"


def test_missing_surface_exits_2(tmp_path, capsys):
    assert main(["reconstruct", "--out", str(tmp_path / "empty"), "--grid", "201"]) == 2
    assert error_line(capsys)["error"] == "invalid-argument"


def test_rejected_candidate_still_exits_0(tmp_path, capsys):
    config = write_config(tmp_path, {"validate_fef": {"candidate": "sine:2", "t_grid": "uniform:101"}})
    out = tmp_path / "out"
    assert main(["validate-fef", "--config", config, "--out", str(out), "--grid", "401"]) == 0
    assert capsys.readouterr().err == ""
    report = json.loads((out / "validation.json").read_text(encoding="utf-8"))
    assert report["verdict"] == "rejected"
    assert report["reason"].startswith("condition_iv")


def test_surface_then_reconstruct(tmp_path):
    config = write_config(
        tmp_path,
        {
            "fef_surface": {"t_grid": "uniform:81", "r_list": [0.0005, 0.001], "cross_check": False},
            "reconstruct": {"ground_truth": "zero"},
        },
    )
    out = tmp_path / "out"
    assert main(["fef-surface", "--config", config, "--out", str(out), "--grid", "401"]) == 0
    for name in ("surface.csv", "surface.json", "surface.dat"):
        assert (out / name).is_file()
    surface = pd.read_csv(out / "surface.csv")
    assert list(surface.columns) == ["t", "r", "lambda"]
    assert len(surface) == 81 * 3

    assert main(["reconstruct", "--validate", "--config", config, "--out", str(out), "--grid", "401"]) == 0
    frame = pd.read_csv(out / "reconstruction.csv")
    assert list(frame.columns) == ["t", "phi0", "q_hat"]
    payload = json.loads((out / "reconstruction.json").read_text(encoding="utf-8"))
    assert payload["diagnostics"]["roundtrip_lambda1_error"] is not None
    assert set(payload["diagnostics"]["residual_norms"]) == {"l2", "linf", "relative_l2"}
    assert payload["interior_t"][0] == pytest.approx(0.05)
    roundtrip = json.loads((out / "roundtrip.json").read_text(encoding="utf-8"))
    assert roundtrip["success"] is True
    assert roundtrip["lambda1_error"] <= 1e-4
    validation = json.loads((out / "validation.json").read_text(encoding="utf-8"))
    assert validation["verdict"] == "accepted", validation["reason"]


@pytest.mark.slow
def test_default_surface_passes_validation(tmp_path):
    out = str(tmp_path / "out")
    assert main(["fef-surface", "--out", out, "--grid", "801"]) == 0
    assert main(["reconstruct", "--out", out, "--grid", "801"]) == 0
    assert main(["validate-fef", "--out", out, "--grid", "801"]) == 0
    report = json.loads((tmp_path / "out" / "validation.json").read_text(encoding="utf-8"))
    assert report["verdict"] == "accepted", report["reason"]


def test_weakstar_table(tmp_path):
    config = write_config(tmp_path, {"weakstar": {"n_list": [4, 8]}})
    out = tmp_path / "out"
    assert main(["weakstar", "--config", config, "--out", str(out), "--grid", "401"]) == 0
    frame = pd.read_csv(out / "weakstar.csv")
    assert list(frame.columns) == ["n", "lambda_n", "gap"]
    assert frame["n"].tolist() == [4, 8]
    assert frame["gap"].iloc[1] < frame["gap"].iloc[0]


def test_log_directory_receives_a_log_file(tmp_path):
    logs = tmp_path / "logs"
    config = write_config(tmp_path, {"spectrum": {"count": 1}})
    assert main(["spectrum", "--config", config, "--out", str(tmp_path / "out"), "--grid", "201", "--log-dir", str(logs)]) == 0
    assert list(logs.glob("fef_*.log"))


def test_environment_sets_the_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("FEF_OUTPUT_DIR", str(tmp_path / "env-out"))
    config = write_config(tmp_path, {"spectrum": {"count": 1}})
    assert main(["spectrum", "--config", config, "--grid", "201"]) == 0
    assert (tmp_path / "env-out" / "spectrum.json").is_file()
