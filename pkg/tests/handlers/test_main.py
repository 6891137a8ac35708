import json

import pytest

from adiabatlab.main import _override, build_parser, main


@pytest.fixture
def model_file(tmp_path, tiny_data):
    def write(data=tiny_data):
        path = tmp_path / "model.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_override_parsing():
    assert _override("eps_grid=[0.1, 0.2]") == ("eps_grid", [0.1, 0.2])
    assert _override("observable=density0") == ("observable", "density0")
    args = build_parser().parse_args(["sweep", "m1", "--set", "n=2", "--set", "k=3"])
    assert args.overrides == [("n", 2), ("k", 3)]


def test_success(model_file, tmp_path):
    out = tmp_path / "out"
    assert main(["check-gap", model_file(), "--out-dir", str(out), "--threads", "1"]) == 0
    assert (out / "check_gap.csv").exists()
    assert (out / "report.md").exists()


def test_rerun_is_byte_identical(model_file, tmp_path):
    path = model_file()
    for name in ("a", "b"):
        assert main(["weight-table", path, "--out-dir", str(tmp_path / name), "--set", "points=51", "--set", "s_max=10"]) == 0
    for name in ("weight_table.csv", "weight_table.provenance.json", "report.md"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_errors_exit_3(model_file, tiny_data, tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["check-gap", model_file(), "--out-dir", out, "--budget-seconds", "0"]) == 3
    assert error_of(capsys)["pointer"] == "--budget-seconds"
    tiny_data["h0"][0]["mu"] = "zero"
    assert main(["check-gap", model_file(tiny_data), "--out-dir", out]) == 3
    assert error_of(capsys) == {
        "error": "ConfigError",
        "message": "expected a number, got 'zero'",
        "pointer": "/h0/0/mu",
        "exit_code": 3,
    }
    assert main(["norms", "m1", "--out-dir", out, "--set", "eps_grid=[0.1]"]) == 3


def test_missing_gap_exits_2(model_file, tiny_data, tmp_path, capsys):
    tiny_data["gap"]["g"] = 5.0
    assert main(["check-gap", model_file(tiny_data), "--out-dir", str(tmp_path / "out")]) == 2
    assert error_of(capsys)["error"] == "NoGap"


def test_bad_environment(monkeypatch, model_file, capsys):
    monkeypatch.setenv("ADIABATLAB_MODE_BUDGET", "many")
    assert main(["check-gap", model_file()]) == 3
    assert error_of(capsys)["pointer"] == "ADIABATLAB_MODE_BUDGET"
