"""Tests for the command-line entry point."""

import json

import pytest

from common.exceptions import InvalidParameterError
from common.settings import load_settings
from main import main
from services.cli_service import parse_group, parse_vector


def _json_output(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_bounds_command(capsys):
    assert main(["bounds", "--n", "3", "--group-order", "6", "--m", "60"]) == 0
    data = _json_output(capsys)
    assert data["kind"] == "invariant"
    assert data["total"] == pytest.approx(0.381, abs=1e-3)


def test_equivariant_bounds_command(capsys):
    argv = ["bounds", "--n", "4", "--equivariant", "--stab", "6", "--m", "100"]
    assert main(argv) == 0
    assert _json_output(capsys)["main_term"] == pytest.approx(0.1291, abs=1e-4)
    assert main(["bounds", "--n", "4", "--orbits", "2,6", "--m", "64"]) == 0
    assert _json_output(capsys)["main_term"] == pytest.approx(0.2887, abs=1e-4)


def test_curves_command(tmp_path):
    out = tmp_path / "curves.csv"
    argv = ["bounds", "--n", "8", "--curves", "10", "1000", "--curve-n", "8,10"]
    argv += ["--out", str(out)]
    assert main(argv) == 0
    assert out.read_text().splitlines()[0] == (
        "n,m,group_order,stab_order,main_log10,conf_log10,total_log10,ordinary_log10"
    )


def test_covering_command(capsys):
    argv = ["covering", "--mode", "lattice", "--n", "2", "--q", "4"]
    argv += ["--domain", "delta_sn"]
    assert main(argv) == 0
    assert _json_output(capsys)["value"] == 13
    assert main(["covering", "--mode", "boundary", "--n", "2", "--q", "4"]) == 0
    assert _json_output(capsys)["bound"] == 13


def test_qfs_command(capsys):
    assert main(["qfs", "canon", "--x", "0.2,0.9,0.5"]) == 0
    assert _json_output(capsys)["canonical"] == [0.9, 0.5, 0.2]
    assert main(["qfs", "dist", "--x", "0,1", "--y", "1,0"]) == 0
    assert _json_output(capsys)["distance"] == 0.0


def test_sortnet_command(capsys, tmp_path):
    emitted = tmp_path / "sort4.json"
    argv = ["sortnet", "--n", "4", "--check", "exhaustive", "--emit", str(emitted)]
    assert main(argv) == 0
    data = _json_output(capsys)
    assert data == {
        "n": 4,
        "depth": 6,
        "nonzero_parameters": data["nonzero_parameters"],
        "checked": 24,
        "mismatches": 0,
    }
    assert json.loads(emitted.read_text())["widths"][0] == 4


def test_sortnet_random_check_on_floats(capsys):
    argv = ["sortnet", "--n", "5", "--check", "random", "--samples", "3000"]
    assert main(argv) == 0
    data = _json_output(capsys)
    assert data["checked"] == 3000
    assert data["mismatches"] == 0


def test_errors_exit_with_status_two():
    assert main(["bounds", "--n", "3", "--m", "60", "--eps", "0.7"]) == 2
    assert main(["qfs", "dist", "--x", "0,1"]) == 2
    assert main(["covering", "--mode", "lattice", "--group", "sn", "--n", "9"]) == 2


def test_plotdata_without_runs(tmp_path, monkeypatch):
    monkeypatch.setenv("QFSLAB_DB_PATH", str(tmp_path / "empty.sqlite"))
    assert main(["experiment", "plotdata", "--out", str(tmp_path / "out")]) == 2


def test_group_and_vector_parsing(tmp_path):
    cap = load_settings().group_cap
    assert parse_group("cn", 5, cap).order == 5
    generators = tmp_path / "group.json"
    generators.write_text(json.dumps({"degree": 4, "generators": [[2, 1, 3, 4]]}))
    assert parse_group(f"gens@{generators}", None, cap).order == 2
    with pytest.raises(InvalidParameterError):
        parse_group("an", 5, cap)
    with pytest.raises(InvalidParameterError):
        parse_group("sn", None, cap)
    with pytest.raises(InvalidParameterError):
        parse_vector("1,x")
