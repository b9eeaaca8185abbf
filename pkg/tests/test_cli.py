"""End-to-end runs of the command line interface."""

import json
from pathlib import Path

import pytest

from hvzkit import cli


CONFIGS = Path(__file__).resolve().parent.parent / "configs"

FAST = [
    "--grid-n", "64", "--box", "20", "--qmax", "2", "--refine-rounds", "1",
    "--no-figures",
]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_chartab_prints_exact_table(capsys):
    code, out = run(capsys, "chartab", "--sizes", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split("\t") == ["type", "[3]", "[2,1]", "[1,1,1]"]
    table = {row.split("\t")[0]: row.split("\t")[1:] for row in lines[1:]}
    assert table["[3]"] == ["1", "1", "1"]
    assert table["[2,1]"] == ["-1", "0", "2"]
    assert table["[1,1,1]"] == ["1", "-1", "1"]


def test_chartab_writes_json(tmp_path, capsys):
    code, out = run(capsys, "chartab", "--sizes", "2,2", "--out", str(tmp_path))
    assert code == 0
    data = json.loads((tmp_path / "chartab.json").read_text())
    assert data


def test_chartab_rejects_bad_sizes(capsys):
    assert cli.main(["chartab", "--sizes", "2,bad"]) == 2


def test_threshold_free_pair_is_zero(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out = run(
        capsys, "threshold", "--config", str(CONFIGS / "free_pair.yaml"),
        "--alpha", "[2]", "--out", str(out_dir), *FAST,
    )
    assert code == 0
    assert "essential bottom = 0" in out
    report = json.loads((out_dir / "threshold.json").read_text())
    assert report["mu"] == 0.0
    assert report["scans"][0]["gamma"] == [[0.0]]
    csvs = list(out_dir.glob("lambda_*.csv"))
    assert csvs and csvs[0].read_text().startswith("stage,q0,value")


def test_threshold_writes_figures_by_default(tmp_path, capsys):
    out_dir = tmp_path / "figs"
    code, _ = run(
        capsys, "threshold", "--config", str(CONFIGS / "free_pair.yaml"),
        "--alpha", "[2]", "--out", str(out_dir),
        "--grid-n", "32", "--box", "20", "--qmax", "1", "--refine-rounds", "0",
    )
    assert code == 0
    assert (out_dir / "lambda_curves.png").stat().st_size > 0


def test_manifest_round_trip_is_bitwise(tmp_path, capsys):
    first = tmp_path / "a"
    second = tmp_path / "b"
    code, _ = run(
        capsys, "threshold", "--config", str(CONFIGS / "three_bosons.yaml"),
        "--alpha", "[3]", "--out", str(first), *FAST,
    )
    assert code == 0
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["command"] == "threshold"
    assert manifest["system"]["particles"][0]["mass"] == 1.0
    code, _ = run(
        capsys, "threshold", "--manifest", str(first / "manifest.json"),
        "--out", str(second),
    )
    assert code == 0
    a = json.loads((first / "threshold.json").read_text())
    b = json.loads((second / "threshold.json").read_text())
    assert a == b


def test_manifest_command_mismatch(tmp_path, capsys):
    out_dir = tmp_path / "run"
    run(
        capsys, "threshold", "--config", str(CONFIGS / "free_pair.yaml"),
        "--alpha", "[2]", "--out", str(out_dir), *FAST,
    )
    code = cli.main(["hvz", "--manifest", str(out_dir / "manifest.json"),
                     "--out", str(tmp_path / "x")])
    assert code == 2


def test_missing_config_is_config_error(capsys):
    assert cli.main(["threshold", "--config", "/does/not/exist.yaml",
                     "--alpha", "[2]", "--out", "/tmp/unused"]) == 2


def test_alpha_shape_mismatch_is_config_error(capsys):
    assert cli.main(["threshold", "--config", str(CONFIGS / "three_bosons.yaml"),
                     "--alpha", "[4]", "--out", "/tmp/unused"]) == 2


def test_unreachable_tolerance_is_numerical_failure(tmp_path, capsys):
    code = cli.main([
        "threshold", "--config", str(CONFIGS / "three_bosons.yaml"),
        "--alpha", "[3]", "--out", str(tmp_path),
        "--grid-n", "32", "--box", "20", "--qmax", "1", "--refine-rounds", "0",
        "--eig-tol", "0", "--no-figures",
    ])
    assert code == 3


def test_env_defaults_feed_flags(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HVZKIT_GRID_N", "48")
    monkeypatch.setenv("HVZKIT_SEED", "7")
    out_dir = tmp_path / "env"
    code, _ = run(
        capsys, "threshold", "--config", str(CONFIGS / "free_pair.yaml"),
        "--alpha", "[2]", "--out", str(out_dir),
        "--box", "20", "--qmax", "1", "--refine-rounds", "0", "--no-figures",
    )
    assert code == 0
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["scan"]["n"] == 48
    assert manifest["scan"]["seed"] == 7


def test_spectrum_finds_bound_pair(tmp_path, capsys):
    out_dir = tmp_path / "spec"
    code, out = run(
        capsys, "spectrum", "--config", str(CONFIGS / "pair_well.yaml"),
        "--alpha", "[2]", "--out", str(out_dir), "--k", "2", *FAST,
    )
    assert code == 0
    data = json.loads((out_dir / "spectrum.json").read_text())
    assert len(data["below"]) >= 1
    assert data["below"][0] < -0.1
    assert "discrete" in out


def test_minset_reports_clean_region(tmp_path, capsys):
    out_dir = tmp_path / "minset"
    code, out = run(
        capsys, "minset", "--config", str(CONFIGS / "three_bosons.yaml"),
        "--alpha", "[3]", "--out", str(out_dir),
        "--grid-n", "96", "--box", "24", "--qmax", "2", "--refine-rounds", "1",
        "--no-figures",
    )
    assert code == 0
    assert "[pass] discrete channel values" in out
    assert "[FAIL]" not in out
    data = json.loads((out_dir / "minset.json").read_text())
    assert data["counts_match"] is True
    assert data["lowest_pair"] == "[2]|[1]"


def test_minset_flags_degenerate_split(tmp_path, capsys):
    config = tmp_path / "four.yaml"
    config.write_text(
        "dimension: 1\n"
        "q0: [0.0]\n"
        "particles:\n"
        "  - {mass: 1.0, species: 0, count: 4}\n"
        "potentials:\n"
        "  - {species: [0, 0], kind: gaussian-well, strength: -0.5, range: 2.0}\n"
    )
    out_dir = tmp_path / "minset4"
    code, out = run(
        capsys, "minset", "--config", str(config), "--alpha", "[2,1,1]",
        "--out", str(out_dir),
        "--grid-n", "48", "--box", "24", "--qmax", "1", "--refine-rounds", "0",
        "--no-figures", "--dec", "{0,3}|{1,2}", "--center", "0.0",
        "--halfwidth", "0.1",
    )
    assert code == 0
    assert "[FAIL] single type pair in the lowest eigenspace" in out
    data = json.loads((out_dir / "minset.json").read_text())
    assert data["single_component"] is False
    assert data["points"][0]["eigenspace_dim"] == 2
