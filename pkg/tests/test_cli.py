import json
import os

import pytest

from causalbandits.cbn import Cbn, Cpt, save_cbn
from causalbandits.admg import Admg
from causalbandits.cli import EXIT_MODEL, EXIT_OK, EXIT_ORACLE, EXIT_USAGE, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def confounded_instance_path(tmp_path):
    g = Admg(
        n_nodes=3,
        directed=frozenset({(0, 1), (2, 0), (2, 1)}),
        bidirected=frozenset(),
        intervenable=frozenset({0}),
        reward=1,
        hidden=frozenset({2}),
    )
    cpts = (
        Cpt(owner=0, parent_order=(2,), table=(0.3, 0.7)),
        Cpt(owner=1, parent_order=(0, 2), table=(0.2, 0.8, 0.4, 0.9)),
        Cpt(owner=2, parent_order=(), table=(0.5,)),
    )
    path = str(tmp_path / "confounded.json")
    save_cbn(Cbn(graph=g, cpts=cpts), path)
    return path


def test_gen_exp3_no_seed_needed(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "gen", "exp3", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert (tmp_path / "exp3.json").exists()
    assert "m = 2" in out
    assert "reward 0.625" in out


def test_gen_requires_seed_for_stochastic_families(tmp_path, capsys):
    code, _, err = run_cli(capsys, "gen", "exp5", "--out", str(tmp_path))
    assert code == EXIT_USAGE
    assert "--seed" in err


def test_gen_twice_identical_files(tmp_path, capsys):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for d in (d1, d2):
        code, _, _ = run_cli(capsys, "gen", "exp5", "--seed", "9", "--out", str(d), "--count", "2")
        assert code == EXIT_OK
    for name in ("exp5_0.json", "exp5_1.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_gen_tree_lb(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "gen", "tree-lb", "--out", str(tmp_path),
        "--branching", "2", "--depth", "2", "--M", "2", "--T", "500",
    )
    assert code == EXIT_OK
    assert "targets:" in out
    assert (tmp_path / "tree_c0.json").exists()
    assert (tmp_path / "tree_c2.json").exists()


def test_inspect_exp3(tmp_path, capsys):
    run_cli(capsys, "gen", "exp3", "--out", str(tmp_path))
    code, out, _ = run_cli(capsys, "inspect", str(tmp_path / "exp3.json"))
    assert code == EXIT_OK
    assert "identifiable: True" in out
    assert "m = 2" in out
    assert "0.625" in out


def test_inspect_missing_file(capsys):
    code, _, err = run_cli(capsys, "inspect", "/nonexistent/file.json")
    assert code == EXIT_USAGE
    assert "error" in err


def test_run_crm_on_confounded_is_model_error(tmp_path, capsys):
    path = confounded_instance_path(tmp_path)
    code, _, err = run_cli(
        capsys, "run", path, "--algo", "crm", "--horizons", "100",
        "--seed", "1", "--out", str(tmp_path / "r"),
    )
    assert code == EXIT_MODEL
    assert "observable" in err


def test_run_srm_on_confounded_works(tmp_path, capsys):
    path = confounded_instance_path(tmp_path)
    code, out, _ = run_cli(
        capsys, "run", path, "--algo", "srm", "--horizons", "100,200",
        "--runs", "2", "--seed", "1", "--out", str(tmp_path / "r"), "--jobs", "1",
    )
    assert code == EXIT_OK
    csv_text = (tmp_path / "r.csv").read_text()
    assert csv_text.count("\n") == 3  # header + 2 horizons


def test_run_no_seed_rejected(tmp_path, capsys):
    run_cli(capsys, "gen", "exp3", "--out", str(tmp_path))
    code, _, err = run_cli(
        capsys, "run", str(tmp_path / "exp3.json"), "--algo", "ue", "--horizons", "50",
    )
    assert code == EXIT_USAGE
    assert "--seed" in err


def test_run_bad_horizons_rejected(tmp_path, capsys):
    run_cli(capsys, "gen", "exp3", "--out", str(tmp_path))
    code, _, _ = run_cli(
        capsys, "run", str(tmp_path / "exp3.json"), "--algo", "ue",
        "--horizons", "200,100", "--seed", "1", "--out", str(tmp_path / "r"),
    )
    assert code == EXIT_USAGE


def test_experiment_deterministic_output(tmp_path, capsys):
    args = [
        "experiment", "exp3", "--seed", "5", "--runs", "2",
        "--horizons", "100,200", "--jobs", "1",
    ]
    code, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "e1"))
    assert code == EXIT_OK
    code, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "e2"))
    assert code == EXIT_OK
    assert (tmp_path / "e1.csv").read_bytes() == (tmp_path / "e2.csv").read_bytes()
    assert (tmp_path / "e1.json").read_bytes() == (tmp_path / "e2.json").read_bytes()
    blob = json.loads((tmp_path / "e1.json").read_text())
    assert blob["plan"]["base_seed"] == 5


def test_cb_jobs_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CB_JOBS", "1")
    code, _, _ = run_cli(
        capsys, "run", str(tmp_path / "nope"), "--algo", "ue",
        "--horizons", "50", "--seed", "1",
    )
    assert code == EXIT_USAGE  # missing file, but CB_JOBS parsed fine


def test_exit_codes_are_distinct():
    assert len({EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_ORACLE}) == 4
