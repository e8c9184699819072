import csv
import json

import numpy as np
import pytest
import yaml

from reflectlab import cli
from reflectlab.errors import ConfigParseError

SCHWARZ = ["odd_harmonic_flat_square", "closed_form_z_squared", "meromorphic_rational",
           "helicoid_axis_rotation"]


def write_config(tmp_path, body):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(body), encoding="utf-8")
    return str(path)


def read_summary(out):
    with open(out / "summary.csv", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_classical_suite_exits_zero(tmp_path, capsys):
    cfg = write_config(tmp_path, {"seed": 42, "include_presets": SCHWARZ})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", cfg, "--out", str(out), "--parallel", "1"]) == 0
    rows = read_summary(out)
    assert [r["id"] for r in rows] == SCHWARZ
    assert {r["status"] for r in rows} == {"pass"}
    assert list(rows[0]) == list(cli.SUMMARY_COLUMNS)
    reports = json.loads((out / "reports.json").read_text())
    assert reports["seed"] == 42 and len(reports["experiments"]) == 4


def test_unknown_kind_exits_two(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiments": [{"id": "x", "kind": "teleport", "params": {}}]})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "teleport" in capsys.readouterr().err


def test_missing_required_param_names_it(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiments": [{"id": "m", "kind": "meromorphic_reflection",
                                                   "params": {}}]})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "numerator" in capsys.readouterr().err


def test_empty_experiment_list(tmp_path):
    cfg = write_config(tmp_path, {"experiments": []})
    out = tmp_path / "o"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "summary.csv").read_text() == ",".join(cli.SUMMARY_COLUMNS) + "\n"


def test_failing_experiment_exits_one_with_outputs(tmp_path):
    bad = {"id": "iz", "kind": "meromorphic_reflection", "params": {"numerator": [0, "1j"]}}
    cfg = write_config(tmp_path, {"experiments": [bad]})
    out = tmp_path / "o"
    assert cli.main(["run", "--config", cfg, "--out", str(out), "--parallel", "1"]) == 1
    assert read_summary(out)[0]["status"] == "not_applicable"


def test_exploratory_failure_does_not_fail_the_run(tmp_path):
    bad = {"id": "iz", "kind": "meromorphic_reflection", "exploratory": True,
           "params": {"numerator": [0, "1j"]}}
    cfg = write_config(tmp_path, {"experiments": [bad]})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("raw,fragment", [
    ([1, 2], "mapping"),
    ({"colour": 1}, "unknown top-level"),
    ({"include_presets": ["nope"]}, "unknown preset"),
    ({"experiments": [{"id": "a", "kind": "lookup", "params": {"domain_type": "CI"}}] * 2}, "duplicate"),
    ({"experiments": [{"id": "a", "kind": "lookup", "params": {"domain_type": "CI", "x": 1}}]}, "x"),
    ({"experiments": [{"id": "a", "kind": "lookup", "expect": "maybe",
                       "params": {"domain_type": "CI"}}]}, "expect"),
])
def test_parse_config_errors(raw, fragment):
    with pytest.raises(ConfigParseError, match=fragment):
        cli.parse_config(raw)


def test_invalid_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("experiments: [", encoding="utf-8")
    with pytest.raises(ConfigParseError):
        cli.load_config(path)


def test_env_overrides_out(tmp_path, monkeypatch):
    monkeypatch.setenv("REFLECTLAB_OUT", str(tmp_path / "env"))
    cfg = write_config(tmp_path, {"include_presets": ["lookup_aiii"]})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "summary.csv").exists()
    assert not (tmp_path / "flag").exists()


def test_list_covers_theorems_and_families(capsys):
    assert cli.main(["list"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    anchors = {r["paper_anchor"] for r in rows}
    for anchor in ("Theorem 5.1", "Theorem 4.1", "Theorem 3.1", "Theorem 2.3", "Theorem 6.2",
                   "Theorem 6.3", "Theorem 6.3 (meromorphic)"):
        assert anchor in anchors
    families = {r["family"] for r in rows if r["kind"] == "chain_check"}
    assert families == {"euclidean", "hermitian_hyperbolic", "complex_projective", "quadric_dual",
                        "quadric"}
    assert len(rows) >= 12


def test_every_preset_validates():
    for p in cli.load_presets():
        exp = cli.validate_experiment(p, p["id"])
        assert exp["anchor"]


def test_same_seed_same_summary(tmp_path):
    config = cli.parse_config({"include_presets": ["closed_form_z_squared", "meromorphic_rational",
                                                   "involution_tau_q"]})
    a = cli.summary_text(cli.execute(config, 42, timing=False))
    b = cli.summary_text(cli.execute(config, 42, timing=False))
    assert a == b


def test_experiment_rng_depends_on_seed_and_id():
    a = cli.experiment_rng(42, "x").random(3)
    assert np.array_equal(a, cli.experiment_rng(42, "x").random(3))
    assert not np.array_equal(a, cli.experiment_rng(42, "y").random(3))
    assert not np.array_equal(a, cli.experiment_rng(43, "x").random(3))


def test_solve_subcommand_writes_map(tmp_path, capsys):
    cfg = write_config(tmp_path, {"include_presets": ["solve_xy_square"]})
    out = tmp_path / "maps"
    assert cli.main(["solve", "--config", cfg, "--out", str(out)]) == 0
    text = (out / "solve_xy_square.map.csv").read_text()
    assert text.startswith("# {")
    assert (out / "solve_xy_square.history.csv").exists()


def test_solve_subcommand_needs_solve_experiments(tmp_path, capsys):
    cfg = write_config(tmp_path, {"include_presets": ["lookup_aiii"]})
    assert cli.main(["solve", "--config", cfg, "--out", str(tmp_path / "m")]) == 2


def test_chain_check_subcommand(capsys):
    assert cli.main(["chain-check", "--family", "euclidean", "--n", "3", "--trials", "10"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert {r["status"] for r in rows} == {"pass"}
    assert {int(r["level"]) for r in rows} == {1, 2, 3}


def test_lookup_subcommand(capsys):
    assert cli.main(["lookup", "DIII", "--n", "4"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["real_form_symbols"] == ["SO(n, C)", "[SU*(n)/Sp(n/2)] × R"]


def test_lookup_bad_params_exit_one(capsys):
    assert cli.main(["lookup", "AIII", "--p", "2"]) == 1


def test_verify_involutions_subcommand(capsys):
    assert cli.main(["verify-involutions", "--n-max", "3", "--samples", "30"]) == 0
    assert "pass" in capsys.readouterr().out
