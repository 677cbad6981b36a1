import json
from pathlib import Path

import pytest

from lattice.config import load_run_config, parse_run_config
from lattice.errors import ConfigError
from lattice.models import LatticeSpec
from scripts.lattice_cli import EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO, run


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        parse_run_config('{"bogus": 1}')


def test_json_syntax_error_reports_location():
    with pytest.raises(ConfigError) as excinfo:
        parse_run_config('{\n  "grid": 64,\n  "tol": ,\n}')
    assert excinfo.value.line == 3
    assert excinfo.value.column == 10


def test_even_window_is_rejected():
    with pytest.raises(ConfigError, match="window"):
        parse_run_config('{"window": 20}')


def test_small_grid_is_rejected():
    with pytest.raises(ConfigError, match="grid"):
        load_run_config(None, {"grid": 32})


def test_spec_path_resolves_against_base(tmp_path):
    (tmp_path / "cell.json").write_text(
        json.dumps({"n1": 2, "n2": 1, "masses": [[1.0], [1.5]], "strip_perturbation": 0.5}),
        encoding="utf-8",
    )
    config = parse_run_config('{"spec_path": "cell.json"}')
    spec = config.resolve_spec(tmp_path)
    assert spec.n1 == 2
    assert spec.mass_vector().tolist() == [1.0, 1.5]
    assert spec.strip_vector().tolist() == [0.5, 0.5]


def test_spec_and_spec_path_are_exclusive():
    with pytest.raises(ConfigError, match="either"):
        parse_run_config('{"spec": {}, "spec_path": "cell.json"}')


def test_uniform_spec_from_m1_m2():
    config = load_run_config(None, {"m1": -0.9, "m2": 0.1})
    assert config.resolve_spec() == LatticeSpec.uniform(-0.9, 0.1)


def test_missing_spec_is_a_config_error():
    with pytest.raises(ConfigError, match="no lattice spec"):
        load_run_config(None, {}).resolve_spec()


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"m1": 2.0, "m2": -2.6, "size": 81}', encoding="utf-8")
    config = load_run_config(path, {"size": 41})
    assert config.size == 41
    assert config.m1 == 2.0


class TestCli:
    def test_classify_writes_verdict(self, capsys):
        assert run(["classify", "--m1", "-0.9", "--m2", "0.25"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["meta"]["tool"] == "lattice-defects"
        assert document["meta"]["command"] == "classify"
        assert document["total_modes"] == 1
        verdicts = {v["gap"]: v["modes"] for v in document["verdicts"]}
        assert verdicts == {"G1": 1, "G2": 0}

    def test_classify_needs_both_parameters(self, capsys):
        assert run(["classify", "--m1", "-0.9"]) == EXIT_CONFIG
        error = json.loads(capsys.readouterr().err)["error"]
        assert error["type"] == "ConfigError"

    def test_invalid_spec_exits_with_config_status(self, tmp_path, capsys):
        config = tmp_path / "run.json"
        config.write_text('{"spec": {"adjacency": []}}', encoding="utf-8")
        assert run(["bands", "--config", str(config)]) == EXIT_CONFIG
        error = json.loads(capsys.readouterr().err)["error"]
        assert error["type"] == "ConfigError"
        assert "adjacency" in error["message"]

    def test_bad_json_reports_line_and_column(self, tmp_path, capsys):
        config = tmp_path / "run.json"
        config.write_text('{\n  "grid": 64,\n  "tol": ,\n}', encoding="utf-8")
        assert run(["classify", "--config", str(config)]) == EXIT_CONFIG
        error = json.loads(capsys.readouterr().err)["error"]
        assert (error["line"], error["column"]) == (3, 10)

    def test_missing_config_file_is_an_io_error(self, tmp_path, capsys):
        assert run(["classify", "--config", str(tmp_path / "absent.json")]) == EXIT_IO
        assert json.loads(capsys.readouterr().err)["error"]["type"] == "FileNotFoundError"

    def test_negative_mass_is_a_domain_error(self, capsys):
        assert run(["classify", "--m1", "-1.5", "--m2", "0.0"]) == EXIT_DOMAIN
        assert json.loads(capsys.readouterr().err)["error"]["type"] == "DomainError"

    def test_region_map_is_byte_identical_across_runs(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["region-map", "--m-tilde-samples", "12"]
        assert run([*args, "-o", str(first)]) == 0
        assert run([*args, "-o", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert b"\r\n" in first.read_bytes()

    def test_repro_figure3_writes_region_map(self, tmp_path):
        directory = tmp_path / "repro"
        status = run(
            ["repro", "--figure", "3", "--output-dir", str(directory), "--m-tilde-samples", "8"]
        )
        assert status == 0
        lines = (directory / "fig3_region_map.csv").read_text(encoding="utf-8").splitlines()
        data = [line for line in lines if not line.startswith("#")]
        assert data[0] == "m_tilde,m_bar_boundary,m_bar_diagonal,regime"
        assert len(data) == 1 + 8

    def test_unknown_flag_is_a_json_config_error(self, capsys):
        assert run(["classify", "--m1", "-0.9", "--bogus", "1"]) == EXIT_CONFIG
        error = json.loads(capsys.readouterr().err)["error"]
        assert error["type"] == "ConfigError"
        assert "--bogus" in error["message"]

    def test_unknown_subcommand_is_a_json_config_error(self, capsys):
        assert run(["spectra"]) == EXIT_CONFIG
        assert json.loads(capsys.readouterr().err)["error"]["type"] == "ConfigError"

    def test_repro_accepts_sampling_flags(self, tmp_path):
        directory = tmp_path / "repro"
        argv = ["repro", "--figure", "3", "--output-dir", str(directory)]
        argv += ["--m-tilde-min", "1", "--m-tilde-max", "100", "--m-tilde-samples", "5"]
        argv += ["--k1-samples", "3", "--omega-samples", "4"]
        assert run(argv) == 0
        lines = (directory / "fig3_region_map.csv").read_text(encoding="utf-8").splitlines()
        assert "# m_tilde_min=1" in lines
        assert "# m_tilde_max=100" in lines
        data = [line for line in lines if not line.startswith("#")]
        assert float(data[1].split(",")[0]) == pytest.approx(1.0)
        assert float(data[-1].split(",")[0]) == pytest.approx(100.0)

    def test_bands_header_records_eigenvalue_clip(self, tmp_path):
        path = tmp_path / "bands.csv"
        assert run(["bands", "--m1", "-0.9", "--grid", "64", "-o", str(path)]) == 0
        header = [line for line in path.read_text(encoding="utf-8").splitlines() if line.startswith("#")]
        assert any(line.startswith("# eigenvalue_clip=") for line in header)

    def test_guided_header_records_tolerances(self, tmp_path):
        path = tmp_path / "guided.csv"
        argv = ["guided", "--m1", "-0.9", "--k1-samples", "3", "--tol", "1e-9", "-o", str(path)]
        assert run(argv) == 0
        lines = path.read_text(encoding="utf-8").splitlines()
        assert "# tol=1e-09" in lines
        assert any(line.startswith("# edge_tol=") for line in lines)
        assert "# k1_samples=3" in lines

    def test_oracle_json_reports_tolerance_and_agreement(self, capsys):
        assert run(["oracle", "--m1", "2.0", "--m2", "-2.6"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["meta"]["tol"] == pytest.approx(1e-11)
        assert document["meta"]["size"] == 61
        (agreement,) = document["agreement"]
        assert agreement["frequency_error"] <= 1e-3
        assert agreement["shape_similarity"] >= 0.98

    def test_localized_json_for_uniform_example(self, capsys):
        assert run(["localized", "--m1", "2.0", "--m2", "-2.6"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert len(document["roots"]) == 1
        assert sum(v["modes"] for v in document["classification"]["verdicts"]) == 1
        assert document["thresholds"]["m2"] == pytest.approx(-2.387, abs=1e-3)
        assert document["meta"]["spec_hash"] == LatticeSpec.uniform(2.0, -2.6).spec_hash()


def test_sample_configs_parse():
    root = Path(__file__).resolve().parent.parent / "sample_data"
    for path in sorted(root.glob("*.json")):
        if path.name.startswith("spec_"):
            continue
        config = load_run_config(path)
        if config.spec or config.spec_path or config.m1 is not None:
            assert config.resolve_spec(path.parent).size >= 1
