import json
from pathlib import Path

import pytest

from qhgeo import ConfigurationError
from qhgeo.verifier.cli import main
from qhgeo.verifier.scenario import (
    emit_report,
    report_to_csv,
    report_to_json_bytes,
    run_scenario,
    validate_scenario,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "src" / "qhgeo" / "verifier" / "scenarios"


def tiny_scenario(**overrides):
    raw = {
        "schema": 1,
        "seed": 4242,
        "domains": [
            {"name": "disk", "shape": {"kind": "disk", "params": {"radius": 1.0}, "resolution": 0.08}}
        ],
        "checks": [
            {"check": "metric_axioms", "space": "qh:disk", "triples": 500},
            {"check": "ball_containment", "domain": "disk", "centers": 10},
        ],
    }
    raw.update(overrides)
    return raw


class TestValidation:
    def test_missing_seed(self):
        raw = tiny_scenario()
        del raw["seed"]
        with pytest.raises(ConfigurationError, match="seed"):
            validate_scenario(raw)

    def test_wrong_schema(self):
        with pytest.raises(ConfigurationError, match="schema"):
            validate_scenario(tiny_scenario(schema=2))

    def test_out_of_range_parameter_names_field(self):
        raw = tiny_scenario(
            mappings=[],
            checks=[{"check": "distortion_chain_linear", "mapping": "auto", "lam": 1.5}],
        )
        with pytest.raises(ConfigurationError, match=r"checks\[0\].lam"):
            validate_scenario(raw)

    def test_unknown_domain_reference(self):
        raw = tiny_scenario(checks=[{"check": "uniformity", "domain": "torus"}])
        with pytest.raises(ConfigurationError, match="torus"):
            validate_scenario(raw)

    def test_unknown_check_id(self):
        raw = tiny_scenario(checks=[{"check": "summon"}])
        with pytest.raises(ConfigurationError, match="unknown check id"):
            validate_scenario(raw)

    def test_shipped_scenarios_all_validate(self):
        files = sorted(SCENARIO_DIR.glob("*.json"))
        assert len(files) >= 10
        for path in files:
            validate_scenario(json.load(open(path)))


class TestRunScenario:
    def test_empty_checks_pass(self):
        report = run_scenario(tiny_scenario(checks=[]))
        assert report["passed"] and report["checks"] == []

    def test_deterministic_bytes(self):
        raw = tiny_scenario()
        b1 = report_to_json_bytes(run_scenario(raw))
        b2 = report_to_json_bytes(run_scenario(raw))
        assert b1 == b2

    def test_parallel_equals_serial(self):
        raw = tiny_scenario()
        assert report_to_json_bytes(run_scenario(raw, jobs=3)) == report_to_json_bytes(
            run_scenario(raw, jobs=1)
        )

    def test_seed_override_changes_report(self):
        raw = tiny_scenario()
        r1 = run_scenario(raw)
        r2 = run_scenario(raw, seed=999)
        assert r2["seed"] == 999
        assert report_to_json_bytes(r1) != report_to_json_bytes(r2)

    def test_resolution_override(self):
        report = run_scenario(tiny_scenario(), resolution_override=0.15)
        assert report["resolutions"]["disk"] == 0.15

    def test_defaults_recorded(self):
        report = run_scenario(tiny_scenario())
        assert report["sample_defaults"] == {"pairs": 10000, "balls": 1000, "quadruples": 1000}
        assert report["slack"] == 1.05

    def test_injected_violation_produces_witness(self):
        raw = tiny_scenario(
            checks=[{"check": "ball_containment", "domain": "disk", "centers": 20, "slack": 0.5}]
        )
        report = run_scenario(raw)
        chk = report["checks"][0]
        assert not chk["passed"]
        assert chk["violations"] and "witness" in chk["violations"][0]

    def test_bounds_sweep_witness_injection(self):
        # slack below 1 must surface witnesses with point coordinates
        raw = tiny_scenario(
            checks=[{"check": "distance_vs_qh_bounds", "domain": "disk",
                     "pairs": 3000, "slack": 0.5}]
        )
        report = run_scenario(raw)
        chk = report["checks"][0]
        assert not chk["passed"]
        assert chk["violations"]
        first = chk["violations"][0]
        assert "x" in first and "y" in first and len(first["x"]) == 2

    def test_graph_import_domain(self):
        raw = tiny_scenario(
            domains=[
                {
                    "name": "path3",
                    "graph": {
                        "vertices": [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
                        "edges": [[0, 1], [1, 2]],
                        "boundary": [[-1.0, 0.0]],
                    },
                }
            ],
            checks=[{"check": "metric_axioms", "space": "graph:path3", "triples": 50, "pool": 3}],
        )
        report = run_scenario(raw)
        assert report["passed"]

    def test_expected_violation_mode(self):
        raw = tiny_scenario(
            checks=[
                {
                    "check": "ball_containment",
                    "domain": "disk",
                    "centers": 20,
                    "slack": 0.5,
                    "expect_violation": True,
                }
            ]
        )
        assert run_scenario(raw)["passed"]

    def test_truncation_sensitivity_flag(self):
        # doubling the truncation radius must leave the calibration segment
        # unchanged when the radius already dominates the feature scale
        raw = tiny_scenario(
            domains=[
                {
                    "name": "punctured",
                    "shape": {
                        "kind": "punctured-plane-truncation",
                        "params": {"radius": 6.0},
                        "resolution": 0.2,
                    },
                }
            ],
            checks=[
                {
                    "check": "qh_calibration",
                    "domain": "punctured",
                    "segments": [{"x": [1.0, 0.0], "y": [2.7, 0.0]}],
                    "tol": 0.05,
                    "truncation_sensitivity": True,
                }
            ],
        )
        report = run_scenario(raw)
        chk = report["checks"][0]
        assert chk["passed"]
        assert chk["measured"]["segment0_truncation_drift"] < 0.01

    def test_truncation_sensitivity_rejected_for_bounded_shapes(self):
        raw = tiny_scenario(
            checks=[
                {
                    "check": "qh_calibration",
                    "domain": "disk",
                    "segments": [{"x": [0.0, 0.0], "y": [0.5, 0.0]}],
                    "truncation_sensitivity": True,
                }
            ]
        )
        report = run_scenario(raw)
        assert not report["checks"][0]["passed"]
        assert "infeasible" in report["checks"][0]["notes"][0]

    def test_infeasible_check_recorded_not_fatal(self):
        raw = tiny_scenario(
            checks=[
                {"check": "sphericalization_envelope", "deformation": "sp", "pairs": 10},
                {"check": "metric_axioms", "space": "qh:disk", "triples": 200},
            ],
            deformations=[
                {
                    "name": "sp",
                    "domain": "disk",
                    "kind": "uniformize",
                    "epsilon": 0.2,
                    "base_point": [0.0, 0.0],
                }
            ],
        )
        report = run_scenario(raw)
        assert not report["checks"][0]["passed"]
        assert "infeasible" in report["checks"][0]["notes"][0]
        assert report["checks"][1]["passed"]


class TestEmission:
    def test_csv_row_count_matches_measured_constants(self):
        report = run_scenario(tiny_scenario())
        csv = report_to_csv(report)
        rows = csv.strip().splitlines()[1:]
        expected = sum(len(c["measured"]) for c in report["checks"])
        assert len(rows) == expected

    def test_emit_json_and_csv(self, tmp_path):
        report = run_scenario(tiny_scenario())
        p1 = emit_report(report, tmp_path / "r.json", "json")
        p2 = emit_report(report, tmp_path / "r.csv", "csv")
        assert json.load(open(p1))["passed"] == report["passed"]
        assert open(p2).read().startswith("check,constant,measured,predicted,passed")

    def test_bad_format_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="format"):
            emit_report({}, tmp_path / "r.xml", "xml")


class TestCLI:
    def write(self, tmp_path, raw):
        p = tmp_path / "scenario.json"
        p.write_text(json.dumps(raw))
        return str(p)

    def test_exit_zero_and_report_file(self, tmp_path, capsys):
        path = self.write(tmp_path, tiny_scenario())
        out = tmp_path / "report.json"
        assert main(["run", "--scenario", path, "--report", str(out)]) == 0
        assert json.load(open(out))["passed"]
        assert "2/2 checks passed" in capsys.readouterr().out

    def test_exit_two_on_config_error(self, tmp_path, capsys):
        raw = tiny_scenario()
        del raw["seed"]
        path = self.write(tmp_path, raw)
        assert main(["run", "--scenario", path]) == 2
        assert "seed" in capsys.readouterr().err

    def test_exit_one_on_violation(self, tmp_path):
        raw = tiny_scenario(
            checks=[{"check": "ball_containment", "domain": "disk", "centers": 20, "slack": 0.5}]
        )
        path = self.write(tmp_path, raw)
        assert main(["run", "--scenario", path]) == 1

    def test_missing_scenario_is_config_error(self, capsys):
        assert main(["run", "--scenario", "does-not-exist.json"]) == 2

    def test_shipped_scenario_resolves_by_name(self, tmp_path):
        # resolution override keeps the smoke run fast
        code = main(
            [
                "run",
                "--scenario",
                "calibration_disk",
                "--report",
                str(tmp_path / "cal.json"),
                "--resolution-override",
                "0.05",
                "--seed",
                "11",
            ]
        )
        assert code in (0, 1)  # coarse override may fail tolerance checks, but runs
        assert (tmp_path / "cal.json").exists()

    def test_byte_identical_reports_across_cli_runs(self, tmp_path):
        path = self.write(tmp_path, tiny_scenario())
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        main(["run", "--scenario", path, "--report", str(out1)])
        main(["run", "--scenario", path, "--report", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_csv_format_flag(self, tmp_path):
        path = self.write(tmp_path, tiny_scenario())
        out = tmp_path / "r.csv"
        main(["run", "--scenario", path, "--report", str(out), "--format", "csv"])
        assert out.read_text().startswith("check,constant")
