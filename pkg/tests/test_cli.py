import json
from fractions import Fraction

import pytest
from click.testing import CliRunner

from balancelab import cli as cli_mod
from balancelab.cli import (
    EXIT_FAIL,
    EXIT_OK,
    EXIT_USAGE,
    SCHEMA,
    ConfigError,
    ScenarioConfig,
    emit_plots,
    main,
    render_svg,
    run_scenario,
)
from balancelab.regions import FOUR, build_tree


def strip_timing(report):
    data = report.to_dict()
    data.pop("timing")
    return data


@pytest.fixture(scope="module")
def cantor_report():
    return run_scenario(ScenarioConfig("cantor-param", depth=3, samples=50, families=2))


@pytest.fixture(scope="module")
def nondiff_report():
    return run_scenario(ScenarioConfig("nondiff", depth=4, families=2))


class TestConfig:
    def test_defaults_valid(self):
        assert ScenarioConfig().validate().depth == 3

    @pytest.mark.parametrize("changes", [
        {"scenario": "burgers"}, {"depth": 0}, {"quad_tol": 0.0}, {"ode_tol": -1e-3},
        {"samples": 0}, {"families": -1},
    ])
    def test_invalid(self, changes):
        with pytest.raises(ConfigError):
            ScenarioConfig(**changes).validate()

    def test_mapping(self):
        cfg = ScenarioConfig.from_mapping({"schema": 1, "scenario": "cubic", "seed": 4})
        assert (cfg.scenario, cfg.seed) == ("cubic", 4)
        with pytest.raises(ConfigError):
            ScenarioConfig.from_mapping({"colour": "red"})


class TestScenarios:
    def test_cantor_param(self, cantor_report):
        assert cantor_report.passed
        checks = {c.name: c for c in cantor_report.checks}
        measures = checks["covered_measure_closed_form"].value
        assert measures[0] == Fraction(1, 4)
        assert checks["single_intersection_count"].status == "pass"
        header, rows = cantor_report.tables["measures"]
        assert rows[0][1] == "1/4"

    def test_nondiff_quotient_table(self, nondiff_report):
        assert nondiff_report.passed
        header, rows = nondiff_report.tables["quotients"]
        assert [r[0] for r in rows] == [1, 2, 3, 4]
        for level, zero, steep, closed in rows:
            a = Fraction(2 ** level + 1, 2 ** (2 * level + 1))
            b = Fraction(1, 4 ** level)
            assert zero == 0.0
            assert steep == pytest.approx(float((3 * a / 8) / (b + 3 * a / 2)), abs=1e-9)

    def test_cubic_expected_fail(self):
        report = run_scenario(ScenarioConfig("cubic", families=1))
        assert report.passed
        flagged = [c for c in report.checks if c.expected_fail]
        assert [c.name for c in flagged] == ["broad_constant_source_on_zero_path"]
        assert flagged[0].status == "pass" and flagged[0].value == pytest.approx(0.75, abs=1e-9)

    def test_deterministic(self):
        cfg = lambda: ScenarioConfig("cubic", families=2, seed=7)
        assert strip_timing(run_scenario(cfg())) == strip_timing(run_scenario(cfg()))

    def test_report_schema(self, cantor_report):
        data = json.loads(json.dumps(cantor_report.to_dict()))
        assert data["schema"] == SCHEMA
        assert {"scenario", "config", "checks", "timing", "passed"} <= set(data)


class TestOutputs:
    def test_files(self, tmp_path):
        cfg = ScenarioConfig("cubic", families=1, out=str(tmp_path), plot=True)
        run_scenario(cfg)
        report = json.loads((tmp_path / "cubic_report.json").read_text())
        assert report["schema"] == 1 and report["passed"]
        lines = (tmp_path / "cubic_checks.csv").read_text().splitlines()
        assert lines[0].startswith("name,value,bound,status")
        assert (tmp_path / "cubic.svg").read_text().startswith("<?xml")

    def test_region_svg_counts(self):
        svg = render_svg(build_tree(FOUR, 2), 2, [])
        assert svg.count("<rect") == 1 + 32 + 1024
        assert 'class="level-1"' in svg and 'class="level-2"' in svg
        assert "<polyline" not in svg
        assert 'version="1.1"' in svg

    def test_svg_deterministic(self, tmp_path):
        data = {"tree": build_tree(FOUR, 2), "levels": 2, "paths": [[(0.0, 0.1), (1.0, 0.2)]]}
        first = emit_plots(data, tmp_path / "a")[0].read_bytes()
        second = emit_plots(data, tmp_path / "b")[0].read_bytes()
        assert first == second and b"<polyline" in first

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            emit_plots({"tree": None, "paths": []}, blocker / "sub")


class TestCommandLine:
    def run(self, args):
        with pytest.raises(SystemExit) as exc:
            main(args)
        return exc.value.code

    def test_pass_exit(self, tmp_path, capsys):
        assert self.run(["--scenario", "cubic", "--out", str(tmp_path)]) == EXIT_OK
        assert "cubic: PASS" in capsys.readouterr().out

    def test_unknown_scenario(self, capsys):
        assert self.run(["--scenario", "burgers"]) == EXIT_USAGE

    def test_bad_depth(self):
        assert self.run(["--scenario", "cubic", "--depth", "0"]) == EXIT_USAGE

    def test_config_file_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schema": 1, "scenario": "burgers", "families": 1}))
        assert self.run(["--config", str(cfg)]) == EXIT_USAGE
        assert self.run(["--config", str(cfg), "--scenario", "cubic"]) == EXIT_OK

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schema": 2}))
        assert self.run(["--config", str(cfg)]) == EXIT_USAGE
        cfg.write_text("{not json")
        assert self.run(["--config", str(cfg)]) == EXIT_USAGE

    def test_failure_exit(self, monkeypatch):
        def broken(rec, cfg):
            rec.check("always_wrong", 1.0, 0.0, False)

        monkeypatch.setitem(cli_mod.RUNNERS, "cubic", broken)
        assert self.run(["--scenario", "cubic"]) == EXIT_FAIL

    def test_click_runner_help(self):
        result = CliRunner().invoke(cli_mod.cli, ["--help"])
        assert result.exit_code == 0 and "--scenario" in result.output
