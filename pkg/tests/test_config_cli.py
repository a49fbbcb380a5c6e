"""Configuration parsing and the command-line pipeline."""

import csv
import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

import coinvest.cli as cli_mod
from coinvest import (
    ConfigError,
    RunConfig,
    ShapleyMethod,
    SupermodularityReport,
    config_to_dict,
    parse_config,
)
from coinvest.cli import CSV_COLUMNS, main
from coinvest.config import load_preset, preset_names


class TestParseConfig:
    def test_empty_document_gives_defaults(self):
        assert parse_config("{}") == RunConfig()
        assert parse_config("") == RunConfig()

    def test_reads_files(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"seed": 9}')
        assert parse_config(str(path)).seed == 9
        assert parse_config(path).seed == 9

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            parse_config("no-such-config.json")

    def test_json_errors_carry_position(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config('{"seed": }')

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="bogus"):
            parse_config('{"bogus": 1}')
        with pytest.raises(ConfigError, match="spread"):
            parse_config('{"market": {"spread": 1}}')

    def test_validation_names_the_field(self):
        with pytest.raises(ConfigError, match="market.d"):
            parse_config('{"market": {"d": -1}}')
        with pytest.raises(ConfigError, match="omega_grid"):
            parse_config('{"omega_grid": [0.4]}')
        with pytest.raises(ConfigError, match="method"):
            parse_config('{"method": "guess"}')
        with pytest.raises(ConfigError, match="samples"):
            parse_config('{"samples": 0}')

    def test_overrides_are_applied(self):
        cfg = parse_config(
            '{"scenario": "omega", "market": {"xi": 0.002}, '
            '"omega_grid": [0.5, 0.75, 1.0], "method": "enum"}'
        )
        assert cfg.scenario == "omega"
        assert cfg.market.xi == 0.002
        assert cfg.omega_grid == (0.5, 0.75, 1.0)
        assert cfg.method is ShapleyMethod.SUBSET_ENUMERATION

    def test_load_spec_inherits_market_slots(self):
        cfg = parse_config('{"market": {"T": 48}}')
        assert cfg.load_spec.T == 48

    def test_custom_scenario_needs_providers(self):
        with pytest.raises(ConfigError, match="custom_sps"):
            parse_config('{"scenario": "custom"}')
        cfg = parse_config(
            '{"scenario": "custom", "custom_sps": ['
            '{"id": "A", "beta": 2e-6, "daily_total": 5e5}]}'
        )
        assert cfg.custom_sps[0].id == "A"
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config('{"custom_sps": [{"id": "A", "beta": 0}]}')

    def test_round_trip_is_a_fixpoint(self):
        cfg = parse_config(
            json.dumps(
                {
                    "scenario": "price-sweep",
                    "n_sps": [2, 4],
                    "seed": 5,
                    "market": {"d": 0.08, "xi": 0.0005},
                    "load_spec": {"a0": 2.0, "components": [[0.5, 10]]},
                    "custom_sps": [{"id": "Z", "beta": 1e-6, "loads": [1.0] * 96}],
                }
            )
        )
        echoed = parse_config(json.dumps(config_to_dict(cfg)))
        assert echoed == cfg
        assert config_to_dict(echoed) == config_to_dict(cfg)


class TestPresets:
    def test_six_presets_ship(self):
        assert preset_names() == ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")

    def test_presets_parse(self):
        for name in preset_names():
            cfg = parse_config(load_preset(name))
            assert cfg.description

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_preset("fig9")


def run_cli(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


SMALL_RUN = json.dumps({"l_total_grid": [1e6, 2e6, 4e6]})


class TestCliRun:
    def test_writes_consistent_outputs(self, tmp_path):
        out = tmp_path / "results"
        result = run_cli("run", SMALL_RUN, "--out", str(out))
        assert result.exit_code == 0, result.output

        with (out / "records.csv").open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert tuple(rows[0].keys()) == CSV_COLUMNS
        assert len(rows) == 9  # 3 instances x (2 providers + owner)
        by_value = {}
        for row in rows:
            by_value.setdefault(row["sweep_value"], []).append(row)
        for group in by_value.values():
            total = math.fsum(float(r["shapley"]) for r in group)
            grand = float(group[0]["v_grand"])
            assert abs(total - grand) <= 1e-9 * max(1.0, grand)

        summary = json.loads((out / "summary.json").read_text())
        assert summary["all_checks_passed"]
        assert len(summary["instances"]) == 3
        first = summary["instances"][0]
        assert first["checks"] == {
            "core": "pass",
            "supermodularity": "pass",
            "settlement_balance": "pass",
        }
        assert first["players"]["NO"]["veto"] is True

        meta = json.loads((out / "meta.json").read_text())
        assert meta["config"]["l_total_grid"] == [1e6, 2e6, 4e6]
        assert meta["seed"] == 0
        assert meta["load_clamping_applied"] is False

    def test_identical_runs_are_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", SMALL_RUN, "--out", str(out_a), "--seed", "3").exit_code == 0
        assert run_cli("run", SMALL_RUN, "--out", str(out_b), "--seed", "3").exit_code == 0
        assert (out_a / "records.csv").read_bytes() == (out_b / "records.csv").read_bytes()

    def test_csv_floats_round_trip(self, tmp_path):
        out = tmp_path / "rt"
        assert run_cli("run", SMALL_RUN, "--out", str(out)).exit_code == 0
        with (out / "records.csv").open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        # 17 significant digits reproduce the doubles exactly
        summary = json.loads((out / "summary.json").read_text())
        for row in rows:
            inst = next(
                i for i in summary["instances"]
                if f"{i['sweep_value']:.17g}" == row["sweep_value"]
            )
            player = inst["players"][row["player_id"]]
            assert float(row["shapley"]) == player["shapley"]
            assert float(row["payoff"]) == player["payoff"]
            assert float(row["h_star"]) == player["h_star"]

    def test_runs_presets_by_name(self, tmp_path):
        out = tmp_path / "p"
        result = run_cli("run", "fig4", "--out", str(out))
        assert result.exit_code == 0
        with (out / "records.csv").open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        final = [r for r in rows if float(r["sweep_value"]) == 1.0]
        sp1 = next(r for r in final if r["player_id"] == "SP1")
        assert float(sp1["h_star"]) == 0.0

    def test_method_flag(self, tmp_path):
        out = tmp_path / "m"
        result = run_cli("run", SMALL_RUN, "--out", str(out), "--method", "enum")
        assert result.exit_code == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["config"]["method"] == "enum"

    def test_custom_scenario(self, tmp_path):
        cfg = json.dumps(
            {
                "scenario": "custom",
                "custom_sps": [
                    {"id": "video", "beta": 3e-6, "daily_total": 8e5},
                    {"id": "ar", "beta": 6e-6, "daily_total": 2e5},
                ],
            }
        )
        out = tmp_path / "c"
        result = run_cli("run", cfg, "--out", str(out))
        assert result.exit_code == 0
        with (out / "records.csv").open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert [r["player_id"] for r in rows] == ["video", "ar", "NO"]

    def test_validation_error_exits_1(self, tmp_path):
        result = CliRunner().invoke(main, ["run", '{"market": {"d": -1}}'])
        assert result.exit_code == 1
        assert "market.d" in result.output

    def test_io_error_exits_3(self, tmp_path):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        result = CliRunner().invoke(main, ["run", SMALL_RUN, "--out", str(blocker)])
        assert result.exit_code == 3

    def test_strict_flags_injected_check_failure(self, tmp_path, monkeypatch):
        def broken_check(game, **kwargs):
            return SupermodularityReport(
                holds=False,
                counterexample=("SP1", frozenset(), frozenset({"NO"})),
            )

        monkeypatch.setattr(cli_mod, "check_supermodularity", broken_check)
        out = tmp_path / "s"
        strict = CliRunner().invoke(main, ["run", SMALL_RUN, "--out", str(out), "--strict"])
        assert strict.exit_code == 2
        assert "supermodularity" in strict.output
        relaxed = CliRunner().invoke(main, ["run", SMALL_RUN, "--out", str(out)])
        assert relaxed.exit_code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert not summary["all_checks_passed"]


class TestCliVerifyAndPresets:
    def test_verify_reports_four_properties(self):
        result = run_cli(
            "verify", json.dumps({"l_total_grid": [2e6, 5e6], "samples": 20000})
        )
        assert result.exit_code == 0, result.output
        for line in ("supermodularity", "core-membership", "oracle-triangle", "settlement-balance"):
            assert line in result.output
        assert result.output.count("PASS") == 4
        assert "FAIL" not in result.output

    def test_verify_handles_seven_providers(self):
        cfg = json.dumps(
            {"scenario": "price-sweep", "n_sps": [7], "d_grid": [0.05], "samples": 5000}
        )
        result = run_cli("verify", cfg)
        assert result.exit_code == 0, result.output
        assert result.output.count("PASS") == 4

    def test_verify_zero_load_passes_trivially(self):
        result = run_cli("verify", json.dumps({"l_total_grid": [0.0], "samples": 100}))
        assert result.exit_code == 0, result.output
        assert result.output.count("PASS") == 4

    def test_verify_detects_injected_failure(self, monkeypatch):
        def broken_check(game, **kwargs):
            return SupermodularityReport(
                holds=False,
                counterexample=("SP1", frozenset(), frozenset({"NO"})),
            )

        monkeypatch.setattr(cli_mod, "check_supermodularity", broken_check)
        result = CliRunner().invoke(
            main, ["verify", json.dumps({"l_total_grid": [2e6], "samples": 1000})]
        )
        assert result.exit_code == 2
        assert "FAIL" in result.output

    def test_presets_listing(self):
        result = run_cli("presets")
        assert result.exit_code == 0
        for name in ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6"):
            assert name in result.output

    def test_module_entry_point(self, tmp_path):
        import subprocess
        import sys

        proc = subprocess.run(
            [sys.executable, "-m", "coinvest", "presets"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "fig1" in proc.stdout
