"""
Tests for the command-line entry point, file helpers and the scenario generator.
"""

import json
import os

import numpy as np
import pandas as pd
import pytest

from tools.scenario_generator import SCENARIO_PRESETS, generate_config
from trailer_loading.cli import EXIT_CONFIG, EXIT_CRITERION, EXIT_OK, build_parser, main
from trailer_loading.core import PipelineConfig, apply_overrides, load_config, save_config
from trailer_loading.utils.io import read_json, to_long_format, write_json

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


class TestParser:
    """Tests for the argument parser."""

    def test_run_arguments(self):
        """Test run options are parsed."""
        args = build_parser().parse_args(["run", "-c", "x.json", "--set", "a.b=1", "--set", "c=2", "--trace", "t.csv"])
        assert args.command == "run"
        assert args.config == "x.json"
        assert args.set == ["a.b=1", "c=2"]
        assert args.trace == "t.csv"

    def test_montecarlo_defaults(self):
        """Test Monte Carlo defaults."""
        args = build_parser().parse_args(["montecarlo"])
        assert args.trials == 200
        assert args.min_success == 0.7
        assert not args.calm_control

    def test_command_required(self):
        """Test a subcommand is required."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_help_points_to_generator(self):
        """Test the top-level help names the preset generator."""
        assert "tools/scenario_generator.py" in build_parser().format_help()

    def test_sysid_derivative_choice(self):
        """Test the derivative method is optional and restricted."""
        assert build_parser().parse_args(["sysid"]).derivative is None
        assert build_parser().parse_args(["sysid", "--derivative", "savgol"]).derivative == "savgol"
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sysid", "--derivative", "spline"])


class TestOverrides:
    """Tests for config overrides."""

    def test_values_parsed_as_json(self):
        """Test overrides are parsed as JSON where possible."""
        data = PipelineConfig().model_dump(mode="json")
        apply_overrides(data, ["optimizer.horizon=20", "scenario.name=demo", "bail.enabled=false"])
        config = PipelineConfig.model_validate(data)
        assert config.optimizer.horizon == 20
        assert config.scenario.name == "demo"
        assert config.bail.enabled is False

    def test_unknown_key(self):
        """Test keys the config does not have are rejected."""
        with pytest.raises(ValueError):
            load_config(overrides=["optimizer.nonexistent=1"])
        with pytest.raises(ValueError):
            load_config(overrides=["no_equals_sign"])

    def test_save_and_load(self, temp_dir):
        """Test a saved config loads back unchanged."""
        path = os.path.join(temp_dir, "config.json")
        config = load_config(overrides=["planner.lookahead=15.0"])
        save_config(config, path)
        assert load_config(path) == config


class TestCommands:
    """Tests for the subcommands."""

    def test_bad_override_exits_with_config_error(self):
        """Test a malformed override exits with code 2."""
        assert main(["run", "--set", "scenario.bogus=1"]) == EXIT_CONFIG

    def test_invalid_value_exits_with_config_error(self):
        """Test a value failing validation exits with code 2."""
        assert main(["run", "--set", "optimizer.horizon=0"]) == EXIT_CONFIG

    def test_missing_config_file(self, temp_dir):
        """Test a missing config file exits with code 2."""
        assert main(["run", "-c", os.path.join(temp_dir, "missing.json")]) == EXIT_CONFIG

    def test_run_timeout_is_criterion_failure(self, temp_dir):
        """Test a run that cannot finish in time exits with code 1 and writes its outputs."""
        trace = os.path.join(temp_dir, "trace.csv")
        summary = os.path.join(temp_dir, "summary.json")
        code = main([
            "run", "-c", os.path.join(CONFIG_DIR, "straight_in.json"),
            "--set", "scenario.max_duration=0.3", "--trace", trace, "--summary", summary,
        ])
        assert code == EXIT_CRITERION
        assert read_json(summary)["outcome"] == "timeout"
        assert len(pd.read_csv(trace)) == 3

    def test_gradcheck(self):
        """Test the derivative check passes on two random problems."""
        assert main(["gradcheck", "--problems", "2"]) == EXIT_OK

    def test_sysid_empty_log_directory(self, temp_dir):
        """Test an empty log directory is a configuration error."""
        assert main(["sysid", "--logs", temp_dir]) == EXIT_CONFIG

    def test_plotdata(self, temp_dir):
        """Test a trace is re-emitted in long format without text columns."""
        trace = os.path.join(temp_dir, "trace.csv")
        output = os.path.join(temp_dir, "long.csv")
        pd.DataFrame({"t": [0.0, 0.1], "x": [1.0, 2.0], "mode": ["docking", "docking"]}).to_csv(trace, index=False)
        assert main(["plotdata", trace, "-o", output]) == EXIT_OK
        frame = pd.read_csv(output)
        assert list(frame.columns) == ["t", "variable", "value"]
        assert set(frame["variable"]) == {"x"}


class TestFileHelpers:
    """Tests for the JSON and trace helpers."""

    def test_json_builtin_conversion(self, temp_dir):
        """Test numpy values and non-finite floats are written as plain JSON."""
        path = os.path.join(temp_dir, "nested", "report.json")
        write_json({"a": np.float64(1.5), "b": np.arange(3), "c": float("nan")}, path)
        assert read_json(path) == {"a": 1.5, "b": [0, 1, 2], "c": None}

    def test_long_format(self):
        """Test melting keeps the time column and numeric variables."""
        frame = pd.DataFrame({"t": [0.0, 0.1], "x": [1.0, 2.0], "y": [3.0, 4.0]})
        long = to_long_format(frame)
        assert len(long) == 4
        assert long.loc[long["variable"] == "y", "value"].tolist() == [3.0, 4.0]


class TestScenarioGenerator:
    """Tests for the preset generator."""

    def test_presets_validate(self):
        """Test every preset produces a valid config."""
        for preset in SCENARIO_PRESETS:
            config = generate_config(preset)
            assert "scenario" in config

    def test_preset_matches_bundled_file(self):
        """Test the bundled ablation config is the generator's preset."""
        with open(os.path.join(CONFIG_DIR, "crosswind_ablation.json")) as f:
            bundled = json.load(f)
        assert generate_config("crosswind_ablation") == bundled

    def test_override(self):
        """Test overrides land in the partial config."""
        config = generate_config("straight_in", ["scenario.seed=7", "harness.control_rate=20"])
        assert config["scenario"]["seed"] == 7
        assert config["harness"]["control_rate"] == 20

    def test_unknown_preset(self):
        """Test unknown presets are rejected."""
        with pytest.raises(ValueError):
            generate_config("hurricane")
