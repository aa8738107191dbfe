"""
Scenario generator for TrailerLoading.

Emit preset experiment configs (partial PipelineConfig JSON) for the CLI.
"""

import argparse
import json
import math
import sys
from typing import Optional

from trailer_loading.core import PipelineConfig, apply_overrides, load_config, merge_dicts

# Scenario presets
SCENARIO_PRESETS = {
    "straight_in": {
        "name": "Straight-in nominal",
        "description": "Calm air, no sensor noise, aligned start 60 m out",
        "config": {
            "scenario": {
                "name": "straight_in",
                "start_pose": [-60.0, 0.0, 0.0],
                "wind": {"mean_speed": 0.0, "speed_std": 0.0, "direction_std_deg": 0.0},
                "noise_profile": "none",
            },
        },
    },
    "opposite_heading": {
        "name": "Opposite heading",
        "description": "Calm air, no sensor noise, start 60 m out pointing away from the trailer",
        "config": {
            "scenario": {
                "name": "opposite_heading",
                "start_pose": [-60.0, 0.0, math.pi],
                "wind": {"mean_speed": 0.0, "speed_std": 0.0, "direction_std_deg": 0.0},
                "noise_profile": "none",
            },
        },
    },
    "crosswind_ablation": {
        "name": "Crosswind ablation",
        "description": "Steady 6 m/s wind across the trailer axis; toggle the anemometer with --set",
        "config": {
            "scenario": {
                "name": "crosswind_ablation",
                "start_pose": [-60.0, 0.0, 0.0],
                "wind": {
                    "mean_speed": 6.0,
                    "mean_direction": math.pi / 2,
                    "speed_std": 0.0,
                    "direction_std_deg": 0.0,
                },
                "noise_profile": "none",
            },
            "bail": {"enabled": False},
        },
    },
    "gusty_montecarlo": {
        "name": "Gusty Monte Carlo",
        "description": "Measured camera noise, gusty wind around 6 m/s",
        "config": {
            "scenario": {
                "name": "gusty_montecarlo",
                "wind": {"mean_speed": 6.0, "mean_direction": math.pi / 2},
                "noise_profile": "measured",
            },
        },
    },
    "calm_control": {
        "name": "Calm control batch",
        "description": "Measured camera noise, no wind",
        "config": {
            "scenario": {
                "name": "calm_control",
                "wind": {"mean_speed": 0.0, "speed_std": 0.0, "direction_std_deg": 0.0},
                "noise_profile": "measured",
            },
        },
    },
}


def list_presets():
    """List scenario presets."""
    print("\nScenario presets:\n")
    for key, preset in SCENARIO_PRESETS.items():
        print(f"  {key:20} - {preset['name']}")
        print(f"  {'':20}   {preset['description']}")
    print()


def generate_config(preset: str, overrides: Optional[list[str]] = None) -> dict:
    """
    Build a partial config dict from a preset, with dotted overrides applied.

    The result is validated against the full PipelineConfig before it is returned.
    """
    if preset not in SCENARIO_PRESETS:
        raise ValueError(f"Unknown preset: {preset}")
    config = json.loads(json.dumps(SCENARIO_PRESETS[preset]["config"]))
    if overrides:
        full = load_config().model_dump(mode="json")
        apply_overrides(full, overrides)
        for item in overrides:
            key = item.split("=", 1)[0].strip().split(".")
            node, source = config, full
            for part in key[:-1]:
                node = node.setdefault(part, {})
                source = source[part]
            node[key[-1]] = source[key[-1]]

    merged = load_config().model_dump(mode="json")
    merge_dicts(merged, config)
    PipelineConfig.model_validate(merged)
    return config


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="TrailerLoading Scenario Generator")
    parser.add_argument("--list", "-l", action="store_true", help="List presets")
    parser.add_argument("--preset", "-p", help="Preset name")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a key")
    parser.add_argument("--output", "-o", help="Output file")

    args = parser.parse_args()

    if args.list or not args.preset:
        list_presets()
        return 0

    try:
        config = generate_config(args.preset, args.set)
    except ValueError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 2

    text = json.dumps(config, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
        print(f"Configuration saved to {args.output}")
    else:
        print(text, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
