"""Module for configuring benchmark runs."""

import argparse
from os import getcwd, path
from typing import Any, Dict, Optional

import fractrans.core.benchcfg as bcfg
from fractrans.core.errors import ConfigError

SCENARIOS = ("ee", "svm", "aoi", "secrecy", "power", "ncut", "pilot", "beamform", "schedule", "rates")

benchcfg: Dict[str, Any] = {}
prj_path: str = ""
pkg_path: str = ""
out_path: str = ""
scenario: str = ""
args: argparse.Namespace


def init_global(arguments: argparse.Namespace) -> None:
    """Initialize global variables used across modules.

    Args:
    ----
        arguments: CLI arguments

    """
    global prj_path
    global pkg_path
    global benchcfg
    global args

    prj_path = getcwd() + "/"
    pkg_path = path.dirname(__file__) + "/.."

    config_path: Optional[str] = arguments.config
    if config_path is None:
        # Create benchcfg if it does not exist
        bcfg.check_and_copy_benchcfg(prj_path, pkg_path)
        config_path = prj_path + bcfg.BENCHCFG_FILENAME
    benchcfg = bcfg.open_benchcfg(config_path, arguments.preset, pkg_path)

    apply_overrides(arguments)
    select_scenario(arguments)
    configure_paths()

    args = arguments


def apply_overrides(arguments: argparse.Namespace) -> None:
    """Let command-line flags take precedence over the RUN section."""
    run = benchcfg["RUN"]
    if arguments.seed is not None:
        run["SEEDS"] = [arguments.seed]
    if arguments.out is not None:
        run["OUT_DIR"] = arguments.out
    if arguments.variant is not None:
        run["VARIANT"] = arguments.variant
    if arguments.oracle:
        run["ORACLE"] = True


def select_scenario(arguments: argparse.Namespace) -> None:
    """Pick the scenario from the command line or the RUN section."""
    global scenario

    chosen = arguments.scenario or benchcfg["RUN"]["SCENARIO"]
    if not chosen:
        raise ConfigError("No scenario selected, pass one on the command line or set [RUN][SCENARIO]")
    if chosen not in SCENARIOS:
        raise ConfigError(f"Unknown scenario '{chosen}', expected one of: {', '.join(SCENARIOS)}")
    scenario = chosen


def configure_paths() -> None:
    """Resolve the output directory against the working directory."""
    global out_path

    out_path = path.abspath(path.join(prj_path, benchcfg["RUN"]["OUT_DIR"])) + "/"
