"""Module responsible for parsing the benchmark config file."""

import logging
import os.path
from shutil import copyfile
from typing import Any, Callable, Dict, Optional

import hiyapyco  # type: ignore
import yaml

from fractrans.core.errors import ConfigError

logger = logging.getLogger(__name__)

# Name of the configuration file
# This is the name that is used for the template
# and when copying the template to a local config.
BENCHCFG_FILENAME = "benchcfg.yaml"


class Field:
    """Represents schema of a configuration field."""

    def __init__(
        self,
        field_type: str,
        conv: Optional[Callable[[Any], Any]] = None,
        optional: bool = False,
    ) -> None:
        """Create a configuration field.

        Args:
        ----
            field_type: String name of the type of the field. One of: "bool", "int",
                "number", "string", "list[int]", "list[number]", "matrix".
            conv: Converter function to use. When set, the value of the field from
                `benchcfg.yaml` is passed to this function. Value returned from
                the function is still checked against the field's specified type.
            optional: Specify if the field can be omitted from the benchcfg. Optional
                fields are set to None in the configuration if they are not
                present.

        """
        self.type = field_type
        self.conv = conv
        self.optional = optional


def _network_fields() -> Dict[str, Field]:
    return {
        "CELLS": Field("int"),
        "CELL_RADIUS_KM": Field("number"),
        "MIN_DISTANCE_KM": Field("number"),
        "SHADOWING_DB": Field("number"),
        "NOISE_DBM": Field("number"),
    }


# Schema for benchcfg.yaml file
CONFIGURATION_SCHEMA: Dict[str, Dict[str, Field]] = {
    "SOLVER": {
        "MAX_ITERS": Field("int"),
        "OBJ_TOL": Field("number", conv=float),
        "INNER_TOL": Field("number", conv=float),
        "INNER_MAX_ITERS": Field("int"),
        "INNER_SWEEPS": Field("int"),
        "STEP_TOL": Field("number", conv=float, optional=True),
    },
    "RUN": {
        "SCENARIO": Field("string", optional=True),
        "SEEDS": Field("list[int]"),
        "WORKERS": Field("int"),
        "OUT_DIR": Field("string"),
        "VARIANT": Field("string", optional=True),
        "ORACLE": Field("bool"),
    },
    "EE": {
        "GAIN": Field("number"),
        "NOISE": Field("number"),
        "CIRCUIT_POWER": Field("number"),
        "MAX_POWER": Field("number"),
    },
    "SVM": {
        "POINTS": Field("int"),
        "GAP": Field("number"),
    },
    "AOI": {
        "SOURCES": Field("list[int]"),
        "SERVICE_RATE": Field("number"),
        "TRANSFORM": Field("string"),
    },
    "SECRECY": {
        "LEGIT_GAINS": Field("matrix"),
        "EAVES_GAINS": Field("matrix"),
        "NOISE_DBM": Field("number"),
        "EAVES_NOISE_DBM": Field("number"),
        "MAX_POWER_DBM": Field("number"),
        "GRID_RESOLUTION": Field("number", conv=float),
    },
    "POWER": _network_fields() | {"MAX_POWER_DBM": Field("number")},
    "NCUT": {
        "NODES": Field("int"),
        "CLUSTERS": Field("int"),
        "INTRA": Field("number"),
        "INTER": Field("number"),
        "JITTER": Field("number"),
    },
    "PILOT": _network_fields()
    | {
        "USERS": Field("int"),
        "ANTENNAS": Field("int"),
        "PILOT_LENGTH": Field("int"),
        "PILOT_POWER_DBM": Field("number"),
    },
    "BEAMFORM": {
        "CELLS": Field("int"),
        "USERS": Field("int"),
        "TX_ANTENNAS": Field("int"),
        "RX_ANTENNAS": Field("int"),
        "STREAMS": Field("int"),
        "MAX_POWER": Field("number"),
        "NOISE": Field("number"),
    },
    "SCHEDULE": _network_fields()
    | {
        "CANDIDATES": Field("int"),
        "MAX_POWER_DBM": Field("number"),
    },
    "RATES": {
        "ITERATIONS": Field("int"),
        "K_LO": Field("int"),
        "K_HI": Field("int"),
    },
}


def check_and_copy_benchcfg(file_path: str, pkg_path: str, force: bool = False) -> None:
    """Copy benchcfg template to the given directory."""
    target = os.path.join(file_path, BENCHCFG_FILENAME)
    if not os.path.exists(target) or force:
        prompt = "enforced copy" if force else "no config found in working directory"
        logger.warning(f"Copying default config from template ({prompt})")
        copyfile(os.path.join(pkg_path, "templates", BENCHCFG_FILENAME), target)


def _is_number(val: Any) -> bool:
    return isinstance(val, (int, float)) and not isinstance(val, bool)


def _is_matrix(val: Any) -> bool:
    if not isinstance(val, list) or len(val) == 0:
        return False
    if not all(isinstance(row, list) and all(_is_number(x) for x in row) for row in val):
        return False
    return len({len(row) for row in val}) == 1


def check_throw_error(cfg: Dict[str, Any], args: list[str], schema: Field) -> None:
    """Validate the given configuration entry.

    Args:
    ----
        cfg: one preset of the deserialized benchcfg.yaml file
        args: section and field name leading to the entry, for example: ["SOLVER", "MAX_ITERS"]
        schema: schema for the field

    """
    if len(args) != 2:
        raise ConfigError(f"Configuration path must have two elements, got {args}")
    section, name = args

    val = None
    section_cfg = cfg.get(section) if cfg is not None else None
    if isinstance(section_cfg, dict):
        val = section_cfg.get(name)

    if val is None:
        if schema.optional:
            if isinstance(section_cfg, dict):
                section_cfg[name] = None
            return
        raise ConfigError(f"[{section}][{name}] not found in {BENCHCFG_FILENAME}")

    if schema.conv is not None:
        try:
            val = schema.conv(val)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Converting value [{section}][{name}] (= {val}) failed: {e}") from e
        section_cfg[name] = val  # type: ignore[index]

    match schema.type:
        case "bool":
            valid = isinstance(val, bool)
        case "int":
            valid = isinstance(val, int) and not isinstance(val, bool)
        case "number":
            valid = _is_number(val)
        case "string":
            valid = isinstance(val, str)
        case "list[int]":
            valid = isinstance(val, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in val)
        case "list[number]":
            valid = isinstance(val, list) and all(_is_number(x) for x in val)
        case "matrix":
            valid = _is_matrix(val)
        case _:
            raise ConfigError(f"[{section}][{name}] has unknown schema type {schema.type}")

    if not valid:
        raise ConfigError(f"[{section}][{name}] is not a {schema.type}")


def validate_module_config(schema: dict[str, Field], conf: dict[str, Any], module_name: str) -> bool:
    """Validate one config section against a given schema.

    Returns
    -------
        True: section configuration is valid
        False: section configuration is invalid

    """
    valid = True

    for name, field in schema.items():
        try:
            check_throw_error(conf, [module_name, name], field)
        except ConfigError as e:
            logger.error("Field %s invalid: %s", name, str(e))
            valid = False

    return valid


def validate_setting_dependencies(cfg: Dict[str, Any]) -> None:
    """Validate settings whose correctness depends on other settings."""
    run = cfg["RUN"]
    if len(run["SEEDS"]) == 0:
        raise ConfigError("[RUN][SEEDS] must list at least one seed")
    if run["WORKERS"] < 1:
        raise ConfigError("[RUN][WORKERS] must be at least 1")
    solver = cfg["SOLVER"]
    if solver["MAX_ITERS"] < 1 or solver["OBJ_TOL"] <= 0 or solver["INNER_TOL"] <= 0:
        raise ConfigError("[SOLVER] needs MAX_ITERS >= 1 and positive tolerances")
    if cfg["RATES"]["K_LO"] >= cfg["RATES"]["K_HI"]:
        raise ConfigError("[RATES] K_LO must be smaller than K_HI")


def check_and_parse_benchcfg(cfg: Dict[str, Any]) -> Dict[str, Any]:
    """Validate and parse one preset of benchcfg.yaml."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"{BENCHCFG_FILENAME} preset is not a mapping")

    valid = True
    for module, schema in CONFIGURATION_SCHEMA.items():
        if not validate_module_config(schema, cfg, module):
            valid = False

    if not valid:
        raise ConfigError(f"Configuration in {BENCHCFG_FILENAME} invalid")

    validate_setting_dependencies(cfg)

    return cfg


def open_benchcfg(path: Optional[str], config_preset: str, pkg_path: str) -> Dict[str, Any]:
    """Open the template configuration merged with an optional user file."""
    files = [os.path.join(pkg_path, "templates", BENCHCFG_FILENAME)]
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"Config file {path} does not exist")
        files.append(path)
    try:
        config = hiyapyco.load(files, method=hiyapyco.METHOD_MERGE, mergelists=False)
    except (hiyapyco.HiYaPyCoInvocationException, yaml.YAMLError) as e:
        raise ConfigError(f"Could not load configuration: {e}") from e
    if config is None or config_preset not in config:
        raise ConfigError(f"Unknown benchcfg preset: {config_preset}")
    return check_and_parse_benchcfg(dict(config[config_preset]))
