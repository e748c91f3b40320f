import argparse
import logging
from os import getcwd, path
from typing import List, Optional

import fractrans.core.benchcfg as benchcfg
import fractrans.core.log as log
import fractrans.modules.config as config
from fractrans.core.errors import ConfigError, DegenerateDenominator, SingularDenominator
from fractrans.modules.scenarios import run_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    formatter = lambda prog: argparse.HelpFormatter(prog, max_help_position=35)  # noqa: E731
    parser = argparse.ArgumentParser(
        prog="fractrans",
        prefix_chars="-",
        formatter_class=formatter,
        description="fractional programming benchmarks solved with the quadratic transform",
    )
    parser.add_argument(
        "scenario",
        nargs="?",
        help="scenario tag, one of: " + ", ".join(config.SCENARIOS),
    )
    parser.add_argument(
        "-d",
        "--debug",
        "-v",
        "--verbose",
        dest="debug",
        action="store_true",
        help="increase verbosity, print more information",
    )
    parser.add_argument(
        "-c",
        "--config",
        dest="config",
        help="path to benchcfg.yaml, defaults to the one in CWD",
        type=str,
    )
    parser.add_argument(
        "-p",
        "--preset",
        dest="preset",
        help="benchcfg preset to use",
        type=str,
        default="default",
    )
    parser.add_argument(
        "-g",
        "--get-config",
        help="Copy benchcfg.yaml to CWD and exit",
        action="store_true",
    )
    parser.add_argument("--seed", type=int, help="run a single seed instead of [RUN][SEEDS]")
    parser.add_argument("--out", help="output directory, overrides [RUN][OUT_DIR]")
    parser.add_argument("--variant", help="solver variant, overrides [RUN][VARIANT]")
    parser.add_argument("--oracle", action="store_true", help="also run the brute-force oracles")

    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG

    # Configure logger based on if we're debugging or not
    log.set_logging(args.debug)

    try:
        if args.get_config:
            prj_path = getcwd() + "/"
            pkg_path = path.dirname(__file__)
            benchcfg.check_and_copy_benchcfg(prj_path, pkg_path, force=True)
            return EXIT_OK

        # Initialize global data
        config.init_global(args)
        return run_scenario(config.scenario, config.benchcfg, config.out_path)

    except ConfigError as e:
        logger.error("%s", str(e))
        return EXIT_CONFIG
    except (DegenerateDenominator, SingularDenominator) as e:
        logger.error("%s", str(e))
        return EXIT_DEGENERATE
    except Exception as e:
        logger.error("%s", str(e), exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    exit(main())
