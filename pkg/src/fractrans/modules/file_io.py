import logging
import os

from fractrans.core.errors import ArtifactError

logger = logging.getLogger(__name__)

TRACES_DIR = "traces"
INSTANCES_DIR = "instances"


def prepare_output_dir(out_dir: str) -> None:
    """Create the output directory with its trace and instance subdirectories."""
    try:
        for sub in (TRACES_DIR, INSTANCES_DIR):
            os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"Cannot create output directory {out_dir}: {e}") from e
    logger.debug("Writing artifacts to %s", out_dir)


def summary_path(out_dir: str, scenario: str) -> str:
    """Per-seed summary CSV of a scenario."""
    return os.path.join(out_dir, f"{scenario}_summary.csv")


def table_path(out_dir: str, scenario: str) -> str:
    """Plain-text table aggregated over seeds."""
    return os.path.join(out_dir, f"{scenario}_table.txt")


def trace_path(out_dir: str, scenario: str, method: str, seed: int) -> str:
    """Trace CSV of one method on one seed."""
    safe = method.replace("/", "-").replace(" ", "-")
    return os.path.join(out_dir, TRACES_DIR, f"{scenario}_{safe}_seed{seed}.csv")


def instance_path(out_dir: str, scenario: str, seed: int) -> str:
    """YAML dump of the instance drawn from one seed."""
    return os.path.join(out_dir, INSTANCES_DIR, f"{scenario}_seed{seed}.yaml")
