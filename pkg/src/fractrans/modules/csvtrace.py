"""Emit and parse solver traces and scenario summaries as CSV."""

import csv
import dataclasses
import logging
from typing import Any, Dict, Generator, List, Sequence, Type, TypeVar

from fractrans.core.errors import ArtifactError
from fractrans.modules.problem import SolverTrace, TraceRecord

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [f.name for f in dataclasses.fields(TraceRecord)]
NON_MONOTONE_MARK = "# non-monotone"


def format_value(value: float) -> str:
    """Full-precision scientific notation, parsed back bit-exactly by float()."""
    return f"{value:.17e}"


def emit_trace_csv(trace: SolverTrace, filepath: str) -> None:
    """Write one row per trace record under the header iter,objective,surrogate,aux_norm,elapsed_ms.

    Traces without a monotonicity contract get a `# non-monotone` comment line
    before the header.
    """
    try:
        with open(filepath, "w", encoding="utf-8", newline="") as csv_file:
            if not trace.monotone_required:
                csv_file.write(NON_MONOTONE_MARK + "\n")
            writer = csv.writer(csv_file, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for rec in trace.records:
                writer.writerow(
                    [rec.iter] + [format_value(getattr(rec, name)) for name in TRACE_COLUMNS[1:]]
                )
    except OSError as e:
        raise ArtifactError(f"Cannot write trace {filepath}: {e}") from e


def parse(filepath: str) -> Generator[Dict[str, str], None, None]:
    """Parse key/value rows from a CSV file, skipping `#` comment lines.

    Returns a generator producing dictionaries mapping the values found on
    each row to the keys of the CSV header.
    """
    try:
        with open(filepath, "rb") as csv_file:
            filebytes = csv_file.read()
    except OSError as e:
        raise ArtifactError(f"Cannot read {filepath}: {e}") from e
    try:
        as_str = filebytes.decode("utf-8")
    except UnicodeDecodeError:
        as_str = filebytes.decode("utf-8", errors="replace")
        logger.warning(f"CSV file: {filepath} is not valid UTF-8! Problematic characters were replaced")

    lines = [line for line in as_str.splitlines() if not line.startswith("#")]
    reader = csv.DictReader(lines, skipinitialspace=True)
    for row in reader:
        yield row


T = TypeVar("T")


def extract_data_from_row(csvrow: Dict[str, str], data_type: Type[T], file_type: str) -> T:
    """Build a dataclass from one CSV row through the `csvnames` metadata of its fields."""
    args: Dict[str, Any] = {}
    for field in dataclasses.fields(data_type):  # type: ignore[arg-type]
        csvnames: List[str] = field.metadata.get("csvnames", [])
        value = None
        for colname in csvnames:
            if colname in csvrow and callable(field.type):
                try:
                    value = field.type(csvrow[colname])
                except ValueError as e:
                    raise ArtifactError(f"Bad value '{csvrow[colname]}' in column {colname} of {file_type}") from e
        if value is None:
            raise ArtifactError(
                f"Could not find required column '{field.name}' in {file_type} file, "
                f"tried looking for names: {','.join(csvnames)}"
            )
        args[field.name] = value
    return data_type(**args)


def read_trace(filepath: str) -> List[TraceRecord]:
    """Records of a trace file written by `emit_trace_csv`."""
    return [extract_data_from_row(row, TraceRecord, "trace") for row in parse(filepath)]


def is_marked_non_monotone(filepath: str) -> bool:
    """Check for the non-monotone comment line."""
    try:
        with open(filepath, encoding="utf-8") as csv_file:
            return csv_file.readline().rstrip("\n") == NON_MONOTONE_MARK
    except OSError as e:
        raise ArtifactError(f"Cannot read {filepath}: {e}") from e


def write_rows(filepath: str, rows: Sequence[Dict[str, Any]], fieldnames: Sequence[str]) -> None:
    """Write dictionaries as CSV with a fixed column order."""
    try:
        with open(filepath, "w", encoding="utf-8", newline="") as csv_file:
            writer = csv.DictWriter(csv_file, fieldnames=list(fieldnames), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    except OSError as e:
        raise ArtifactError(f"Cannot write {filepath}: {e}") from e
