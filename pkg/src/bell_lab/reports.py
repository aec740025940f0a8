"""Deterministic report serialization.

JSON reports use sorted keys and floats rounded to 12 significant digits.
CSV reports start with a ``# schema=... schema_version=...`` comment line
followed by a fixed header; the column layouts are listed in ``CSV_LAYOUTS``.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from packaging.version import InvalidVersion, Version

from .behavior import Behavior
from .errors import UnsupportedFormatError, ValidationError
from .hbt import HbtAudit, HbtReport
from .locality import LocalityReport
from .metrics import ChshResult
from .polytope import MembershipVerdict
from .version import REPORT_SCHEMA_VERSION

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv")
SIGNIFICANT_DIGITS = 12
SCHEMA_PREFIX = "bell-lab/"

CSV_LAYOUTS: Dict[str, Tuple[str, ...]] = {
    "chsh": ("settings", "E_ab", "E_ab'", "E_a'b", "E_a'b'", "S", "stderr"),
    "locality": ("check_name", "verdict", "max_residual", "tolerance"),
    "membership": ("status", "gap", "violated_index", "violated_value", "weights"),
    "behavior": ("a_index", "b_index", "a", "b", "p++", "p+-", "p-+", "p--", "E"),
    "hbt": ("quantity", "value"),
}


@dataclass
class ExperimentResult:
    """A finished experiment: JSON payload, CSV table and console summary."""
    experiment: str
    payload: Dict[str, Any]
    csv_header: Tuple[str, ...]
    csv_rows: List[Sequence[Any]]
    summary: List[Tuple[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.payload)


def round_floats(value: Any) -> Any:
    """Recursively round floats to 12 significant digits and convert numpy types."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if not math.isfinite(number):
            raise ValidationError(f"Cannot serialize non-finite value {number!r}")
        rounded = float(f"{number:.{SIGNIFICANT_DIGITS}g}")
        return 0.0 if rounded == 0.0 else rounded
    if isinstance(value, dict):
        return {str(k): round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [round_floats(v) for v in value]
    return value


def format_number(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{round_floats(value):.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def schema_of(result: Any) -> str:
    if isinstance(result, ExperimentResult):
        return result.experiment
    if isinstance(result, ChshResult):
        return "chsh"
    if isinstance(result, LocalityReport):
        return "locality"
    if isinstance(result, MembershipVerdict):
        return "membership"
    if isinstance(result, (HbtReport, HbtAudit)):
        return "hbt"
    if isinstance(result, Behavior):
        return "behavior"
    raise ValidationError(f"No report schema for {type(result).__name__}")


def report_payload(result: Any) -> Dict[str, Any]:
    """The JSON object of a report, schema fields included."""
    payload = result.to_dict()
    payload["schema"] = SCHEMA_PREFIX + schema_of(result)
    payload["schema_version"] = REPORT_SCHEMA_VERSION
    return round_floats(payload)


def _behavior_rows(behavior: Behavior) -> List[List[Any]]:
    rows = []
    correlators = behavior.correlators()
    for i, a in enumerate(behavior.settings_a):
        for j, b in enumerate(behavior.settings_b):
            rows.append([i, j, a.angle, b.angle, *behavior.cell(i, j).tolist(), correlators[i, j]])
    return rows


def chsh_row(result: ChshResult) -> List[Any]:
    settings = "" if result.settings is None else ";".join(format_number(s) for s in result.settings)
    return [settings, *result.correlators, result.s_value, result.estimator_stderr]


def locality_row(report: LocalityReport) -> List[Any]:
    return [report.check_name, report.verdict, report.max_residual, report.tolerance]


def membership_row(verdict: MembershipVerdict) -> List[Any]:
    violated = verdict.violated_inequality or {}
    weights = "" if verdict.weights is None else ";".join(format_number(float(w)) for w in verdict.weights)
    return [verdict.status, verdict.gap, violated.get("index"), violated.get("value"), weights]


def hbt_rows(report: HbtReport) -> List[List[Any]]:
    return [
        ["ensemble_covariance", report.ensemble_covariance],
        ["ensemble_stderr", report.ensemble_stderr],
        ["analytic_covariance", report.analytic_covariance],
        ["fixed_h_covariance", report.fixed_h_covariance],
        ["fixed_h_outcome_residual", report.fixed_h_outcome_residual],
        ["mean_intensity_1", report.mean_intensity_1],
        ["mean_intensity_2", report.mean_intensity_2],
        ["chsh_of_binary", report.chsh_of_binary.s_value],
    ]


def csv_table(result: Any) -> Tuple[Tuple[str, ...], List[Sequence[Any]]]:
    """(header, rows) of the fixed CSV layout for ``result``."""
    if isinstance(result, ExperimentResult):
        return result.csv_header, result.csv_rows
    if isinstance(result, ChshResult):
        return CSV_LAYOUTS["chsh"], [chsh_row(result)]
    if isinstance(result, LocalityReport):
        return CSV_LAYOUTS["locality"], [locality_row(result)]
    if isinstance(result, MembershipVerdict):
        return CSV_LAYOUTS["membership"], [membership_row(result)]
    if isinstance(result, HbtAudit):
        return CSV_LAYOUTS["hbt"], hbt_rows(result.report)
    if isinstance(result, HbtReport):
        return CSV_LAYOUTS["hbt"], hbt_rows(result)
    if isinstance(result, Behavior):
        return CSV_LAYOUTS["behavior"], _behavior_rows(result)
    raise ValidationError(f"No CSV layout for {type(result).__name__}")


def report_emit(result: Any, fmt: str = "json") -> bytes:
    """Serialize a result; identical inputs give identical bytes.

    Raises:
        UnsupportedFormatError: for formats other than json and csv
    """
    if fmt not in FORMATS:
        raise UnsupportedFormatError(f"Unsupported report format {fmt!r} (use json or csv)")
    if fmt == "json":
        text = json.dumps(report_payload(result), sort_keys=True, indent=2, allow_nan=False)
        return (text + "\n").encode("utf-8")

    header, rows = csv_table(result)
    buffer = io.StringIO()
    buffer.write(f"# schema={SCHEMA_PREFIX}{schema_of(result)} schema_version={REPORT_SCHEMA_VERSION}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(cell) for cell in row])
    return buffer.getvalue().encode("utf-8")


def load_report(data: bytes) -> Dict[str, Any]:
    """Parse a JSON report and check its schema version is readable.

    Raises:
        ValidationError: for a missing or incompatible schema version
    """
    payload = json.loads(data.decode("utf-8"))
    try:
        declared = Version(str(payload["schema_version"]))
    except (KeyError, InvalidVersion):
        raise ValidationError("Report has no valid schema_version")
    if declared.major != Version(REPORT_SCHEMA_VERSION).major:
        raise ValidationError(f"Report schema {declared} is not readable by {REPORT_SCHEMA_VERSION}")
    return payload
