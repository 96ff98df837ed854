"""Machine-readable run reports and delimited artifacts.

One experiment run produces a RunReport (JSON, schema-validated) plus
CSV artifacts.  Float formatting goes through shortest round-trip repr,
so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .errors import InputError

SCHEMA_NAME = "run_report.schema.json"


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> str:
    """UTF-8, comma-separated, one header row; deterministic formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = list(header)
    lines = [",".join(header)]
    for row in rows:
        row = list(row)
        if len(row) != len(header):
            raise InputError(
                f"row width {len(row)} does not match header width {len(header)}")
        lines.append(",".join(_format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path, payload) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True)
                    + "\n", encoding="utf-8")
    return str(path)


@dataclass(frozen=True)
class CheckResult:
    """One named pass/fail check with the measured value it judged."""
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        parts = [f"[{tag}] {self.name}"]
        if self.value is not None:
            parts.append(f"value={self.value:.6g}")
        if self.threshold is not None:
            parts.append(f"threshold={self.threshold:.6g}")
        if self.detail:
            parts.append(self.detail)
        return "  ".join(parts)


@dataclass
class RunReport:
    """Everything one subcommand run produced, ready for serialization."""
    subcommand: str
    config: dict
    checks: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def __post_init__(self):
        names = [c.name for c in self.checks]
        if len(names) != len(set(names)):
            raise InputError(f"duplicate check names in report: {names}")

    def add_check(self, name: str, passed: bool, value=None, threshold=None,
                  detail: str = "") -> CheckResult:
        if any(c.name == name for c in self.checks):
            raise InputError(f"check {name!r} already present in report")
        result = CheckResult(name=name, passed=bool(passed),
                             value=None if value is None else float(value),
                             threshold=None if threshold is None
                             else float(threshold),
                             detail=detail)
        self.checks.append(result)
        return result

    def add_artifact(self, path) -> str:
        self.artifacts.append(str(path))
        return str(path)

    def finish(self) -> "RunReport":
        self.wall_clock_seconds = time.perf_counter() - self._started
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failing_checks(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return _jsonable({
            "subcommand": self.subcommand,
            "config": self.config,
            "checks": [{"name": c.name, "passed": c.passed, "value": c.value,
                        "threshold": c.threshold, "detail": c.detail}
                       for c in self.checks],
            "metrics": self.metrics,
            "artifacts": self.artifacts,
            "wall_clock_seconds": self.wall_clock_seconds,
        })

    def write(self, path) -> str:
        payload = self.to_dict()
        validate_report(payload)
        return write_json(path, payload)


def report_schema() -> dict:
    text = (resources.files("roughflow") / "schemas" / SCHEMA_NAME).read_text(
        encoding="utf-8")
    return json.loads(text)


def validate_report(payload: dict) -> None:
    """Raises InputError with the first schema violation, if any."""
    validator = Draft202012Validator(report_schema())
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.path) or "<root>"
        raise InputError(f"report schema violation at {where}: {first.message}")
