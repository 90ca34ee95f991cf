"""
JSON reports: named checks against tolerances, data sections and columns.

Output is deterministic: keys keep insertion order, numpy values become plain
Python numbers, and nothing time-dependent is recorded.
"""

import json
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Check:
    """A measured value compared with a tolerance (value <= tolerance passes)."""

    name: str
    value: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "pass": self.passed}


def plain(value):
    """Convert numpy scalars and arrays (also nested in containers) to JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


class Report:
    """Collects checks, sections and plot-ready columns of one command."""

    def __init__(self, command: str):
        self.command = command
        self.checks: list[Check] = []
        self.sections: dict = {}
        self.columns: dict = {}

    def check(self, name: str, value: float, tolerance: float, passed: bool | None = None) -> Check:
        """
        Record a check; by default it passes when value <= tolerance.

        NaN values never pass.
        """
        value = float(value)
        if passed is None:
            passed = bool(value <= tolerance)
        record = Check(name, value, float(tolerance), bool(passed) and not math.isnan(value))
        self.checks.append(record)
        return record

    def add(self, name: str, data):
        self.sections[name] = plain(data)

    def column(self, name: str, values):
        self.columns[name] = plain(np.asarray(values).ravel())

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        data = {
            "command": self.command,
            "passed": self.passed,
            "checks": [plain(c.to_dict()) for c in self.checks],
        }
        data.update(self.sections)
        if self.columns:
            data["columns"] = self.columns
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def write(self, path=None, stream=None):
        """Write to a file path, or to ``stream`` when no path is given."""
        text = self.to_json()
        if path is None or path == "-":
            stream.write(text)
        else:
            with open(path, "w", encoding="utf-8") as f:
                f.write(text)
