"""Tests for JSON reports."""

import io
import json
import os
import tempfile

import numpy as np

from hypconvex.reports import Report, plain


def test_checks_pass_and_fail():
    """Test tolerance comparison, explicit verdicts and NaN handling."""
    report = Report("forms")

    assert report.check("small", 1e-9, 1e-8).passed
    assert not report.check("large", 1e-3, 1e-8).passed
    assert not report.check("nan", float("nan"), 1.0).passed
    assert report.check("explicit", 5.0, 0.0, passed=True).passed
    assert not report.passed
    assert [c.name for c in report.failures()] == ["large", "nan"]


def test_plain_converts_numpy_values():
    """Test conversion of numpy scalars, arrays and non-finite values."""
    data = plain({"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "d": np.inf, 1: (np.int64(2),)})

    assert data == {"a": 1.5, "b": [0, 1, 2], "c": True, "d": "inf", "1": [2]}


def test_report_json_layout():
    """Test the key order and content of a serialized report."""
    report = Report("offset")
    report.check("residual", np.float64(1e-9), 1e-8)
    report.add("offset", {"t": 0.5, "direction": "outward"})
    report.column("rho", np.ones((2, 2)))

    data = json.loads(report.to_json())

    assert list(data) == ["command", "passed", "checks", "offset", "columns"]
    assert data["checks"][0] == {"name": "residual", "value": 1e-9, "tolerance": 1e-8, "pass": True}
    assert data["columns"]["rho"] == [1.0, 1.0, 1.0, 1.0]
    assert report.to_json() == report.to_json()


def test_report_write_targets():
    """Test writing a report to a stream and to a file."""
    report = Report("verify")
    report.check("value", 0.0, 0.0)
    stream = io.StringIO()

    report.write("-", stream)
    assert json.loads(stream.getvalue())["passed"] is True

    with tempfile.NamedTemporaryFile(delete=False, suffix=".json") as tmp_file:
        path = tmp_file.name
    try:
        report.write(path)
        with open(path, encoding="utf-8") as f:
            assert json.load(f)["command"] == "verify"
    finally:
        os.unlink(path)
