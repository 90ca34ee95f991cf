"""
Text formats for surfaces and metrics.

surf-grid v1: a header line ``surf-grid 1``, a line ``n_theta n_phi``, then
one line of rho values per latitude row. Values are written with 17
significant digits, so reading back gives the same doubles.

metric-grid v1: a JSON object with the E, F, G coefficients of a metric per
node, in the same chart.
"""

import json
import logging

import numpy as np

from .errors import FormatError
from .surface import FormField, RadialSurface

logger = logging.getLogger(__name__)

SURF_HEADER = "surf-grid 1"


def _fail(message: str, path) -> FormatError:
    logger.error(f"{path}: {message}")
    return FormatError(f"{path}: {message}")


def format_surf_grid(surface: RadialSurface) -> str:
    lines = [SURF_HEADER, f"{surface.n_theta} {surface.n_phi}"]
    lines += [" ".join(format(v, ".17g") for v in row) for row in surface.rho]
    return "\n".join(lines) + "\n"


def parse_surf_grid(text: str, path="<string>") -> RadialSurface:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != SURF_HEADER:
        raise _fail(f"missing '{SURF_HEADER}' header", path)
    try:
        n_theta, n_phi = (int(v) for v in lines[1].split())
    except (IndexError, ValueError):
        raise _fail("second line must hold 'n_theta n_phi'", path)
    rows = lines[2:]
    if len(rows) != n_theta:
        raise _fail(f"expected {n_theta} rows, found {len(rows)}", path)
    try:
        rho = np.array([[float(v) for v in row.split()] for row in rows])
    except ValueError as e:
        raise _fail(f"bad value: {e}", path)
    if rho.shape != (n_theta, n_phi):
        raise _fail(f"expected {n_phi} values per row", path)
    if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
        raise _fail("rho values must be finite and positive", path)
    return RadialSurface(rho)


def read_surf_grid(path) -> RadialSurface:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise _fail(f"cannot read: {e}", path)
    return parse_surf_grid(text, path)


def write_surf_grid(surface: RadialSurface, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_surf_grid(surface))
    logger.info(f"wrote surf-grid {surface.grid} to {path}")


def metric_grid_dict(metric: FormField) -> dict:
    grid = metric.grid
    return {
        "format": "metric-grid",
        "version": 1,
        "n_theta": grid.n_theta,
        "n_phi": grid.n_phi,
        "EFG": metric.efg.tolist(),
    }


def parse_metric_grid(data: dict, path="<dict>") -> FormField:
    if not isinstance(data, dict) or data.get("format") != "metric-grid":
        raise _fail("not a metric-grid document", path)
    if data.get("version") != 1:
        raise _fail(f"unsupported version {data.get('version')!r}", path)
    try:
        n_theta, n_phi = int(data["n_theta"]), int(data["n_phi"])
        efg = np.asarray(data["EFG"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise _fail(f"bad field: {e}", path)
    if efg.shape != (n_theta, n_phi, 3):
        raise _fail(f"EFG has shape {efg.shape}, expected {(n_theta, n_phi, 3)}", path)
    if not np.all(np.isfinite(efg)):
        raise _fail("EFG values must be finite", path)
    return FormField.from_efg(efg, "h")


def read_metric_grid(path) -> FormField:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise _fail(f"cannot read: {e}", path)
    except json.JSONDecodeError as e:
        raise _fail(f"invalid JSON: {e}", path)
    return parse_metric_grid(data, path)


def write_metric_grid(metric: FormField, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(metric_grid_dict(metric), f)
        f.write("\n")
    logger.info(f"wrote metric-grid {metric.grid} to {path}")
