"""Tests for the surf-grid and metric-grid formats."""

import os
import tempfile

import numpy as np
import pytest

from hypconvex.errors import FormatError
from hypconvex.formats import (
    SURF_HEADER,
    format_surf_grid,
    parse_metric_grid,
    parse_surf_grid,
    read_metric_grid,
    read_surf_grid,
    write_metric_grid,
    write_surf_grid,
)
from hypconvex.grid import SphereGrid
from hypconvex.surface import FormField, RadialSurface

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def test_read_sphere_fixture():
    """Test reading the bundled unit-radius sphere."""
    surface = read_surf_grid(os.path.join(FIXTURES, "sphere_rho1.surf"))

    assert surface.grid == SphereGrid(16, 32)
    assert np.all(surface.rho == 1.0)


def test_surf_grid_round_trip_is_exact():
    """Test that writing and reading a surface keeps every double."""
    original = read_surf_grid(os.path.join(FIXTURES, "flat_ellipsoid.surf"))
    with tempfile.NamedTemporaryFile(delete=False, suffix=".surf") as tmp_file:
        path = tmp_file.name

    try:
        write_surf_grid(original, path)
        again = read_surf_grid(path)

        assert np.array_equal(again.rho, original.rho)
    finally:
        os.unlink(path)


def test_format_surf_grid_layout():
    """Test the header and row layout of surf-grid text."""
    surface = RadialSurface.sphere(SphereGrid(4, 8), 0.5)

    lines = format_surf_grid(surface).splitlines()

    assert lines[0] == SURF_HEADER
    assert lines[1] == "4 8"
    assert len(lines) == 6
    assert lines[2].split() == ["0.5"] * 8


@pytest.mark.parametrize(
    "text",
    [
        "4 8\n" + "1 " * 8,
        f"{SURF_HEADER}\nfour eight\n",
        f"{SURF_HEADER}\n4 8\n" + ("1 " * 8 + "\n") * 3,
        f"{SURF_HEADER}\n4 8\n" + ("1 " * 7 + "\n") * 4,
        f"{SURF_HEADER}\n4 8\n" + ("1 " * 7 + "-1\n") * 4,
        f"{SURF_HEADER}\n4 8\n" + ("1 " * 7 + "x\n") * 4,
    ],
)
def test_malformed_surf_grid(text):
    """Test that malformed surf-grid text raises FormatError."""
    with pytest.raises(FormatError):
        parse_surf_grid(text)


def test_metric_grid_round_trip():
    """Test writing and reading a metric-grid document."""
    metric = read_metric_grid(os.path.join(FIXTURES, "round_sinh1.json"))
    with tempfile.NamedTemporaryFile(delete=False, suffix=".json") as tmp_file:
        path = tmp_file.name

    try:
        write_metric_grid(metric, path)
        again = read_metric_grid(path)

        assert np.array_equal(again.values, metric.values)
        assert metric.relative_error(FormField.round(metric.grid, np.sinh(1.0) ** 2)) < 1e-14
    finally:
        os.unlink(path)


def test_malformed_metric_grid():
    """Test the metric-grid validation."""
    good = {"format": "metric-grid", "version": 1, "n_theta": 4, "n_phi": 8, "EFG": np.ones((4, 8, 3)).tolist()}

    assert parse_metric_grid(good).grid == SphereGrid(4, 8)
    for bad in (
        {**good, "format": "other"},
        {**good, "version": 2},
        {**good, "n_phi": 16},
        {key: value for key, value in good.items() if key != "EFG"},
    ):
        with pytest.raises(FormatError):
            parse_metric_grid(bad)


def test_unreadable_files():
    """Test that missing files and invalid JSON raise FormatError."""
    with pytest.raises(FormatError):
        read_surf_grid(os.path.join(FIXTURES, "missing.surf"))
    with tempfile.NamedTemporaryFile("w", delete=False, suffix=".json") as tmp_file:
        tmp_file.write("{not json")
        path = tmp_file.name

    try:
        with pytest.raises(FormatError):
            read_metric_grid(path)
    finally:
        os.unlink(path)
