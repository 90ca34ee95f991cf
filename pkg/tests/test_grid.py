"""Tests for SphereGrid."""

import numpy as np
import pytest

from hypconvex.errors import PreconditionError
from hypconvex.grid import SphereGrid, chart_parity


def test_nodes_avoid_poles():
    """Test that latitudes are half-offset and never hit a pole."""
    grid = SphereGrid(8, 16)

    assert grid.theta[0] == pytest.approx(np.pi / 16)
    assert grid.theta[-1] == pytest.approx(np.pi - np.pi / 16)
    assert grid.shape == (8, 16)
    assert grid.size == 128


def test_insufficient_stencil():
    """Test that grids too small for the stencil are rejected."""
    with pytest.raises(PreconditionError):
        SphereGrid(3, 16)
    with pytest.raises(PreconditionError):
        SphereGrid(8, 15)


def test_derivatives_of_directions():
    """Test the finite differences against the exact direction derivatives."""
    grid = SphereGrid(32, 64)
    d = grid.directions()
    d_th, d_ph = grid.direction_derivatives()

    assert np.max(np.abs(grid.d_theta(d) - d_th)) < 1e-4
    assert np.max(np.abs(grid.d_phi(d) - d_ph)) < 1e-4


def test_stencil_matrix_matches_d_theta():
    """Test that the sparse stencil reproduces the array derivative."""
    grid = SphereGrid(8, 16)
    rng = np.random.default_rng(3)
    f = grid.directions() @ rng.standard_normal(3)

    for axis, direct in (("theta", grid.d_theta(f)), ("phi", grid.d_phi(f))):
        sparse = (grid.stencil_matrix(axis) @ f.ravel()).reshape(grid.shape)
        assert np.allclose(sparse, direct, atol=1e-12)


def test_integrate_sphere_area():
    """Test the midpoint quadrature of the round area density."""
    grid = SphereGrid(32, 64)
    th, _ = grid.mesh()

    area = grid.integrate(np.sin(th))

    assert area == pytest.approx(4.0 * np.pi, rel=1e-3)


def test_chart_parity_and_refine():
    """Test the tensor sign pattern and grid refinement."""
    assert np.array_equal(chart_parity(1), np.array([-1.0, 1.0]))
    assert np.array_equal(chart_parity(2), np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert SphereGrid(8, 16).refine() == SphereGrid(16, 32)
