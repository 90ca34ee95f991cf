"""Tests for the Minkowski model helpers and Killing fields."""

import numpy as np
import pytest

from hypconvex.errors import PreconditionError
from hypconvex.lorentz import (
    CENTER,
    HPoint,
    KillingElement,
    geodesic,
    h_dist,
    inner,
    killing_compose,
    killing_decompose,
    killing_decompose_array,
    killing_eval,
    killing_transport_derivative,
    tangent_basis,
)
from hypconvex.grid import SphereGrid


def test_points_on_hyperboloid():
    """Test the quadric check of HPoint."""
    x = HPoint.at_distance(1.5, [1.0, 2.0, 2.0])

    assert inner(x.array, x.array) == pytest.approx(-1.0)
    with pytest.raises(PreconditionError):
        HPoint.from_array([2.0, 0.0, 0.0, 0.0])


def test_distance_along_geodesic():
    """Test that a unit-speed geodesic has the expected distance."""
    x = HPoint.from_array(CENTER)
    y = geodesic(x, [0.0, 1.0, 0.0, 0.0], 0.8)

    assert h_dist(x, y) == pytest.approx(0.8)
    assert h_dist(HPoint.at_distance(2.0, [0, 0, 1]), x) == pytest.approx(2.0)


def test_tangent_basis_is_orthonormal():
    """Test the boost frame at a point away from the center."""
    x = HPoint.at_distance(1.2, [0.3, -0.4, 0.5]).array
    basis = tangent_basis(x)

    gram = np.array([[inner(a, b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(3), atol=1e-12)
    assert np.allclose([inner(b, x) for b in basis], 0.0, atol=1e-12)


def test_killing_fields_are_tangent():
    """Test that Killing fields are tangent to the hyperboloid."""
    rng = np.random.default_rng(7)
    k = KillingElement.random(rng)

    for _ in range(10):
        x = HPoint.at_distance(rng.uniform(0.1, 2.0), rng.standard_normal(3)).array
        assert abs(inner(x, k(x))) < 1e-10 * x[0] ** 2


def test_rejects_matrix_outside_lie_algebra():
    """Test that non-Killing matrices are rejected."""
    with pytest.raises(PreconditionError):
        KillingElement(np.eye(4))


def test_decompose_at_center():
    """Test the translation and rotation parts at the model center."""
    k = KillingElement.from_vectors([1.0, 2.0, 3.0], [0.5, -1.0, 0.25])
    x = HPoint.from_array(CENTER)

    tau, sigma = killing_decompose(k, x)

    assert np.allclose(tau.array, [0.0, 1.0, 2.0, 3.0])
    assert np.allclose(sigma.array, [0.0, 0.5, -1.0, 0.25])
    assert np.allclose(killing_compose(tau, sigma, x).mat, k.mat)


def test_killing_eval_examples():
    """Test field values of the zero field, a boost and a rotation about an axis through x."""
    center = HPoint.from_array(CENTER)
    x = HPoint.at_distance(1.0, [1.0, 0.0, 0.0])

    assert np.allclose(killing_eval(KillingElement(np.zeros((4, 4))), x).array, 0.0)
    boost = KillingElement.from_vectors([1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert np.allclose(killing_eval(boost, center).array, [0.0, 1.0, 0.0, 0.0])
    rotation = KillingElement.from_vectors([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    assert np.allclose(killing_eval(rotation, x).array, 0.0, atol=1e-14)


def test_decompose_compose_away_from_center():
    """Test that composing the parts of k at a point reproduces k."""
    rng = np.random.default_rng(9)
    for _ in range(20):
        k = KillingElement.random(rng)
        x = HPoint.at_distance(rng.uniform(0.2, 2.5), rng.standard_normal(3))

        tau, sigma = killing_decompose(k, x)

        assert np.allclose(killing_compose(tau, sigma, x).mat, k.mat, atol=1e-10)
        assert abs(inner(sigma.array, x.array)) < 1e-10 * x.array[0] ** 2


def test_rotation_about_point_has_no_translation():
    """Test that a rotation fixing x decomposes as (0, axis)."""
    x = HPoint.at_distance(0.7, [0.0, 0.0, 1.0])
    axis = tangent_basis(x.array)[0]
    k = killing_compose(np.zeros(4), axis, x)

    tau, sigma = killing_decompose(k, x)

    assert np.allclose(tau.array, 0.0, atol=1e-12)
    assert np.allclose(sigma.array, axis, atol=1e-12)


def test_transport_derivative_annihilates_killing_sections():
    """Test that D vanishes on the sampled parts of a single Killing field."""
    grid = SphereGrid(32, 64)
    rng = np.random.default_rng(10)
    d = grid.directions()
    x = np.concatenate([np.full(grid.shape + (1,), np.cosh(1.0)), np.sinh(1.0) * d], axis=-1)
    k = KillingElement.random(rng)
    tau, sigma = killing_decompose_array(k.mat, x)
    w = rng.standard_normal(grid.shape + (2,))

    d_tau, d_sigma = killing_transport_derivative(grid, x, tau, sigma, w)

    assert np.max(np.abs(d_tau)) < 1e-9
    assert np.max(np.abs(d_sigma)) < 1e-9
