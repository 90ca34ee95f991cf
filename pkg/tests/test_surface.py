"""Tests for discrete surfaces and their fundamental forms."""

import numpy as np
import pytest

from hypconvex.errors import DegenerateGeometryError, PreconditionError
from hypconvex.grid import SphereGrid
from hypconvex.projective import klein_project, sphere_forms_H
from hypconvex.surface import (
    FormField,
    RadialSurface,
    compatibility_residual,
    connection_I,
    connection_II,
    connection_III,
    euclidean_forms,
    fundamental_forms,
    gauss_codazzi_residuals,
    gaussian_curvature,
    mixed_rule_residual,
    resample_radial,
    sphere_forms,
    third_form_direct,
    torsion_residual,
)


def test_sphere_forms_exact():
    """Test I, II, III of a geodesic sphere from exact derivatives."""
    grid = SphereGrid(16, 32)
    forms = sphere_forms(grid, 1.0)

    for form, scale in zip((forms.first, forms.second, forms.third), sphere_forms_H(1.0)):
        assert form.relative_error(FormField.round(grid, scale)) < 1e-12
    assert forms.min_curvature() == pytest.approx(1.0 / np.tanh(1.0))
    assert forms.max_curvature() == pytest.approx(1.0 / np.tanh(1.0))


def test_sphere_forms_finite_difference():
    """Test the finite-difference pipeline on a sphere."""
    grid = SphereGrid(32, 64)
    forms = fundamental_forms(RadialSurface.sphere(grid, 0.5).frame())

    for form, scale in zip((forms.first, forms.second, forms.third), sphere_forms_H(0.5)):
        assert form.relative_error(FormField.round(grid, scale)) < 1e-3
    assert forms.asymmetry < 1e-3
    assert not forms.nonconvex


def test_round_metric_curvature():
    """Test that c^2 times the round metric has curvature 1/c^2."""
    grid = SphereGrid(32, 64)

    k = gaussian_curvature(FormField.round(grid, 4.0))

    assert np.max(np.abs(k - 0.25)) < 1e-3


def test_gauss_codazzi_on_sphere():
    """Test the Gauss and Codazzi residuals of a sphere."""
    grid = SphereGrid(16, 32)
    forms = fundamental_forms(RadialSurface.sphere(grid, 1.0).frame())

    gauss, codazzi = gauss_codazzi_residuals(forms.first, forms.shape)

    assert np.max(np.abs(gauss)) < 1e-3
    assert np.max(codazzi) < 1e-3


def test_third_form_two_ways():
    """Test II I^-1 II against the metric of the normal map."""
    grid = SphereGrid(32, 64)
    surface = RadialSurface.perturbed(grid, np.random.default_rng(2))
    forms = fundamental_forms(surface.frame())

    assert forms.third.relative_error(third_form_direct(forms.frame)) < 1e-3
    assert forms.first.is_positive_definite()
    assert forms.third.is_positive_definite()


def test_levi_civita_is_torsion_free():
    """Test that the Christoffel symbols are symmetric."""
    grid = SphereGrid(16, 32)
    forms = fundamental_forms(RadialSurface.perturbed(grid, np.random.default_rng(4)).frame())

    assert np.max(torsion_residual(connection_I(forms.first))) < 1e-12


def test_form_field_arithmetic():
    """Test FormField construction and arithmetic."""
    grid = SphereGrid(8, 16)
    a = FormField.round(grid, 2.0)
    b = FormField.round(grid, 3.0)

    assert (a + b).relative_error(FormField.round(grid, 5.0)) < 1e-15
    assert (2.0 * a - b).relative_error(FormField.round(grid, 1.0)) < 1e-14
    assert np.allclose(a.efg[..., 1], 0.0)
    with pytest.raises(PreconditionError):
        FormField(np.zeros((8, 16, 3)))


def test_radial_surface_validation():
    """Test that non-positive radii are rejected."""
    rho = np.ones((8, 16))
    rho[2, 3] = -0.1

    with pytest.raises(PreconditionError):
        RadialSurface(rho)


def test_resample_round_trip():
    """Test that resampling a radial surface returns its radii."""
    grid = SphereGrid(16, 32)
    surface = RadialSurface.perturbed(grid, np.random.default_rng(8), amplitude=0.05)

    again = resample_radial(grid, surface.positions())

    assert np.max(np.abs(again.rho - surface.rho)) < 1e-8


def test_require_convex_raises():
    """Test that flagged nodes make require_convex raise."""
    grid = SphereGrid(8, 16)
    forms = sphere_forms(grid, 1.0)

    assert forms.require_convex() is forms
    forms.nonconvex = [(0, 0)]
    with pytest.raises(DegenerateGeometryError):
        forms.require_convex()


def test_connections_agree_on_round_sphere():
    """Test that the connections of I, II and III coincide when B is scalar."""
    grid = SphereGrid(32, 64)
    forms = fundamental_forms(RadialSurface.sphere(grid, 1.0).frame())
    band = grid.band()

    gamma = connection_I(forms.first).values[band]
    scale = np.max(np.abs(gamma))
    for conn in (connection_II(forms.first, forms.shape), connection_III(forms.first, forms.shape)):
        assert np.max(np.abs(conn.values[band] - gamma)) < 1e-3 * scale


def test_connections_of_II_and_III_are_compatible():
    """Test that the connections built from B are torsion-free and preserve II and III."""
    grid = SphereGrid(32, 64)
    surface = RadialSurface.perturbed(grid, np.random.default_rng(6), amplitude=0.05, degree=2)
    forms = fundamental_forms(surface.frame())
    band = grid.band()

    third = connection_III(forms.first, forms.shape)
    second = connection_II(forms.first, forms.shape)
    scale = np.max(np.abs(connection_I(forms.first).values[band]))

    assert np.max(torsion_residual(third)[band]) < 1e-3 * scale
    assert np.max(torsion_residual(second)[band]) < 1e-3 * scale
    assert np.max(compatibility_residual(third, forms.third)[band]) < 5e-3
    assert np.max(compatibility_residual(second, forms.second)[band]) < 5e-3
    assert np.max(mixed_rule_residual(forms.first, forms.second, forms.shape)[band]) < 5e-3


def test_third_form_curvature():
    """Test that III has curvature K/(K+1), and curvature 1 on the Klein image."""
    grid = SphereGrid(32, 64)
    surface = RadialSurface.perturbed(grid, np.random.default_rng(7), amplitude=0.05, degree=2)
    frame = surface.frame()
    forms = fundamental_forms(frame)
    band = grid.band()

    k = gaussian_curvature(forms.first)
    k_third = gaussian_curvature(forms.third)
    assert np.max(np.abs(k_third - k / (k + 1.0))[band]) < 1e-2

    image = euclidean_forms(grid, klein_project(frame.position))
    assert np.max(np.abs(gaussian_curvature(image.third) - 1.0)[band]) < 1e-2
