"""Tests for equidistant surfaces and mixed forms."""

import numpy as np
import pytest

from hypconvex.errors import PreconditionError
from hypconvex.flows import (
    OffsetParams,
    band_violation,
    mixed_combination,
    mixed_form,
    offset_cross_check,
    offset_forms,
    offset_shape,
    offset_surface,
    principal_band,
)
from hypconvex.grid import SphereGrid
from hypconvex.projective import sphere_forms_H
from hypconvex.surface import FormField, RadialSurface, ShapeField, fundamental_forms, sphere_forms


def _round_forms(grid, rho):
    return [FormField.round(grid, s) for s in sphere_forms_H(rho)]


def test_offset_of_sphere_is_sphere():
    """Test that offsetting a sphere of radius rho by t gives radius rho + t."""
    grid = SphereGrid(8, 16)
    for t in (-0.3, 0.4, 1.0):
        i_t, ii_t, iii_t = offset_forms(*_round_forms(grid, 1.0), t)
        expected = _round_forms(grid, 1.0 + t)

        assert i_t.relative_error(expected[0]) < 1e-12
        assert ii_t.relative_error(expected[1]) < 1e-12
        assert iii_t.relative_error(expected[2]) < 1e-12


def test_offsets_compose():
    """Test that offsets by 0.1 then 0.2 equal one offset by 0.3."""
    grid = SphereGrid(16, 32)
    forms = fundamental_forms(RadialSurface.perturbed(grid, np.random.default_rng(6)).frame())
    base = (forms.first, forms.second, forms.third)

    once = offset_forms(*base, 0.3)
    twice = offset_forms(*offset_forms(*base, 0.1), 0.2)

    for a, b in zip(once, twice):
        assert a.relative_error(b) < 1e-12


def test_offset_shape_of_sphere():
    """Test B_t of a sphere against coth(rho + t)."""
    shape = ShapeField(np.full((4, 8, 2, 2), 0.0) + np.eye(2) / np.tanh(1.0))

    k = offset_shape(shape, 0.5).principal_curvatures()

    assert np.allclose(k, 1.0 / np.tanh(1.5))


def test_outward_offset_curvature_band():
    """Test that outward offsets have principal curvatures in [tanh t, coth t]."""
    grid = SphereGrid(16, 32)
    forms = fundamental_forms(RadialSurface.perturbed(grid, np.random.default_rng(9)).frame())

    for t in (0.2, 0.5, 1.0):
        assert band_violation(forms.shape, t) <= 1e-8


def test_inward_offset_precondition():
    """Test that inward offsets past tanh|t| <= k0 are refused."""
    grid = SphereGrid(16, 32)
    flat = RadialSurface.klein_ellipsoid(grid, 0.8, 0.4)

    with pytest.raises(PreconditionError):
        offset_surface(flat, -10.0)
    with pytest.raises(PreconditionError):
        OffsetParams(-2.0).check(0.5)
    OffsetParams(-0.5).check(0.5)
    assert OffsetParams.from_flags(0.7, inward=True).t == -0.7
    assert OffsetParams(0.7).direction == "outward"


def test_offset_surface_of_sphere():
    """Test the resampled offset of a sphere."""
    grid = SphereGrid(32, 64)

    moved = offset_surface(RadialSurface.sphere(grid, 1.0), 0.5)

    assert np.max(np.abs(moved.rho - 1.5)) < 1e-3


def test_offset_cross_check_on_perturbed_surface():
    """Test the algebraic offset forms against the moved frame."""
    grid = SphereGrid(32, 64)
    surface = RadialSurface.perturbed(grid, np.random.default_rng(10))

    residuals = offset_cross_check(surface, 0.5)

    for name in ("I", "II", "III"):
        assert residuals[name] < 5e-3
    assert residuals["min_curvature"] > np.tanh(0.5) - 1e-3


def test_mixed_forms_of_sphere():
    """Test the closed forms of the mixed combinations of a sphere."""
    grid = SphereGrid(8, 16)
    rho, k0 = 1.0, 0.3
    forms = _round_forms(grid, rho)

    cor_i = mixed_combination(*forms, k0, "cor-I")
    cor_iii = mixed_combination(*forms, k0, "cor-III")

    assert cor_i.relative_error(FormField.round(grid, (np.sinh(rho) - k0 * np.cosh(rho)) ** 2)) < 1e-12
    assert cor_iii.relative_error(FormField.round(grid, (k0 * np.sinh(rho) - np.cosh(rho)) ** 2)) < 1e-12


def test_mixed_form_is_scaled_inward_offset():
    """Test I - 2k0 II + k0^2 III = (1 - k0^2) I at distance -artanh k0."""
    grid = SphereGrid(16, 32)
    forms = fundamental_forms(RadialSurface.perturbed(grid, np.random.default_rng(13)).frame())
    k0 = 0.4
    base = (forms.first, forms.second, forms.third)

    mixed = mixed_combination(*base, k0)
    back = offset_forms(*base, -float(np.arctanh(k0)))[0] * (1.0 - k0 * k0)

    assert mixed.relative_error(back) < 1e-12


def test_mixed_limit_and_range():
    """Test the k0 = 0 limit and the rejected parameters."""
    grid = SphereGrid(8, 16)
    forms = _round_forms(grid, 1.0)

    assert mixed_combination(*forms, 0.0, "cor-I").relative_error(forms[0]) == 0.0
    assert mixed_combination(*forms, 0.0, "cor-III").relative_error(forms[2]) == 0.0
    with pytest.raises(PreconditionError):
        mixed_combination(*forms, 1.0)
    with pytest.raises(PreconditionError):
        mixed_combination(*forms, 0.5, "cor-II")


def test_mixed_form_verdict():
    """Test the admissibility verdict attached to the cor-I form of a sphere."""
    forms = sphere_forms(SphereGrid(16, 32), 1.0)

    result = mixed_form(forms, 0.3)

    assert result.verdict.admissible
    assert result.band["fraction_inside"] == 1.0
    assert result.to_dict()["variant"] == "cor-I"


def test_principal_band_of_sphere():
    """Test the principal band report of a sphere of radius 1."""
    forms = sphere_forms(SphereGrid(8, 16), 1.0)
    coth = 1.0 / np.tanh(1.0)

    report = principal_band(forms, 0.5)
    assert report["lower"] == 0.5
    assert report["upper"] == pytest.approx(2.0)
    assert report["fraction_inside"] == 1.0
    assert report["min_curvature"] == pytest.approx(coth, rel=1e-10)
    assert report["max_curvature"] == pytest.approx(coth, rel=1e-10)

    assert principal_band(forms, 0.0)["upper"] is None
    assert principal_band(forms, 0.9)["fraction_inside"] == 0.0
