"""Tests for infinitesimal deformations and the rigidity operator."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from hypconvex.config import Settings
from hypconvex.deform import (
    AntiholSection,
    DeformField,
    EuclideanPatch,
    RigidityOperator,
    RigiditySpectrum,
    adjoint_residual,
    bdot_residuals,
    bdot_star_residuals,
    complex_structure,
    covariant_derivative,
    dbar_I,
    dbar_II,
    dbar_III,
    de_sitter_basis,
    equivalence_residual,
    equivalence_star_residual,
    exterior_derivative_tilde,
    herglotz_certificate,
    integrate_deformation,
    isometric_completion,
    metric_variation,
    normal_variation,
    pogorelov_transfer_residual,
    random_tangent_field,
    rigidity_kernel,
    shape_variation,
    third_form_variation,
)
from hypconvex.errors import DegenerateGeometryError, PreconditionError, VerificationFailure
from hypconvex.grid import SphereGrid
from hypconvex.lorentz import KillingElement, inner
from hypconvex.projective import klein_lift
from hypconvex.surface import RadialSurface, euclidean_forms, fundamental_forms


def _frame(shape=(16, 32), seed=0):
    return RadialSurface.perturbed(SphereGrid(*shape), np.random.default_rng(seed)).frame()


def test_killing_fields_do_not_change_the_forms():
    """Test that Killing fields have zero variation of I and III."""
    frame = _frame()
    k = KillingElement.random(np.random.default_rng(1))
    u = DeformField.from_killing(frame, k)

    scale = frame.induced_metric().max_abs()
    assert metric_variation(frame, u).max_abs() < 1e-10 * scale
    assert third_form_variation(frame, u).max_abs() < 1e-10 * fundamental_forms(frame).third.max_abs()
    assert np.allclose(normal_variation(frame, u), frame.normal @ k.mat.T, atol=1e-10)


def test_split_round_trip():
    """Test that a deformation splits back into its normal and tangent parts."""
    frame = _frame()
    rng = np.random.default_rng(2)
    lam = 1.0 + 0.2 * frame.grid.directions() @ rng.standard_normal(3)
    v = rng.standard_normal(frame.grid.shape + (2,))

    lam_back, v_back = DeformField.from_split(frame, lam, v).split()

    assert np.allclose(lam_back, lam, atol=1e-10)
    assert np.allclose(v_back, v, atol=1e-10)


def test_complex_structure_squares_to_minus_one():
    """Test J^2 = -1 for the complex structure of II."""
    forms = fundamental_forms(_frame())
    j = complex_structure(forms.second)

    assert np.allclose(j @ j, -np.eye(2), atol=1e-10)


def test_random_antiholomorphic_section():
    """Test that sampled sections anti-commute with J and have det <= 0."""
    forms = fundamental_forms(_frame())
    h = AntiholSection.random(forms, np.random.default_rng(3))

    assert h.anticommutation_residual() < 1e-10
    assert h.trace_residual() < 1e-10
    assert h.self_adjoint_residual() < 1e-10
    assert np.all(h.det() <= 0.0)


def test_adjoint_pairing_on_closed_surface():
    """Test that dbar_III and d^nabla are adjoint up to truncation."""
    grid = SphereGrid(32, 64)
    rng = np.random.default_rng(4)
    forms = fundamental_forms(RadialSurface.perturbed(grid, rng).frame())
    v = random_tangent_field(forms, rng)
    h = AntiholSection.random(forms, rng)

    defect, scale = adjoint_residual(forms, v, h, "III")

    assert abs(defect) / scale < 1e-2
    with pytest.raises(PreconditionError):
        adjoint_residual(forms, v, h, "II")


def test_pogorelov_transfer_of_normal_deformation():
    """Test that the Pogorelov map carries delta I to the Klein image."""
    frame = _frame((32, 64), 5)
    lam = 1.0 + 0.3 * frame.grid.directions() @ np.array([0.2, -0.5, 0.4])
    u = DeformField.from_split(frame, lam, np.zeros(frame.grid.shape + (2,)))

    assert np.max(pogorelov_transfer_residual(frame, u)) < 1e-2
    killing = DeformField.from_killing(frame, KillingElement.random(np.random.default_rng(6)))
    assert np.max(pogorelov_transfer_residual(frame, killing)) < 1e-8


def test_patch_integration_of_exact_form():
    """Test the two-route primitive of an exact linear 1-form."""
    u = np.linspace(0.0, 1.0, 11)
    v = np.linspace(0.0, 2.0, 21)
    patch = EuclideanPatch.graph(u, v, lambda x, y: 0.0 * x)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    a_u = np.stack([2.0 * uu, vv, np.ones_like(uu)], axis=-1)
    a_v = np.stack([2.0 * vv, uu, np.zeros_like(uu)], axis=-1)

    primitive, gap = patch.integrate((a_u, a_v))

    expected = np.stack([uu**2 + vv**2, uu * vv, uu], axis=-1)
    assert gap < 1e-12
    assert np.allclose(primitive, expected, atol=1e-12)


def test_zero_shape_variation_integrates_to_rest():
    """Test that B' = 0 gives a motionless patch."""
    u = np.linspace(-0.2, 0.2, 21)
    patch = EuclideanPatch.graph(u, u, lambda x, y: 0.5 * (x**2 + y**2))

    result = integrate_deformation(patch, np.zeros((21, 21, 2, 2)), tolerance=1e-12)

    assert np.allclose(result.phidot, 0.0)
    assert np.allclose(result.recovered_bdot, 0.0)
    assert np.allclose(patch.shape()[10, 10], np.eye(2), atol=1e-3)


def test_herglotz_certificate_of_rotation():
    """Test the Herglotz integral of a rotation of the unit sphere."""
    grid = SphereGrid(32, 64)
    forms = euclidean_forms(grid, grid.directions())
    rotation = np.cross(np.array([0.3, -0.2, 0.5]), forms.frame.position)

    integral, det = herglotz_certificate(forms, shape_variation(forms.frame, rotation))

    assert abs(integral) < 1e-6
    assert det.shape == grid.shape
    shifted = euclidean_forms(grid, grid.directions() + np.array([3.0, 0.0, 0.0]))
    with pytest.raises(DegenerateGeometryError):
        herglotz_certificate(shifted, np.zeros(grid.shape + (2, 2)))


def test_rigidity_operator_annihilates_killing_fields():
    """Test that sampled Killing fields lie in the kernel."""
    frame = _frame((12, 24), 7)
    for which in ("I", "III"):
        operator = RigidityOperator(frame, which)
        killing = operator.killing_coefficients()

        residual = np.max(np.abs(operator.matrix @ killing))
        assert residual < 1e-9 * spla.norm(operator.matrix)
        assert np.allclose(operator.coefficients(operator.field(killing[:, 0])), killing[:, 0])


def test_rigidity_kernel_of_sphere():
    """Test that the Killing fields sit below the kernel threshold."""
    frame = RadialSurface.sphere(SphereGrid(12, 24), 1.0).frame()

    spectrum = rigidity_kernel(frame, "I", Settings())

    assert spectrum.kernel_dim >= 6
    assert np.all(spectrum.singular_values[:6] <= spectrum.threshold * spectrum.s_max)
    assert spectrum.to_dict()["which"] == "I"
    with pytest.raises(PreconditionError):
        RigidityOperator(frame, "II")


def test_require_gap_raises_when_failed():
    """Test that a failed spectrum raises a verification failure."""
    spectrum = RigiditySpectrum("I", np.zeros(8), np.zeros((4, 6)), 1.0, 7, 1.0, 0.0, 1e-6, 10.0, False)

    with pytest.raises(VerificationFailure):
        spectrum.require_gap()


def _smooth_forms(seed):
    grid = SphereGrid(32, 64)
    surface = RadialSurface.perturbed(grid, np.random.default_rng(seed), amplitude=0.05, degree=2)
    return fundamental_forms(surface.frame())


def _unit_area_norm(c, metric):
    return np.sqrt(np.einsum("...k,...kl,...l->...", c, metric.values, c) / metric.det)


def test_dbar_operators_vanish_on_rotations_of_round_sphere():
    """Test that rotation fields of a round sphere are in the kernel of all three d-bar operators."""
    grid = SphereGrid(32, 64)
    forms = fundamental_forms(RadialSurface.sphere(grid, 1.0).frame())
    band = grid.band()
    rotation = KillingElement.from_vectors([0.0, 0.0, 0.0], [0.3, -0.4, 0.5])
    lam, v = DeformField.from_killing(forms.frame, rotation).split()

    scale = np.max(np.abs(covariant_derivative(forms, v)[band]))
    assert np.max(np.abs(lam)) < 1e-4 * np.max(np.abs(v))
    for dbar in (dbar_I, dbar_II, dbar_III):
        assert np.max(np.abs(dbar(forms, v).values[band])) < 1e-3 * scale


def test_dbar_III_kernel_from_killing_field():
    """Test that B^-1 of the tangential part of a Killing field is in the kernel of dbar_III."""
    forms = _smooth_forms(20)
    band = forms.grid.band()
    k = KillingElement.random(np.random.default_rng(21))
    lam, v = DeformField.from_killing(forms.frame, k).split()
    w = np.einsum("...kl,...l->...k", forms.shape.inverse(), v)

    section = dbar_III(forms, w)

    scale = np.max(np.abs(covariant_derivative(forms, v)[band]))
    assert np.max(np.abs(section.values[band])) < 1e-2 * scale


def test_dbar_output_anticommutes_with_complex_structure():
    """Test that every d-bar operator lands in sections anti-commuting with J."""
    forms = _smooth_forms(22)
    v = random_tangent_field(forms, np.random.default_rng(23))

    for dbar in (dbar_I, dbar_II, dbar_III):
        section = dbar(forms, v)
        assert section.anticommutation_residual() < 1e-10
        assert section.trace_residual() < 1e-10 * np.max(np.abs(section.values))


def test_isometric_completion_of_killing_field():
    """Test that completing B w by the normal part gives a deformation with no metric variation."""
    forms = _smooth_forms(24)
    band = forms.grid.band()
    k = KillingElement.random(np.random.default_rng(25))
    lam, v = DeformField.from_killing(forms.frame, k).split()
    w = np.einsum("...kl,...l->...k", forms.shape.inverse(), v)

    completion = isometric_completion(forms, w)

    lam_back, v_back = completion.split()
    assert np.allclose(v_back, v, atol=1e-9 * np.max(np.abs(v)))
    assert np.max(np.abs(lam_back - lam)[band]) < 1e-2 * np.max(np.abs(v))
    variation = metric_variation(forms.frame, completion)
    assert np.max(np.abs(variation.values[band])) < 1e-2 * forms.first.max_abs() * np.max(np.abs(v))


def test_dual_shape_variation_system():
    """Test the dual system of A = B^-1 against the system of B."""
    forms = _smooth_forms(26)
    band = forms.grid.band()
    rng = np.random.default_rng(27)
    lam = 0.2 * forms.grid.directions() @ rng.standard_normal(3)
    u = DeformField.from_split(forms.frame, lam, np.zeros(forms.grid.shape + (2,)))
    bdot = shape_variation(forms.frame, u)
    inv_b = forms.shape.inverse()
    adot = -inv_b @ bdot @ inv_b

    _, trace = bdot_residuals(forms, bdot)
    _, trace_star = bdot_star_residuals(forms, adot)
    assert np.allclose(trace_star, -trace, atol=1e-10 * (1.0 + np.max(np.abs(trace))))

    via_tilde = _unit_area_norm(exterior_derivative_tilde(forms, adot), forms.third)
    scale = np.max(via_tilde[band]) + np.max(np.abs(adot[band]))
    assert np.max(equivalence_star_residual(forms, adot)[band]) < 1e-2 * scale
    assert np.max(equivalence_residual(forms, bdot)[band]) < 1e-2 * (scale + np.max(np.abs(bdot[band])))


def test_de_sitter_basis_is_orthonormal():
    """Test that the de Sitter tangent basis is orthonormal with its timelike vector first."""
    rng = np.random.default_rng(28)
    directions = rng.standard_normal((50, 3))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    points = rng.uniform(1.2, 3.0, (50, 1)) * directions
    y = klein_lift(points, "deSitter")

    basis = de_sitter_basis(y)

    gram = np.einsum("...ai,...bi->...ab", basis * np.array([-1.0, 1.0, 1.0, 1.0]), basis)
    assert np.allclose(gram, np.diag([-1.0, 1.0, 1.0]), atol=1e-12)
    assert np.allclose(inner(basis, y[:, None, :]), 0.0, atol=1e-12)
