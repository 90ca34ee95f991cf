"""Tests for dual surfaces and admissibility verdicts."""

import numpy as np
import pytest

from hypconvex.dual import admissibility_I, admissibility_III, curvature_verdict, double_dual_error, dual_frame, dualize
from hypconvex.errors import PreconditionError
from hypconvex.grid import SphereGrid
from hypconvex.lorentz import inner
from hypconvex.surface import FormField, RadialSurface, fundamental_forms


def test_dual_of_sphere_exchanges_forms():
    """Test that the dual surface has I and III exchanged."""
    grid = SphereGrid(32, 64)
    forms = fundamental_forms(RadialSurface.sphere(grid, 1.0).frame())

    dual = dualize(forms.frame)
    dual_forms = dual.forms()

    assert np.allclose(inner(dual.positions, dual.positions), 1.0)
    assert dual_forms.first.relative_error(forms.third) < 1e-3
    assert dual_forms.third.relative_error(forms.first) < 1e-3


def test_double_dual_returns_surface():
    """Test that dualizing twice gives back the surface."""
    grid = SphereGrid(32, 64)
    frame = RadialSurface.perturbed(grid, np.random.default_rng(1)).frame()

    assert double_dual_error(frame) < 1e-3
    assert dual_frame(dual_frame(frame)).space == "H3"


def test_dualize_needs_hyperbolic_frame():
    """Test that only frames of H^3 can be dualized."""
    grid = SphereGrid(16, 32)
    frame = RadialSurface.sphere(grid, 1.0).frame()

    with pytest.raises(PreconditionError):
        dualize(dual_frame(frame))


def test_round_metric_is_admissible_as_I():
    """Test the curvature verdict of a round metric."""
    grid = SphereGrid(16, 32)

    verdict = admissibility_I(FormField.round(grid, np.sinh(1.0) ** 2))

    assert verdict.admissible
    assert verdict.min_curvature == pytest.approx(1.0 / np.sinh(1.0) ** 2, rel=1e-3)
    assert verdict.to_dict()["kind"] == "I"


def test_curvature_bound_violation_is_reported():
    """Test that a violated lower bound makes the verdict fail."""
    grid = SphereGrid(16, 32)

    verdict = curvature_verdict(FormField.round(grid, 4.0), "test", lower=0.5)

    assert not verdict.admissible
    assert verdict.curvature_margin < 0
    assert verdict.reasons


def test_small_round_metric_is_not_a_third_form():
    """Test that a metric of curvature 4 fails both III conditions."""
    grid = SphereGrid(16, 32)

    verdict = admissibility_III(FormField.round(grid, 0.25))

    assert not verdict.admissible
    assert verdict.geodesic_length == pytest.approx(np.pi, rel=1e-6)
    assert len(verdict.reasons) == 2
