"""
Invariant suite.

Each check builds its own inputs from closed forms or seeded random surfaces
and records measured values against tolerances in a Report. The fast level
uses coarse grids and a handful of samples; the full level runs the
acceptance grids.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from .config import Settings
from .deform import (
    AntiholSection,
    DeformField,
    adjoint_residual,
    bdot_residuals,
    equivalence_residual,
    herglotz_certificate,
    metric_variation,
    pogorelov_transfer_residual,
    random_tangent_field,
    rigidity_kernel,
    shape_variation,
)
from .dual import double_dual_error, dual_frame
from .errors import ConfigurationError
from .flows import band_violation, mixed_combination, offset_cross_check, offset_forms
from .geodesics import shortest_closed_geodesic
from .grid import SphereGrid
from .lorentz import HPoint, KillingElement
from .projective import (
    EuclideanKilling,
    fit_euclidean_killing,
    killing_gluing_mismatch,
    klein_project,
    pogorelov_field_H,
    psi_H,
    sphere_forms_H,
)
from .realize import check_jacobian, gauge_align, realize_metric, realize_third_form
from .reports import Report
from .surface import (
    FormField,
    RadialSurface,
    euclidean_forms,
    fundamental_forms,
    gauss_codazzi_residuals,
    gaussian_curvature,
    sphere_forms,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Level:
    """Grid sizes and sample counts of one suite level."""

    coarse: tuple[int, int]
    fine: tuple[int, int]
    rigidity: tuple[int, int]
    realize: tuple[int, int]
    samples: int
    realize_samples: int
    restarts: int
    pipeline_tolerance: float
    realize_tolerance: float


LEVELS = {
    "fast": Level((16, 32), (32, 64), (12, 24), (12, 24), 2, 1, 0, 5e-3, 1e-3),
    "full": Level((32, 64), (64, 128), (48, 96), (32, 64), 10, 5, 5, 5e-4, 1e-5),
}

ORDER = 1.8


def order_of(coarse: float, fine: float) -> float:
    """Observed order of a quantity that shrinks under one grid doubling."""
    if fine <= 0:
        return np.inf
    return float(np.log2(coarse / fine))


def _grid(shape) -> SphereGrid:
    return SphereGrid(*shape)


def check_sphere_oracle(report: Report, level: Level, rng):
    for rho in (0.5, 1.0, 2.0):
        errors = []
        for shape in (level.coarse, level.fine):
            grid = _grid(shape)
            forms = fundamental_forms(RadialSurface.sphere(grid, rho).frame())
            expected = sphere_forms_H(rho)
            errors.append(
                max(
                    form.relative_error(FormField.round(grid, scale))
                    for form, scale in zip((forms.first, forms.second, forms.third), expected)
                )
            )
        exact = sphere_forms(_grid(level.coarse), rho)
        analytic = max(
            form.relative_error(FormField.round(exact.grid, scale))
            for form, scale in zip((exact.first, exact.second, exact.third), sphere_forms_H(rho))
        )
        report.check(f"sphere_analytic_rho{rho:g}", analytic, 1e-8)
        report.check(f"sphere_forms_rho{rho:g}", errors[1], level.pipeline_tolerance)
        report.check(f"sphere_order_rho{rho:g}", -order_of(*errors), -ORDER)


def check_gauss_codazzi(report: Report, level: Level, rng):
    for i in range(level.samples):
        seed = int(rng.integers(2**31))
        gauss, codazzi = [], []
        for shape in (level.coarse, level.fine):
            surface = RadialSurface.perturbed(_grid(shape), np.random.default_rng(seed))
            forms = fundamental_forms(surface.frame())
            g, c = gauss_codazzi_residuals(forms.first, forms.shape)
            gauss.append(float(np.max(np.abs(g))))
            codazzi.append(float(np.max(c)))
        report.check(f"gauss_order_{i}", -order_of(*gauss), -ORDER)
        report.check(f"codazzi_order_{i}", -order_of(*codazzi), -ORDER)


def check_duality(report: Report, level: Level, rng):
    surface = RadialSurface.perturbed(_grid(level.fine), rng)
    forms = fundamental_forms(surface.frame())
    dual = dual_frame(forms.frame)
    report.check("dual_metric_is_III", dual.induced_metric().relative_error(forms.third), level.pipeline_tolerance)
    report.check("double_dual", double_dual_error(forms.frame), 10 * level.pipeline_tolerance)

    sphere = fundamental_forms(RadialSurface.sphere(_grid(level.fine), 1.0).frame())
    k = gaussian_curvature(sphere.first)
    k_third = gaussian_curvature(sphere.third)
    report.check("curvature_ratio", float(np.max(np.abs(k_third - k / (k + 1.0)))), level.pipeline_tolerance)


def check_pogorelov(report: Report, level: Level, rng):
    worst_closed, worst_base = 0.0, 0.0
    for _ in range(100 * level.samples):
        k = KillingElement.random(rng)
        x = HPoint.at_distance(float(rng.uniform(0.1, 2.0)), rng.standard_normal(3))
        image = psi_H(k, x)
        p = klein_project(x.array)
        direct = pogorelov_field_H(x.array, k(x.array))
        worst_closed = max(worst_closed, float(np.max(np.abs(image.value(p) - direct))))
        y = HPoint.at_distance(float(rng.uniform(0.1, 2.0)), rng.standard_normal(3))
        worst_base = max(worst_base, float(np.max(np.abs(psi_H(k, y).coefficients - image.coefficients))))
    report.check("psi_closed_form", worst_closed, 1e-11)
    report.check("psi_base_point", worst_base, 1e-10)

    worst_fit, worst_gluing = 0.0, 0.0
    for _ in range(level.samples):
        directions = rng.standard_normal((200, 3))
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
        outside = rng.uniform(1.2, 3.0, (200, 1)) * directions
        x = HPoint.at_distance(float(rng.uniform(0.1, 2.0)), rng.standard_normal(3))
        fit, mismatch = killing_gluing_mismatch(KillingElement.random(rng), x, outside)
        worst_fit, worst_gluing = max(worst_fit, fit), max(worst_gluing, mismatch)
    report.check("de_sitter_killing_fit", worst_fit, 1e-10)
    report.check("killing_gluing", worst_gluing, 1e-10)

    frame = RadialSurface.perturbed(_grid(level.fine), rng).frame()
    _, fit = fit_euclidean_killing(
        klein_project(frame.position), pogorelov_field_H(frame.position, KillingElement.random(rng)(frame.position))
    )
    report.check("pogorelov_killing_fit", fit, 1e-10)
    worst = 0.0
    for _ in range(level.samples):
        lam = 1.0 + 0.3 * frame.grid.directions() @ rng.standard_normal(3)
        u = DeformField.from_split(frame, lam, np.zeros(frame.grid.shape + (2,)))
        worst = max(worst, float(np.max(pogorelov_transfer_residual(frame, u))))
    report.check("pogorelov_transfer", worst, level.pipeline_tolerance)

    killing = DeformField.from_killing(frame, KillingElement.random(rng))
    variation = metric_variation(frame, killing).max_abs() / frame.induced_metric().max_abs()
    report.check("killing_metric_variation", variation, 1e-10)


def check_rigidity(report: Report, level: Level, rng, settings: Settings):
    grid = _grid(level.rigidity)
    surfaces = [RadialSurface.sphere(grid, 1.0)]
    surfaces += [RadialSurface.perturbed(grid, rng) for _ in range(min(level.samples, 5))]
    for i, surface in enumerate(surfaces):
        frame = surface.frame()
        for which in ("I", "III", "euclidean"):
            spectrum = rigidity_kernel(frame, which, settings)
            name = f"rigidity_{which}_{i}"
            report.check(f"{name}_kernel_dim", abs(spectrum.kernel_dim - 6), 0)
            report.check(f"{name}_gap", -spectrum.gap_ratio, -settings.gap_ratio)
            report.check(f"{name}_angle", spectrum.subspace_angle, 1e-3)


def check_adjointness(report: Report, level: Level, rng):
    for i in range(level.samples):
        seed = int(rng.integers(2**31))
        defects = []
        for shape in (level.coarse, level.fine):
            local = np.random.default_rng(seed)
            forms = fundamental_forms(RadialSurface.perturbed(_grid(shape), local).frame())
            v = random_tangent_field(forms, local)
            h = AntiholSection.random(forms, local)
            defect, scale = adjoint_residual(forms, v, h, "III")
            defects.append(abs(defect) / scale)
        report.check(f"adjoint_III_{i}", defects[1], 1e-3)
        report.check(f"adjoint_III_order_{i}", -order_of(*defects), -ORDER)


def check_herglotz(report: Report, level: Level, rng):
    frame = RadialSurface.perturbed(_grid(level.fine), rng).frame()
    forms = euclidean_forms(frame.grid, klein_project(frame.position))
    worst_integral, worst_det = 0.0, 0.0
    for _ in range(level.samples):
        killing = EuclideanKilling.from_arrays(rng.standard_normal(3), rng.standard_normal(3))
        bdot = shape_variation(forms.frame, killing.value(forms.frame.position))
        integral, det = herglotz_certificate(forms, bdot)
        worst_integral = max(worst_integral, abs(integral))
        worst_det = max(worst_det, float(np.max(np.abs(det))))
    report.check("herglotz_integral", worst_integral, 1e-6)
    report.check("herglotz_det", worst_det, 1e-3)

    h3_forms = fundamental_forms(frame)
    worst_sign = max(float(np.max(AntiholSection.random(h3_forms, rng).det())) for _ in range(level.samples))
    report.check("antihol_det_sign", worst_sign, 0.0)

    bdot = shape_variation(frame, KillingElement.random(rng)(frame.position))
    codazzi, trace = bdot_residuals(h3_forms, bdot)
    report.check("killing_bdot_codazzi", float(np.max(codazzi)), level.pipeline_tolerance)
    report.check("killing_bdot_trace", float(np.max(np.abs(trace))), level.pipeline_tolerance)
    report.check("bdot_equivalence", float(np.max(equivalence_residual(h3_forms, bdot))), level.pipeline_tolerance)


def check_offsets(report: Report, level: Level, rng):
    grid = _grid(level.coarse)
    worst = 0.0
    for rho in (0.5, 1.0, 2.0):
        forms = [FormField.round(grid, s) for s in sphere_forms_H(rho)]
        for t in (-0.3, 0.2, 0.5, 1.0):
            i_t, _, iii_t = offset_forms(*forms, t)
            worst = max(
                worst,
                i_t.relative_error(FormField.round(grid, np.sinh(rho + t) ** 2)),
                iii_t.relative_error(FormField.round(grid, np.cosh(rho + t) ** 2)),
            )
    report.check("offset_sphere_identity", worst, 1e-10)

    surface = RadialSurface.perturbed(_grid(level.fine), rng)
    forms = fundamental_forms(surface.frame())
    for t in (0.2, 0.5, 1.0):
        residuals = offset_cross_check(surface, t)
        report.check(f"offset_cross_pipeline_t{t:g}", max(residuals[k] for k in ("I", "II", "III")), level.pipeline_tolerance)
        report.check(f"offset_band_t{t:g}", band_violation(forms.shape, t), 1e-8)

    a = offset_forms(forms.first, forms.second, forms.third, 0.3)
    b = offset_forms(*offset_forms(forms.first, forms.second, forms.third, 0.1), 0.2)
    report.check("offset_semigroup", max(x.relative_error(y) for x, y in zip(a, b)), 1e-12)


def check_mixed(report: Report, level: Level, rng):
    grid = _grid(level.coarse)
    closed, scaling = 0.0, 0.0
    for rho in (0.5, 1.0, 2.0):
        forms = [FormField.round(grid, s) for s in sphere_forms_H(rho)]
        for k0 in (0.1, 0.3, 0.6):
            h = mixed_combination(*forms, k0, "cor-I")
            expected = (np.sinh(rho) - k0 * np.cosh(rho)) ** 2
            closed = max(closed, h.relative_error(FormField.round(grid, expected)))
            h3 = mixed_combination(*forms, k0, "cor-III")
            expected3 = (k0 * np.sinh(rho) - np.cosh(rho)) ** 2
            closed = max(closed, h3.relative_error(FormField.round(grid, expected3)))
            i_back = offset_forms(*forms, -float(np.arctanh(k0)))[0]
            scaling = max(scaling, h.relative_error(i_back * (1.0 - k0 * k0)))
    report.check("mixed_closed_forms", closed, 1e-10)
    report.check("mixed_scaling", scaling, 1e-10)
    forms = [FormField.round(grid, s) for s in sphere_forms_H(1.0)]
    limit = max(
        mixed_combination(*forms, 0.0, "cor-I").relative_error(forms[0]),
        mixed_combination(*forms, 0.0, "cor-III").relative_error(forms[2]),
    )
    report.check("mixed_limit", limit, 0.0)


def check_geodesics(report: Report, level: Level, rng, settings: Settings):
    grid = _grid(level.coarse)
    for c in (0.5, 1.5):
        found = shortest_closed_geodesic(FormField.round(grid, c * c), settings)
        report.check(f"round_geodesic_c{c:g}", abs(found.length - 2 * np.pi * c), 1e-6)
    for i in range(level.samples):
        forms = fundamental_forms(RadialSurface.perturbed(grid, rng).frame())
        found = shortest_closed_geodesic(forms.third, settings)
        report.check(f"third_form_geodesic_{i}", -(found.length - 2 * np.pi), -1e-3)


def _round_trip(report: Report, name: str, level: Level, rng, settings: Settings, which: str):
    grid = _grid(level.realize)
    truth = RadialSurface.perturbed(grid, rng, amplitude=0.1, degree=2)
    forms = fundamental_forms(truth.frame())
    target = forms.first if which == "I" else dual_frame(forms.frame).induced_metric()
    solve = realize_metric if which == "I" else realize_third_form
    report.check(f"{name}_jacobian", check_jacobian(target, truth, which, rng), 1e-6)

    surface, outcome = solve(target, settings=settings, check=False)
    aligned, _ = gauge_align(surface, truth)
    report.check(f"{name}_residual", outcome.final_residual, max(settings.tolerance, 1e-6))
    report.check(f"{name}_position", float(np.max(np.abs(aligned.rho - truth.rho))), level.realize_tolerance)

    for j in range(level.restarts):
        init = RadialSurface.perturbed(grid, rng, base=float(np.mean(truth.rho)), amplitude=0.05, degree=2)
        other, _ = solve(target, init=init, settings=settings, check=False)
        other, _ = gauge_align(other, aligned)
        report.check(f"{name}_restart_{j}", float(np.max(np.abs(other.rho - aligned.rho))), level.realize_tolerance)


def check_realization(report: Report, level: Level, rng, settings: Settings):
    for i in range(level.realize_samples):
        _round_trip(report, f"realize_I_{i}", level, rng, settings, "I")
        _round_trip(report, f"realize_III_{i}", level, rng, settings, "III")


CHECKS = {
    "sphere": check_sphere_oracle,
    "gauss_codazzi": check_gauss_codazzi,
    "duality": check_duality,
    "pogorelov": check_pogorelov,
    "rigidity": check_rigidity,
    "adjoint": check_adjointness,
    "herglotz": check_herglotz,
    "offsets": check_offsets,
    "mixed": check_mixed,
    "geodesics": check_geodesics,
    "realize": check_realization,
}

# Checks that take the settings as a fourth argument
NEEDS_SETTINGS = {"rigidity", "geodesics", "realize"}


def run_suite(level: str = "fast", settings: Settings | None = None, only=None) -> Report:
    """
    Run the invariant checks of a level.

    Args:
        level: "fast" or "full"
        settings: Settings for tolerances, seeds and solver limits
        only: Optional iterable of check names to restrict the run

    Returns:
        A Report; it passes iff every check passed
    """
    if level not in LEVELS:
        raise ConfigurationError(f"unknown level: {level}")
    settings = settings or Settings()
    sizes = LEVELS[level]
    names = list(only) if only else list(CHECKS)
    unknown = set(names) - set(CHECKS)
    if unknown:
        raise ConfigurationError(f"unknown checks: {', '.join(sorted(unknown))}")

    report = Report("verify")
    report.add("level", level)
    durations = {}
    for name in names:
        rng = np.random.default_rng([settings.seed, list(CHECKS).index(name)])
        start = time.perf_counter()
        if name in NEEDS_SETTINGS:
            CHECKS[name](report, sizes, rng, settings)
        else:
            CHECKS[name](report, sizes, rng)
        durations[name] = time.perf_counter() - start
        logger.info(f"check {name} finished in {durations[name]:.1f}s")
    failures = report.failures()
    if failures:
        logger.warning(f"{len(failures)} failing checks: {', '.join(c.name for c in failures)}")
    return report
