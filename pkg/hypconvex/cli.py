"""
Command-line interface: one subcommand per operation, JSON reports out.
"""

import argparse
import logging
import sys

import numpy as np

from .config import Settings
from .deform import rigidity_kernel
from .dual import admissibility_I, admissibility_III, double_dual_error, dualize
from .errors import HypConvexError, VerificationFailure, exit_code_for
from .flows import OffsetParams, band_violation, mixed_form, offset_cross_check, offset_surface
from .formats import read_metric_grid, read_surf_grid, write_metric_grid, write_surf_grid
from .geodesics import shortest_closed_geodesic
from .projective import sphere_forms_H
from .realize import realize_metric, realize_third_form
from .reports import Report
from .surface import FormField, fundamental_forms, gauss_codazzi_residuals, gaussian_curvature, sphere_forms
from .verify import CHECKS, run_suite

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Commands whose exit code reflects failing checks
CERTIFYING = {"rigidity", "verify"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypconvex",
        description="Convex surfaces in hyperbolic space: forms, duality, offsets, rigidity and realization.",
        allow_abbrev=False,
    )
    parser.add_argument("--config", help="key = value settings file")
    parser.add_argument("--log-level", help="logging level (default from settings)")
    parser.add_argument("--output", default="-", help="report path (default: stdout)")
    parser.add_argument("--n-theta", type=int, help="latitude rows for generated grids")
    parser.add_argument("--n-phi", type=int, help="longitude columns for generated grids")
    parser.add_argument("--tol", type=float, help="solver and check tolerance")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--strict", action="store_true", default=None, help="fail on solver stalls")
    sub = parser.add_subparsers(dest="command", required=True)

    forms = sub.add_parser("forms", help="fundamental forms and curvature of a surface")
    forms.add_argument("surface")

    dual = sub.add_parser("dualize", help="dual surface in de Sitter space")
    dual.add_argument("surface")

    offset = sub.add_parser("offset", help="equidistant surface")
    offset.add_argument("surface")
    offset.add_argument("--t", type=float, required=True, help="offset distance")
    offset.add_argument("--inward", action="store_true", help="move towards the convex side")
    offset.add_argument("--surface-output", help="write the offset surface as surf-grid")

    mixed = sub.add_parser("mixed", help="mixed form I - 2k0 II + k0^2 III or its dual variant")
    mixed.add_argument("surface")
    mixed.add_argument("--k0", type=float, required=True)
    mixed.add_argument("--variant", choices=("cor-I", "cor-III"), default="cor-I")
    mixed.add_argument("--metric-output", help="write the mixed form as metric-grid")

    rigidity = sub.add_parser("rigidity", help="spectrum of the infinitesimal rigidity operator")
    rigidity.add_argument("surface")
    rigidity.add_argument("--which", choices=("I", "III", "euclidean"), default="I")

    realize = sub.add_parser("realize", help="realize a metric as I (or III) of a convex surface")
    realize.add_argument("--target", required=True, help="metric-grid file")
    realize.add_argument("--third", action="store_true", help="prescribe the third fundamental form")
    realize.add_argument("--init", help="initial surf-grid (default: area-matched sphere)")
    realize.add_argument("--surface-output", help="write the realized surface as surf-grid")

    verify = sub.add_parser("verify", help="run the invariant suite")
    verify.add_argument("--level", choices=("fast", "full"), default="fast")
    verify.add_argument("--only", nargs="+", choices=sorted(CHECKS), help="restrict to these checks")

    geodesics = sub.add_parser("geodesics", help="shortest closed geodesic of a metric")
    geodesics.add_argument("metric")
    return parser


def load_settings(args: argparse.Namespace) -> Settings:
    return Settings.load(
        args.config,
        n_theta=args.n_theta,
        n_phi=args.n_phi,
        tolerance=args.tol,
        seed=args.seed,
        threads=args.threads,
        strict=args.strict,
        log_level=args.log_level.upper() if args.log_level else None,
    )


def _curvature_columns(report: Report, forms):
    grid = forms.grid
    th, ph = grid.mesh()
    k = forms.principal_curvatures()
    report.column("theta", th)
    report.column("phi", ph)
    for name, form in (("I", forms.first), ("II", forms.second), ("III", forms.third)):
        for j, part in enumerate(("E", "F", "G")):
            report.column(f"{name}_{part}", form.efg[..., j])
    report.column("K", gaussian_curvature(forms.first))
    report.column("k1", k[..., 0])
    report.column("k2", k[..., 1])


class HypConvexCLI:
    """Runs one command with resolved settings and collects its report."""

    def __init__(self, settings: Settings, logger: logging.Logger | None = None):
        """
        Initialize the command runner.

        Args:
            settings: Resolved settings
            logger: Optional logger instance
        """
        self.settings = settings
        self.logger = logger or logging.getLogger(self.__class__.__name__)

    def forms_command(self, args) -> Report:
        surface = read_surf_grid(args.surface)
        forms = fundamental_forms(surface.frame())
        report = Report("forms")
        gauss, codazzi = gauss_codazzi_residuals(forms.first, forms.shape)
        report.check("gauss_residual", float(np.max(np.abs(gauss))), 1e-3)
        report.check("codazzi_residual", float(np.max(codazzi)), 1e-3)
        if np.ptp(surface.rho) == 0:
            rho = float(surface.rho[0, 0])
            exact = sphere_forms(surface.grid, rho)
            pairs = zip(("I", "II", "III"), sphere_forms_H(rho), (forms.first, forms.second, forms.third), (exact.first, exact.second, exact.third))
            for name, scale, computed, analytic in pairs:
                expected = FormField.round(surface.grid, scale)
                report.check(f"sphere_{name}", analytic.relative_error(expected), 1e-8)
                report.check(f"sphere_{name}_finite_difference", computed.relative_error(expected), 1e-3)
        report.add(
            "surface",
            {
                "grid": list(surface.grid.shape),
                "min_curvature": forms.min_curvature(),
                "max_curvature": forms.max_curvature(),
                "asymmetry": forms.asymmetry,
                "nonconvex_nodes": len(forms.nonconvex),
            },
        )
        _curvature_columns(report, forms)
        return report

    def dualize_command(self, args) -> Report:
        surface = read_surf_grid(args.surface)
        forms = fundamental_forms(surface.frame()).require_convex()
        dual = dualize(forms.frame)
        dual_forms = dual.forms()
        report = Report("dualize")
        report.check("dual_metric_is_III", dual_forms.first.relative_error(forms.third), 1e-3)
        report.check("dual_third_is_I", dual_forms.third.relative_error(forms.first), 1e-3)
        report.check("double_dual", double_dual_error(forms.frame), 1e-3)
        k = gaussian_curvature(forms.first)
        k_third = gaussian_curvature(forms.third)
        report.check("curvature_ratio", float(np.max(np.abs(k_third - k / (k + 1.0)))), 1e-3)
        for j, axis in enumerate(("x0", "x1", "x2", "x3")):
            report.column(f"dual_{axis}", dual.positions[..., j])
        return report

    def offset_command(self, args) -> Report:
        surface = read_surf_grid(args.surface)
        params = OffsetParams.from_flags(args.t, args.inward)
        moved = offset_surface(surface, params.t)
        report = Report("offset")
        report.add("offset", {"t": params.t, "direction": params.direction})
        residuals = offset_cross_check(surface, params.t)
        for name in ("I", "II", "III"):
            report.check(f"cross_pipeline_{name}", residuals[name], 1e-3)
        if params.t > 0:
            forms = fundamental_forms(surface.frame())
            report.check("curvature_band", band_violation(forms.shape, params.t), 1e-8)
        report.add("curvature", {"min": residuals["min_curvature"], "max": residuals["max_curvature"]})
        report.column("rho", moved.rho)
        if args.surface_output:
            write_surf_grid(moved, args.surface_output)
        return report

    def mixed_command(self, args) -> Report:
        surface = read_surf_grid(args.surface)
        forms = fundamental_forms(surface.frame())
        result = mixed_form(forms, args.k0, args.variant, self.settings)
        report = Report("mixed")
        report.check("admissible", 0.0 if result.verdict.admissible else 1.0, 0.0)
        report.add("mixed", result.to_dict())
        if args.metric_output:
            write_metric_grid(result.form, args.metric_output)
        return report

    def rigidity_command(self, args) -> Report:
        surface = read_surf_grid(args.surface)
        frame = surface.frame()
        fundamental_forms(frame).require_convex()
        spectrum = rigidity_kernel(frame, args.which, self.settings)
        report = Report("rigidity")
        report.check("kernel_dimension", abs(spectrum.kernel_dim - 6), 0)
        report.check("gap_ratio", -spectrum.gap_ratio, -self.settings.gap_ratio)
        report.check("killing_angle", spectrum.subspace_angle, 1e-3)
        report.add("spectrum", spectrum.to_dict())
        spectrum.require_gap()
        return report

    def realize_command(self, args) -> Report:
        target = read_metric_grid(args.target)
        init = read_surf_grid(args.init) if args.init else None
        solve = realize_third_form if args.third else realize_metric
        surface, outcome = solve(target, init, self.settings)
        report = Report("realize")
        report.check("form_residual", outcome.final_residual, self.settings.tolerance)
        report.check("convexity", -outcome.min_curvature, 0.0, passed=outcome.min_curvature > 0)
        report.add("solver", outcome.to_dict())
        report.column("rho", surface.rho)
        if args.surface_output:
            write_surf_grid(surface, args.surface_output)
        return report

    def verify_command(self, args) -> Report:
        return run_suite(args.level, self.settings, args.only)

    def geodesics_command(self, args) -> Report:
        metric = read_metric_grid(args.metric)
        found = shortest_closed_geodesic(metric, self.settings)
        report = Report("geodesics")
        report.check("longer_than_2pi", -(found.length - 2.0 * np.pi), 0.0, passed=found.length > 2.0 * np.pi)
        report.check("converged", 0.0 if found.converged else 1.0, 0.0)
        report.add("geodesic", found.to_dict())
        report.add("admissibility_I", admissibility_I(metric).to_dict())
        report.add("admissibility_III", admissibility_III(metric, self.settings, geodesic=found).to_dict())
        for j, axis in enumerate(("x", "y", "z")):
            report.column(f"curve_{axis}", found.curve[:, j])
        return report

    def run(self, args) -> int:
        handler = getattr(self, f"{args.command}_command")
        try:
            report = handler(args)
        except HypConvexError as e:
            self.logger.error(f"{args.command} failed: {e}")
            if isinstance(e, VerificationFailure) and e.details:
                failed = Report(args.command)
                failed.add("failure", {"message": str(e), **e.details})
                failed.write(args.output, sys.stdout)
            return exit_code_for(e)
        report.write(args.output, sys.stdout)
        if args.command in CERTIFYING and not report.passed:
            self.logger.error(f"{args.command}: {len(report.failures())} checks failed")
            return VerificationFailure.exit_code
        return 0


def main(argv=None) -> int:
    """Parse arguments, configure logging and run a command; returns the exit code."""
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args)
    except HypConvexError as e:
        return exit_code_for(e)
    logging.basicConfig(format=LOG_FORMAT, level=settings.log_level.upper())
    return HypConvexCLI(settings).run(args)
