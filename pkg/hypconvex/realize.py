"""
Realization of a prescribed metric on S^2 as the induced metric (or the third
fundamental form) of a convex surface of H^3, and alignment of surfaces modulo
isometries.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import expm
from scipy.optimize import least_squares

from .deform import RigidityOperator, frame_components
from .dual import admissibility_I, admissibility_III, dual_frame
from .errors import (
    DegenerateGeometryError,
    InadmissibleMetricError,
    PreconditionError,
    SolverStallError,
)
from .lorentz import KillingElement, normalize_quadric
from .surface import FormField, RadialSurface, frame_from_positions, fundamental_forms, resample_radial

ARMIJO_C1 = 1e-4
MIN_STEP = 2.0**-30
TIKHONOV = 1e-8

logger = logging.getLogger(__name__)


@dataclass
class RealizeReport:
    """Outcome of a realization run."""

    which: str
    converged: bool
    stalled: bool
    iterations: int
    residual_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    min_curvature: float = float("nan")
    max_curvature: float = float("nan")
    gauge: dict = field(default_factory=dict)
    positions: np.ndarray | None = field(default=None, repr=False)

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "converged": self.converged,
            "stalled": self.stalled,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": list(self.residual_history),
            "step_history": list(self.step_history),
            "objective_history": list(self.objective_history),
            "min_curvature": self.min_curvature,
            "max_curvature": self.max_curvature,
            "gauge": self.gauge,
        }


def round_initialization(target: FormField, which: str = "I") -> RadialSurface:
    """Geodesic sphere whose I (or III) has the area of the target."""
    ratio = target.area() / (4.0 * np.pi)
    if which == "I":
        return RadialSurface.sphere(target.grid, float(np.arcsinh(np.sqrt(ratio))))
    if ratio <= 1.0:
        raise PreconditionError(f"a third form has area above 4 pi, got {4 * np.pi * ratio:.6g}")
    return RadialSurface.sphere(target.grid, float(np.arccosh(np.sqrt(ratio))))


class MetricRealizer:
    """
    Damped Gauss-Newton solver for I(x) = h or III(x) = h.

    Every node moves along the three directions of T_x H^3. The tangential
    moves absorb the reparameterization freedom and the Tikhonov term picks a
    minimal step among the isometry directions.
    """

    def __init__(
        self,
        target: FormField,
        which: str = "I",
        settings=None,
        logger: logging.Logger | None = None,
    ):
        """
        Initialize the solver.

        Args:
            target: Metric to realize, on the sphere grid
            which: "I" to prescribe the induced metric, "III" the third form
            settings: Optional Settings (tolerance, iteration limit, strict mode)
            logger: Optional logger instance
        """
        if which not in ("I", "III"):
            raise PreconditionError(f"unknown form to prescribe: {which}")
        self.target = target
        self.which = which
        self.grid = target.grid
        self.tolerance = settings.tolerance if settings else 1e-8
        self.max_iterations = settings.max_iterations if settings else 60
        self.strict = settings.strict if settings else False
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self._scale = target.max_abs()

    def current_form(self, position: np.ndarray) -> FormField:
        frame = frame_from_positions(self.grid, position, "H3")
        if self.which == "III":
            return dual_frame(frame).induced_metric()
        return frame.induced_metric()

    def residual(self, position: np.ndarray) -> np.ndarray:
        return frame_components(self.current_form(position).values - self.target.values, self.target)

    def objective(self, position: np.ndarray) -> float:
        """Half the squared residual norm, the quantity the line search decreases."""
        r = self.residual(position)
        return 0.5 * float(r @ r)

    def relative_error(self, position: np.ndarray) -> float:
        diff = self.current_form(position).values - self.target.values
        return float(np.max(np.abs(diff)) / self._scale)

    def operator(self, position: np.ndarray) -> RigidityOperator:
        frame = frame_from_positions(self.grid, position, "H3")
        return RigidityOperator(frame, self.which, metric=self.target, logger=self.logger)

    def _convexity(self, position: np.ndarray) -> tuple[float, float] | None:
        """(min, max) principal curvature, or None when the iterate is not a convex immersion."""
        try:
            forms = fundamental_forms(frame_from_positions(self.grid, position, "H3"))
            if self.which == "III":
                dual_frame(forms.frame)
        except DegenerateGeometryError:
            return None
        k_min = forms.min_curvature()
        if k_min <= 0:
            return None
        return k_min, forms.max_curvature()

    def step(self, position: np.ndarray, error: float | None = None):
        """
        One damped Gauss-Newton step with Armijo backtracking; returns (position, alpha) or None.

        When ``error`` is given, a trial is accepted only if its relative residual is strictly below it.
        """
        operator = self.operator(position)
        a = operator.matrix
        r = self.residual(position)
        normal = (a.T @ a).tocsc()
        mu = TIKHONOV * spla.norm(normal)
        gradient = a.T @ r
        delta = spla.spsolve(normal + mu * sp.identity(normal.shape[0], format="csc"), -gradient)
        slope = float(gradient @ delta)
        f0 = 0.5 * float(r @ r)

        alpha = 1.0
        while alpha >= MIN_STEP:
            trial = normalize_quadric(position + alpha * operator.field(delta))
            if self._convexity(trial) is not None:
                r_trial = self.residual(trial)
                if 0.5 * float(r_trial @ r_trial) <= f0 + ARMIJO_C1 * alpha * slope and (
                    error is None or self.relative_error(trial) < error
                ):
                    return trial, alpha
            alpha *= 0.5
        return None

    def solve(self, init: RadialSurface) -> tuple[RadialSurface, RealizeReport]:
        if init.grid != self.grid:
            raise PreconditionError(f"initial surface lives on {init.grid}, target on {self.grid}")
        position = init.positions()
        bounds = self._convexity(position)
        if bounds is None:
            raise PreconditionError("the initial surface must be strictly convex")

        report = RealizeReport(self.which, converged=False, stalled=False, iterations=0)
        error = self.relative_error(position)
        report.objective_history.append(self.objective(position))
        report.residual_history.append(error)
        self.logger.info(f"realize {self.which}: initial relative residual {error:.3e}")

        while error > self.tolerance and report.iterations < self.max_iterations:
            outcome = self.step(position, error)
            if outcome is None:
                report.stalled = True
                self.logger.warning(
                    f"line search stalled at iteration {report.iterations}, residual {error:.3e}"
                )
                break
            position, alpha = outcome
            report.iterations += 1
            error = self.relative_error(position)
            report.residual_history.append(error)
            report.step_history.append(alpha)
            report.objective_history.append(self.objective(position))
            self.logger.info(f"iteration {report.iterations}: residual {error:.3e}, step {alpha:g}")

        report.converged = error <= self.tolerance
        if not report.converged and not report.stalled:
            self.logger.warning(f"no convergence after {report.iterations} iterations: residual {error:.3e}")
        if report.stalled and self.strict:
            self.logger.error(f"solver stalled above tolerance: {error:.3e} > {self.tolerance:.3e}")
            raise SolverStallError(
                f"line search stalled with residual {error:.3e}", details=report.to_dict()
            )

        report.min_curvature, report.max_curvature = self._convexity(position)
        report.positions = position
        return resample_radial(self.grid, position), report


def realize_metric(
    target: FormField, init: RadialSurface | None = None, settings=None, check: bool = True
) -> tuple[RadialSurface, RealizeReport]:
    """
    Convex surface of H^3 whose induced metric is the target.

    Raises:
        InadmissibleMetricError: The target has curvature <= -1 somewhere
        SolverStallError: Stalled above tolerance in strict mode
    """
    if check:
        verdict = admissibility_I(target, settings)
        if not verdict.admissible:
            logger.error(f"target is not admissible as I: {verdict.reasons}")
            raise InadmissibleMetricError("; ".join(verdict.reasons), details=verdict.to_dict())
    init = init or round_initialization(target, "I")
    return MetricRealizer(target, "I", settings).solve(init)


def realize_third_form(
    target: FormField, init: RadialSurface | None = None, settings=None, check: bool = True
) -> tuple[RadialSurface, RealizeReport]:
    """Convex surface of H^3 whose third fundamental form (the metric of its dual) is the target."""
    if check:
        verdict = admissibility_III(target, settings)
        if not verdict.admissible:
            logger.error(f"target is not admissible as III: {verdict.reasons}")
            raise InadmissibleMetricError("; ".join(verdict.reasons), details=verdict.to_dict())
    init = init or round_initialization(target, "III")
    return MetricRealizer(target, "III", settings).solve(init)


def check_jacobian(
    target: FormField,
    surface: RadialSurface,
    which: str = "I",
    rng: np.random.Generator | None = None,
    directions: int = 3,
    step: float = 1e-6,
) -> float:
    """Largest relative gap between the assembled Jacobian and central differences on random directions."""
    rng = rng or np.random.default_rng(0)
    solver = MetricRealizer(target, which)
    position = surface.positions()
    operator = solver.operator(position)
    worst = 0.0
    for _ in range(directions):
        c = rng.standard_normal(operator.matrix.shape[1])
        u = operator.field(c)
        forward = solver.residual(normalize_quadric(position + step * u))
        backward = solver.residual(normalize_quadric(position - step * u))
        numeric = (forward - backward) / (2.0 * step)
        analytic = operator.matrix @ c
        worst = max(worst, float(np.max(np.abs(analytic - numeric)) / np.max(np.abs(numeric))))
    logger.info(f"Jacobian check ({which}): relative error {worst:.3e}")
    return worst


def isometry_matrix(params: np.ndarray) -> np.ndarray:
    """exp of the so(3,1) element with (translation, rotation) = params."""
    return expm(KillingElement.from_vectors(params[:3], params[3:]).mat)


def move_surface(surface: RadialSurface, params: np.ndarray) -> RadialSurface:
    """Image of a radial surface under an isometry, resampled as a radial graph."""
    moved = surface.positions() @ isometry_matrix(params).T
    return resample_radial(surface.grid, moved)


def gauge_align(
    surface: RadialSurface, reference: RadialSurface, tolerance: float = 1e-12
) -> tuple[RadialSurface, dict]:
    """
    Move a surface by the isometry that best matches a reference.

    The mismatch is the difference of radial functions after resampling; the
    six parameters of the isometry are fitted with a least-squares solver.
    """
    if surface.grid != reference.grid:
        raise PreconditionError("surfaces to align must share a grid")

    def mismatch(params):
        return (move_surface(surface, params).rho - reference.rho).ravel()

    start = mismatch(np.zeros(6))
    result = least_squares(mismatch, np.zeros(6), diff_step=1e-6, xtol=tolerance, ftol=tolerance, gtol=tolerance)
    aligned = move_surface(surface, result.x)
    gauge = {
        "translation": [float(v) for v in result.x[:3]],
        "rotation": [float(v) for v in result.x[3:]],
        "mismatch_before": float(np.max(np.abs(start))),
        "mismatch_after": float(np.max(np.abs(aligned.rho - reference.rho))),
    }
    logger.info(
        f"gauge alignment: mismatch {gauge['mismatch_before']:.3e} -> {gauge['mismatch_after']:.3e}"
    )
    return aligned, gauge
