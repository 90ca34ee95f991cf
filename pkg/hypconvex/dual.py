"""
Dual surfaces in de Sitter space and admissibility verdicts for target metrics.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .geodesics import GeodesicResult, shortest_closed_geodesic
from .surface import (
    FormField,
    FrameField,
    SurfaceForms,
    frame_from_positions,
    fundamental_forms,
    gaussian_curvature,
)

logger = logging.getLogger(__name__)


@dataclass
class DualSurface:
    """The dual S* of a convex surface S of H^3: its unit normals read as points of S^3_1."""

    frame: FrameField
    source: FrameField

    @property
    def positions(self) -> np.ndarray:
        return self.frame.position

    def forms(self) -> SurfaceForms:
        return fundamental_forms(self.frame)


def dual_frame(frame: FrameField) -> FrameField:
    """
    Frame of the dual surface, in the same chart.

    A frame of H^3 is sent to the frame of its normals in S^3_1 and a frame of
    S^3_1 to the frame of its future normals in H^3.
    """
    if frame.space == "H3":
        return frame_from_positions(frame.grid, frame.normal, "dS")
    if frame.space == "dS":
        return frame_from_positions(frame.grid, frame.normal, "H3")
    raise PreconditionError(f"no duality for frames of {frame.space}")


def dualize(frame: FrameField) -> DualSurface:
    """Dual surface of a convex surface of H^3."""
    if frame.space != "H3":
        raise PreconditionError("dualize expects a frame of H^3")
    return DualSurface(dual_frame(frame), frame)


def double_dual_error(frame: FrameField) -> float:
    """Max ambient distance between S and (S*)*."""
    back = dual_frame(dual_frame(frame))
    return float(np.max(np.abs(back.position - frame.position)))


@dataclass
class Verdict:
    """Admissibility of a metric as I (K > -1) or III (K < 1, long closed geodesics) of a convex surface."""

    kind: str
    admissible: bool
    min_curvature: float
    max_curvature: float
    curvature_margin: float
    geodesic_length: float | None = None
    geodesic_margin: float | None = None
    geodesic_converged: bool | None = None
    reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "admissible": self.admissible,
            "min_curvature": self.min_curvature,
            "max_curvature": self.max_curvature,
            "curvature_margin": self.curvature_margin,
            "geodesic_length": self.geodesic_length,
            "geodesic_margin": self.geodesic_margin,
            "geodesic_converged": self.geodesic_converged,
            "reasons": list(self.reasons),
        }


def curvature_verdict(
    h: FormField,
    kind: str,
    lower: float | None = None,
    upper: float | None = None,
    length_bound: float | None = None,
    settings=None,
    strict: bool = True,
    geodesic: GeodesicResult | None = None,
) -> Verdict:
    """
    Check curvature bounds and, optionally, a lower bound on closed geodesics.

    Args:
        h: Metric on the sphere grid
        kind: Label of the verdict
        lower: Curvature must exceed this value
        upper: Curvature must stay below this value
        length_bound: Closed geodesics must be longer than this
        settings: Optional Settings for the geodesic search
        strict: Strict inequalities when True, otherwise a 1e-12 slack is allowed
        geodesic: Already computed shortest closed geodesic of h, reused instead of a new search

    Returns:
        The Verdict
    """
    reasons = []
    if not h.is_positive_definite():
        reasons.append("metric is not positive definite")
        return Verdict(kind, False, np.nan, np.nan, np.nan, reasons=reasons)

    k = gaussian_curvature(h)
    k_min, k_max = float(np.min(k)), float(np.max(k))
    slack = 0.0 if strict else 1e-12
    margins = []
    if lower is not None:
        margins.append(k_min - lower)
        if k_min - lower <= -slack or (strict and k_min - lower == 0):
            reasons.append(f"curvature {k_min:.6g} is not above {lower:.6g}")
    if upper is not None:
        margins.append(upper - k_max)
        if upper - k_max <= -slack or (strict and upper - k_max == 0):
            reasons.append(f"curvature {k_max:.6g} is not below {upper:.6g}")
    margin = float(min(margins)) if margins else np.inf

    verdict = Verdict(kind, False, k_min, k_max, margin, reasons=reasons)
    if length_bound is not None:
        found = geodesic if geodesic is not None else shortest_closed_geodesic(h, settings)
        verdict.geodesic_length = found.length
        verdict.geodesic_margin = found.length - length_bound
        verdict.geodesic_converged = found.converged
        if found.length <= length_bound:
            reasons.append(
                f"closed geodesic of length {found.length:.6g} is not longer than {length_bound:.6g}"
            )
    verdict.admissible = not reasons
    logger.info(f"{kind} verdict: admissible={verdict.admissible}, curvature in [{k_min:.6g}, {k_max:.6g}]")
    return verdict


def admissibility_I(h: FormField, settings=None) -> Verdict:
    """Can h be the induced metric of a convex surface of H^3 (K > -1)?"""
    return curvature_verdict(h, "I", lower=-1.0, settings=settings)


def admissibility_III(h: FormField, settings=None, geodesic: GeodesicResult | None = None) -> Verdict:
    """Can h be the third fundamental form of a convex surface of H^3 (K < 1, closed geodesics > 2 pi)?"""
    return curvature_verdict(
        h, "III", upper=1.0, length_bound=2.0 * np.pi, settings=settings, geodesic=geodesic
    )
