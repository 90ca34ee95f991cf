"""
Equidistant surfaces and the mixed forms I - 2k0 II + k0^2 III.

An offset at signed distance t moves every point along the outward normal
(t > 0) or the inward normal (t < 0). Its forms are hyperbolic combinations of
the source forms, so they are computed node by node without differentiating.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .dual import Verdict, curvature_verdict
from .errors import PreconditionError
from .surface import (
    FormField,
    FrameField,
    RadialSurface,
    ShapeField,
    SurfaceForms,
    frame_from_positions,
    fundamental_forms,
    resample_radial,
)

logger = logging.getLogger(__name__)

VARIANTS = ("cor-I", "cor-III")


@dataclass(frozen=True)
class OffsetParams:
    """Signed offset distance; negative values move towards the convex side."""

    t: float

    @property
    def direction(self) -> str:
        return "inward" if self.t < 0 else "outward"

    @classmethod
    def from_flags(cls, t: float, inward: bool = False) -> "OffsetParams":
        return cls(-abs(t) if inward else t)

    def check(self, min_curvature: float):
        """Inward offsets need tanh|t| <= k0, k0 the smallest principal curvature."""
        if self.t < 0 and np.tanh(-self.t) > min_curvature:
            logger.error(
                f"inward offset {-self.t:.6g} too large: tanh = {np.tanh(-self.t):.6g} > k0 = {min_curvature:.6g}"
            )
            raise PreconditionError(
                f"inward offset violates tanh|t| <= k0 ({np.tanh(-self.t):.6g} > {min_curvature:.6g})",
                details={"t": self.t, "k0": min_curvature},
            )


def _coefficients(t: float) -> tuple[float, float]:
    return float(np.cosh(t)), float(np.sinh(t))


def offset_forms(
    first: FormField, second: FormField, third: FormField, t: float
) -> tuple[FormField, FormField, FormField]:
    """
    Forms of the equidistant surface at signed distance t.

    I_t = c^2 I + 2cs II + s^2 III, II_t = cs (I + III) + (c^2 + s^2) II and
    III_t = s^2 I + 2cs II + c^2 III, with c = cosh t and s = sinh t.

    Raises:
        PreconditionError: Inward offset beyond tanh|t| <= k0
    """
    params = OffsetParams(t)
    shape = ShapeField(first.inverse() @ second.values)
    params.check(float(np.min(shape.principal_curvatures()[..., 0])))

    c, s = _coefficients(t)
    i_t = first * (c * c) + second * (2 * c * s) + third * (s * s)
    ii_t = (first + third) * (c * s) + second * (c * c + s * s)
    iii_t = first * (s * s) + second * (2 * c * s) + third * (c * c)
    return i_t.retag("I"), ii_t.retag("II"), iii_t.retag("III")


def offset_shape(shape: ShapeField, t: float) -> ShapeField:
    """B_t = (s Id + c B)(c Id + s B)^-1."""
    c, s = _coefficients(t)
    eye = np.eye(2)
    b = shape.values
    return ShapeField((s * eye + c * b) @ np.linalg.inv(c * eye + s * b))


def offset_frame(frame: FrameField, t: float) -> FrameField:
    """Frame of the offset surface, in the same chart: x_t = cosh t x - sinh t N."""
    if frame.space != "H3":
        raise PreconditionError("offsets are computed for surfaces of H^3")
    c, s = _coefficients(t)
    return frame_from_positions(frame.grid, c * frame.position - s * frame.normal, "H3")


def offset_surface(surface: RadialSurface, t: float) -> RadialSurface:
    """Offset of a radial surface, resampled as a radial graph."""
    frame = surface.frame()
    if t < 0:
        OffsetParams(t).check(fundamental_forms(frame).min_curvature())
    moved = offset_frame(frame, t)
    return resample_radial(surface.grid, moved.position)


def offset_cross_check(surface: RadialSurface, t: float) -> dict:
    """
    Compare the algebraic offset forms with the forms of the moved surface.

    Both live in the source chart; differences are measured in an orthonormal
    frame of the algebraic I_t, relative to the largest entry.
    """
    forms = fundamental_forms(surface.frame())
    algebraic = offset_forms(forms.first, forms.second, forms.third, t)
    direct = fundamental_forms(offset_frame(forms.frame, t))
    residuals = {}
    for name, a, d in zip(("I", "II", "III"), algebraic, (direct.first, direct.second, direct.third)):
        diff = (a - d).in_frame_of(algebraic[0])
        scale = np.max(np.abs(a.in_frame_of(algebraic[0])))
        residuals[name] = float(np.max(np.abs(diff)) / scale)
    k = direct.principal_curvatures()
    residuals["min_curvature"] = float(np.min(k))
    residuals["max_curvature"] = float(np.max(k))
    logger.info(f"offset t={t:g} cross-check: {residuals}")
    return residuals


def curvature_band(shape: ShapeField, t: float) -> tuple[float, float]:
    """(tanh t, coth t): the band holding every principal curvature of an outward offset."""
    if t <= 0:
        raise PreconditionError(f"the curvature band needs t > 0, got {t}")
    return float(np.tanh(t)), float(1.0 / np.tanh(t))


def band_violation(shape: ShapeField, t: float) -> float:
    """Largest amount by which a principal curvature of B_t leaves [tanh t, coth t]."""
    low, high = curvature_band(shape, t)
    k = offset_shape(shape, t).principal_curvatures()
    return float(max(np.max(low - k[..., 0]), np.max(k[..., 1] - high), 0.0))


@dataclass
class MixedForm:
    """A mixed form, its admissibility verdict and the principal-curvature band of the source."""

    form: FormField
    k0: float
    variant: str
    verdict: Verdict | None = None
    band: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "variant": self.variant,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "band": self.band,
        }


def _check_k0(k0: float):
    if not 0 <= k0 < 1:
        logger.error(f"k0 out of range: {k0}")
        raise PreconditionError(f"k0 must lie in [0, 1), got {k0}")


def mixed_combination(
    first: FormField, second: FormField, third: FormField, k0: float, variant: str = "cor-I"
) -> FormField:
    """I - 2k0 II + k0^2 III (cor-I) or k0^2 I - 2k0 II + III (cor-III)."""
    _check_k0(k0)
    if variant == "cor-I":
        return (first - second * (2 * k0) + third * (k0 * k0)).retag("cor-I")
    if variant == "cor-III":
        return (first * (k0 * k0) - second * (2 * k0) + third).retag("cor-III")
    raise PreconditionError(f"unknown variant: {variant}")


def principal_band(forms: SurfaceForms, k0: float) -> dict:
    """Where the principal curvatures sit relative to the band (k0, 1/k0)."""
    k = forms.principal_curvatures()
    upper = np.inf if k0 == 0 else 1.0 / k0
    inside = (k[..., 0] > k0) & (k[..., 1] < upper)
    return {
        "lower": k0,
        "upper": upper if np.isfinite(upper) else None,
        "min_curvature": float(np.min(k)),
        "max_curvature": float(np.max(k)),
        "fraction_inside": float(np.mean(inside)),
    }


def mixed_form(
    forms: SurfaceForms, k0: float, variant: str = "cor-I", settings=None, check: bool = True
) -> MixedForm:
    """
    Mixed form of a surface with its admissibility verdict.

    The cor-I variant asks for K >= -1/(1 - k0^2); the cor-III variant for
    K <= 1/(1 - k0^2) and closed geodesics longer than 2 pi sqrt(1 - k0^2).
    """
    form = mixed_combination(forms.first, forms.second, forms.third, k0, variant)
    result = MixedForm(form, k0, variant, band=principal_band(forms, k0))
    if check:
        scale = 1.0 - k0 * k0
        if variant == "cor-I":
            result.verdict = curvature_verdict(form, variant, lower=-1.0 / scale, settings=settings, strict=False)
        else:
            result.verdict = curvature_verdict(
                form,
                variant,
                upper=1.0 / scale,
                length_bound=2.0 * np.pi * np.sqrt(scale),
                settings=settings,
                strict=False,
            )
    return result
