"""
Projective (Klein) models of H^3 and of the de Sitter hemisphere, the
point-plane duality, and the Pogorelov maps between vector fields of the
curved models and of Euclidean space.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, PreconditionError
from .lorentz import (
    CENTER,
    DSPoint,
    HPoint,
    KillingElement,
    TangentVec,
    coords,
    cross_matrix,
    inner,
    killing_decompose,
)

# Chart operations exclude a disk of this radius around the model center
CENTER_EPS = 1e-6


@dataclass(frozen=True)
class KleinPoint:
    """A point of R^3 minus the unit sphere."""

    p: tuple[float, float, float]

    def __post_init__(self):
        r = float(np.linalg.norm(self.p))
        if not np.isfinite(r) or abs(r - 1.0) < 1e-15:
            raise PreconditionError(f"ideal or invalid Klein point: |p| = {r}")

    @classmethod
    def from_array(cls, a) -> "KleinPoint":
        return cls(tuple(float(c) for c in np.asarray(a, dtype=float)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.p)

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.p))

    @property
    def regime(self) -> str:
        return "hyperbolic" if self.radius < 1.0 else "deSitter"


@dataclass(frozen=True)
class EuclideanKilling:
    """Euclidean Killing field p -> a + b x p."""

    a: tuple[float, float, float]
    b: tuple[float, float, float]

    @classmethod
    def from_arrays(cls, a, b) -> "EuclideanKilling":
        return cls(
            tuple(float(c) for c in np.asarray(a)), tuple(float(c) for c in np.asarray(b))
        )

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def value(self, p) -> np.ndarray:
        return np.asarray(self.a) + np.cross(np.asarray(self.b), np.asarray(p, dtype=float))

    def at(self, p) -> tuple[np.ndarray, np.ndarray]:
        """(translation, rotation) pair at p."""
        return self.value(p), np.asarray(self.b, dtype=float)


@dataclass(frozen=True)
class HPlane:
    """Oriented totally geodesic plane {x in H^3 : <x, dual> = 0}."""

    dual: DSPoint

    @classmethod
    def from_point_normal(cls, x: HPoint, normal) -> "HPlane":
        """Plane through x orthogonal to the unit tangent vector ``normal``."""
        n = coords(normal)
        if abs(inner(n, coords(x))) > 1e-10 or abs(inner(n, n) - 1.0) > 1e-10:
            raise PreconditionError("normal must be a unit tangent vector at x")
        return cls(DSPoint.from_array(n))

    def contains(self, x) -> float:
        """Signed residual <x, dual>."""
        return float(inner(coords(x), self.dual.array))


@dataclass(frozen=True)
class DSPlane:
    """Spacelike plane {y in S^3_1 : <y, normal> = 0} dual to a point of H^3."""

    normal: HPoint


def klein_project(x: np.ndarray) -> np.ndarray:
    """Central projection x -> x_s / x0 over the last axis."""
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / x[..., :1]


def klein_lift(p: np.ndarray, regime: str = "hyperbolic") -> np.ndarray:
    """Inverse of :func:`klein_project` onto H^3 or the upper de Sitter hemisphere."""
    p = np.asarray(p, dtype=float)
    r2 = np.sum(p * p, axis=-1)
    if regime == "hyperbolic":
        scale = 1.0 / np.sqrt(1.0 - r2)
    else:
        scale = 1.0 / np.sqrt(r2 - 1.0)
    return np.concatenate([scale[..., None], scale[..., None] * p], axis=-1)


def phi_H(x: HPoint) -> KleinPoint:
    """Klein image of a point of H^3."""
    return KleinPoint.from_array(klein_project(coords(x)))


def phi_H_inv(p: KleinPoint) -> HPoint:
    """Point of H^3 with Klein image p."""
    pa = p.array if isinstance(p, KleinPoint) else np.asarray(p, dtype=float)
    if np.linalg.norm(pa) >= 1.0:
        raise PreconditionError(f"Klein point outside the unit ball: |p| = {np.linalg.norm(pa)}")
    return HPoint.from_array(klein_lift(pa, "hyperbolic"), renormalize=True)


def phi_S(y: DSPoint) -> KleinPoint:
    """Klein image of a point of the upper de Sitter hemisphere."""
    ya = coords(y)
    if ya[0] <= 0:
        raise PreconditionError(f"de Sitter point outside the upper hemisphere: x0 = {ya[0]}")
    return KleinPoint.from_array(klein_project(ya))


def phi_S_inv(p: KleinPoint) -> DSPoint:
    """Point of the upper de Sitter hemisphere with Klein image p."""
    pa = p.array if isinstance(p, KleinPoint) else np.asarray(p, dtype=float)
    if np.linalg.norm(pa) <= 1.0:
        raise PreconditionError(f"Klein point inside the unit ball: |p| = {np.linalg.norm(pa)}")
    return DSPoint.from_array(klein_lift(pa, "deSitter"), renormalize=True)


def dphi(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Differential of the central projection at x applied to v (last axis)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x0 = x[..., :1]
    return (v[..., 1:] * x0 - x[..., 1:] * v[..., :1]) / x0**2


def dphi_H(x: HPoint, v: TangentVec) -> np.ndarray:
    """Differential of phi_H at x applied to the tangent vector v."""
    return dphi(coords(x), coords(v))


def dual_of_plane(plane: HPlane) -> DSPoint:
    """De Sitter point dual to a plane of H^3."""
    return plane.dual


def plane_of_dual(y: DSPoint) -> HPlane:
    """Plane of H^3 dual to a de Sitter point."""
    return HPlane(y)


def dual_of_point(x: HPoint) -> DSPlane:
    """Spacelike plane of S^3_1 dual to a point of H^3."""
    return DSPlane(x)


def point_of_dual_plane(plane: DSPlane) -> HPoint:
    """Point of H^3 dual to a spacelike plane of S^3_1."""
    return plane.normal


def klein_tangency_residual(plane: HPlane, samples: int = 64) -> float:
    """
    Check the Klein picture of duality.

    Lines through the Klein image of the dual point and the boundary circle of
    the plane are tangent to the unit sphere, i.e. p* . q = 1 for every q on
    that circle.
    """
    n = plane.dual.array
    if n[0] < 0:
        n = -n
    if abs(n[0]) < CENTER_EPS:
        raise PreconditionError("plane through the center has its dual point at infinity")
    p_star = n[1:] / n[0]
    ns = n[1:]
    center = n[0] * ns / np.dot(ns, ns)
    radius = np.sqrt(max(1.0 - np.dot(center, center), 0.0))
    axis = ns / np.linalg.norm(ns)
    helper = np.eye(3)[np.argmin(np.abs(axis))]
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    angles = 2.0 * np.pi * np.arange(samples) / samples
    circle = center + radius * (
        np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2
    )
    return float(np.max(np.abs(circle @ p_star - 1.0)))


def _radial_split(x: np.ndarray):
    xs = x[1:]
    r = np.linalg.norm(xs)
    return xs, r


def pogorelov_phi_H(x: HPoint, v: TangentVec) -> tuple[KleinPoint, np.ndarray]:
    """
    Pogorelov map of H^3.

    Lateral components go through d(phi_H); the radial component keeps its
    direction and its norm.
    """
    return phi_H(x), pogorelov_field_H(coords(x), coords(v))


def pogorelov_field_H(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized Pogorelov map of H^3 over the last axis; returns Euclidean vectors."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    s = np.linalg.norm(x[..., 1:], axis=-1, keepdims=True)
    near = s < CENTER_EPS
    safe = np.where(near, 1.0, s)
    u = x[..., 1:] / safe
    radial = (x[..., :1] * x - CENTER) / safe
    lam = inner(v, radial)[..., None]
    image = dphi(x, v - lam * radial) + lam * u
    return np.where(near, v[..., 1:] / x[..., :1], image)


def pogorelov_phi_S(y: DSPoint, v: TangentVec) -> tuple[KleinPoint, np.ndarray]:
    """
    Pogorelov map of the de Sitter hemisphere.

    The radial direction is the future unit timelike vector pointing away from
    the ball; it is sent to the outward Euclidean radial direction with the
    same norm. Lateral components go through d(phi_S).
    """
    return phi_S(y), pogorelov_field_S(coords(y), coords(v))


def pogorelov_field_S(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized Pogorelov map of the de Sitter hemisphere."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    u = y[..., 1:] / np.linalg.norm(y[..., 1:], axis=-1, keepdims=True)
    projected = CENTER + y[..., :1] * y
    timelike = projected / np.sqrt(-inner(projected, projected))[..., None]
    lam = -inner(v, timelike)[..., None]
    return dphi(y, v - lam * timelike) + lam * u


def euclidean_killing_from_matrix(k: KillingElement) -> EuclideanKilling:
    """Euclidean Killing field sharing the matrix coefficients of k."""
    a, b = k.translation_rotation()
    return EuclideanKilling.from_arrays(a, b)


def psi_H(k: KillingElement, x: HPoint) -> EuclideanKilling:
    """
    Image of a Killing field of H^3 under the Pogorelov map, computed at x.

    The field is split at x into radial and lateral translation and rotation
    parts, each sent by its closed form. At the center the matrix form is used.
    """
    xa = coords(x)
    xs, s = _radial_split(xa)
    if s < CENTER_EPS:
        return euclidean_killing_from_matrix(k)
    tau_v, sigma_v = killing_decompose(k, x)
    tau = coords(tau_v)
    sigma = coords(sigma_v)
    u = xs / s
    r = s / xa[0]
    radial = (xa[0] * xa - CENTER) / s
    root = np.sqrt(1.0 - r * r)

    tau_rad = inner(tau, radial)
    sigma_rad = inner(sigma, radial)
    # Lateral tangent vectors at x have no time component
    tau_lat = (tau - tau_rad * radial)[1:]
    sigma_lat = (sigma - sigma_rad * radial)[1:]

    tau_bar = tau_rad * u + root * tau_lat
    sigma_bar = sigma_rad * u - (r / root) * np.cross(u, tau_lat) + sigma_lat / root
    p_bar = r * u
    a = tau_bar - np.cross(sigma_bar, p_bar)
    return EuclideanKilling.from_arrays(a, sigma_bar)


def fit_euclidean_killing(points: np.ndarray, vectors: np.ndarray) -> tuple[EuclideanKilling, float]:
    """
    Least-squares Euclidean Killing field through sampled vectors.

    Returns:
        The fitted field and the maximum pointwise residual
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    vectors = np.asarray(vectors, dtype=float).reshape(-1, 3)
    rows = np.concatenate(
        [np.broadcast_to(np.eye(3), (len(points), 3, 3)), -cross_matrix(points)], axis=2
    ).reshape(-1, 6)
    coef, *_ = np.linalg.lstsq(rows, vectors.reshape(-1), rcond=None)
    residual = np.max(np.abs(rows @ coef - vectors.reshape(-1))) if len(points) else 0.0
    return EuclideanKilling.from_arrays(coef[:3], coef[3:]), float(residual)


def killing_gluing_mismatch(k: KillingElement, x: HPoint, outside: np.ndarray) -> tuple[float, float]:
    """
    Compare the Pogorelov images of k on both sides of the sphere at infinity.

    ``outside`` holds Klein points with |p| > 1. The de Sitter images of k at
    those points are fitted by one Euclidean Killing field, which must agree
    with psi_H(k, x) computed inside the ball.

    Returns:
        (fit residual outside the ball, max coefficient difference from psi_H)
    """
    outside = np.asarray(outside, dtype=float).reshape(-1, 3)
    if np.any(np.linalg.norm(outside, axis=-1) <= 1.0):
        raise PreconditionError("gluing samples must lie outside the unit ball")
    y = klein_lift(outside, "deSitter")
    glued, residual = fit_euclidean_killing(outside, pogorelov_field_S(y, k(y)))
    inside = psi_H(k, x)
    return residual, float(np.max(np.abs(glued.coefficients - inside.coefficients)))


def euclidean_transport_derivative(
    grid, points: np.ndarray, tau: np.ndarray, sigma: np.ndarray, w_chart: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Flat connection of R^3 on sampled (tau, sigma) sections."""
    p_th, p_ph = grid.gradient(points)
    t_th, t_ph = grid.gradient(tau)
    s_th, s_ph = grid.gradient(sigma)
    a = w_chart[..., :1]
    b = w_chart[..., 1:]
    w = a * p_th + b * p_ph
    return a * t_th + b * t_ph + np.cross(w, sigma), a * s_th + b * s_ph


def sphere_forms_H(rho: float) -> tuple[float, float, float]:
    """Multiples of the round metric for I, II, III of the geodesic sphere of radius rho."""
    return np.sinh(rho) ** 2, np.sinh(rho) * np.cosh(rho), np.cosh(rho) ** 2


def sphere_forms_S(rho: float) -> tuple[float, float, float]:
    """Multiples of the round metric for I, II, III of the de Sitter sphere dual to radius rho."""
    return np.cosh(rho) ** 2, np.cosh(rho) * np.sinh(rho), np.sinh(rho) ** 2


def euclidean_sphere_forms(t: float) -> tuple[float, float, float]:
    """Multiples of the round metric for I, II, III of the Euclidean sphere of radius t."""
    return t * t, t, 1.0


def projective_II_transform(frame, model_forms=None):
    """
    Compare the transported second form with the directly computed one on the
    Klein image of a surface.

    The transported form is <n,n> <N_bar, dphi(n)> II, where n is the unit
    normal used for II in the curved model and N_bar the inward Euclidean normal
    of the image.

    Args:
        frame: FrameField of a surface in H^3 or S^3_1
        model_forms: Optional precomputed SurfaceForms of ``frame``

    Returns:
        (transported FormField, direct EuclideanForms, relative max residual)
    """
    from .surface import FormField, euclidean_forms, fundamental_forms

    if np.any(np.abs(frame.position[..., 0]) < CENTER_EPS):
        raise DegenerateGeometryError("surface meets the plane at infinity of the chart")
    forms = model_forms or fundamental_forms(frame)
    points = klein_project(frame.position)
    image = euclidean_forms(frame.grid, points)
    n = frame.normal
    factor = inner(n, n) * np.sum(image.normal * dphi(frame.position, n), axis=-1)
    transported = FormField(factor[..., None, None] * forms.second.values, "II")
    scale = np.max(np.abs(image.second.values))
    residual = np.max(np.abs(transported.values - image.second.values)) / scale
    return transported, image, float(residual)
