"""
Infinitesimal deformations of convex surfaces.

Covers the first-order variations of I and III, the d-bar operators of I, II
and III with their adjoint pairing, the shape-variation systems and their
equivalence with sections anti-commuting with the complex structure of II,
the integration of a shape variation into a deformation of a Euclidean
patch, the Herglotz certificate and the discrete rigidity operator.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid

from .dual import dual_frame
from .errors import DegenerateGeometryError, PreconditionError, VerificationFailure
from .grid import SphereGrid
from .lorentz import KillingElement, normalize_quadric, tangent_basis
from .projective import EuclideanKilling, klein_project, pogorelov_field_H
from .surface import (
    VECTOR_PARITY,
    FormField,
    FrameField,
    SurfaceForms,
    connection_III,
    euclidean_frame,
    frame_from_positions,
    fundamental_forms,
    pairing,
    space_inner,
)

logger = logging.getLogger(__name__)

# Rotation by a quarter turn in chart components, before normalization
EPSILON = np.array([[0.0, -1.0], [1.0, 0.0]])


def _signature(space: str) -> np.ndarray:
    return np.ones(3) if space == "R3" else np.array([-1.0, 1.0, 1.0, 1.0])


@dataclass
class DeformField:
    """Ambient deformation vector u per node of a frame."""

    frame: FrameField
    u: np.ndarray

    @classmethod
    def from_killing(cls, frame: FrameField, k: KillingElement) -> "DeformField":
        return cls(frame, k(frame.position))

    @classmethod
    def from_euclidean_killing(cls, frame: FrameField, k: EuclideanKilling) -> "DeformField":
        return cls(frame, k.value(frame.position))

    @classmethod
    def from_split(cls, frame: FrameField, lam: np.ndarray, v: np.ndarray) -> "DeformField":
        """u = lam N + v^a X_a with v in chart components."""
        x_th, x_ph = frame.projected_tangents()
        u = lam[..., None] * frame.normal + v[..., :1] * x_th + v[..., 1:] * x_ph
        return cls(frame, u)

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """(lam, v) with u = lam N + v^a X_a."""
        space = self.frame.space
        tangents = self.frame.projected_tangents()
        lam = space_inner(space, self.u, self.frame.normal)
        metric = pairing(space, tangents, tangents)
        rhs = np.stack([space_inner(space, self.u, t) for t in tangents], axis=-1)
        v = np.linalg.solve(metric, rhs[..., None])[..., 0]
        return lam, v

    def __add__(self, other: "DeformField") -> "DeformField":
        return DeformField(self.frame, self.u + other.u)

    def __mul__(self, scalar: float) -> "DeformField":
        return DeformField(self.frame, scalar * self.u)

    __rmul__ = __mul__


def _field(u) -> np.ndarray:
    return u.u if isinstance(u, DeformField) else np.asarray(u, dtype=float)


def metric_variation(frame: FrameField, u) -> FormField:
    """delta I(X_a, X_b) = <d_a u, X_b> + <X_a, d_b u>."""
    du = frame.grid.gradient(_field(u))
    m = pairing(frame.space, du, frame.tangents)
    return FormField(m + np.swapaxes(m, -1, -2), "dI")


def normal_variation(frame: FrameField, u) -> np.ndarray:
    """
    First-order variation of the unit normal under u.

    Solves <N, N'> = 0, <x, N'> = -<u, N> and <X_a, N'> = -<d_a u, N> per node
    (the second equation is dropped in R^3).
    """
    u = _field(u)
    eta = _signature(frame.space)
    du = frame.grid.gradient(u)
    n = frame.normal
    rows = [n * eta]
    rhs = [np.zeros(n.shape[:-1])]
    if frame.space != "R3":
        rows.append(frame.position * eta)
        rhs.append(-space_inner(frame.space, u, n))
    for t, d in zip(frame.tangents, du):
        rows.append(t * eta)
        rhs.append(-space_inner(frame.space, d, n))
    matrix = np.stack(rows, axis=-2)
    return np.linalg.solve(matrix, np.stack(rhs, axis=-1)[..., None])[..., 0]


def third_form_variation(frame: FrameField, u) -> FormField:
    """delta III, as the induced-metric variation of the dual surface under the normal variation."""
    dual = dual_frame(frame)
    return metric_variation(dual, normal_variation(frame, u)).retag("dIII")


def shape_variation(frame: FrameField, u, step: float = 1e-4) -> np.ndarray:
    """Central finite difference of B under x -> x +- step u (retracted to the model)."""
    u = _field(u)

    def shape_at(sign):
        moved = frame.position + sign * step * u
        if frame.space != "R3":
            moved = normalize_quadric(moved)
        return fundamental_forms(frame_from_positions(frame.grid, moved, frame.space)).shape.values

    return (shape_at(1.0) - shape_at(-1.0)) / (2.0 * step)


def complex_structure(second: FormField) -> np.ndarray:
    """Rotation by a quarter turn for II, as chart matrices."""
    return second.inverse() @ EPSILON * np.sqrt(second.det)[..., None, None]


class AntiholSection:
    """
    Field of endomorphisms anti-commuting with the complex structure of II.

    Equivalently trace-free and self-adjoint for II.
    """

    def __init__(self, values: np.ndarray, second: FormField):
        self.values = np.asarray(values, dtype=float)
        self.second = second

    @classmethod
    def from_symmetric(cls, second: FormField, s: np.ndarray) -> "AntiholSection":
        """Section II^-1 S0, S0 the II-trace-free part of a symmetric field S."""
        s = 0.5 * (s + np.swapaxes(s, -1, -2))
        inv = second.inverse()
        half_trace = 0.5 * np.trace(inv @ s, axis1=-2, axis2=-1)
        s0 = s - half_trace[..., None, None] * second.values
        return cls(inv @ s0, second)

    @classmethod
    def random(cls, forms: SurfaceForms, rng: np.random.Generator, degree: int = 2) -> "AntiholSection":
        """Smooth random section from a polynomial ambient tensor field."""
        frame = forms.frame
        d = frame.grid.directions()
        dim = frame.position.shape[-1]
        q = np.zeros(d.shape[:-1] + (dim, dim))
        for _ in range(degree + 1):
            c = rng.standard_normal((dim, dim))
            c = c + c.T
            weight = 1.0 + d @ rng.standard_normal(3)
            q += weight[..., None, None] * c
        x_th, x_ph = frame.projected_tangents()
        s = np.empty(d.shape[:-1] + (2, 2))
        for a, xa in enumerate((x_th, x_ph)):
            for b, xb in enumerate((x_th, x_ph)):
                s[..., a, b] = np.einsum("...i,...ij,...j->...", xa, q, xb)
        return cls.from_symmetric(forms.second, s)

    def anticommutation_residual(self) -> float:
        j = complex_structure(self.second)
        defect = self.values @ j + j @ self.values
        return float(np.max(np.abs(defect)) / np.max(np.abs(self.values)))

    def trace_residual(self) -> float:
        return float(np.max(np.abs(np.trace(self.values, axis1=-2, axis2=-1))))

    def self_adjoint_residual(self) -> float:
        s = self.second.values @ self.values
        return float(np.max(np.abs(s - np.swapaxes(s, -1, -2))) / np.max(np.abs(s)))

    def det(self) -> np.ndarray:
        """
        Determinant per node, computed in an orthonormal frame of II.

        In that frame the section is a trace-free symmetric matrix, so its
        determinant is -(a^2 + b^2) and never positive.
        """
        low = np.linalg.cholesky(self.second.values)
        s = self.second.values @ self.values
        s = 0.5 * (s + np.swapaxes(s, -1, -2))
        inv_low = np.linalg.inv(low)
        t = inv_low @ s @ np.swapaxes(inv_low, -1, -2)
        a = 0.5 * (t[..., 0, 0] - t[..., 1, 1])
        b = t[..., 0, 1]
        return -(a * a + b * b)


def covariant_derivative(forms: SurfaceForms, v: np.ndarray) -> np.ndarray:
    """
    nabla v for a chart vector field, as matrices M[..., k, i] = (nabla_i v)^k.

    Computed through the ambient field v^a X_a so that the pole rows need no
    Christoffel symbols.
    """
    frame = forms.frame
    x_th, x_ph = frame.tangents
    ambient = v[..., :1] * x_th + v[..., 1:] * x_ph
    d = frame.grid.gradient(ambient)
    m = np.swapaxes(pairing(frame.space, d, frame.tangents), -1, -2)  # m[l, i] = <d_i V, X_l>
    return forms.first.inverse() @ m


def _antiholomorphic_part(forms: SurfaceForms, m: np.ndarray) -> AntiholSection:
    j = complex_structure(forms.second)
    return AntiholSection(m + j @ m @ j, forms.second)


def dbar_I(forms: SurfaceForms, v: np.ndarray) -> AntiholSection:
    """(dbar_I v)(X) = nabla_X v + J nabla_JX v."""
    return _antiholomorphic_part(forms, covariant_derivative(forms, v))


def _nabla_tilde(forms: SurfaceForms, w: np.ndarray) -> np.ndarray:
    b = forms.shape.values
    bw = np.einsum("...kl,...l->...k", b, w)
    return forms.shape.inverse() @ covariant_derivative(forms, bw)


def dbar_III(forms: SurfaceForms, w: np.ndarray) -> AntiholSection:
    """d-bar operator built on the connection X, Y -> B^-1 nabla_X(B Y)."""
    return _antiholomorphic_part(forms, _nabla_tilde(forms, w))


def dbar_II(forms: SurfaceForms, v: np.ndarray) -> AntiholSection:
    """d-bar operator of the Levi-Civita connection of II."""
    m = 0.5 * (covariant_derivative(forms, v) + _nabla_tilde(forms, v))
    return _antiholomorphic_part(forms, m)


def isometric_completion(forms: SurfaceForms, w: np.ndarray) -> DeformField:
    """
    Deformation u = lam N + B w whose delta I vanishes, for w in the kernel of dbar_III.

    lam is half the trace of B^-1 nabla(B w).
    """
    b = forms.shape.values
    v = np.einsum("...kl,...l->...k", b, w)
    lam = 0.5 * np.trace(_nabla_tilde(forms, w), axis1=-2, axis2=-1)
    return DeformField.from_split(forms.frame, lam, v)


def exterior_derivative(forms: SurfaceForms, h: np.ndarray) -> np.ndarray:
    """
    Chart components of d^nabla h (d_theta, d_phi) for an endomorphism field h.

    h is read as the vector-valued 1-form X -> h(X), carried to ambient
    vectors h^k_a X_k, differentiated and projected back.
    """
    frame = forms.frame
    grid = frame.grid
    x_th, x_ph = frame.tangents
    beta_th = h[..., 0, 0, None] * x_th + h[..., 1, 0, None] * x_ph
    beta_ph = h[..., 0, 1, None] * x_th + h[..., 1, 1, None] * x_ph
    curl = grid.d_theta(beta_ph) - grid.d_phi(beta_th)
    rhs = np.stack([space_inner(frame.space, curl, t) for t in frame.tangents], axis=-1)
    return np.einsum("...kl,...l->...k", forms.first.inverse(), rhs)


def exterior_derivative_tilde(forms: SurfaceForms, h: np.ndarray) -> np.ndarray:
    """d^nabla~ h = B^-1 d^nabla (B h)."""
    b = forms.shape.values
    c = exterior_derivative(forms, b @ h)
    return np.einsum("...kl,...l->...k", forms.shape.inverse(), c)


def _norm_on_unit_area(c: np.ndarray, metric: FormField) -> np.ndarray:
    norm2 = np.einsum("...k,...kl,...l->...", c, metric.values, c)
    return np.sqrt(np.maximum(norm2, 0.0)) / np.sqrt(metric.det)


def bdot_residuals(forms: SurfaceForms, bdot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-node residuals |d^nabla B'| and tr(B^-1 B') of the shape-variation system."""
    codazzi = _norm_on_unit_area(exterior_derivative(forms, bdot), forms.first)
    trace = np.trace(forms.shape.inverse() @ bdot, axis1=-2, axis2=-1)
    return codazzi, trace


def bdot_star_residuals(forms: SurfaceForms, adot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-node residuals |d^nabla~ A'| and tr(A^-1 A') of the dual system, A = B^-1."""
    codazzi = _norm_on_unit_area(exterior_derivative_tilde(forms, adot), forms.third)
    trace = np.trace(forms.shape.values @ adot, axis1=-2, axis2=-1)
    return codazzi, trace


def _christoffel_curl(grid: SphereGrid, gamma: np.ndarray, m: np.ndarray) -> np.ndarray:
    d_th = grid.d_theta(m[..., :, 1], VECTOR_PARITY)
    d_ph = grid.d_phi(m[..., :, 0])
    return (
        d_th
        - d_ph
        + np.einsum("...kl,...l->...k", gamma[..., :, 0, :], m[..., :, 1])
        - np.einsum("...kl,...l->...k", gamma[..., :, 1, :], m[..., :, 0])
    )


def equivalence_residual(forms: SurfaceForms, bdot: np.ndarray) -> np.ndarray:
    """
    Per-node gap between d^nabla~ (B^-1 B') from the Christoffel symbols of
    nabla~ and B^-1 d^nabla B' from the ambient path.
    """
    gamma_t = connection_III(forms.first, forms.shape).values
    inv_b = forms.shape.inverse()
    direct = _christoffel_curl(forms.grid, gamma_t, inv_b @ bdot)
    via_b = np.einsum("...kl,...l->...k", inv_b, exterior_derivative(forms, bdot))
    return _norm_on_unit_area(direct - via_b, forms.third)


def equivalence_star_residual(forms: SurfaceForms, adot: np.ndarray) -> np.ndarray:
    """Per-node gap between d^nabla (B A') from Christoffel symbols and B d^nabla~ A'."""
    from .surface import christoffel

    gamma = christoffel(forms.first)
    b = forms.shape.values
    direct = _christoffel_curl(forms.grid, gamma, b @ adot)
    via_a = np.einsum("...kl,...l->...k", b, exterior_derivative_tilde(forms, adot))
    return _norm_on_unit_area(direct - via_a, forms.first)


def second_form_pairing(forms: SurfaceForms, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    """<a, h>_II = 1/2 tr(a* h), a* the II-adjoint, per node."""
    second = forms.second.values
    adjoint = forms.second.inverse() @ np.swapaxes(a, -1, -2) @ second
    return 0.5 * np.trace(adjoint @ h, axis1=-2, axis2=-1)


def adjoint_residual(forms: SurfaceForms, v: np.ndarray, h: AntiholSection, which: str = "III"):
    """
    Defect of the adjoint pairing on a closed surface.

    For ``which="III"`` it is
    int <J dbar_III v, h>_II da_II + int II(v, d^nabla h);
    for ``which="I"`` the pair (dbar_I, d^nabla~) is used instead.

    Returns:
        (defect, scale) with scale = |v|_II |h|_II in L2
    """
    grid = forms.grid
    j = complex_structure(forms.second)
    if which == "III":
        a = j @ dbar_III(forms, v).values
        dh = exterior_derivative(forms, h.values)
    elif which == "I":
        a = j @ dbar_I(forms, v).values
        dh = exterior_derivative_tilde(forms, h.values)
    else:
        raise PreconditionError(f"unknown operator: {which}")

    density = forms.second.area_density()
    first_term = grid.integrate(second_form_pairing(forms, a, h.values) * density)
    second_term = grid.integrate(np.einsum("...k,...kl,...l->...", v, forms.second.values, dh))
    defect = first_term + second_term

    v_norm = np.sqrt(grid.integrate(np.einsum("...k,...kl,...l->...", v, forms.second.values, v) * density))
    h_norm = np.sqrt(grid.integrate(second_form_pairing(forms, h.values, h.values) * density))
    return float(defect), float(v_norm * h_norm)


@dataclass
class EuclideanPatch:
    """A parametrized surface patch in R^3 over a rectangle."""

    u: np.ndarray
    v: np.ndarray
    points: np.ndarray

    @classmethod
    def graph(cls, u: np.ndarray, v: np.ndarray, height) -> "EuclideanPatch":
        """Graph z = height(x, y) over the rectangle u x v."""
        uu, vv = np.meshgrid(u, v, indexing="ij")
        return cls(u, v, np.stack([uu, vv, height(uu, vv)], axis=-1))

    def derivative(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.gradient(f, self.u, self.v, axis=(0, 1), edge_order=2))

    def tangents(self) -> tuple[np.ndarray, np.ndarray]:
        return self.derivative(self.points)

    def normal(self) -> np.ndarray:
        p_u, p_v = self.tangents()
        n = np.cross(p_u, p_v)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def first(self) -> np.ndarray:
        t = self.tangents()
        return pairing("R3", t, t)

    def shape(self) -> np.ndarray:
        """B with B X = -dN(X)."""
        t = self.tangents()
        dn = self.derivative(self.normal())
        second = -pairing("R3", dn, t)
        second = 0.5 * (second + np.swapaxes(second, -1, -2))
        return np.linalg.inv(self.first()) @ second

    def metric_variation(self, phidot: np.ndarray) -> np.ndarray:
        m = pairing("R3", self.derivative(phidot), self.tangents())
        return m + np.swapaxes(m, -1, -2)

    def integrate(self, form: tuple[np.ndarray, np.ndarray]) -> tuple[np.ndarray, float]:
        """
        Primitive of a closed vector-valued 1-form, zero at the first corner.

        Integrates along u then v, and along v then u; the second value is the
        largest gap between the two routes.
        """
        a_u, a_v = form
        first_leg = cumulative_trapezoid(a_u[:, :1], self.u, axis=0, initial=0)
        route_1 = first_leg + cumulative_trapezoid(a_v, self.v, axis=1, initial=0)
        second_leg = cumulative_trapezoid(a_v[:1, :], self.v, axis=1, initial=0)
        route_2 = second_leg + cumulative_trapezoid(a_u, self.u, axis=0, initial=0)
        return route_1, float(np.max(np.abs(route_1 - route_2)))


@dataclass
class IntegratedDeformation:
    """Result of integrating a shape variation on a patch."""

    phidot: np.ndarray
    rotation: np.ndarray
    path_residual: float
    recovered_bdot: np.ndarray


def integrate_deformation(
    patch: EuclideanPatch, bdot: np.ndarray, tolerance: float | None = None
) -> IntegratedDeformation:
    """
    Integrate a shape variation B' into a deformation of a patch.

    alpha = (dphi o B') x N integrates to Y, beta = Y x dphi integrates to phi'.
    The patch is a rectangle, hence simply connected; a solution of the
    shape-variation system makes both forms closed.

    Args:
        patch: The patch
        bdot: B' as (nu, nv, 2, 2) chart matrices
        tolerance: When given, a larger gap between integration routes raises

    Returns:
        phi', Y, the route gap and B' recomputed from phi' and Y
    """
    p_u, p_v = patch.tangents()
    n = patch.normal()
    alpha = tuple(
        np.cross(bdot[..., 0, a, None] * p_u + bdot[..., 1, a, None] * p_v, n) for a in range(2)
    )
    rotation, gap_y = patch.integrate(alpha)
    beta = (np.cross(rotation, p_u), np.cross(rotation, p_v))
    phidot, gap_phi = patch.integrate(beta)
    gap = max(gap_y, gap_phi)
    logger.info(f"integration route gap: {gap:.3e}")
    if tolerance is not None and gap > tolerance:
        logger.error(f"shape variation is not integrable: route gap {gap:.3e}")
        raise PreconditionError(f"path-dependent integration: gap {gap:.3e} > {tolerance:.3e}")

    ndot = np.cross(rotation, n)
    dn_u, dn_v = patch.derivative(ndot)
    dphi_u, dphi_v = patch.derivative(phidot)
    b = patch.shape()
    recovered = np.empty_like(bdot)
    inv_first = np.linalg.inv(patch.first())
    for a, dn in enumerate((dn_u, dn_v)):
        image = -dn - b[..., 0, a, None] * dphi_u - b[..., 1, a, None] * dphi_v
        rhs = np.stack([np.sum(image * p_u, axis=-1), np.sum(image * p_v, axis=-1)], axis=-1)
        recovered[..., :, a] = np.einsum("...kl,...l->...k", inv_first, rhs)
    return IntegratedDeformation(phidot, rotation, gap, recovered)


def herglotz_certificate(forms: SurfaceForms, bdot: np.ndarray) -> tuple[float, np.ndarray]:
    """
    Integral of 2 <p, N> det(B') da over a closed surface of R^3, and det B'.

    The origin must lie inside, with the surface star-shaped around it.
    """
    frame = forms.frame
    if frame.space != "R3":
        raise PreconditionError("the Herglotz certificate works on surfaces of R^3")
    support = np.sum(frame.position * frame.normal, axis=-1)
    if np.any(support >= 0):
        nodes = [tuple(int(c) for c in n) for n in np.argwhere(support >= 0)[:10]]
        logger.error(f"origin is not inside the star-shaped region: {nodes}")
        raise DegenerateGeometryError(
            "origin outside the star-shaped region of the surface", details={"nodes": nodes}
        )
    det = np.linalg.det(bdot)
    integral = frame.grid.integrate(2.0 * support * det * forms.first.area_density())
    return float(integral), det


def pogorelov_transfer_residual(frame: FrameField, u) -> np.ndarray:
    """
    Per-node residual of delta I(u) = cosh^2(rho) delta I_bar(Phi_H(u)) on the
    Klein image, in an orthonormal frame of I.
    """
    if frame.space != "H3":
        raise PreconditionError("the Pogorelov transfer works on frames of H^3")
    u = _field(u)
    x = frame.position
    if np.any(np.linalg.norm(x[..., 1:], axis=-1) < 1e-6):
        raise PreconditionError("surface meets the center disk of the Klein chart")
    grid = frame.grid
    image_points = klein_project(x)
    image_field = pogorelov_field_H(x, u)
    image_tangents = grid.gradient(image_points)
    m = pairing("R3", grid.gradient(image_field), image_tangents)
    transported = FormField((x[..., 0] ** 2)[..., None, None] * (m + np.swapaxes(m, -1, -2)))
    direct = metric_variation(frame, u)
    first = frame.induced_metric()
    diff = (direct - transported).in_frame_of(first)
    return np.max(np.abs(diff), axis=(-2, -1))


def de_sitter_basis(y: np.ndarray) -> np.ndarray:
    """Orthonormal basis (timelike first) of T_y S^3_1, as (..., 3, 4) rows."""
    y = np.asarray(y, dtype=float)
    y0 = y[..., :1]
    timelike = (np.eye(4)[0] + y0 * y) / np.sqrt(1.0 + y0**2)
    ys = y[..., 1:] / np.linalg.norm(y[..., 1:], axis=-1, keepdims=True)
    helper = np.where(np.abs(ys[..., :1]) < 0.9, np.eye(3)[0], np.eye(3)[1])
    w1 = np.cross(ys, helper)
    w1 /= np.linalg.norm(w1, axis=-1, keepdims=True)
    w2 = np.cross(ys, w1)
    zero = np.zeros(y.shape[:-1] + (1,))
    return np.stack(
        [timelike, np.concatenate([zero, w1], axis=-1), np.concatenate([zero, w2], axis=-1)],
        axis=-2,
    )


def frame_components(values: np.ndarray, metric: FormField) -> np.ndarray:
    """Flatten symmetric forms to (11, sqrt2 * 12, 22) components in an orthonormal frame of metric."""
    s = FormField(values).in_frame_of(metric)
    return np.concatenate(
        [s[..., 0, 0].ravel(), np.sqrt(2.0) * s[..., 0, 1].ravel(), s[..., 1, 1].ravel()]
    )


class RigidityOperator:
    """
    Sparse map from deformation coefficients (3 per node) to the components of
    delta I or delta III in an orthonormal frame (3 per node).
    """

    def __init__(
        self,
        frame: FrameField,
        which: str = "I",
        metric: FormField | None = None,
        basis: np.ndarray | None = None,
        logger: logging.Logger | None = None,
    ):
        """
        Assemble the operator.

        Args:
            frame: Frame of the surface (H^3, S^3_1 or R^3)
            which: "I" for delta I, "III" for delta III
            metric: Form whose orthonormal frame measures the output
                (defaults to I, or III for delta III)
            basis: Per-node basis of the unknowns as (..., 3, dim) rows
                (defaults to an orthonormal tangent basis of the model)
            logger: Optional logger instance
        """
        if which not in ("I", "III"):
            raise PreconditionError(f"unknown rigidity operator: {which}")
        self.frame = frame
        self.which = which
        self.grid = frame.grid
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self.dim = frame.position.shape[-1]
        self.eta = _signature(frame.space)
        if basis is None:
            basis = self._default_basis()
        self.basis = basis
        if metric is None:
            metric = frame.induced_metric()
            if which == "III":
                metric = fundamental_forms(frame).third
        self.metric = metric
        self.matrix = self._assemble()
        self.logger.info(f"assembled delta {which} operator of shape {self.matrix.shape}")

    def _default_basis(self) -> np.ndarray:
        if self.frame.space == "H3":
            return tangent_basis(self.frame.position)
        if self.frame.space == "dS":
            return de_sitter_basis(self.frame.position)
        return np.broadcast_to(np.eye(3), self.frame.position.shape[:-1] + (3, 3))

    def _derivative(self, axis: str) -> sp.csr_matrix:
        return sp.kron(self.grid.stencil_matrix(axis), sp.identity(self.dim), format="csr")

    def _expansion(self) -> sp.csr_matrix:
        n, dim = self.grid.size, self.dim
        basis = self.basis.reshape(n, 3, dim)
        node = np.repeat(np.arange(n), 3 * dim)
        i = np.tile(np.repeat(np.arange(3), dim), n)
        mu = np.tile(np.arange(dim), 3 * n)
        return sp.csr_matrix(
            (basis.ravel(), (node * dim + mu, node * 3 + i)), shape=(n * dim, n * 3)
        )

    def _pairing_rows(self, vectors: np.ndarray) -> sp.csr_matrix:
        """Rows mapping nodal ambient vectors z to <z, vectors> per node."""
        n, dim = self.grid.size, self.dim
        values = (vectors.reshape(n, dim) * self.eta).ravel()
        node = np.repeat(np.arange(n), dim)
        return sp.csr_matrix(
            (values, (node, node * dim + np.tile(np.arange(dim), n))), shape=(n, n * dim)
        )

    def _variation_rows(self, tangents, operator: sp.csr_matrix):
        d_th, d_ph = self._derivative("theta"), self._derivative("phi")
        w_th, w_ph = self._pairing_rows(tangents[0]), self._pairing_rows(tangents[1])
        tt = 2.0 * (w_th @ d_th @ operator)
        tp = (w_ph @ d_th + w_th @ d_ph) @ operator
        pp = 2.0 * (w_ph @ d_ph @ operator)
        return tt, tp, pp

    def _normal_variation_operator(self, expansion: sp.csr_matrix) -> sp.csr_matrix:
        n, dim = self.grid.size, self.dim
        frame = self.frame
        w_n = self._pairing_rows(frame.normal)
        rhs = [sp.csr_matrix((n, 3 * n))]
        rows = [frame.normal * self.eta]
        if frame.space != "R3":
            rhs.append(-(w_n @ expansion))
            rows.append(frame.position * self.eta)
        for axis, t in zip(("theta", "phi"), frame.tangents):
            rhs.append(-(w_n @ self._derivative(axis) @ expansion))
            rows.append(t * self.eta)
        inverse = np.linalg.inv(np.stack(rows, axis=-2)).reshape(n, dim, dim)
        blocks = []
        for mu in range(dim):
            block = sum(sp.diags(inverse[:, mu, k]) @ rhs[k] for k in range(1, dim))
            blocks.append(sp.csr_matrix(block))
        component_major = sp.vstack(blocks, format="csr")
        perm = (np.arange(dim)[None, :] * n + np.arange(n)[:, None]).ravel()
        return component_major[perm]

    def _assemble(self) -> sp.csr_matrix:
        expansion = self._expansion()
        if self.which == "I":
            tt, tp, pp = self._variation_rows(self.frame.tangents, expansion)
        else:
            dual = dual_frame(self.frame)
            normal_op = self._normal_variation_operator(expansion)
            tt, tp, pp = self._variation_rows(dual.tangents, normal_op)

        p = self.metric.orthonormal_frame().reshape(-1, 2, 2)

        def combine(a, b):
            return (
                sp.diags(p[:, 0, a] * p[:, 0, b]) @ tt
                + sp.diags(p[:, 0, a] * p[:, 1, b] + p[:, 1, a] * p[:, 0, b]) @ tp
                + sp.diags(p[:, 1, a] * p[:, 1, b]) @ pp
            )

        return sp.vstack(
            [combine(0, 0), np.sqrt(2.0) * combine(0, 1), combine(1, 1)], format="csr"
        )

    def coefficients(self, u: np.ndarray) -> np.ndarray:
        """Coefficients of ambient tangent fields in the per-node basis."""
        u = np.asarray(u, dtype=float)
        norms = np.sum(self.basis * self.basis * self.eta, axis=-1)
        c = np.sum(self.basis * (u * self.eta)[..., None, :], axis=-1) / norms
        return c.ravel()

    def field(self, coefficients: np.ndarray) -> np.ndarray:
        c = coefficients.reshape(self.grid.shape + (3,))
        return np.einsum("...i,...ij->...j", c, self.basis)

    def killing_coefficients(self) -> np.ndarray:
        """Sampled Killing fields as columns (6 of them)."""
        x = self.frame.position
        if self.frame.space == "R3":
            eye = np.eye(3)
            fields = [np.broadcast_to(e, x.shape) for e in eye]
            fields += [np.cross(e, x) for e in eye]
        else:
            fields = [k(x) for k in KillingElement.basis()]
        return np.stack([self.coefficients(f) for f in fields], axis=-1)


@dataclass
class RigiditySpectrum:
    """Smallest singular values of a rigidity operator and the kernel they span."""

    which: str
    singular_values: np.ndarray
    kernel: np.ndarray
    s_max: float
    kernel_dim: int
    gap_ratio: float
    subspace_angle: float
    threshold: float
    required_gap: float
    passed: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "singular_values": [float(s) for s in self.singular_values],
            "s_max": self.s_max,
            "kernel_dim": self.kernel_dim,
            "gap_ratio": self.gap_ratio,
            "subspace_angle": self.subspace_angle,
            "threshold": self.threshold,
            "required_gap": self.required_gap,
            "passed": self.passed,
        }

    def require_gap(self) -> "RigiditySpectrum":
        if not self.passed:
            logger.error(
                f"rigidity gap unmet: kernel dimension {self.kernel_dim}, gap {self.gap_ratio:.3g}"
            )
            raise VerificationFailure(
                f"rigidity test failed: kernel dimension {self.kernel_dim}, "
                f"s7/s6 = {self.gap_ratio:.3g}",
                details=self.to_dict(),
            )
        return self


def operator_spectrum(matrix: sp.csr_matrix, count: int, dense_limit: int, seed: int = 0):
    """
    Smallest singular values (ascending), right singular vectors and the largest one.

    Dense SVD for small problems, otherwise shift-invert Lanczos on A^T A.
    """
    n = matrix.shape[1]
    if n <= dense_limit:
        _, s, vt = la.svd(matrix.toarray())
        order = np.argsort(s)
        return s[order[:count]], vt[order[:count]].T, float(s.max())
    normal = (matrix.T @ matrix).tocsc()
    rng = np.random.default_rng(seed)
    top = spla.eigsh(normal, k=1, which="LA", v0=rng.standard_normal(n), return_eigenvectors=False)
    s_max2 = float(top[0])
    values, vectors = spla.eigsh(
        normal, k=count, sigma=-1e-12 * s_max2, which="LM", v0=rng.standard_normal(n)
    )
    order = np.argsort(values)
    return np.sqrt(np.maximum(values[order], 0.0)), vectors[:, order], float(np.sqrt(s_max2))


def rigidity_kernel(frame: FrameField, which: str = "I", settings=None, count: int = 12) -> RigiditySpectrum:
    """
    Spectrum of the rigidity operator and its numerical kernel.

    ``which`` is "I" or "III" on a frame of H^3, or "euclidean" for the delta I
    operator of the Klein image in R^3.
    """
    tau = settings.kernel_tau if settings else 1e-6
    gap_required = settings.gap_ratio if settings else 10.0
    dense_limit = settings.dense_limit if settings else 6000
    seed = settings.seed if settings else 0

    if which == "euclidean":
        target = euclidean_frame(frame.grid, klein_project(frame.position))
        operator = RigidityOperator(target, "I")
    else:
        operator = RigidityOperator(frame, which)

    s, vectors, s_max = operator_spectrum(operator.matrix, count, dense_limit, seed)
    kernel_dim = int(np.sum(s <= tau * s_max))
    gap = float(s[6] / s[5]) if s[5] > 0 else float("inf")
    killing = operator.killing_coefficients()
    angle = float(np.max(la.subspace_angles(killing, vectors[:, :6])))
    passed = kernel_dim == 6 and gap >= gap_required
    logger.info(
        f"delta {which} spectrum: s1..s8 = {np.array2string(s[:8] / s_max, precision=3)} (relative), "
        f"kernel {kernel_dim}, gap {gap:.3g}, angle {angle:.3e}"
    )
    return RigiditySpectrum(
        which, s, vectors[:, :6], s_max, kernel_dim, gap, angle, tau, gap_required, passed
    )


def random_tangent_field(forms: SurfaceForms, rng: np.random.Generator, degree: int = 2) -> np.ndarray:
    """Chart components of the tangential part of a smooth random ambient field."""
    frame = forms.frame
    d = frame.grid.directions()
    dim = frame.position.shape[-1]
    ambient = np.zeros(d.shape[:-1] + (dim,))
    for _ in range(degree + 1):
        ambient += (1.0 + d @ rng.standard_normal(3))[..., None] * rng.standard_normal(dim)
    rhs = np.stack([space_inner(frame.space, ambient, t) for t in frame.tangents], axis=-1)
    return np.einsum("...kl,...l->...k", forms.first.inverse(), rhs)
