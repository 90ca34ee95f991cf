"""
Minkowski space R^4_1 with signature (-,+,+,+), the quadric models of
hyperbolic space H^3 and de Sitter space S^3_1, geodesics, and the calculus of
Killing fields (elements of so(3,1)).

Array helpers work on the last axis, so they apply to single vectors and to
whole grids of vectors alike.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import DegenerateGeometryError, PreconditionError

J = np.diag([-1.0, 1.0, 1.0, 1.0])
CENTER = np.array([1.0, 0.0, 0.0, 0.0])
QUADRIC_TOL = 1e-12


def _levi_civita(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        eps[perm] = np.linalg.det(np.eye(n)[list(perm)])
    return np.round(eps)


EPS3 = _levi_civita(3)
EPS4 = _levi_civita(4)


def coords(v) -> np.ndarray:
    """Coordinates of a LorentzVec, HPoint, DSPoint, TangentVec or array."""
    if isinstance(v, (HPoint, DSPoint)):
        return v.v.array
    if isinstance(v, LorentzVec):
        return v.array
    if isinstance(v, TangentVec):
        return v.dir.array
    return np.asarray(v, dtype=float)


def inner(u, v) -> np.ndarray:
    """Minkowski inner product over the last axis."""
    u = coords(u)
    v = coords(v)
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


def minkowski_inner(u, v) -> float:
    """Minkowski inner product of two vectors."""
    return float(inner(u, v))


def normalize_quadric(x: np.ndarray) -> np.ndarray:
    """Project onto the quadric <x,x> = +-1 by dividing by sqrt|<x,x>|."""
    x = coords(x)
    return x / np.sqrt(np.abs(inner(x, x)))[..., None]


def project_tangent(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of z onto the tangent space of the quadric at x."""
    x = coords(x)
    z = coords(z)
    sign = np.sign(inner(x, x))
    return z - (sign * inner(z, x))[..., None] * x


def wedge(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Cross product in the tangent space at x.

    The result w satisfies <w, z> = det[x, a, b, z]. At the model center it
    is the right-handed cross product of the spatial parts.
    """
    w = np.einsum("ijkl,...i,...j,...k->...l", EPS4, coords(x), coords(a), coords(b))
    return w * np.array([-1.0, 1.0, 1.0, 1.0])


def boost_frame(x: np.ndarray) -> np.ndarray:
    """
    The pure boost sending the center to x, as (..., 4, 4).

    Its columns 1..3 are a positively oriented orthonormal basis of T_x H^3.
    """
    x = coords(x)
    x0 = x[..., 0]
    xs = x[..., 1:]
    frame = np.zeros(x.shape[:-1] + (4, 4))
    frame[..., 0, 0] = x0
    frame[..., 0, 1:] = xs
    frame[..., 1:, 0] = xs
    frame[..., 1:, 1:] = np.eye(3) + xs[..., :, None] * xs[..., None, :] / (
        1.0 + x0
    )[..., None, None]
    return frame


def tangent_basis(x: np.ndarray) -> np.ndarray:
    """Orthonormal basis of T_x H^3 as (..., 3, 4) rows."""
    return np.swapaxes(boost_frame(x)[..., :, 1:], -1, -2)


def cross_matrix(b: np.ndarray) -> np.ndarray:
    """Matrix of p -> b x p in R^3."""
    b = np.asarray(b, dtype=float)
    return -np.einsum("ijk,...k->...ij", EPS3, b)


@dataclass(frozen=True)
class LorentzVec:
    """A vector of R^4_1."""

    x0: float
    x1: float
    x2: float
    x3: float

    @classmethod
    def from_array(cls, a) -> "LorentzVec":
        a = np.asarray(a, dtype=float)
        if a.shape != (4,) or not np.all(np.isfinite(a)):
            raise PreconditionError(f"expected 4 finite coordinates, got {a!r}")
        return cls(*(float(c) for c in a))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.x2, self.x3])


@dataclass(frozen=True)
class HPoint:
    """A point of H^3: <v,v> = -1 and v.x0 > 0."""

    v: LorentzVec

    def __post_init__(self):
        a = self.v.array
        if abs(inner(a, a) + 1.0) > QUADRIC_TOL * max(1.0, a[0] ** 2) or a[0] <= 0:
            raise PreconditionError(f"not on the hyperboloid: {a!r}")

    @classmethod
    def from_array(cls, a, renormalize: bool = False) -> "HPoint":
        a = np.asarray(a, dtype=float)
        if renormalize:
            a = normalize_quadric(a)
        return cls(LorentzVec.from_array(a))

    @classmethod
    def at_distance(cls, rho: float, direction) -> "HPoint":
        """The point at distance rho from the center along a unit direction."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        return cls.from_array(np.concatenate([[np.cosh(rho)], np.sinh(rho) * d]))

    @property
    def array(self) -> np.ndarray:
        return self.v.array


@dataclass(frozen=True)
class DSPoint:
    """A point of de Sitter space S^3_1: <v,v> = +1."""

    v: LorentzVec

    def __post_init__(self):
        a = self.v.array
        if abs(inner(a, a) - 1.0) > QUADRIC_TOL * max(1.0, a[0] ** 2):
            raise PreconditionError(f"not on de Sitter space: {a!r}")

    @classmethod
    def from_array(cls, a, renormalize: bool = False) -> "DSPoint":
        a = np.asarray(a, dtype=float)
        if renormalize:
            a = normalize_quadric(a)
        return cls(LorentzVec.from_array(a))

    @property
    def array(self) -> np.ndarray:
        return self.v.array


@dataclass(frozen=True)
class TangentVec:
    """An ambient vector tangent to a quadric at its base point."""

    base: HPoint | DSPoint
    dir: LorentzVec

    def __post_init__(self):
        x = self.base.array
        d = self.dir.array
        scale = max(1.0, float(np.max(np.abs(x))) * float(np.max(np.abs(d))))
        if abs(inner(x, d)) > 1e-10 * scale:
            raise PreconditionError("direction is not tangent at the base point")

    @classmethod
    def at(cls, base: HPoint | DSPoint, direction) -> "TangentVec":
        return cls(base, LorentzVec.from_array(direction))

    @property
    def array(self) -> np.ndarray:
        return self.dir.array


@dataclass(frozen=True, eq=False)
class KillingElement:
    """
    An infinitesimal isometry of H^3 as a 4x4 matrix of so(3,1).

    Optionally carries its translation/rotation pair at a base point.
    """

    mat: np.ndarray
    decomposition: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.array(self.mat, dtype=float)
        if m.shape != (4, 4):
            raise PreconditionError(f"expected a 4x4 matrix, got shape {m.shape}")
        defect = np.max(np.abs(m.T @ J + J @ m))
        if defect > QUADRIC_TOL * max(1.0, float(np.max(np.abs(m)))):
            raise PreconditionError(f"matrix is not in so(3,1): defect {defect:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @classmethod
    def from_vectors(cls, translation, rotation) -> "KillingElement":
        """Field whose value at the center is ``translation`` and whose rotation vector is ``rotation``."""
        a = np.asarray(translation, dtype=float)
        m = np.zeros((4, 4))
        m[0, 1:] = a
        m[1:, 0] = a
        m[1:, 1:] = cross_matrix(rotation)
        return cls(m)

    @classmethod
    def basis(cls) -> list["KillingElement"]:
        """Three translations and three rotations at the center."""
        eye = np.eye(3)
        zero = np.zeros(3)
        return [cls.from_vectors(e, zero) for e in eye] + [
            cls.from_vectors(zero, e) for e in eye
        ]

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 1.0) -> "KillingElement":
        return cls.from_vectors(
            scale * rng.standard_normal(3), scale * rng.standard_normal(3)
        )

    def __call__(self, x) -> np.ndarray:
        """Field value at x (arrays of points allowed)."""
        return coords(x) @ self.mat.T

    def __add__(self, other: "KillingElement") -> "KillingElement":
        return KillingElement(self.mat + other.mat)

    def __mul__(self, scalar: float) -> "KillingElement":
        return KillingElement(scalar * self.mat)

    __rmul__ = __mul__

    def translation_rotation(self) -> tuple[np.ndarray, np.ndarray]:
        """(translation, rotation) vectors at the center."""
        m = self.mat
        return m[1:, 0].copy(), np.array([m[3, 2], m[1, 3], m[2, 1]])


def h_dist(x, y) -> float:
    """Hyperbolic distance of two points of H^3."""
    a = coords(x)
    b = coords(y)
    if -inner(a, b) < 1.0 - 1e-9:
        raise DegenerateGeometryError(
            f"degenerate input: -<x,y> = {-inner(a, b):.12g} < 1 (off-quadric data)"
        )
    diff = a - b
    return float(2.0 * np.arcsinh(np.sqrt(max(inner(diff, diff), 0.0)) / 2.0))


def geodesic(x: HPoint, v, t: float) -> HPoint:
    """Point at parameter t on the geodesic through x with unit direction v."""
    xa = coords(x)
    va = coords(v)
    if abs(inner(va, va) - 1.0) > 1e-9:
        raise PreconditionError(f"non-unit direction: <v,v> = {inner(va, va):.12g}")
    if abs(inner(xa, va)) > 1e-9 * max(1.0, xa[0]):
        raise PreconditionError("direction is not tangent at x")
    y = np.cosh(t) * xa + np.sinh(t) * va
    return HPoint.from_array(normalize_quadric(y))


def killing_eval(k: KillingElement, x: HPoint) -> TangentVec:
    """Value of the Killing field k at x."""
    return TangentVec.at(x, k(x))


def _rotation_vector(x: np.ndarray, mat: np.ndarray) -> np.ndarray:
    basis = tangent_basis(x)
    acted = basis @ mat.T
    return 0.5 * np.sum(wedge(x[..., None, :], basis, acted), axis=-2)


def killing_decompose(k: KillingElement, x: HPoint) -> tuple[TangentVec, TangentVec]:
    """
    Translation and rotation parts of k at x.

    tau is the field value at x; sigma is the rotation vector of the covariant
    differential, so that nabla_w k = sigma ^ w for every w in T_x.
    """
    xa = coords(x)
    tau = k(xa)
    sigma = _rotation_vector(xa, k.mat)
    return TangentVec.at(x, tau), TangentVec.at(x, sigma)


def killing_decompose_array(mat: np.ndarray, x: np.ndarray):
    """Vectorized (tau, sigma) of one matrix over an array of points."""
    tau = x @ mat.T
    return tau, _rotation_vector(x, mat)


def killing_compose(tau, sigma, x) -> KillingElement:
    """The unique element of so(3,1) with translation tau and rotation sigma at x."""
    xa = coords(x)
    ta = coords(tau)
    sa = coords(sigma)
    translation = np.outer(xa, ta) @ J - np.outer(ta, xa) @ J
    m = np.einsum("pqji,p,q->ij", EPS4, xa, sa)
    return KillingElement(translation + J @ m, decomposition=(ta, sa))


def killing_transport_derivative(
    grid, x: np.ndarray, tau: np.ndarray, sigma: np.ndarray, w_chart: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Flat connection D on sections (tau, sigma) sampled on a grid of H^3 points.

    D_w(tau, sigma) = (nabla_w tau + w ^ sigma, nabla_w sigma - w ^ tau), with
    nabla the projection of the finite-difference derivative onto T_x.

    Args:
        grid: SphereGrid carrying the section
        x: Base points, shape (n_theta, n_phi, 4)
        tau: Translation parts, same shape
        sigma: Rotation parts, same shape
        w_chart: Chart components of w per node, shape (n_theta, n_phi, 2)

    Returns:
        (tau', sigma') arrays of the grid shape
    """
    x_th, x_ph = grid.gradient(x)
    t_th, t_ph = grid.gradient(tau)
    s_th, s_ph = grid.gradient(sigma)
    a = w_chart[..., :1]
    b = w_chart[..., 1:]
    w = a * x_th + b * x_ph
    d_tau = project_tangent(x, a * t_th + b * t_ph)
    d_sigma = project_tangent(x, a * s_th + b * s_ph)
    return d_tau + wedge(x, w, sigma), d_sigma - wedge(x, w, tau)
