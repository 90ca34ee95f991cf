"""
Discrete convex surfaces over the sphere grid: radial graphs in H^3, frames in
H^3, de Sitter space or R^3, the three fundamental forms, curvature, the
Gauss-Codazzi residuals and the connections of I, II and III.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectSphereBivariateSpline

from .errors import DegenerateGeometryError, PreconditionError
from .grid import SphereGrid, chart_parity
from .lorentz import inner, project_tangent, wedge

logger = logging.getLogger(__name__)

SPACES = ("H3", "dS", "R3")

# Parity of a mixed or covariant 2-tensor across the pole
TENSOR_PARITY = chart_parity(2)
# Parity of the chart components of a vector
VECTOR_PARITY = chart_parity(1)


def space_inner(space: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Ambient inner product of the given space over the last axis."""
    if space == "R3":
        return np.sum(a * b, axis=-1)
    return inner(a, b)


def tangent_part(space: str, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Projection of an ambient vector onto the tangent space of the model at x."""
    if space == "R3":
        return z
    return project_tangent(x, z)


def pairing(space: str, a: tuple, b: tuple) -> np.ndarray:
    """Matrix field [<a_i, b_j>] for two pairs of ambient vector fields."""
    return np.stack(
        [
            np.stack([space_inner(space, a[i], b[j]) for j in range(2)], axis=-1)
            for i in range(2)
        ],
        axis=-2,
    )


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


class FormField:
    """Symmetric bilinear forms per node, in the (theta, phi) chart basis."""

    def __init__(self, values: np.ndarray, tag: str = "I"):
        values = np.asarray(values, dtype=float)
        if values.ndim != 4 or values.shape[-2:] != (2, 2):
            raise PreconditionError(f"expected an (n_theta, n_phi, 2, 2) array, got {values.shape}")
        self.values = _symmetrize(values)
        self.tag = tag

    @classmethod
    def from_efg(cls, efg: np.ndarray, tag: str = "I") -> "FormField":
        efg = np.asarray(efg, dtype=float)
        values = np.empty(efg.shape[:-1] + (2, 2))
        values[..., 0, 0] = efg[..., 0]
        values[..., 0, 1] = values[..., 1, 0] = efg[..., 1]
        values[..., 1, 1] = efg[..., 2]
        return cls(values, tag)

    @classmethod
    def round(cls, grid: SphereGrid, scale: float = 1.0, tag: str = "I") -> "FormField":
        """scale times the round metric of S^2."""
        th, _ = grid.mesh()
        efg = np.stack([np.ones_like(th), np.zeros_like(th), np.sin(th) ** 2], axis=-1)
        return cls.from_efg(scale * efg, tag)

    def __repr__(self) -> str:
        return f"FormField({self.tag}, {self.grid})"

    @property
    def grid(self) -> SphereGrid:
        return SphereGrid(*self.values.shape[:2])

    @property
    def efg(self) -> np.ndarray:
        v = self.values
        return np.stack([v[..., 0, 0], v[..., 0, 1], v[..., 1, 1]], axis=-1)

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.values)

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.values)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.values)

    def is_positive_definite(self) -> bool:
        return bool(np.all(self.eigenvalues()[..., 0] > 0))

    def area_density(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.det, 0.0))

    def area(self) -> float:
        return self.grid.integrate(self.area_density())

    def orthonormal_frame(self) -> np.ndarray:
        """
        Chart components of an orthonormal frame of this form.

        Column 0 is d_theta normalized; column 1 completes it, positively
        oriented.
        """
        e, f, g = self.efg[..., 0], self.efg[..., 1], self.efg[..., 2]
        root_e = np.sqrt(e)
        root_d = np.sqrt(e * g - f * f)
        frame = np.zeros(self.values.shape)
        frame[..., 0, 0] = 1.0 / root_e
        frame[..., 0, 1] = -f / (root_e * root_d)
        frame[..., 1, 1] = root_e / root_d
        return frame

    def in_frame_of(self, metric: "FormField") -> np.ndarray:
        """Components P^T S P in an orthonormal frame of ``metric``."""
        p = metric.orthonormal_frame()
        return np.swapaxes(p, -1, -2) @ self.values @ p

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def relative_error(self, other: "FormField", mask: np.ndarray | None = None) -> float:
        diff = np.abs(self.values - other.values)
        if mask is not None:
            diff = diff[mask]
        return float(np.max(diff) / other.max_abs())

    def retag(self, tag: str) -> "FormField":
        return FormField(self.values, tag)

    def __add__(self, other: "FormField") -> "FormField":
        return FormField(self.values + other.values, self.tag)

    def __sub__(self, other: "FormField") -> "FormField":
        return FormField(self.values - other.values, self.tag)

    def __mul__(self, scalar) -> "FormField":
        scalar = np.asarray(scalar, dtype=float)
        if scalar.ndim:
            scalar = scalar[..., None, None]
        return FormField(scalar * self.values, self.tag)

    __rmul__ = __mul__

    def __neg__(self) -> "FormField":
        return FormField(-self.values, self.tag)


class ShapeField:
    """Shape operator per node, as a 2x2 matrix acting on chart components."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.values)

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.values, axis1=-2, axis2=-1)

    def inverse(self) -> np.ndarray:
        det = self.det
        if np.any(np.abs(det) < 1e-14):
            raise DegenerateGeometryError("singular shape operator")
        return np.linalg.inv(self.values)

    def principal_curvatures(self) -> np.ndarray:
        """Ascending eigenvalues (k1, k2); real because B is self-adjoint for I."""
        half = 0.5 * self.trace
        disc = np.sqrt(np.maximum(half * half - self.det, 0.0))
        return np.stack([half - disc, half + disc], axis=-1)


@dataclass
class FrameField:
    """Positions, chart tangents and unit normal per node."""

    grid: SphereGrid
    position: np.ndarray
    tangents: tuple[np.ndarray, np.ndarray]
    normal: np.ndarray
    space: str = "H3"

    def projected_tangents(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(tangent_part(self.space, self.position, t) for t in self.tangents)

    def induced_metric(self) -> FormField:
        return FormField(pairing(self.space, self.tangents, self.tangents), "I")

    def radius(self) -> np.ndarray:
        """Distance of each node from the model center (H^3 frames)."""
        return np.arccosh(np.maximum(self.position[..., 0], 1.0))


def frame_from_positions(grid: SphereGrid, position: np.ndarray, space: str = "H3") -> FrameField:
    """
    Build a frame from sampled positions.

    Tangents are fourth-order finite differences. In H^3 and R^3 the normal
    points into the convex side. In de Sitter space it is the future unit
    timelike normal.
    """
    if space not in SPACES:
        raise PreconditionError(f"unknown space: {space}")
    position = np.asarray(position, dtype=float)
    x_th, x_ph = grid.gradient(position)

    if space == "R3":
        w = np.cross(x_th, x_ph)
        norm2 = np.sum(w * w, axis=-1)
    else:
        w = wedge(position, x_th, x_ph)
        norm2 = inner(w, w)

    scale = np.max(np.abs(norm2))
    if space == "dS":
        bad = norm2 > -1e-14 * scale
    else:
        bad = norm2 < 1e-14 * scale
    if np.any(bad):
        nodes = [tuple(int(c) for c in n) for n in np.argwhere(bad)[:10]]
        kind = "non-spacelike dual nodes" if space == "dS" else "non-immersed chart"
        logger.error(f"{kind} at {nodes}")
        raise DegenerateGeometryError(f"{kind} at {nodes}", details={"nodes": nodes})

    normal = w / np.sqrt(np.abs(norm2))[..., None]
    if space == "dS":
        normal = normal * np.sign(normal[..., :1])
    else:
        normal = -normal
    return FrameField(grid, position, (x_th, x_ph), normal, space)


class RadialSurface:
    """A radial graph over the sphere grid: node (i, j) sits at distance rho[i, j] from the center."""

    def __init__(self, rho: np.ndarray):
        rho = np.asarray(rho, dtype=float)
        if rho.ndim != 2:
            raise PreconditionError(f"rho must be a 2D array, got shape {rho.shape}")
        self.grid = SphereGrid(*rho.shape)
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise PreconditionError("rho must be finite and positive at every node")
        self.rho = rho

    def __repr__(self) -> str:
        return f"RadialSurface({self.grid}, rho in [{self.rho.min():.6g}, {self.rho.max():.6g}])"

    @property
    def n_theta(self) -> int:
        return self.grid.n_theta

    @property
    def n_phi(self) -> int:
        return self.grid.n_phi

    @classmethod
    def sphere(cls, grid: SphereGrid, rho: float) -> "RadialSurface":
        return cls(np.full(grid.shape, float(rho)))

    @classmethod
    def from_function(cls, grid: SphereGrid, func) -> "RadialSurface":
        """Surface with rho = func(directions), directions of shape (..., 3)."""
        return cls(func(grid.directions()))

    @classmethod
    def perturbed(
        cls,
        grid: SphereGrid,
        rng: np.random.Generator,
        base: float = 1.0,
        amplitude: float = 0.1,
        degree: int = 4,
    ) -> "RadialSurface":
        """
        base plus a random smooth perturbation of sup-norm ``amplitude``.

        The perturbation is a polynomial in the direction components of
        degree at most ``degree`` with coefficients damped like 1/l^2.
        """
        d = grid.directions()
        f = np.zeros(grid.shape)
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                for k in range(degree + 1 - i - j):
                    total = i + j + k
                    if total == 0:
                        continue
                    c = rng.standard_normal() / total**2
                    f += c * d[..., 0] ** i * d[..., 1] ** j * d[..., 2] ** k
        f -= np.mean(f)
        f *= amplitude / np.max(np.abs(f))
        return cls(base + f)

    @classmethod
    def klein_ellipsoid(cls, grid: SphereGrid, a: float, c: float) -> "RadialSurface":
        """Surface whose Klein image is the ellipsoid with semi-axes (a, a, c), a, c < 1."""
        if not (0 < a < 1 and 0 < c < 1):
            raise PreconditionError(f"ellipsoid semi-axes must lie in (0, 1), got {a}, {c}")
        th, _ = grid.mesh()
        r = 1.0 / np.sqrt(np.sin(th) ** 2 / a**2 + np.cos(th) ** 2 / c**2)
        return cls(np.arctanh(r))

    def positions(self) -> np.ndarray:
        d = self.grid.directions()
        return np.concatenate(
            [np.cosh(self.rho)[..., None], np.sinh(self.rho)[..., None] * d], axis=-1
        )

    def frame(self) -> FrameField:
        return embed(self)


def embed(s: RadialSurface) -> FrameField:
    """Frame of a radial surface in H^3."""
    return frame_from_positions(s.grid, s.positions(), "H3")


@dataclass
class SurfaceForms:
    """I, II, III and B of a frame, with diagnostics."""

    frame: FrameField
    first: FormField
    second: FormField
    third: FormField
    shape: ShapeField
    asymmetry: float
    nonconvex: list = field(default_factory=list)

    @property
    def grid(self) -> SphereGrid:
        return self.frame.grid

    @property
    def normal(self) -> np.ndarray:
        return self.frame.normal

    @property
    def space(self) -> str:
        return self.frame.space

    def principal_curvatures(self) -> np.ndarray:
        return self.shape.principal_curvatures()

    def min_curvature(self) -> float:
        return float(np.min(self.principal_curvatures()[..., 0]))

    def max_curvature(self) -> float:
        return float(np.max(self.principal_curvatures()[..., 1]))

    def require_convex(self):
        """Raise if any node is not strictly convex."""
        if self.nonconvex:
            logger.error(f"non-convex nodes: {self.nonconvex[:10]}")
            raise DegenerateGeometryError(
                f"surface is not strictly convex at {len(self.nonconvex)} nodes",
                details={"nodes": self.nonconvex[:10]},
            )
        return self


def fundamental_forms(frame: FrameField, normal_derivatives: tuple | None = None) -> SurfaceForms:
    """
    I, II, III and the shape operator of a frame.

    II is -<dN(X_a), X_b> symmetrized; the asymmetry removed is logged. Then
    B = I^-1 II and III = II I^-1 II. Exact derivatives of the normal may be
    passed instead of the finite differences.
    """
    if normal_derivatives is None:
        normal_derivatives = frame.grid.gradient(frame.normal)
    n_th, n_ph = normal_derivatives
    first = frame.induced_metric()

    raw = -pairing(frame.space, (n_th, n_ph), frame.tangents)
    scale = max(float(np.max(np.abs(raw))), 1e-300)
    asymmetry = float(np.max(np.abs(raw - np.swapaxes(raw, -1, -2)))) / scale
    logger.info(f"II asymmetry before symmetrization: {asymmetry:.3e}")

    second = FormField(raw, "II")
    inv_first = first.inverse()
    shape = ShapeField(inv_first @ second.values)
    third = FormField(second.values @ inv_first @ second.values, "III")

    k = shape.principal_curvatures()
    nonconvex = [tuple(int(c) for c in n) for n in np.argwhere(k[..., 0] <= 0)]
    if nonconvex:
        logger.warning(f"{len(nonconvex)} non-convex nodes, first at {nonconvex[0]}")
    return SurfaceForms(frame, first, second, third, shape, asymmetry, nonconvex)


def third_form_direct(frame: FrameField) -> FormField:
    """III as <nabla N, nabla N>, computed from the normal alone."""
    n_th, n_ph = frame.grid.gradient(frame.normal)
    d = (tangent_part(frame.space, frame.position, n_th), tangent_part(frame.space, frame.position, n_ph))
    return FormField(pairing(frame.space, d, d), "III")


def sphere_forms(grid: SphereGrid, rho: float) -> SurfaceForms:
    """Forms of the geodesic sphere of radius rho from exact chart derivatives."""
    d = grid.directions()
    d_th, d_ph = grid.direction_derivatives()
    s, c = np.sinh(rho), np.cosh(rho)

    def lift(v, t0, scale):
        return np.concatenate([np.full(v.shape[:-1] + (1,), t0), scale * v], axis=-1)

    position = lift(d, c, s)
    normal = -lift(d, s, c)
    tangents = (lift(d_th, 0.0, s), lift(d_ph, 0.0, s))
    frame = FrameField(grid, position, tangents, normal, "H3")
    return fundamental_forms(frame, (lift(d_th, 0.0, -c), lift(d_ph, 0.0, -c)))


def euclidean_frame(grid: SphereGrid, points: np.ndarray) -> FrameField:
    return frame_from_positions(grid, points, "R3")


def euclidean_forms(grid: SphereGrid, points: np.ndarray) -> SurfaceForms:
    """Forms of a closed surface in R^3 sampled on the sphere grid."""
    return fundamental_forms(euclidean_frame(grid, points))


def gaussian_curvature(metric: FormField) -> np.ndarray:
    """
    Intrinsic curvature of a metric on the sphere grid.

    Uses the connection form of the orthonormal coframe
    w1 = sqrt(E) dtheta + F/sqrt(E) dphi, w2 = sqrt(D)/sqrt(E) dphi.
    """
    grid = metric.grid
    e, f, g = metric.efg[..., 0], metric.efg[..., 1], metric.efg[..., 2]
    root_e = np.sqrt(e)
    root_d = np.sqrt(e * g - f * f)

    a = grid.d_theta(f / root_e, -1.0) - grid.d_phi(root_e)
    b = grid.d_theta(root_d / root_e, -1.0)
    p = a / root_d
    conn_theta = p * root_e
    conn_phi = (p * f + b) / root_e
    return -(grid.d_theta(conn_phi) - grid.d_phi(conn_theta)) / root_d


def christoffel(metric: FormField) -> np.ndarray:
    """Christoffel symbols G[..., k, i, j] of a metric."""
    grid = metric.grid
    g = metric.values
    dg = np.stack(
        [grid.d_theta(g, TENSOR_PARITY), grid.d_phi(g)], axis=-3
    )  # dg[..., i, a, b] = d_i g_ab
    lowered = 0.5 * (
        np.einsum("...jki->...kij", dg)
        + np.einsum("...ikj->...kij", dg)
        - dg
    )
    # lowered[..., k, i, j] = 1/2 (d_i g_kj + d_j g_ki - d_k g_ij)
    return np.einsum("...kl,...lij->...kij", metric.inverse(), lowered)


def _covariant_d_endomorphism(grid: SphereGrid, gamma: np.ndarray, m: np.ndarray) -> np.ndarray:
    """(nabla_i M)^k_j for a field of endomorphisms, indexed [..., i, k, j]."""
    dm = np.stack([grid.d_theta(m, TENSOR_PARITY), grid.d_phi(m)], axis=-3)
    return (
        dm
        + np.einsum("...kil,...lj->...ikj", gamma, m)
        - np.einsum("...lij,...kl->...ikj", gamma, m)
    )


def gauss_codazzi_residuals(first: FormField, shape: ShapeField, space: str = "H3"):
    """
    Per-node Gauss and Codazzi residuals.

    Gauss is det B - (K + 1) in H^3, det B - (1 - K) in de Sitter space and
    det B - K in R^3. Codazzi is the I-norm of d^nabla B on a unit area.
    """
    k = gaussian_curvature(first)
    det = shape.det
    if space == "H3":
        gauss = det - (k + 1.0)
    elif space == "dS":
        gauss = det - (1.0 - k)
    elif space == "R3":
        gauss = det - k
    else:
        raise PreconditionError(f"unknown space: {space}")

    gamma = christoffel(first)
    nabla_b = _covariant_d_endomorphism(first.grid, gamma, shape.values)
    curl = nabla_b[..., 0, :, 1] - nabla_b[..., 1, :, 0]
    norm2 = np.einsum("...k,...kl,...l->...", curl, first.values, curl)
    codazzi = np.sqrt(np.maximum(norm2, 0.0)) / np.sqrt(first.det)
    return gauss, codazzi


@dataclass
class Connection:
    """Christoffel symbols G[..., k, i, j] of a torsion-free connection."""

    values: np.ndarray
    name: str


def connection_I(first: FormField, shape: ShapeField | None = None) -> Connection:
    return Connection(christoffel(first), "I")


def connection_III(first: FormField, shape: ShapeField) -> Connection:
    """Connection X, Y -> B^-1 nabla_X (B Y)."""
    gamma = christoffel(first)
    dm = np.stack(
        [first.grid.d_theta(shape.values, TENSOR_PARITY), first.grid.d_phi(shape.values)],
        axis=-3,
    )
    inner_part = np.einsum("...imj->...mij", dm) + np.einsum("...mil,...lj->...mij", gamma, shape.values)
    return Connection(np.einsum("...km,...mij->...kij", shape.inverse(), inner_part), "III")


def connection_II(first: FormField, shape: ShapeField) -> Connection:
    """Mean of the connections of I and III; the Levi-Civita connection of II."""
    return Connection(
        0.5 * (connection_I(first).values + connection_III(first, shape).values), "II"
    )


def torsion_residual(conn: Connection) -> np.ndarray:
    g = conn.values
    return np.max(np.abs(g - np.swapaxes(g, -1, -2)), axis=(-3, -2, -1))


def compatibility_residual(conn: Connection, metric: FormField) -> np.ndarray:
    """Per node max |d_i g_jk - g(nabla_i d_j, d_k) - g(d_j, nabla_i d_k)|, relative to |g|."""
    grid = metric.grid
    g = metric.values
    dg = np.stack([grid.d_theta(g, TENSOR_PARITY), grid.d_phi(g)], axis=-3)
    lowered = np.einsum("...lij,...lk->...ijk", conn.values, g)
    defect = dg - lowered - np.swapaxes(lowered, -1, -2)
    return np.max(np.abs(defect), axis=(-3, -2, -1)) / metric.max_abs()


def mixed_rule_residual(first: FormField, second: FormField, shape: ShapeField) -> np.ndarray:
    """Per node max |d_i II_jk - II(nabla_i d_j, d_k) - II(d_j, nabla~_i d_k)|, relative to |II|."""
    grid = first.grid
    h = second.values
    gamma = connection_I(first).values
    gamma_t = connection_III(first, shape).values
    dh = np.stack([grid.d_theta(h, TENSOR_PARITY), grid.d_phi(h)], axis=-3)
    a = np.einsum("...lij,...lk->...ijk", gamma, h)
    b = np.einsum("...lik,...jl->...ijk", gamma_t, h)
    return np.max(np.abs(dh - a - b), axis=(-3, -2, -1)) / second.max_abs()


def _direction_map_orientation(grid: SphereGrid, directions: np.ndarray) -> np.ndarray:
    d_th, d_ph = grid.gradient(directions)
    return np.sum(np.cross(d_th, d_ph) * directions, axis=-1)


def resample_radial(grid: SphereGrid, position: np.ndarray, max_iterations: int = 200) -> RadialSurface:
    """
    Re-express a surface of H^3 given in an arbitrary chart as a radial graph.

    Each ambient coordinate is interpolated over the chart with a spherical
    spline, then for every grid direction the chart point whose ray direction
    matches is found by fixed-point iteration.
    """
    position = np.asarray(position, dtype=float)
    spatial = position[..., 1:]
    directions = spatial / np.linalg.norm(spatial, axis=-1, keepdims=True)
    orientation = _direction_map_orientation(grid, directions)
    bad = orientation <= 0
    if np.any(bad):
        nodes = [tuple(int(c) for c in n) for n in np.argwhere(bad)[:10]]
        logger.error(f"radial-graph property lost at {nodes}")
        raise DegenerateGeometryError(f"radial-graph property lost at {nodes}", details={"nodes": nodes})

    splines = [
        RectSphereBivariateSpline(grid.theta, grid.phi, position[..., mu], s=0)
        for mu in range(4)
    ]

    def evaluate(s: np.ndarray) -> np.ndarray:
        theta = np.arccos(np.clip(s[..., 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(s[..., 1], s[..., 0]), 2.0 * np.pi)
        return np.stack([sp.ev(theta, phi) for sp in splines], axis=-1)

    target = grid.directions()
    s = target.copy()
    for _ in range(max_iterations):
        x = evaluate(s)
        current = x[..., 1:] / np.linalg.norm(x[..., 1:], axis=-1, keepdims=True)
        miss = target - current
        if np.max(np.abs(miss)) < 1e-14:
            break
        s = s + miss
        s /= np.linalg.norm(s, axis=-1, keepdims=True)
    else:
        if np.max(np.abs(miss)) > 1e-10:
            raise DegenerateGeometryError(
                f"radial resampling did not converge: direction miss {np.max(np.abs(miss)):.3e}"
            )
    x = evaluate(s)
    return RadialSurface(np.arcsinh(np.linalg.norm(x[..., 1:], axis=-1)))
