"""
Closed-geodesic search for a metric on the sphere grid.

The metric is carried to an ambient 3x3 tensor field on S^2 and interpolated
with spherical splines. A closed curve is a ring of points on S^2; its discrete
energy is the sum of arc^2 * g(t, t) over its segments. Closed geodesics are
critical points of that energy, usually saddles, so instead of descending the
energy the search solves grad E = 0 with a sparse least-squares method,
starting from great circles.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RectSphereBivariateSpline
from scipy.optimize import least_squares

from .errors import PreconditionError
from .surface import FormField

# Upper-triangle entries of the ambient tensor, in spline order
TENSOR_ENTRIES = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
FD_STEP = 1e-6


@dataclass
class GeodesicResult:
    """Best closed geodesic found, with the outcome of every seed."""

    length: float
    curve: np.ndarray
    residual: float
    converged: bool
    seed_index: int
    seeds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "residual": self.residual,
            "converged": self.converged,
            "seed_index": self.seed_index,
            "seeds": self.seeds,
        }


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def great_circle(normal: np.ndarray, n_points: int) -> np.ndarray:
    """Evenly spaced points of the great circle orthogonal to ``normal``, half-step phase."""
    n = _normalize(np.asarray(normal, dtype=float))
    helper = np.eye(3)[np.argmin(np.abs(n))]
    a = _normalize(np.cross(n, helper))
    b = np.cross(n, a)
    angles = 2.0 * np.pi * (np.arange(n_points) + 0.5) / n_points
    return np.cos(angles)[:, None] * a + np.sin(angles)[:, None] * b


class ClosedGeodesicSearch:
    """Multi-start search for the shortest closed geodesic of a metric on S^2."""

    def __init__(
        self,
        metric: FormField,
        n_points: int = 96,
        random_seeds: int = 10,
        seed: int = 0,
        threads: int = 1,
        tolerance: float = 1e-8,
        max_evaluations: int = 2000,
        logger: logging.Logger | None = None,
    ):
        """
        Initialize the search.

        Args:
            metric: Positive definite metric on the sphere grid
            n_points: Points per discrete curve
            random_seeds: Number of random great circles besides the 3 coordinate ones
            seed: Seed of the random great circles
            threads: Worker threads for independent seeds
            tolerance: Relative gradient norm below which a curve counts as converged
            max_evaluations: Residual evaluations allowed per seed
            logger: Optional logger instance
        """
        if not metric.is_positive_definite():
            raise PreconditionError("closed geodesics need a positive definite metric")
        if n_points < 12:
            raise PreconditionError(f"need at least 12 points per curve, got {n_points}")
        self.metric = metric
        self.n_points = n_points
        self.random_seeds = random_seeds
        self.seed = seed
        self.threads = threads
        self.tolerance = tolerance
        self.max_evaluations = max_evaluations
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self._splines = self._build_splines()

    def _build_splines(self) -> list:
        grid = self.metric.grid
        th, ph = grid.mesh()
        e_th = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1)
        e_ph = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=-1)
        d = grid.directions()
        efg = self.metric.efg
        s = np.sin(th)
        h00 = efg[..., 0]
        h01 = efg[..., 1] / s
        h11 = efg[..., 2] / s**2

        def outer(a, b):
            return a[..., :, None] * b[..., None, :]

        tensor = (
            h00[..., None, None] * outer(e_th, e_th)
            + h01[..., None, None] * (outer(e_th, e_ph) + outer(e_ph, e_th))
            + h11[..., None, None] * outer(e_ph, e_ph)
            + (0.5 * (h00 + h11))[..., None, None] * outer(d, d)
        )
        return [
            RectSphereBivariateSpline(grid.theta, grid.phi, tensor[..., i, j], s=0)
            for i, j in TENSOR_ENTRIES
        ]

    def tensor(self, points: np.ndarray) -> np.ndarray:
        """Ambient metric tensor at unit vectors, shape (..., 3, 3)."""
        p = _normalize(points)
        theta = np.arccos(np.clip(p[..., 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(p[..., 1], p[..., 0]), 2.0 * np.pi)
        out = np.empty(p.shape[:-1] + (3, 3))
        for (i, j), spline in zip(TENSOR_ENTRIES, self._splines):
            out[..., i, j] = out[..., j, i] = spline.ev(theta, phi)
        return out

    def _segments(self, points: np.ndarray):
        q_pts = np.roll(points, -1, axis=0)
        diff = q_pts - points
        chord = np.linalg.norm(diff, axis=-1)
        t = diff / chord[:, None]
        total = points + q_pts
        mid_norm = np.linalg.norm(total, axis=-1)
        mid = total / mid_norm[:, None]
        arc = 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))
        return chord, t, mid, mid_norm, arc

    def length(self, points: np.ndarray) -> float:
        _, t, mid, _, arc = self._segments(points)
        q = np.einsum("ni,nij,nj->n", t, self.tensor(mid), t)
        return float(np.sum(arc * np.sqrt(q)))

    def energy(self, points: np.ndarray) -> float:
        _, t, mid, _, arc = self._segments(points)
        q = np.einsum("ni,nij,nj->n", t, self.tensor(mid), t)
        return float(np.sum(arc**2 * q))

    def energy_gradient(self, points: np.ndarray) -> np.ndarray:
        """Ambient gradient of the discrete energy with respect to each point."""
        chord, t, mid, mid_norm, arc = self._segments(points)
        tensor = self.tensor(mid)
        t_tensor = np.einsum("nij,nj->ni", tensor, t)
        q = np.sum(t * t_tensor, axis=-1)
        d_arc = 1.0 / np.sqrt(np.maximum(1.0 - 0.25 * chord**2, 1e-300))

        dq_mid = np.empty_like(mid)
        for k in range(3):
            step = np.zeros(3)
            step[k] = FD_STEP
            forward = np.einsum("ni,nij,nj->n", t, self.tensor(mid + step), t)
            backward = np.einsum("ni,nij,nj->n", t, self.tensor(mid - step), t)
            dq_mid[:, k] = (forward - backward) / (2.0 * FD_STEP)
        dq_mid -= np.sum(dq_mid * mid, axis=-1, keepdims=True) * mid
        dq_sum = dq_mid / mid_norm[:, None]
        dq_diff = 2.0 * (t_tensor - q[:, None] * t) / chord[:, None]

        along = (2.0 * arc * d_arc * q)[:, None] * t
        grad_q = along + arc[:, None] ** 2 * (dq_diff + dq_sum)
        grad_p = -along + arc[:, None] ** 2 * (dq_sum - dq_diff)
        return grad_p + np.roll(grad_q, 1, axis=0)

    def _sparsity(self) -> sp.csr_matrix:
        n = self.n_points
        rows, cols = [], []
        for i in range(n):
            for offset in (-1, 0, 1):
                j = (i + offset) % n
                for a in range(2):
                    for b in range(2):
                        rows.append(2 * i + a)
                        cols.append(2 * j + b)
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(2 * n, 2 * n))

    def _solve(self, index: int, start: np.ndarray) -> dict:
        helper = np.where(np.abs(start[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
        u = _normalize(np.cross(start, helper))
        v = np.cross(start, u)
        scale = self.energy(start) / (2.0 * np.pi)

        def curve(z):
            z = z.reshape(-1, 2)
            return start + z[:, :1] * u + z[:, 1:] * v

        def residual(z):
            w = curve(z)
            norm = np.linalg.norm(w, axis=-1, keepdims=True)
            p = w / norm
            g = self.energy_gradient(p)
            radial = np.sum(g * p, axis=-1, keepdims=True)
            g_tan = (g - radial * p) / norm
            return np.stack([np.sum(g_tan * u, axis=-1), np.sum(g_tan * v, axis=-1)], axis=-1).ravel() / scale

        result = least_squares(
            residual,
            np.zeros(2 * self.n_points),
            jac="3-point",
            jac_sparsity=self._sparsity(),
            method="trf",
            tr_solver="lsmr",
            diff_step=1e-5,
            ftol=1e-14,
            xtol=1e-14,
            gtol=1e-14,
            max_nfev=self.max_evaluations,
        )
        points = _normalize(curve(result.x))
        res = float(np.max(np.abs(result.fun)))
        converged = bool(res <= self.tolerance)
        length = self.length(points)
        self.logger.info(
            f"seed {index}: length {length:.10g}, residual {res:.3e}, "
            f"evaluations {result.nfev}, converged {converged}"
        )
        return {"index": index, "length": length, "residual": res, "converged": converged, "curve": points}

    def starts(self) -> list[np.ndarray]:
        normals = [np.eye(3)[2], np.eye(3)[0], np.eye(3)[1]]
        rng = np.random.default_rng(self.seed)
        normals += [rng.standard_normal(3) for _ in range(self.random_seeds)]
        return [great_circle(n, self.n_points) for n in normals]

    def run(self) -> GeodesicResult:
        starts = self.starts()
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            outcomes = list(pool.map(self._solve, range(len(starts)), starts))

        converged = [o for o in outcomes if o["converged"]]
        pool_of = converged or outcomes
        if not converged:
            self.logger.warning("no seed converged; reporting the shortest unconverged curve")
        best = min(pool_of, key=lambda o: (o["length"], o["index"]))
        return GeodesicResult(
            length=best["length"],
            curve=best["curve"],
            residual=best["residual"],
            converged=best["converged"],
            seed_index=best["index"],
            seeds=[
                {k: o[k] for k in ("index", "length", "residual", "converged")}
                for o in outcomes
            ],
        )


def shortest_closed_geodesic(metric: FormField, settings=None, **kwargs) -> GeodesicResult:
    """Shortest closed geodesic found from great-circle starts; see ClosedGeodesicSearch."""
    if settings is not None:
        kwargs.setdefault("n_points", settings.geodesic_points)
        kwargs.setdefault("random_seeds", settings.geodesic_random_seeds)
        kwargs.setdefault("seed", settings.seed)
        kwargs.setdefault("threads", settings.threads)
    return ClosedGeodesicSearch(metric, **kwargs).run()
