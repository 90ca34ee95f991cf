"""
Latitude-longitude grid over S^2 with half-offset latitudes.

No node sits on a pole. Derivatives in theta use two ghost rows on each side,
filled by the antipodal-in-phi rule: the row at -theta_i is the row at theta_i
rotated by pi in longitude. Chart tensor components pick up a sign
(-1)^(number of theta indices) across the pole, so every stencil is
fourth-order centered, including the rings next to the poles.
"""

import itertools

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionError

# Fourth-order centered first-derivative weights at offsets -2..2
STENCIL_OFFSETS = (-2, -1, 1, 2)
STENCIL_WEIGHTS = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)


def chart_parity(rank: int) -> np.ndarray:
    """
    Sign pattern of a rank-``rank`` chart tensor across the pole.

    Index 0 is theta, index 1 is phi. Mixed tensors use the same pattern.
    """
    parity = np.empty((2,) * rank)
    for index in itertools.product((0, 1), repeat=rank):
        parity[index] = (-1.0) ** sum(1 for i in index if i == 0)
    return parity


class SphereGrid:
    """Structured grid with nodes (theta_i, phi_j)."""

    def __init__(self, n_theta: int, n_phi: int):
        """
        Initialize the grid.

        Args:
            n_theta: Number of latitude rows (at least 4)
            n_phi: Number of longitudes (even, at least 8)
        """
        if n_theta < 4 or n_phi < 8 or n_phi % 2:
            raise PreconditionError(
                f"insufficient stencil: grid {n_theta}x{n_phi} needs n_theta >= 4 "
                "and an even n_phi >= 8"
            )
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.theta = np.pi * (np.arange(self.n_theta) + 0.5) / self.n_theta
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self.h_theta = np.pi / self.n_theta
        self.h_phi = 2.0 * np.pi / self.n_phi

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SphereGrid)
            and self.n_theta == other.n_theta
            and self.n_phi == other.n_phi
        )

    def __repr__(self) -> str:
        return f"SphereGrid({self.n_theta}, {self.n_phi})"

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (theta, phi) arrays of the grid shape."""
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    def directions(self) -> np.ndarray:
        """Unit vectors of the nodes, shape (n_theta, n_phi, 3)."""
        th, ph = self.mesh()
        return np.stack(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
        )

    def direction_derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact chart derivatives of :meth:`directions`."""
        th, ph = self.mesh()
        d_th = np.stack(
            [np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1
        )
        d_ph = np.stack(
            [-np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph), np.zeros_like(th)],
            axis=-1,
        )
        return d_th, d_ph

    def band(self, min_sin: float = 0.3) -> np.ndarray:
        """Boolean mask of the rows with sin(theta) >= min_sin."""
        mask = np.sin(self.theta) >= min_sin
        return np.repeat(mask[:, None], self.n_phi, axis=1)

    def pad_theta(self, f: np.ndarray, parity=1.0) -> np.ndarray:
        """
        Add two ghost rows above and below.

        Args:
            f: Array of shape (n_theta, n_phi, ...)
            parity: Scalar or array broadcasting to f.shape[2:]

        Returns:
            Array of shape (n_theta + 4, n_phi, ...)
        """
        half = self.n_phi // 2
        top = np.roll(f[[1, 0]], half, axis=1) * parity
        bottom = np.roll(f[[-1, -2]], half, axis=1) * parity
        return np.concatenate([top, f, bottom], axis=0)

    def d_theta(self, f: np.ndarray, parity=1.0) -> np.ndarray:
        """Fourth-order theta derivative; ``parity`` describes ``f``."""
        g = self.pad_theta(np.asarray(f, dtype=float), parity)
        return (-g[4:] + 8.0 * g[3:-1] - 8.0 * g[1:-3] + g[:-4]) / (12.0 * self.h_theta)

    def d_phi(self, f: np.ndarray) -> np.ndarray:
        """Fourth-order periodic phi derivative."""
        f = np.asarray(f, dtype=float)
        return (
            -np.roll(f, -2, axis=1)
            + 8.0 * np.roll(f, -1, axis=1)
            - 8.0 * np.roll(f, 1, axis=1)
            + np.roll(f, 2, axis=1)
        ) / (12.0 * self.h_phi)

    def gradient(self, f: np.ndarray, parity=1.0) -> tuple[np.ndarray, np.ndarray]:
        """Both chart derivatives of f."""
        return self.d_theta(f, parity), self.d_phi(f)

    def stencil_matrix(self, axis: str) -> sp.csr_matrix:
        """
        Sparse matrix of the derivative of a scalar (parity +1) nodal field.

        Nodes are numbered row-major: node (i, j) has index i * n_phi + j.
        """
        n_t, n_p = self.shape
        half = n_p // 2
        rows, cols, vals = [], [], []
        ii, jj = np.meshgrid(np.arange(n_t), np.arange(n_p), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        node = ii * n_p + jj
        if axis == "theta":
            step = self.h_theta
            for offset, weight in zip(STENCIL_OFFSETS, STENCIL_WEIGHTS):
                r = ii + offset
                c = jj.copy()
                low = r < 0
                high = r >= n_t
                r = np.where(low, -r - 1, r)
                r = np.where(high, 2 * n_t - r - 1, r)
                c = np.where(low | high, (c + half) % n_p, c)
                rows.append(node)
                cols.append(r * n_p + c)
                vals.append(np.full(node.shape, weight / step))
        elif axis == "phi":
            step = self.h_phi
            for offset, weight in zip(STENCIL_OFFSETS, STENCIL_WEIGHTS):
                rows.append(node)
                cols.append(ii * n_p + (jj + offset) % n_p)
                vals.append(np.full(node.shape, weight / step))
        else:
            raise PreconditionError(f"unknown axis: {axis}")
        n = self.size
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()

    def integrate(self, density: np.ndarray) -> float:
        """Midpoint quadrature of a density given per unit dtheta dphi."""
        return float(np.sum(density) * self.h_theta * self.h_phi)

    def refine(self) -> "SphereGrid":
        """Grid with both sizes doubled."""
        return SphereGrid(2 * self.n_theta, 2 * self.n_phi)
