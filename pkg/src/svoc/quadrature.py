"""Uniform grids and product quadrature for weakly singular kernels.

All integrals carry a factor (t - s)^(alpha - 1) with 0 < alpha < 1, so the
kernel factor is integrated exactly over each cell and only the smooth factor
is sampled.  Weights depend on k - j alone, hence one table per grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on [0, T] with n cells."""

    T: float
    n: int

    @property
    def h(self) -> float:
        return self.T / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        """t_k = k h for k = 0..n (length n + 1)."""
        return np.linspace(0.0, self.T, self.n + 1)

    @cached_property
    def midpoints(self) -> np.ndarray:
        """tau_k = (k + 1/2) h for k = 0..n-1 (length n)."""
        return (np.arange(self.n) + 0.5) * self.h


def make_grid(T: float, n: int) -> Grid:
    if not T > 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    if n < 2:
        raise ValueError(f"need at least 2 cells, got {n}")
    return Grid(float(T), int(n))


@dataclass(frozen=True)
class SingularWeights:
    """Rectangle-rule weights for int_0^{t_k} phi(s) (t_k - s)^(alpha-1) ds.

    phi is sampled at the left endpoint of each cell; the singular factor is
    integrated exactly, giving weight omega[k - j] on phi(t_j):

        omega[d] = h^alpha (d^alpha - (d-1)^alpha) / alpha,   d >= 1.

    Row sums telescope to t_k^alpha / alpha exactly.
    """

    alpha: float
    grid: Grid
    omega: np.ndarray

    def row(self, k: int) -> np.ndarray:
        """Weights on phi(t_0), ..., phi(t_{k-1}); a view, do not mutate."""
        if not 0 <= k <= self.grid.n:
            raise IndexError(f"row index {k} outside 0..{self.grid.n}")
        return self.omega[k:0:-1]

    def weight(self, k: int, j: int) -> float:
        if not 0 <= j < k <= self.grid.n:
            raise IndexError(f"need 0 <= j < k <= n, got j={j}, k={k}")
        return float(self.omega[k - j])

    def dense(self) -> np.ndarray:
        """Full lower-triangular (n+1, n+1) matrix; for tests and small n."""
        n = self.grid.n
        w = np.zeros((n + 1, n + 1))
        for k in range(1, n + 1):
            w[k, :k] = self.row(k)
        return w


def singular_weights(alpha: float, grid: Grid) -> SingularWeights:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    d = np.arange(grid.n + 1, dtype=float)
    omega = np.zeros(grid.n + 1)
    omega[1:] = grid.h**alpha * (d[1:] ** alpha - d[:-1] ** alpha) / alpha
    return SingularWeights(alpha, grid, omega)


def singular_integral(values, weights: SingularWeights, k: int) -> float:
    """Approximate int_0^{t_k} phi(s)(t_k - s)^(alpha-1) ds from node samples.

    Accepts a plain array of node values or any trajectory object carrying
    node-placed samples in a ``values`` attribute.
    """
    placement = getattr(values, "placement", "nodes")
    if placement != "nodes":
        raise ValueError(f"need node samples, got placement {placement!r}")
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if values.shape != (weights.grid.n + 1,):
        raise ValueError(f"expected {weights.grid.n + 1} node values, got {values.shape}")
    if k == 0:
        return 0.0
    return float(weights.row(k) @ values[:k])


@dataclass(frozen=True)
class MidpointWeights:
    """Midpoint-rule weights for singular integrals anchored at a midpoint.

    One table serves both orientations.  With mu[0] = (h/2)^alpha / alpha and
    mu[d] = h^alpha ((d + 1/2)^alpha - (d - 1/2)^alpha) / alpha:

      * tail: int_{tau_k}^{T} phi(tau) (tau - tau_k)^(alpha-1) dtau
        gets weight mu[j - k] on phi(tau_j), j = k..n-1; the first half cell
        [tau_k, t_{k+1}] is sampled at tau_k itself.
      * head: int_0^{tau_k} phi(s) (tau_k - s)^(alpha-1) ds gets weight
        mu[k - j] on phi(tau_j), j = 0..k.

    Row sums telescope to (T - tau_k)^alpha / alpha and tau_k^alpha / alpha.
    """

    alpha: float
    grid: Grid
    mu: np.ndarray

    def tail_row(self, k: int) -> np.ndarray:
        """Weights on phi(tau_k), ..., phi(tau_{n-1}); a view."""
        if not 0 <= k < self.grid.n:
            raise IndexError(f"midpoint index {k} outside 0..{self.grid.n - 1}")
        return self.mu[: self.grid.n - k]

    def head_row(self, k: int) -> np.ndarray:
        """Weights on phi(tau_0), ..., phi(tau_k)."""
        if not 0 <= k < self.grid.n:
            raise IndexError(f"midpoint index {k} outside 0..{self.grid.n - 1}")
        return self.mu[k::-1]


def midpoint_weights(alpha: float, grid: Grid) -> MidpointWeights:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    h = grid.h
    d = np.arange(grid.n, dtype=float)
    mu = np.empty(grid.n)
    mu[0] = (0.5 * h) ** alpha / alpha
    mu[1:] = h**alpha * ((d[1:] + 0.5) ** alpha - (d[1:] - 0.5) ** alpha) / alpha
    return MidpointWeights(alpha, grid, mu)


@dataclass(frozen=True)
class TrapezoidWeights:
    """Product-trapezoid weights: phi interpolated linearly on each cell.

    Row k has weight left[k - j] + right[k - j] on phi(t_j) for interior j,
    only the left-cell part at j = 0 and only right[0] on phi(t_k) itself,
    which makes the associated state march implicit.
    """

    alpha: float
    grid: Grid
    left: np.ndarray
    right: np.ndarray

    @property
    def diagonal(self) -> float:
        """Weight on the sample at the pole, h^alpha / (alpha (alpha+1))."""
        return float(self.right[0])

    def row(self, k: int) -> np.ndarray:
        """Weights on phi(t_0), ..., phi(t_k) (length k + 1), k >= 1."""
        if not 1 <= k <= self.grid.n:
            raise IndexError(f"row index {k} outside 1..{self.grid.n}")
        out = np.zeros(k + 1)
        out[: k] += self.left[k:0:-1]
        out[1:] += self.right[k - 1 :: -1]
        return out


def trapezoid_weights(alpha: float, grid: Grid) -> TrapezoidWeights:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    h = grid.h
    d = np.arange(grid.n + 1, dtype=float)
    a = d[:-1] * h  # distance from pole to the cell edge nearer to it
    b = d[1:] * h
    w0 = (b**alpha - a**alpha) / alpha
    w1 = (b ** (alpha + 1.0) - a ** (alpha + 1.0)) / (alpha + 1.0)
    # cell [t_j, t_{j+1}] with pole at distance d = k - j >= 1 from its left edge
    left = np.zeros(grid.n + 1)
    left[1:] = (w1 - a * w0) / h
    right = (b * w0 - w1) / h  # same cell seen from its right endpoint, d >= 0
    return TrapezoidWeights(alpha, grid, left, right)


def trapezoid(values: np.ndarray, h: float) -> float:
    """Composite trapezoid rule over uniformly spaced samples."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("need a 1-d array with at least two samples")
    return float(h * (0.5 * (values[0] + values[-1]) + values[1:-1].sum()))
