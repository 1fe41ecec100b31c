"""Resolvent and response kernels for linear weakly singular Volterra operators.

For a kernel A(t,s)(t-s)^(alpha-1) the resolvent is stored in split form

    Phi(t,s) = A(t,s) (t-s)^(alpha-1) + R(t,s),

with R bounded off the diagonal and obtained by marching the fixed-point
relation column by column.  The doubly singular cell integrals

    int A(t,tau)(t-tau)^(alpha-1) [A(tau,s)(tau-s)^(alpha-1)] dtau

are split at each cell midpoint: on each half the factor whose pole is nearer
is integrated in closed form while the other factor and the smooth data are
sampled at the half's midpoint.  Everything is O(N^3) time, O(N^2) memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import KernelAssemblyError
from .problem import ProblemSpec
from .quadrature import Grid, midpoint_weights, singular_weights
from .state import Trajectory

KernelFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _sample(fn: KernelFn, t, s, shape: tuple, keep: np.ndarray) -> np.ndarray:
    """Evaluate a two-time coefficient on a lattice, zeroing entries outside
    the validity mask (kernels need only be defined for s <= t)."""
    with np.errstate(all="ignore"):
        raw = np.broadcast_to(np.asarray(fn(t, s), dtype=float), shape)
    return np.where(keep, raw, 0.0)


@dataclass(frozen=True, eq=False)
class RegularizedKernel:
    """Singular-plus-regular storage of a two-time kernel.

    sing_coeff[k, j] samples the coefficient of (t-s)^(alpha-1) at node pairs
    (t_k, t_j); regular[k, j] samples the bounded remainder on the closed lower
    triangle, with the diagonal filled by constant extension from below so that
    interpolation near the diagonal never reads garbage.  c_fn evaluates the
    singular coefficient off the node lattice.
    """

    alpha: float
    grid: Grid
    sing_coeff: np.ndarray
    regular: np.ndarray
    c_fn: Optional[KernelFn] = None
    is_zero: bool = False

    def value(self, k: int, j: int) -> float:
        """Pointwise kernel value at (t_k, t_j), j < k."""
        if not 0 <= j < k <= self.grid.n:
            raise IndexError(f"need 0 <= j < k <= n, got j={j}, k={k}")
        dt = (k - j) * self.grid.h
        return float(self.sing_coeff[k, j] * dt ** (self.alpha - 1.0) + self.regular[k, j])


class _HalfCellTables:
    """Per-grid tables for the midpoint-split product quadrature.

    With d = cells from the left pole and e = cells to the right pole, the
    left half of cell j integrates the left factor exactly iff d < e and the
    right half iff d < e - 1: the nearer pole wins each half.
    """

    def __init__(self, alpha: float, grid: Grid):
        n, h = grid.n, grid.h
        self.alpha = alpha
        self.grid = grid
        i = np.arange(n + 1, dtype=float)
        pa = (i * h) ** alpha                      # (i h)^alpha
        ph = ((i[:-1] + 0.5) * h) ** alpha         # ((i + 1/2) h)^alpha
        self.q1 = ((i[:-1] + 0.25) * h) ** (alpha - 1.0)
        self.q3 = ((i[:-1] + 0.75) * h) ** (alpha - 1.0)
        wl1 = (ph - pa[:-1]) / alpha               # exact left factor, left half
        wl2 = (pa[1:] - ph) / alpha                # exact left factor, right half
        self.wr1 = np.zeros(n + 1)                 # exact right factor, by e = k - j
        self.wr2 = np.zeros(n + 1)
        self.wr1[1:] = (pa[1:] - ph) / alpha
        self.wr2[1:] = (ph - pa[:-1]) / alpha
        d = np.subtract.outer(np.arange(n), np.arange(n)).clip(min=0)
        self.two_j_minus_c = 2 * np.arange(n)[:, None] - np.arange(n)[None, :]
        self.wl1_2d = wl1[d]
        self.wl2_2d = wl2[d]
        self.q1_2d = self.q1[d]
        self.q3_2d = self.q3[d]
        self.tri = np.tril(np.ones((n, n), dtype=bool))  # cell j >= column c

    def product_factors(self, left1: np.ndarray, left2: np.ndarray):
        """Column-dependent halves of the doubly singular product: the smooth
        left samples paired with the exact-left weight and with the sampled
        left singular factor."""
        return (left1 * self.wl1_2d, left1 * self.q1_2d,
                left2 * self.wl2_2d, left2 * self.q3_2d)


def _product_row(tb: _HalfCellTables, k: int, bl1: np.ndarray, br1: np.ndarray,
                 bl2: np.ndarray, br2: np.ndarray, ar1: np.ndarray,
                 ar2: np.ndarray) -> np.ndarray:
    """Row-k quadrature of the doubly singular product against smooth data."""
    sl = slice(0, k)
    m1 = tb.two_j_minus_c[sl, sl] < k
    m2 = tb.two_j_minus_c[sl, sl] < k - 1
    q3e = tb.q3[k - 1 :: -1]      # sampled right factor where the left is exact
    q1e = tb.q1[k - 1 :: -1]
    w1 = tb.wr1[k:0:-1]           # exact right weights where the right is exact
    w2 = tb.wr2[k:0:-1]
    half1 = np.where(m1, bl1[sl, sl] * q3e[:, None], br1[sl, sl] * w1[:, None])
    half2 = np.where(m2, bl2[sl, sl] * q1e[:, None], br2[sl, sl] * w2[:, None])
    return ar1 @ half1 + ar2 @ half2


def _smooth_row(tb: _HalfCellTables, k: int, R: np.ndarray, ar1: np.ndarray,
                ar2: np.ndarray, last_row_known: bool = False) -> np.ndarray:
    """Row-k quadrature of A(t_k,tau)(t_k-tau)^(alpha-1) against the regular
    part, interpolated to half-cell midpoints with constant extension at the
    edges (a column's not-yet-known entries read as zero)."""
    V = R[: k + 1, :k].copy()
    idx = np.arange(k)
    V[idx, idx] = R[idx + 1, idx]
    V[k, :] = R[k, :k] if last_row_known else R[k - 1, :k]
    r1 = 0.75 * V[:-1] + 0.25 * V[1:]
    r2 = 0.25 * V[:-1] + 0.75 * V[1:]
    # cells left of the column lie outside [s, t]; the diagonal extension
    # must not leak into them through interpolation
    r1 = np.where(tb.tri[:k, :k], r1, 0.0)
    r2 = np.where(tb.tri[:k, :k], r2, 0.0)
    return (ar1 * tb.wr1[k:0:-1]) @ r1 + (ar2 * tb.wr2[k:0:-1]) @ r2


def _quarter_samples(fn: KernelFn, grid: Grid) -> tuple[np.ndarray, ...]:
    """Smooth kernel samples at the half-cell midpoints: (cell, column) arrays
    for the left factor and (row, cell) arrays for the right factor."""
    n, h = grid.n, grid.h
    t = grid.nodes
    cells = t[:-1]
    tri = np.tril(np.ones((n, n), dtype=bool))
    left1 = _sample(fn, cells[:, None] + 0.25 * h, t[None, :-1], (n, n), tri)
    left2 = _sample(fn, cells[:, None] + 0.75 * h, t[None, :-1], (n, n), tri)
    rows = np.arange(n + 1)[:, None] > np.arange(n)[None, :]
    right1 = _sample(fn, t[:, None], cells[None, :] + 0.25 * h, (n + 1, n), rows)
    right2 = _sample(fn, t[:, None], cells[None, :] + 0.75 * h, (n + 1, n), rows)
    return left1, left2, right1, right2


def _extend_diagonal(R: np.ndarray) -> None:
    n = R.shape[0] - 1
    idx = np.arange(n)
    R[idx, idx] = R[idx + 1, idx]
    R[n, n] = R[n, n - 1]


def build_resolvent(A: KernelFn, alpha: float, grid: Grid) -> RegularizedKernel:
    """Resolvent of the operator with kernel A(t,s)(t-s)^(alpha-1).

    A must accept broadcasting array arguments (t, s) and be finite on the
    closed triangle s <= t; values outside it are never used.
    """
    n = grid.n
    t = grid.nodes
    lower = np.arange(n + 1)[:, None] >= np.arange(n + 1)[None, :]
    c = _sample(A, t[:, None], t[None, :], (n + 1, n + 1), lower)
    A1, A2, AR1, AR2 = _quarter_samples(A, grid)
    if not (c.any() or A1.any() or A2.any()):
        return RegularizedKernel(alpha, grid, c, np.zeros_like(c), c_fn=A, is_zero=True)

    tb = _HalfCellTables(alpha, grid)
    bl1, br1, bl2, br2 = tb.product_factors(A1, A2)
    R = np.zeros((n + 1, n + 1))
    P = np.zeros((n + 1, n + 1))  # table-independent doubly singular part
    for k in range(1, n + 1):
        P[k, :k] = _product_row(tb, k, bl1, br1, bl2, br2, AR1[k, :k], AR2[k, :k])
        row = P[k, :k] + _smooth_row(tb, k, R, AR1[k, :k], AR2[k, :k])
        bad = ~np.isfinite(row)
        if bad.any():
            raise KernelAssemblyError(k, int(np.argmax(bad)))
        R[k, :k] = row
    _extend_diagonal(R)
    # one Gauss-Seidel sweep over the completed table replaces the in-march
    # zero/extension entries near the diagonal, where the first pass is
    # roughest; the update is contractive along the causal ordering
    for k in range(1, n + 1):
        row = P[k, :k] + _smooth_row(tb, k, R, AR1[k, :k], AR2[k, :k],
                                     last_row_known=True)
        bad = ~np.isfinite(row)
        if bad.any():
            raise KernelAssemblyError(k, int(np.argmax(bad)))
        R[k, :k] = row
    _extend_diagonal(R)
    return RegularizedKernel(alpha, grid, c, R, c_fn=A)


def resolvent_residual(phi: RegularizedKernel, A: KernelFn, grid: Grid) -> float:
    """Max defect of the stored regular part under one re-application of the
    fixed-point quadrature using the completed table (diagonal extensions in
    place of the in-march zeros); measures the dropped edge terms."""
    tb = _HalfCellTables(phi.alpha, grid)
    A1, A2, AR1, AR2 = _quarter_samples(A, grid)
    bl1, br1, bl2, br2 = tb.product_factors(A1, A2)
    worst = 0.0
    for k in range(1, grid.n + 1):
        row = _product_row(tb, k, bl1, br1, bl2, br2, AR1[k, :k], AR2[k, :k])
        row += _smooth_row(tb, k, phi.regular, AR1[k, :k], AR2[k, :k],
                           last_row_known=True)
        worst = max(worst, float(np.max(np.abs(row - phi.regular[k, :k]))))
    return worst


def _apply_nodes(kernel: RegularizedKernel, values: np.ndarray) -> np.ndarray:
    """(Kv)_k = int_0^{t_k} kernel(t_k, s) v(s) ds with node samples of v:
    product rectangles on the singular part, trapezoid on the regular part."""
    grid = kernel.grid
    n, h = grid.n, grid.h
    if kernel.is_zero:
        return np.zeros(n + 1)
    w = singular_weights(kernel.alpha, grid).dense()
    trap = np.tril(np.full((n + 1, n + 1), h))
    idx = np.arange(n + 1)
    trap[:, 0] = 0.5 * h
    trap[idx, idx] = 0.5 * h
    trap[0, 0] = 0.0
    return (kernel.sing_coeff * w) @ values + (kernel.regular * trap) @ values


def represent_solution(phi: RegularizedKernel, eta: Trajectory, grid: Grid) -> Trajectory:
    """Solution of the linear equation as free term plus resolvent action."""
    if phi.grid != grid or eta.grid != grid:
        raise ValueError("kernel, free term, and grid must match")
    if eta.placement != "nodes":
        raise ValueError("free term must be sampled on nodes")
    return Trajectory(grid, "nodes", eta.values + _apply_nodes(phi, eta.values))


def apply_kernel_nodes(kernel: RegularizedKernel, v: Trajectory, grid: Grid) -> Trajectory:
    """Kernel action on a node trajectory; for Q this is the response integral."""
    if kernel.grid != grid or v.grid != grid:
        raise ValueError("kernel, trajectory, and grid must match")
    if v.placement != "nodes":
        raise ValueError("input must be sampled on nodes")
    return Trajectory(grid, "nodes", _apply_nodes(kernel, v.values))


def _pair_fn(expression, y_star: np.ndarray, u_star: np.ndarray, grid: Grid) -> KernelFn:
    """Evaluate a two-time coefficient along a reference pair, interpolating
    (y*, u*) linearly in the second time argument."""
    nodes = grid.nodes

    def fn(t, s):
        s = np.asarray(s, dtype=float)
        env = {
            "t": np.asarray(t, dtype=float),
            "s": s,
            "y": np.interp(s, nodes, y_star),
            "u": np.interp(s, nodes, u_star),
        }
        return np.asarray(expression.evaluate(**env), dtype=float)

    return fn


def build_q_kernel(problem: ProblemSpec, pair: tuple[Trajectory, Trajectory],
                   grid: Grid) -> RegularizedKernel:
    """Kernel Q with Y1(t) = int_0^t Q(t,s) v(s) ds for every variation v.

    Q(t,s) = f_u(t,s,y*(s),u*(s)) (t-s)^(alpha-1)
             + int_s^t Phi(t,tau) f_u(tau,s,y*(s),u*(s)) (tau-s)^(alpha-1) dtau,

    Phi being the resolvent of f_y along the pair.
    """
    y_star, u_star = pair
    alpha = problem.alpha
    n = grid.n
    t = grid.nodes
    b = problem.bundle
    c_fn = _pair_fn(b.f_u, y_star.values, u_star.values, grid)
    a_fn = _pair_fn(b.f_y, y_star.values, u_star.values, grid)

    lower = np.arange(n + 1)[:, None] >= np.arange(n + 1)[None, :]
    c = _sample(c_fn, t[:, None], t[None, :], (n + 1, n + 1), lower)
    G1, G2, _, _ = _quarter_samples(c_fn, grid)
    if not (c.any() or G1.any() or G2.any()):
        return RegularizedKernel(alpha, grid, c, np.zeros_like(c), c_fn=c_fn, is_zero=True)

    phi = build_resolvent(a_fn, alpha, grid)
    R = np.zeros((n + 1, n + 1))
    if not phi.is_zero:
        tb = _HalfCellTables(alpha, grid)
        bl1, br1, bl2, br2 = tb.product_factors(G1, G2)
        _, _, AR1, AR2 = _quarter_samples(a_fn, grid)
        Rp = phi.regular
        for k in range(1, n + 1):
            row = _product_row(tb, k, bl1, br1, bl2, br2, AR1[k, :k], AR2[k, :k])
            # bounded-resolvent term: only the left pole is singular, so both
            # halves integrate the left factor exactly against sampled data
            rp1 = 0.75 * Rp[k, :k] + 0.25 * Rp[k, 1 : k + 1]
            rp2 = 0.25 * Rp[k, :k] + 0.75 * Rp[k, 1 : k + 1]
            row += rp1 @ bl1[:k, :k] + rp2 @ bl2[:k, :k]
            bad = ~np.isfinite(row)
            if bad.any():
                raise KernelAssemblyError(k, int(np.argmax(bad)))
            R[k, :k] = row
        _extend_diagonal(R)
    return RegularizedKernel(alpha, grid, c, R, c_fn=c_fn)


def midpoint_apply_matrix(kernel: RegularizedKernel, grid: Grid) -> np.ndarray:
    """Matrix QM with (QM v)_k ~ int_0^{tau_k} kernel(tau_k, s) v(s) ds for v
    sampled on midpoints: the singular coefficient is integrated exactly per
    cell, the regular part gets plain cell weights (half on the partial
    diagonal cell)."""
    n, h = grid.n, grid.h
    if kernel.grid != grid:
        raise ValueError("kernel grid mismatch")
    if kernel.is_zero:
        return np.zeros((n, n))
    if kernel.c_fn is None:
        raise ValueError("kernel lacks an off-lattice coefficient evaluator")
    tau = grid.midpoints
    tri = np.tril(np.ones((n, n), dtype=bool))
    cmid = _sample(kernel.c_fn, tau[:, None], tau[None, :], (n, n), tri)
    mu = midpoint_weights(kernel.alpha, grid).mu
    d = np.subtract.outer(np.arange(n), np.arange(n)).clip(min=0)
    R = kernel.regular
    rmid = 0.25 * (R[:n, :n] + R[1:, :n] + R[:n, 1:] + R[1:, 1:])
    idx = np.arange(n)
    rmid[idx, idx] = R[idx + 1, idx]
    wgt = np.tril(np.full((n, n), h))
    wgt[idx, idx] = 0.5 * h
    return np.where(tri, cmid * mu[d] + rmid * wgt, 0.0)


def node_apply_row(kernel: RegularizedKernel, node_index: int, grid: Grid) -> np.ndarray:
    """Weights w with sum_a w[a] v(tau_a) ~ int_0^{t_i} kernel(t_i, s) v(s) ds."""
    n = grid.n
    if not 0 <= node_index <= n:
        raise IndexError(f"node index {node_index} outside 0..{n}")
    out = np.zeros(n)
    i = node_index
    if kernel.is_zero or i == 0:
        return out
    if kernel.c_fn is None:
        raise ValueError("kernel lacks an off-lattice coefficient evaluator")
    tau = grid.midpoints[:i]
    w = singular_weights(kernel.alpha, grid)
    with np.errstate(all="ignore"):
        csamp = np.broadcast_to(
            np.asarray(kernel.c_fn(grid.nodes[i], tau), dtype=float), (i,))
    rsamp = 0.5 * (kernel.regular[i, :i] + kernel.regular[i, 1 : i + 1])
    out[:i] = csamp * w.row(i) + rsamp * grid.h
    return out
