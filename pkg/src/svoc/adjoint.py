"""Backward costate solve on the midpoint grid.

The costate satisfies

    psi(t) = int_t^T f_y(s, t, y*(t), u*(t)) psi(s) (s - t)^(alpha-1) ds
             - g_y(t, y*(t), u*(t))
             - sum_i 1[t < t_i] f_y(t_i, t, y*(t), u*(t)) (t_i - t)^(alpha-1) h_y^i(y*(t_i)),

with the convention that the first argument of f (and its partials) is always
the later time, so every evaluation stays inside the kernel's domain.  psi
lives on midpoints: instant times sit on nodes, so the (t_i - t)^(alpha-1)
factor is never evaluated at its pole.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdjointStepError
from .problem import ProblemSpec
from .quadrature import Grid, midpoint_weights
from .state import Trajectory, evaluate_on


@dataclass(frozen=True)
class InstantSnap:
    """An instant-cost time aligned with the grid."""

    time: float
    node_index: int
    snapped_time: float
    distance: float


def snap_instants(problem: ProblemSpec, grid: Grid) -> tuple[InstantSnap, ...]:
    out = []
    for ic in problem.instant_costs:
        idx = int(round(ic.time / grid.h))
        idx = min(max(idx, 0), grid.n)
        snapped = idx * grid.h
        out.append(InstantSnap(ic.time, idx, snapped, abs(ic.time - snapped)))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Costate on midpoints plus the singular instant-term samples that fed it."""

    psi: Trajectory
    instant_terms: np.ndarray  # shape (num instants, num midpoints)
    snaps: tuple[InstantSnap, ...]

    @property
    def values(self) -> np.ndarray:
        return self.psi.values


def _instant_rows(problem: ProblemSpec, grid: Grid, expression,
                  y_nodes: np.ndarray, ym: np.ndarray, um: np.ndarray,
                  snaps: tuple[InstantSnap, ...]) -> np.ndarray:
    """Rows 1[tau_k < t_i] expr(t_i, tau_k, y*_k, u*_k) (t_i - tau_k)^(alpha-1) h_y^i."""
    tau = grid.midpoints
    rows = np.zeros((len(snaps), grid.n))
    for i, snap in enumerate(snaps):
        hy = float(problem.bundle.instants[i].h_y.evaluate(y=y_nodes[snap.node_index]))
        live = tau < snap.snapped_time
        if hy == 0.0 or not live.any():
            continue
        env = {"t": snap.snapped_time, "s": tau[live], "y": ym[live], "u": um[live]}
        vals = evaluate_on(expression, env, tau[live].shape)
        rows[i, live] = vals * (snap.snapped_time - tau[live]) ** (problem.alpha - 1.0) * hy
    return rows


def solve_adjoint(problem: ProblemSpec, pair: tuple[Trajectory, Trajectory],
                  grid: Grid) -> AdjointTrajectory:
    """March the costate backward from the horizon.

    The diagonal half cell couples psi_k to itself linearly; the step fails if
    its coefficient degenerates.
    """
    y_star, u_star = pair
    if y_star.grid != grid or u_star.grid != grid:
        raise ValueError("pair lives on a different grid")
    n = grid.n
    tau = grid.midpoints
    ym = y_star.midpoint_values()
    um = u_star.midpoint_values()
    b = problem.bundle
    mw = midpoint_weights(problem.alpha, grid)
    mu = mw.mu
    snaps = snap_instants(problem, grid)
    inst = _instant_rows(problem, grid, b.f_y, y_star.values, ym, um, snaps)
    gy = evaluate_on(b.g_y, {"t": tau, "y": ym, "u": um}, tau.shape)

    fy_t_free = "t" not in b.f_y.free_vars()
    psi = np.zeros(n)
    for k in range(n - 1, -1, -1):
        if fy_t_free:
            fy = np.broadcast_to(
                np.asarray(b.f_y.evaluate(s=tau[k], y=ym[k], u=um[k]),
                           dtype=float), (n - k,))
        else:
            env = {"t": tau[k:], "s": tau[k], "y": ym[k], "u": um[k]}
            fy = evaluate_on(b.f_y, env, tau[k:].shape)
        rhs = mu[1 : n - k] @ (fy[1:] * psi[k + 1 :]) - gy[k] - inst[:, k].sum()
        denom = 1.0 - mu[0] * fy[0]
        if abs(denom) < 1e-12:
            raise AdjointStepError(k, denom)
        psi[k] = rhs / denom
        if not np.isfinite(psi[k]):
            raise AdjointStepError(k, denom)
    return AdjointTrajectory(Trajectory(grid, "midpoints", psi), inst, snaps)


def adjoint_residual(problem: ProblemSpec, pair: tuple[Trajectory, Trajectory],
                     adj: AdjointTrajectory, grid: Grid) -> float:
    """Max absolute defect of psi under one re-application of the equation."""
    y_star, u_star = pair
    n = grid.n
    tau = grid.midpoints
    ym = y_star.midpoint_values()
    um = u_star.midpoint_values()
    b = problem.bundle
    mu = midpoint_weights(problem.alpha, grid).mu
    gy = evaluate_on(b.g_y, {"t": tau, "y": ym, "u": um}, tau.shape)
    psi = adj.psi.values
    worst = 0.0
    for k in range(n):
        env = {"t": tau[k:], "s": tau[k], "y": ym[k], "u": um[k]}
        fy = evaluate_on(b.f_y, env, tau[k:].shape)
        rhs = mu[: n - k] @ (fy * psi[k:]) - gy[k] - adj.instant_terms[:, k].sum()
        worst = max(worst, abs(rhs - psi[k]))
    return worst
