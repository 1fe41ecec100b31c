import math

import mpmath
import numpy as np
import pytest

from svoc.adjoint import solve_adjoint
from svoc.expr import parse_expression
from svoc.optimality import (
    CROSS_TERM_CONVENTION,
    MKernel,
    _quadratic_matrix,
    assemble_m_kernel,
    default_tolerance,
    detect_singular,
    hamiltonian_fields,
    quadratic_form,
    second_order_test,
)
from svoc.problem import ProblemSpec, builtin_problem
from svoc.quadrature import make_grid
from svoc.resolvent import build_q_kernel
from svoc.state import Trajectory, evaluate_cost, solve_state


def fields_for(problem, grid, control_value=0.0):
    u = Trajectory.constant(control_value, grid)
    y = solve_state(problem, u, grid)
    adj = solve_adjoint(problem, (y, u), grid)
    return (y, u), hamiltonian_fields(problem, (y, u), adj, grid)


# --- Hamiltonian fields -------------------------------------------------------

def test_benchmark_fields_at_rest_control():
    # psi = 0 kills the integral part; what is left is -g_u minus the
    # instant row, both in closed form
    problem = builtin_problem("paper_example")
    grid = make_grid(1.0, 256)
    (y, u), fields = fields_for(problem, grid)
    tau = grid.midpoints
    ym = y.midpoint_values()
    assert np.max(np.abs(fields.h.values)) == 0.0
    expect_hu = -ym - ym / np.sqrt(1.0 - tau)
    assert np.max(np.abs(fields.h_u.values - expect_hu)) <= 1e-12
    verdict = detect_singular(fields)
    assert not verdict.singular
    assert verdict.sup_hu == pytest.approx(-expect_hu[-1])
    assert verdict.argmax_time == pytest.approx(tau[-1])


def test_quadratic_problem_fields_closed_form():
    # psi = -2 and f_uu = 2c give H_uu = -8 c sqrt(1 - tau); H_u vanishes
    # identically so the rest control is singular
    for c in (1.0, -2.5):
        problem = builtin_problem("sing_quad", {"c": c})
        grid = make_grid(1.0, 128)
        _, fields = fields_for(problem, grid)
        tau = grid.midpoints
        assert np.max(np.abs(fields.h_u.values)) == 0.0
        expect = -8.0 * c * np.sqrt(1.0 - tau)
        assert np.max(np.abs(fields.h_uu.values - expect)) <= 1e-12
        verdict = detect_singular(fields)
        assert verdict.singular
        assert verdict.sup_hu == 0.0


def test_default_tolerance_tracks_curvature():
    problem = builtin_problem("sing_quad", {"c": 1.0})
    grid = make_grid(1.0, 128)
    _, fields = fields_for(problem, grid)
    scale = float(np.max(np.abs(fields.h_uu.values)))
    assert default_tolerance(fields) == pytest.approx(1e-6 * (1.0 + scale))


def test_detection_with_explicit_gradient():
    # b = 0 hides the control from the dynamics; H_u = -g_u = -2ru* exactly
    problem = builtin_problem("lq", {"a": 0.5, "b": 0.0, "r": 1.0})
    grid = make_grid(1.0, 64)
    _, fields = fields_for(problem, grid, control_value=1.0)
    verdict = detect_singular(fields)
    assert not verdict.singular
    assert verdict.sup_hu == pytest.approx(2.0, abs=1e-14)
    assert detect_singular(fields, tol=3.0).singular  # loose tolerance flips it


# --- aggregated curvature kernel ------------------------------------------------

def test_curvature_kernel_zero_when_response_kernel_is_zero():
    problem = builtin_problem("sing_quad", {"c": 1.0})
    grid = make_grid(1.0, 64)
    pair, fields = fields_for(problem, grid)
    q = build_q_kernel(problem, pair, grid)
    assert q.is_zero
    m = assemble_m_kernel(problem, pair, fields, q, grid)
    assert not m.values.any()


def test_curvature_kernel_zero_without_state_curvature():
    problem = ProblemSpec(alpha=0.5, T=1.0, eta=parse_expression("1"),
                          f=parse_expression("0.3*y + 0.7*u"),
                          g=parse_expression("0.9*u"))
    grid = make_grid(1.0, 64)
    pair, fields = fields_for(problem, grid, control_value=1.0)
    q = build_q_kernel(problem, pair, grid)
    assert not q.is_zero
    m = assemble_m_kernel(problem, pair, fields, q, grid)
    assert not m.values.any()


def test_curvature_kernel_against_series_quadrature():
    # constant-coefficient dynamics admit a series response kernel; the
    # aggregate -2 int Q(t,a) Q(t,b) dt is then computable to high precision
    problem = builtin_problem("lq", {"a": 0.5, "b": 1.0, "r": 0.0})
    grid = make_grid(1.0, 64)
    pair, fields = fields_for(problem, grid, control_value=1.0)
    q = build_q_kernel(problem, pair, grid)
    m = assemble_m_kernel(problem, pair, fields, q, grid)
    assert np.max(np.abs(m.values - m.values.T)) == 0.0

    mpmath.mp.dps = 20
    gam = mpmath.gamma(0.5)

    def q_series(t, s):
        return mpmath.fsum(
            0.5 ** (k - 1) * gam**k * (t - s) ** (0.5 * k - 1.0) / mpmath.gamma(0.5 * k)
            for k in range(1, 40)
        )

    tau = grid.midpoints
    for ia, ib in [(5, 20), (10, 40), (30, 50)]:
        exact = -2.0 * float(mpmath.quad(
            lambda t: q_series(t, tau[ia]) * q_series(t, tau[ib]),
            [max(tau[ia], tau[ib]), 1.0],
        ))
        rel = abs(m.values[ia, ib] - exact) / abs(exact)
        assert rel <= 5e-2  # measured 3.1e-3 .. 5.0e-3


# --- quadratic form ---------------------------------------------------------------

def test_quadratic_form_closed_value():
    # QF[v=1] = int -8c sqrt(1-t) dt * ... = -(16/3) c at alpha = 1/2, T = 1
    grid = make_grid(1.0, 1024)
    for c, sign in ((1.0, -1.0), (-1.0, 1.0)):
        problem = builtin_problem("sing_quad", {"c": c})
        pair, fields = fields_for(problem, grid)
        q = build_q_kernel(problem, pair, grid)
        m = assemble_m_kernel(problem, pair, fields, q, grid)
        v = Trajectory.constant(1.0, grid, "midpoints")
        qf = quadratic_form(fields, m, q, v, grid)
        assert qf == pytest.approx(sign * 16.0 / 3.0, abs=1e-2)  # measured off 1.5e-5
        zero = quadratic_form(fields, m, q, Trajectory.constant(0.0, grid, "midpoints"), grid)
        assert zero == 0.0


def test_quadratic_form_requires_midpoint_variation():
    problem = builtin_problem("sing_quad", {"c": 1.0})
    grid = make_grid(1.0, 32)
    pair, fields = fields_for(problem, grid)
    q = build_q_kernel(problem, pair, grid)
    m = assemble_m_kernel(problem, pair, fields, q, grid)
    with pytest.raises(ValueError, match="midpoints"):
        quadratic_form(fields, m, q, Trajectory.constant(1.0, grid), grid)
    with pytest.raises(ValueError, match="midpoints"):
        quadratic_form(fields, m, q,
                       Trajectory.constant(1.0, make_grid(1.0, 16), "midpoints"), grid)


def quadratic_setups():
    yield builtin_problem("lq", {"a": 0.5, "b": 1.0, "r": 1.0}), 1.0
    # explicit state-control cross curvature exercises the C + C^T block
    yield ProblemSpec(alpha=0.5, T=1.0, eta=parse_expression("1"),
                      f=parse_expression("y + u"),
                      g=parse_expression("y^2 + 0.5*y*u")), 0.5


def test_matrix_and_functional_forms_agree():
    rng = np.random.default_rng(7)
    for problem, value in quadratic_setups():
        grid = make_grid(1.0, 128)
        pair, fields = fields_for(problem, grid, control_value=value)
        q = build_q_kernel(problem, pair, grid)
        m = assemble_m_kernel(problem, pair, fields, q, grid)
        K = _quadratic_matrix(fields, m, q, grid)
        for _ in range(20):
            vv = rng.uniform(-1.0, 1.0, grid.n)
            v = Trajectory(grid, "midpoints", vv)
            functional = quadratic_form(fields, m, q, v, grid)
            assert abs(float(vv @ K @ vv) - functional) <= 1e-10 * (1.0 + abs(functional))


def test_quadratic_form_scales_quadratically():
    problem = builtin_problem("lq", {"a": 0.5, "b": 1.0, "r": 1.0})
    grid = make_grid(1.0, 128)
    pair, fields = fields_for(problem, grid, control_value=1.0)
    q = build_q_kernel(problem, pair, grid)
    m = assemble_m_kernel(problem, pair, fields, q, grid)
    v = Trajectory.from_expression("sin(3*t)", grid, "midpoints")
    v3 = Trajectory(grid, "midpoints", 3.0 * v.values)
    qf = quadratic_form(fields, m, q, v, grid)
    assert quadratic_form(fields, m, q, v3, grid) == pytest.approx(9.0 * qf, abs=1e-10 * (1 + abs(qf)))


# --- second-order verdicts ---------------------------------------------------------

def test_negative_curvature_holds():
    problem = builtin_problem("sing_quad", {"c": 1.0})
    grid = make_grid(1.0, 256)
    u = Trajectory.constant(0.0, grid)
    y = solve_state(problem, u, grid)
    report = second_order_test(problem, (y, u), grid)
    assert report.verdict == "holds"
    assert report.violating_direction is None
    assert report.matrix is not None
    # K is diagonal here (Q = 0): lambda_max is its largest entry,
    # -8 h sqrt(1 - tau) maximized at the last midpoint
    diag_max = float(np.max(np.diag(report.matrix)))
    assert report.lambda_max == pytest.approx(diag_max, abs=1e-14)
    assert report.lambda_max == pytest.approx(-8.0 * grid.h * math.sqrt(0.5 * grid.h), rel=1e-10)
    assert report.convention == CROSS_TERM_CONVENTION


def test_positive_curvature_violated_with_improving_direction():
    problem = builtin_problem("sing_quad", {"c": -1.0})
    grid = make_grid(1.0, 256)
    u = Trajectory.constant(0.0, grid)
    y = solve_state(problem, u, grid)
    report = second_order_test(problem, (y, u), grid)
    assert report.verdict == "violated"
    assert report.lambda_max == pytest.approx(8.0 * grid.h * math.sqrt(1.0 - 0.5 * grid.h), rel=1e-10)

    vec = report.violating_direction
    assert vec.placement == "midpoints"
    peak = int(np.argmax(np.abs(vec.values)))
    assert vec.values[peak] == 1.0  # sup-norm one, positive at the peak
    assert peak == 0  # curvature 8 sqrt(1 - tau) is largest at the first midpoint

    # the direction must actually lower the cost
    nodes = np.concatenate([[vec.values[0]],
                            0.5 * (vec.values[:-1] + vec.values[1:]),
                            [vec.values[-1]]])
    base = evaluate_cost(problem, y, u, grid).total
    for delta in (0.1, 0.05):
        u_pert = Trajectory(grid, "nodes", u.values + delta * nodes)
        y_pert = solve_state(problem, u_pert, grid)
        assert evaluate_cost(problem, y_pert, u_pert, grid).total < base


def test_zero_form_still_holds():
    problem = ProblemSpec(alpha=0.5, T=1.0, eta=parse_expression("1"),
                          f=parse_expression("0.3*y"), g=parse_expression("y"))
    grid = make_grid(1.0, 64)
    u = Trajectory.constant(0.0, grid)
    y = solve_state(problem, u, grid)
    report = second_order_test(problem, (y, u), grid)
    assert report.verdict == "holds"
    assert report.lambda_max == 0.0
    assert not report.matrix.any()


def test_nonsingular_control_is_inconclusive():
    problem = builtin_problem("paper_example")
    grid = make_grid(1.0, 64)
    u = Trajectory.constant(0.0, grid)
    y = solve_state(problem, u, grid)
    report = second_order_test(problem, (y, u), grid)
    assert report.verdict == "inconclusive"
    assert math.isnan(report.lambda_max)
    assert report.matrix is None
    assert report.violating_direction is None
    assert report.sup_hu > 1.0


def test_curvature_kernel_grid_mismatch_rejected():
    problem = builtin_problem("sing_quad", {"c": 1.0})
    grid = make_grid(1.0, 32)
    pair, fields = fields_for(problem, grid)
    q = build_q_kernel(problem, pair, grid)
    with pytest.raises(ValueError, match="grid"):
        assemble_m_kernel(problem, pair, fields, q, make_grid(1.0, 16))
