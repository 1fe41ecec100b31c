import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svoc.quadrature import (
    Grid,
    make_grid,
    midpoint_weights,
    singular_integral,
    singular_weights,
    trapezoid,
    trapezoid_weights,
)
from svoc.state import Trajectory

alphas = st.floats(0.1, 0.9)
cells = st.integers(2, 80)


def test_grid_geometry():
    g = make_grid(1.0, 4)
    assert g.h == 0.25
    assert np.allclose(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(g.midpoints, [0.125, 0.375, 0.625, 0.875])


def test_make_grid_validation():
    with pytest.raises(ValueError, match="horizon"):
        make_grid(0.0, 4)
    with pytest.raises(ValueError, match="at least 2"):
        make_grid(1.0, 1)


def test_first_weight_alpha_half():
    # alpha = 1/2, h = 1/4: omega[1] = h^0.5 / 0.5 = 2 * 0.5 = 1
    w = singular_weights(0.5, make_grid(1.0, 4))
    assert w.weight(1, 0) == pytest.approx(1.0, abs=1e-15)


def test_full_row_sum_alpha_half():
    # row n integrates (T - s)^(-1/2) over [0, T]: 2 sqrt(T) = 2 at T = 1
    g = make_grid(1.0, 4)
    w = singular_weights(0.5, g)
    assert w.row(4).sum() == pytest.approx(2.0, abs=1e-14)


@given(alphas, cells)
@settings(deadline=None, max_examples=60)
def test_row_sums_telescope(alpha, n):
    g = make_grid(1.0, n)
    w = singular_weights(alpha, g)
    for k in (1, n // 2, n):
        if k == 0:
            continue
        exact = g.nodes[k] ** alpha / alpha
        assert w.row(k).sum() == pytest.approx(exact, rel=1e-13)


@given(alphas, cells)
@settings(deadline=None, max_examples=40)
def test_weights_positive_and_decreasing(alpha, n):
    w = singular_weights(alpha, make_grid(1.0, n)).omega[1:]
    assert np.all(w > 0)
    assert np.all(np.diff(w) <= 1e-15)


def test_weight_index_guards():
    w = singular_weights(0.5, make_grid(1.0, 4))
    with pytest.raises(IndexError):
        w.weight(3, 3)
    with pytest.raises(IndexError):
        w.row(5)


def test_dense_matches_rows():
    g = make_grid(1.0, 6)
    w = singular_weights(0.3, g)
    dense = w.dense()
    assert dense.shape == (7, 7)
    for k in range(1, 7):
        assert np.array_equal(dense[k, :k], w.row(k))
    assert np.all(dense[np.triu_indices(7)] == 0.0)


def test_linear_integrand_converges():
    # int_0^1 s (1 - s)^(-1/2) ds = 4/3
    g = make_grid(1.0, 4096)
    w = singular_weights(0.5, g)
    approx = singular_integral(g.nodes, w, g.n)
    assert approx == pytest.approx(4.0 / 3.0, abs=1e-3)


def test_singular_integral_accepts_trajectories():
    g = make_grid(1.0, 16)
    w = singular_weights(0.5, g)
    y = Trajectory.from_expression("t", g)
    assert singular_integral(y, w, 16) == singular_integral(y.values, w, 16)
    assert singular_integral(y.values, w, 0) == 0.0
    with pytest.raises(ValueError, match="placement"):
        singular_integral(Trajectory.constant(1.0, g, "midpoints"), w, 16)
    with pytest.raises(ValueError, match="node values"):
        singular_integral(np.ones(5), w, 3)


def test_singular_weights_alpha_guard():
    with pytest.raises(ValueError, match="alpha"):
        singular_weights(1.0, make_grid(1.0, 4))


@given(alphas, cells)
@settings(deadline=None, max_examples=60)
def test_midpoint_rows_telescope(alpha, n):
    g = make_grid(1.0, n)
    mw = midpoint_weights(alpha, g)
    tau = g.midpoints
    for k in (0, n // 2, n - 1):
        head = mw.head_row(k).sum()
        tail = mw.tail_row(k).sum()
        assert head == pytest.approx(tau[k] ** alpha / alpha, rel=1e-12)
        assert tail == pytest.approx((g.T - tau[k]) ** alpha / alpha, rel=1e-12)


def test_midpoint_head_and_tail_are_mirror_images():
    mw = midpoint_weights(0.5, make_grid(1.0, 8))
    assert np.array_equal(mw.head_row(5), mw.mu[5::-1])
    assert np.array_equal(mw.tail_row(5), mw.mu[:3])
    with pytest.raises(IndexError):
        mw.tail_row(8)


@given(alphas, cells)
@settings(deadline=None, max_examples=60)
def test_trapezoid_rows_telescope(alpha, n):
    g = make_grid(1.0, n)
    tw = trapezoid_weights(alpha, g)
    for k in (1, n // 2, n):
        if k == 0:
            continue
        assert tw.row(k).sum() == pytest.approx(g.nodes[k] ** alpha / alpha, rel=1e-12)


def test_trapezoid_diagonal_weight():
    g = make_grid(1.0, 8)
    alpha = 0.5
    tw = trapezoid_weights(alpha, g)
    assert tw.diagonal == pytest.approx(g.h**alpha / (alpha * (alpha + 1.0)), rel=1e-14)
    with pytest.raises(IndexError):
        tw.row(0)


def test_trapezoid_exact_on_linear_integrand():
    # product-trapezoid integrates s (t - s)^(alpha-1) exactly
    alpha = 0.5
    g = make_grid(1.0, 8)
    tw = trapezoid_weights(alpha, g)
    t1 = g.nodes[8]
    exact = t1 ** (alpha + 1.0) * math.gamma(alpha) / math.gamma(alpha + 2.0)
    assert tw.row(8) @ g.nodes == pytest.approx(exact, rel=1e-13)


def test_composite_trapezoid():
    x = np.linspace(0.0, 1.0, 101)
    assert trapezoid(x**2, 0.01) == pytest.approx(1.0 / 3.0, abs=2e-5)
    with pytest.raises(ValueError):
        trapezoid(np.ones(1), 0.1)


def test_grid_equality_is_structural():
    assert make_grid(1.0, 8) == Grid(1.0, 8)
    assert make_grid(1.0, 8) != Grid(1.0, 16)
