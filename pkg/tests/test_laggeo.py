from __future__ import annotations

import numpy as np
import pytest

from hesslag import laggeo
from hesslag.errors import SingularMetricError
from hesslag.expr import parse
from hesslag.hessgeo import build_package, levi_civita
from hesslag.jet import deriv_stack, fd_probe
from hesslag.laggeo import (
    DirectMetricChart,
    LagrangianChart,
    adapted_coframe,
    cartan_nonlinear_connection,
    euler_homogeneity,
    fiber_package,
    hashiguchi_vertical,
    kahler_closedness,
    leaf_kahler_curvature,
    locally_lagrange_test,
    verify_half_Q,
)

QUARTIC = "0.5*(1 + 0.1*x1^2)*(y1^2 + y2^2) + 0.05*y1^4 + 0.02*y1^2*y2^2 + 0.1*x2*y1*y2"
rng = np.random.default_rng(3)


def _chart(text, m=2):
    return LagrangianChart.from_text(text, m)


def test_projectable_fiber_and_leaf_curvature_vanish():
    chart = _chart("0.5*exp(x1)*(y1^2 + y2^2)")
    for _ in range(20):
        x, y = rng.uniform(-1, 1, 2), rng.uniform(-2, 2, 2)
        assert np.abs(fiber_package(chart, x, y).Q).max() <= 1e-12
        assert np.abs(leaf_kahler_curvature(chart, x, y).R_full).max() <= 1e-12


def test_quartic_fiber_metric():
    chart = _chart("0.5*(y1^2 + y2^2) + 0.05*y1^4")
    p = fiber_package(chart, [0.7, -3.0], [1.0, 0.0])
    assert p.g[0, 0] == pytest.approx(1.6, rel=1e-15)
    f = parse("0.5*(y1^2 + y2^2) + 0.05*y1^4", ["y1", "y2"])
    assert abs(fd_probe(f, [1.0, 0.0], [0, 0]) - 1.6) <= 1e-6
    res = verify_half_Q(chart, [0.7, -3.0], [1.0, 0.0])
    assert res.residual <= 1e-8 * max(1.0, res.max_abs_Q)
    assert euler_homogeneity(chart, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(0.1, rel=1e-14)


def test_x_independent_reduction_is_bit_identical():
    text = "log(exp(y1) + exp(y2)) + 0.5*(y1^2 + y2^2)"
    y = [0.3, -0.9]
    lag = fiber_package(_chart(text), [5.0, -2.0], y)
    hess = build_package(deriv_stack(parse(text, ["y1", "y2"]), y, ["y1", "y2"]))
    for name in ("g", "C", "dC", "Gamma", "Q", "Qmix", "R"):
        np.testing.assert_array_equal(getattr(lag, name), getattr(hess, name))
    neg = fiber_package(_chart("-log(y1)", 1), [0.0], [2.0])
    assert neg.Q[0, 0, 0, 0] == pytest.approx(0.0625, rel=1e-14)


def test_locally_lagrange_examples():
    chart = _chart(QUARTIC)
    res = locally_lagrange_test(chart, [([0.1, 0.2], [0.3, -0.4]), ([0.5, 0.0], [1.0, 1.0])])
    assert res.is_lagrange_like and res.max_defect == 0.0
    direct = DirectMetricChart.from_text([["1", "y1*y2"], ["y1*y2", "1"]], 2)
    res = locally_lagrange_test(direct, [([0.0, 0.0], [1.0, 0.5])])
    assert not res.is_lagrange_like and res.max_defect == 1.0
    const = DirectMetricChart.from_text([["2", "0.5"], ["0.5", "1"]], 2)
    assert locally_lagrange_test(const, [([0.0, 0.0], [3.0, 1.0])]).max_defect == 0.0
    with pytest.raises(SingularMetricError):
        locally_lagrange_test(direct, [([0.0, 0.0], [1.0, 1.0])])


def test_kahler_closedness_examples():
    assert kahler_closedness(_chart(QUARTIC), [0.2, -0.5], [0.8, 0.1]) <= 1e-12
    direct = DirectMetricChart.from_text([["1", "y1*y2"], ["y1*y2", "1"]], 2)
    assert kahler_closedness(direct, [0.0, 0.0], [1.0, 1.0]) == 1.0
    const = DirectMetricChart.from_text([["1", "0"], ["0", "1"]], 2)
    assert kahler_closedness(const, [0.0, 0.0], [1.0, 1.0]) == 0.0


def test_kahler_defect_equals_cartan_defect():
    direct = DirectMetricChart.from_text([["1 + y2^2", "y1*y2 + x1"], ["y1*y2 + x1", "2 + sin(y1)"]], 2)
    for _ in range(10):
        x, y = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        assert kahler_closedness(direct, x, y) == laggeo.cartan_defect(direct, x, y)


def test_connection_vanishes_without_x():
    t = cartan_nonlinear_connection(_chart("0.5*(y1^2 + y2^2) + 0.05*y1^4"), [0.3, 0.1], [1.0, 0.5]).t
    assert not t.any()


def test_connection_projectable_example():
    t = cartan_nonlinear_connection(_chart("0.5*exp(x1)*(y1^2 + y2^2)"), [0.0, 0.0], [1.0, 0.0]).t
    assert t[0, 0] == pytest.approx(0.5, rel=1e-15)


def _spray_fd(chart, x, y):
    # G^i = 1/2 g^{il} (y^k L_{y^l x^k} - L_{x^l}), every partial from finite differences
    m = chart.dim
    names = laggeo.x_names(m) + laggeo.y_names(m)
    p = list(x) + list(y)
    L = chart.L
    g = np.array([[fd_probe(L, p, [m + i, m + j], var_names=names) for j in range(m)] for i in range(m)])
    Lx = np.array([fd_probe(L, p, [l], var_names=names) for l in range(m)])
    Lyx = np.array([[fd_probe(L, p, [m + l, k], var_names=names) for k in range(m)] for l in range(m)])
    return 0.5 * np.linalg.solve(g, Lyx @ np.asarray(y) - Lx)


def test_connection_against_fd_of_spray():
    chart = _chart(QUARTIC)
    x, y = np.array([0.4, -0.3]), np.array([0.6, -0.2])
    h = 1e-4
    t_fd = np.array([
        (_spray_fd(chart, x, y + h * e) - _spray_fd(chart, x, y - h * e)) / (2 * h) for e in np.eye(2)
    ])
    np.testing.assert_allclose(cartan_nonlinear_connection(chart, x, y).t, t_fd, atol=1e-5)


def test_quadratic_connection_is_christoffel():
    # L = 1/2 a_ij(x) y^i y^j gives t_i^j = Gamma^j_{ik}(a) y^k
    text = "0.5*((1 + x1^2)*y1^2 + 2*x2*y1*y2 + (2 + sin(x1*x2))*y2^2)"
    chart = _chart(text)
    x, y = np.array([0.3, -0.6]), np.array([0.7, 0.4])
    a_field = [[parse(t, ["x1", "x2"]) for t in row] for row in
               [["1 + x1^2", "x2"], ["x2", "2 + sin(x1*x2)"]]]
    stacks = [[deriv_stack(f, x, ["x1", "x2"], order=1) for f in row] for row in a_field]
    a = np.array([[s.d0 for s in row] for row in stacks])
    da = np.array([[[stacks[i][j].d1[k] for j in range(2)] for i in range(2)] for k in range(2)])
    gamma = levi_civita(a, da)
    expected = np.einsum("jik,k->ij", gamma, y)
    np.testing.assert_allclose(cartan_nonlinear_connection(chart, x, y).t, expected, atol=1e-14)


def test_connection_homogeneity():
    chart = _chart("0.5*exp(x1)*(y1^2 + y2^2) + 0.3*x2*y1*y2")
    x, y = np.array([0.2, 0.5]), np.array([0.9, -0.4])
    t1 = cartan_nonlinear_connection(chart, x, y).t
    t2 = cartan_nonlinear_connection(chart, x, 2 * y).t
    assert np.abs(t2 - 2 * t1).max() <= 1e-10 * max(1.0, np.abs(t1).max())


def test_adapted_coframe():
    frame = adapted_coframe(np.zeros((2, 2)))
    np.testing.assert_array_equal(frame.frame[:2], np.hstack([np.eye(2), np.zeros((2, 2))]))
    t = rng.normal(size=(3, 3))
    f = adapted_coframe(t)
    assert f.duality_defect <= 1e-15
    m = 3
    theta, X, dy = f.coframe[m:], f.frame[:m], f.frame[m:]
    np.testing.assert_allclose(theta @ X.T, 0.0, atol=1e-15)
    np.testing.assert_array_equal(theta @ dy.T, np.eye(m))
    t = cartan_nonlinear_connection(_chart("0.5*exp(x1)*(y1^2 + y2^2)"), [0.0, 0.0], [1.0, 0.0]).t
    f = adapted_coframe(t)
    assert f.pairing[2, 0] == 0.0


def test_leaf_of_neg_log_is_hyperbolic():
    leaf = leaf_kahler_curvature(_chart("-log(y1)", 1), [0.0], [2.0])
    h = np.diag([0.25, 0.25])
    R = leaf.R_full
    # sectional curvature of (dy^2 + deta^2)/y^2 is -1
    k = R[0, 1, 0, 1] / (h[0, 0] * h[1, 1])
    assert k == pytest.approx(-1.0, rel=1e-14)
    assert not leaf.R_vertical.any()
    res = verify_half_Q(_chart("-log(y1)", 1), [0.0], [2.0])
    assert res.residual <= 1e-9
    # holomorphic component R(dz, dzbar, dz, dzbar) = Q / 4
    assert leaf.holomorphic[0, 0, 0, 0].real == pytest.approx(0.0625 / 4, rel=1e-14)


def test_half_q_relation_and_kahler_symmetry():
    chart = _chart(QUARTIC)
    for _ in range(5):
        x, y = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        res = verify_half_Q(chart, x, y)
        assert res.residual <= 1e-8 * res.scale
        assert [0, 1, 2, 3] in res.matching_permutations
        assert res.literal_matching_permutations == []
        assert res.kahler_defect <= 1e-12
        assert res.holomorphic_residual <= 1e-12


def test_hashiguchi_vertical():
    assert not hashiguchi_vertical(np.zeros((2, 2, 2, 2))).any()
    Q = fiber_package(_chart(QUARTIC), [0.1, 0.2], [0.5, -0.7]).Q
    H = hashiguchi_vertical(Q)
    np.testing.assert_allclose(H, -H.transpose(0, 1, 3, 2), atol=1e-16)
    Q1 = fiber_package(_chart("-log(y1)", 1), [0.0], [2.0]).Q
    assert not hashiguchi_vertical(Q1).any()


def test_euler_homogeneity_examples():
    assert euler_homogeneity(_chart("0.5*exp(x1)*(y1^2 + y2^2)"), [0.4, 0.0], [0.3, 2.0]) <= 1e-15
    y = 2.0
    d = euler_homogeneity(_chart("-log(y1)", 1), [0.0], [y])
    assert d == pytest.approx(abs(-1.0 + 2.0 * np.log(y)), rel=1e-14)
