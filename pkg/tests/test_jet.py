from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from hesslag.errors import DomainError
from hesslag.expr import evaluate, parse
from hesslag.jet import Jet, algebra, deriv_stack, fd_probe, jet_of


def _stack(text, point, names=None):
    names = names or [f"y{i + 1}" for i in range(len(point))]
    return deriv_stack(parse(text, names), point, names)


def test_quadratic_stack():
    s = _stack("y1^2/2 + y2^2/2", [3.0, 4.0])
    assert s.d0 == 12.5
    np.testing.assert_array_equal(s.d1, [3.0, 4.0])
    np.testing.assert_array_equal(s.d2, np.eye(2))
    assert not s.d3.any() and not s.d4.any()


def test_neg_log_stack():
    s = _stack("-log(y1)", [2.0])
    assert s.d1[0] == pytest.approx(-0.5, rel=1e-15)
    assert s.d2[0, 0] == pytest.approx(0.25, rel=1e-15)
    assert s.d3[0, 0, 0] == pytest.approx(-0.25, rel=1e-15)
    assert s.d4[0, 0, 0, 0] == pytest.approx(0.375, rel=1e-15)


def test_exp_at_zero_all_ones():
    s = _stack("exp(y1)", [0.0])
    assert [s.d0, s.d1[0], s.d2[0, 0], s.d3[0, 0, 0], s.d4[0, 0, 0, 0]] == [1.0] * 5


def test_constant_lift_has_no_higher_terms():
    alg = algebra(3, 4)
    c = Jet.constant(alg, 2.5)
    assert c.coef[0] == 2.5 and not c.coef[1:].any()


def test_truncation_closure():
    # degree-k coefficients of a product depend only on degrees <= k of the factors
    alg = algebra(2, 4)
    rng = np.random.default_rng(0)
    a, b = Jet(alg, rng.normal(size=len(alg.monomials))), Jet(alg, rng.normal(size=len(alg.monomials)))
    degrees = np.array([sum(m) for m in alg.monomials])
    a2 = Jet(alg, np.where(degrees <= 2, a.coef, 99.0))
    low = degrees <= 2
    np.testing.assert_allclose((a * b).coef[low], (a2 * b).coef[low], rtol=0, atol=1e-14)


@pytest.mark.parametrize("text,point", [
    ("y1^4 - 2*y1^2*y2 + 3*y2^3*y1 + 0.5*y2^2 - 7", [0.7, -1.3]),
    ("(y1 + 2*y2 - y3)^4 + y1*y2*y3", [0.3, 0.9, -0.4]),
])
def test_polynomial_exactness(text, point):
    names = [f"y{i + 1}" for i in range(len(point))]
    field = parse(text, names)
    s = deriv_stack(field, point, names)
    # oracle: exact polynomial derivatives by symbolic differentiation
    syms = sympy.symbols(names)
    expr = sympy.sympify(text.replace("^", "**"), locals=dict(zip(names, syms)))
    subs = dict(zip(syms, point))
    n = len(point)
    for order in range(1, 5):
        for idx in itertools.combinations_with_replacement(range(n), order):
            exact = float(sympy.diff(expr, *[syms[i] for i in idx]).subs(subs))
            assert abs(s.partial(idx) - exact) <= 1e-14 * max(1.0, abs(exact))


def test_stack_is_symmetric():
    s = _stack("log(exp(y1) + exp(y2)) * sin(y1 - y2*y1)", [0.4, -0.2])
    for t in (s.d2, s.d3, s.d4):
        for p in itertools.permutations(range(t.ndim)):
            np.testing.assert_array_equal(t, t.transpose(p))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-1.0, 1.0))
def test_order_zero_equals_evaluation(a, b):
    f = parse("sqrt(y1) * tanh(y2) + y1^(1.5) - cos(y1*y2)/(1 + y1)", ["y1", "y2"])
    s = deriv_stack(f, [a, b], ["y1", "y2"])
    assert s.d0 == pytest.approx(evaluate(f, {"y1": a, "y2": b}), rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("text,point", [
    ("log(exp(y1) + exp(y2)) + 0.5*(y1^2 + y2^2)", [0.3, -0.8]),
    ("-log(y1) - log(y2)", [1.5, 2.5]),
    ("sqrt(y1)*sin(y2) + 0.5*tanh(y2) + y1^(2.5)", [1.2, 0.4]),
])
def test_jets_agree_with_finite_differences(text, point):
    names = ["y1", "y2"]
    f = parse(text, names)
    s = deriv_stack(f, point, names)
    for order in range(1, 5):
        tol = 1e-3 if order == 4 else 1e-5
        for idx in itertools.combinations_with_replacement(range(2), order):
            exact = s.partial(idx)
            assert abs(fd_probe(f, point, idx) - exact) <= tol * max(1.0, abs(exact))


def test_fd_probe_examples():
    assert fd_probe(parse("y1^2/2", ["y1"]), [5.0], [0, 0], step=1e-3) == pytest.approx(1.0, abs=1e-9)
    f = parse("-log(y1)", ["y1"])
    assert fd_probe(f, [2.0], [0, 0, 0], step=1e-3) == pytest.approx(-0.25, abs=1e-5)
    assert fd_probe(f, [2.0], [0, 0, 0, 0], step=1e-2) == pytest.approx(0.375, abs=1e-4)


def test_fd_probe_leaving_domain():
    with pytest.raises(DomainError):
        fd_probe(parse("-log(y1)", ["y1"]), [1e-5], [0, 0])


def test_domain_error_through_jets():
    with pytest.raises(DomainError) as info:
        _stack("-log(y1)", [-1.0])
    assert info.value.subexpression == "log(y1)"


def test_params_bound_as_constants():
    f = parse("x1*y1^2", ["x1", "y1"])
    s = deriv_stack(f, [3.0], ["y1"], params={"x1": 2.0})
    assert s.d2[0, 0] == 4.0
    j = jet_of(f, [3.0], ["y1"], params={"x1": 2.0})
    assert j.value == 18.0


def test_division_and_power_jets():
    s = _stack("1/(1 + y1^2)", [0.5])
    # closed form derivatives of 1/(1+y^2)
    y = 0.5
    d1 = -2 * y / (1 + y * y) ** 2
    d2 = (6 * y * y - 2) / (1 + y * y) ** 3
    assert s.d1[0] == pytest.approx(d1, rel=1e-14)
    assert s.d2[0, 0] == pytest.approx(d2, rel=1e-14)
    s = _stack("y1^(0.5)", [4.0])
    assert s.d3[0, 0, 0] == pytest.approx(3 / 8 * 4.0 ** -2.5, rel=1e-14)
    assert math.isclose(s.d0, 2.0)
