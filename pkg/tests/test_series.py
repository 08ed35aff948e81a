import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complex_numbers, log_factorial
from sgl import exact
from sgl.errors import DomainError, ReliabilityError
from sgl.exppoly import ExpPoly
from sgl.parser import parse_exppoly as P
from sgl.series import (
    PowerSeries,
    eval_on_circle,
    evaluate_at,
    max_term_and_central_index,
    modulus_order,
    order_from_coeffs,
    residual,
    running_order,
    series_of,
    taylor_solve,
    taylor_solve_many,
)


def inv_factorials(N):
    return np.array([1 / math.factorial(k) for k in range(N + 1)])


# --- exact engine -------------------------------------------------------------


@pytest.mark.parametrize("x, expected", [
    (1.0, (1, 0, 0)),
    (0.5 + 0.25j, (2, 1, 2)),
    (-3, (-3, 0, 0)),
    (0.1, None),
])
def test_dyadic_decomposition(x, expected):
    re, im, s = exact.dyadic(x)
    assert complex(re, im) / 2 ** s == x
    if expected is not None:
        assert (re, im, s) == expected


def test_exact_derivatives_of_closed_form_solutions(ex1, ex2):
    f = exact.solve(*ex1, 1, 1, 60)
    assert all(f.derivative_value(k).to_complex() == 1 for k in range(61))
    g = exact.solve(*ex2, 0, 1, 60)
    assert all(g.derivative_value(k).to_complex() == -(-1) ** k for k in range(1, 61))


def test_exact_engine_with_dyadic_and_complex_constants():
    # f'' + f/4 = 0, f = cos(z/2): derivatives (-1/4)^j at even orders
    f = exact.solve(ExpPoly(), P("0.25"), 1, 0, 40)
    assert all(f.derivative_value(2 * j).to_complex() == (-0.25) ** j for j in range(21))
    # f = e^{iz} solves f'' - 2i f' - f = 0
    g = exact.solve(P("-2i"), P("-1"), 1, 1j, 30)
    assert all(g.derivative_value(k).to_complex() == 1j ** k for k in range(31))


def test_exact_engine_with_quadratic_exponent():
    # f = e^{z^2} solves f'' - (2 + 4z^2) f = 0; f^(2j)(0) = (2j)!/j!
    f = exact.solve(ExpPoly(), P("-2 - 4*z^2"), 1, 0, 12)
    vals = [f.derivative_value(k).to_complex() for k in range(0, 13, 2)]
    assert vals == [1, 2, 12, 120, 1680, 30240, 665280]


def test_exact_engine_quadratic_exponential_coefficient():
    # f = e^z solves f'' + e^{z^2} f' - (1 + e^{z^2}) f = 0
    f = exact.solve(P("e^{z^2}"), P("-1 - e^{z^2}"), 1, 1, 80)
    assert all(f.derivative_value(k).to_complex() == 1 for k in range(81))


def test_basis_combination_is_exact(ex2):
    U, V = exact.solve_basis(*ex2, 200)
    W = U.combine(3, V, -1.5)
    direct = exact.solve(*ex2, 3, -1.5, 200)
    assert all(W.derivative_value(k).to_complex() == direct.derivative_value(k).to_complex() for k in range(201))


# --- series_of ----------------------------------------------------------------


@pytest.mark.parametrize("text, expected", [
    ("e^{z}", [1, 1, 1 / 2, 1 / 6, 1 / 24, 1 / 120]),
    ("e^{z^2}", [1, 0, 1, 0, 1 / 2, 0]),
    ("3 + z^2", [3, 0, 1, 0, 0, 0]),
])
def test_series_of(text, expected):
    got = series_of(P(text), 5).to_complex()
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=0)


def test_series_of_complex_exponential_matches_closed_form():
    got = series_of(P("(1+2i)*e^{(0.3-0.7i)*z}"), 40).to_complex()
    lam = 0.3 - 0.7j
    want = np.array([(1 + 2j) * lam ** k / math.factorial(k) for k in range(41)])
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_magnitude_range_to_1e5_coefficients():
    s = series_of(P("e^{z}"), 100_000)
    k = np.array([10, 1000, 100_000])
    np.testing.assert_allclose(s.log_abs()[k], [-log_factorial(int(j)) for j in k], rtol=1e-12)


def test_power_series_arithmetic_truncates_to_shorter_operand():
    a = series_of(P("e^{z}"), 10)
    b = series_of(P("e^{-z}"), 6)
    prod = a * b
    assert prod.N == 6
    np.testing.assert_allclose(prod.to_complex(), [1, 0, 0, 0, 0, 0, 0], atol=1e-15)
    s = a + b
    assert s.N == 6
    np.testing.assert_allclose((a - a).to_complex(), 0)
    np.testing.assert_allclose(a.derivative().to_complex(), a.truncate(9).to_complex(), rtol=1e-15)


# --- taylor_solve ---------------------------------------------------------------


def test_exp_z_solution_coefficients(ex1):
    f = taylor_solve(*ex1, 1, 1, 50)
    np.testing.assert_allclose(f.to_complex(), inv_factorials(50), rtol=1e-10, atol=0)


def test_trivial_equation():
    f = taylor_solve(ExpPoly(), ExpPoly(), 2, 3, 10)
    np.testing.assert_array_equal(f.to_complex(), [2, 3] + [0] * 9)


def test_one_minus_exp_solution_coefficients(ex2):
    f = taylor_solve(*ex2, 0, 1, 60)
    want = np.array([0] + [-(-1) ** k / math.factorial(k) for k in range(1, 61)])
    np.testing.assert_allclose(f.to_complex(), want, rtol=1e-10, atol=0)


def test_float_recurrence_on_power_series_inputs():
    # with A = -e^z and B = -z^2 every contribution to the recurrence has one sign
    A, B = P("-e^{z}"), P("-z^2")
    f = taylor_solve(series_of(A, 300), series_of(B, 300), 1, 1, 300)
    assert f.allclose(taylor_solve(A, B, 1, 1, 300), rtol=1e-12)
    with pytest.raises(DomainError):
        taylor_solve(series_of(A, 60), series_of(B, 60), 1, 1, 80)


def test_float_recurrence_loses_exp_z_solution(ex1):
    # documented limitation: cancellation ruins the floating path, the exact path is unaffected
    A, B = (series_of(x, 60) for x in ex1)
    f = taylor_solve(A, B, 1, 1, 60)
    err = np.abs(f.to_complex() / inv_factorials(60) - 1)
    assert err[-1] > 1e-6
    assert np.max(np.abs(taylor_solve(*ex1, 1, 1, 60).to_complex() / inv_factorials(60) - 1)) < 1e-15


def test_truncation_precondition(ex1):
    with pytest.raises(DomainError):
        taylor_solve(*ex1, 1, 1, 1)


RESIDUAL_FIXTURES = [
    ("e^{z}", "-e^{z} - 1", 1, 1),
    ("e^{z}", "-1", 0, 1),
    ("e^{-z}", "-1", 2, 1),
    ("e^{-z}", "-2", 1, -1),
    ("e^{z^2}*e^{z}", "z", 1, 0),
    ("(1+i)*e^{z} - z*e^{-z}", "z^2 - 3i", 0.5, -2),
    ("0", "0", 2, 3),
]


@pytest.mark.parametrize("A, B, f0, f1", RESIDUAL_FIXTURES)
def test_residual_invariant(A, B, f0, f1):
    f = taylor_solve(P(A), P(B), f0, f1, 300)
    res = residual(f, P(A), P(B))
    assert len(res) == 299
    assert np.max(res) <= 1e-10


def test_residual_detects_a_wrong_series(ex1):
    f = series_of(P("e^{2*z}"), 50)
    assert np.max(residual(f, *ex1)) > 1e-3


@settings(max_examples=40)
@given(complex_numbers(), complex_numbers(), complex_numbers(), complex_numbers(), complex_numbers(), complex_numbers())
def test_linearity(a, b, u0, u1, v0, v1):
    A, B = P("(0.5-1i)*e^{-z} + z"), P("2 - e^{z}")
    N = 120
    u = taylor_solve(A, B, u0, u1, N)
    v = taylor_solve(A, B, v0, v1, N)
    w = taylor_solve(A, B, a * u0 + b * v0, a * u1 + b * v1, N)
    combo = u.scale(a) + v.scale(b)
    # the error of the rounded combination is measured against the size of its parts
    wc, cc = w.to_complex(), combo.to_complex()
    size = np.abs(a * u.to_complex()) + np.abs(b * v.to_complex())
    assert np.all(np.abs(wc - cc) <= 1e-12 * size + 1e-300)


def test_solve_many_matches_individual_solves():
    A, B = P("e^{-z}"), P("-2")
    ics = [(1, 0), (0, 1), (-1, 1), (2, 1)]
    many = taylor_solve_many(A, B, ics, 150)
    for (f0, f1), f in zip(ics, many):
        assert f.allclose(taylor_solve(A, B, f0, f1, 150), rtol=1e-13)
    two = taylor_solve_many(A, B, ics[:2], 150)
    assert two[1].allclose(many[1], rtol=1e-13)


# --- order estimation ------------------------------------------------------------


def test_order_of_exponential_series():
    f = PowerSeries.from_log_abs([-log_factorial(k) for k in range(2001)])
    est = order_from_coeffs(f)
    assert est.estimate == pytest.approx(1.0, abs=0.02)
    assert not est.polynomial
    assert est.window == (1000, 2000)
    assert len(est.sequence) == len(est.indices)


def test_order_of_gaussian_pattern():
    f = PowerSeries.from_log_abs([-math.lgamma(k / 2 + 1) for k in range(2001)])
    assert order_from_coeffs(f).estimate == pytest.approx(2.0, abs=0.05)


def test_order_of_polynomial_is_flagged():
    f = PowerSeries.from_complex([1, 2, 3] + [0] * 300)
    est = order_from_coeffs(f)
    assert est.polynomial and est.estimate == 0.0


def test_order_needs_enough_tail_coefficients():
    f = series_of(P("e^{z}"), 150)
    with pytest.raises(ReliabilityError):
        order_from_coeffs(f)
    g = series_of(P("e^{z^2}"), 300)  # only even coefficients are nonzero
    with pytest.raises(ReliabilityError):
        order_from_coeffs(g)
    assert order_from_coeffs(series_of(P("e^{z^2}"), 400)).estimate == pytest.approx(2.0, abs=0.1)


@settings(max_examples=50)
@given(st.floats(-300, 300), st.floats(-3, 3))
def test_order_scale_invariance(log_scale, phase):
    base = [-math.lgamma(k / 3 + 1) + 0.1 * math.sin(k) for k in range(601)]
    f = PowerSeries.from_log_abs(base)
    g = PowerSeries.from_log_abs([b + log_scale for b in base], [phase] * 601)
    assert order_from_coeffs(g).estimate == pytest.approx(order_from_coeffs(f).estimate, abs=1e-9)


def test_running_order_is_stable_for_finite_order(ex1):
    f = taylor_solve(*ex1, 1, 1, 1000)
    vals = running_order(f, [200, 500, 1000])
    assert all(abs(v - 1) < 0.05 for v in vals)


# --- maximum term, evaluation --------------------------------------------------


def test_central_index_of_exponential():
    mu, nu = max_term_and_central_index(series_of(P("e^{z}"), 100), 10)
    assert nu == 10
    assert mu.magnitude_log == pytest.approx(10 * math.log(10) - log_factorial(10), abs=1e-12)


def test_central_index_of_constant():
    mu, nu = max_term_and_central_index(PowerSeries.from_complex([5] + [0] * 10), 7.5)
    assert nu == 0 and mu.to_complex() == pytest.approx(5)


def test_central_index_of_gaussian():
    _, nu = max_term_and_central_index(series_of(P("e^{z^2}"), 100), 3)
    assert nu == 18


def test_central_index_rejects_zero_series():
    with pytest.raises(DomainError):
        max_term_and_central_index(PowerSeries.from_complex([0] * 5), 1)


def test_max_modulus_of_exponential():
    assert eval_on_circle(series_of(P("e^{z}"), 200), 20).magnitude_log == pytest.approx(20, abs=1e-6)


def test_max_modulus_of_constant():
    assert eval_on_circle(PowerSeries.from_complex([1] + [0] * 50), 123.0).magnitude_log == pytest.approx(0, abs=1e-15)


def test_max_modulus_of_one_minus_exp_solution_against_brute_force():
    f = series_of(P("1 - e^{-z}"), 200)
    got = eval_on_circle(f, 20).magnitude_log
    th = 2 * np.pi * np.arange(4096) / 4096
    brute = np.max(np.abs(1 - np.exp(-20 * np.exp(1j * th))))
    assert got == pytest.approx(math.log(brute), abs=1e-6)


def test_max_modulus_refuses_beyond_reliable_radius():
    with pytest.raises(ReliabilityError):
        eval_on_circle(series_of(P("e^{z}"), 50), 40)


def test_point_evaluation_with_derivatives():
    f = series_of(P("e^{2*z}"), 200)
    pv = evaluate_at(f, 3 - 1j, derivatives=2)
    ref = np.exp(2 * (3 - 1j))
    for k in range(3):
        assert pv.values[k].to_complex() == pytest.approx(2 ** k * ref, rel=1e-12)
    assert pv.reliable


def test_modulus_order_of_gaussian():
    f = series_of(P("e^{z^2}"), 2000)
    mo = modulus_order(f, np.geomspace(4, 20, 10))
    assert mo.estimate == pytest.approx(2.0, abs=0.05)
