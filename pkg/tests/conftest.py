import math

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from sgl.exppoly import ComplexPoly, ExpPoly
from sgl.parser import parse_exppoly

settings.register_profile(
    "sgl",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("sgl")


def small_floats(lo=-5.0, hi=5.0):
    return st.floats(lo, hi, allow_nan=False, allow_infinity=False).map(lambda x: round(x, 6))


@st.composite
def complex_numbers(draw, lo=-5.0, hi=5.0, nonzero=False):
    c = complex(draw(small_floats(lo, hi)), draw(small_floats(lo, hi)))
    if nonzero and abs(c) < 1e-3:
        c += 1.0
    return c


@st.composite
def polys(draw, min_deg=0, max_deg=4, constant_term=True):
    deg = draw(st.integers(min_deg, max_deg))
    coeffs = [draw(complex_numbers()) for _ in range(deg + 1)]
    if not constant_term:
        coeffs[0] = 0j
    if deg >= 1:
        coeffs[-1] = draw(complex_numbers(nonzero=True))
    return ComplexPoly(tuple(coeffs))


@st.composite
def exppolys(draw, max_terms=4, max_k=3, max_q=3):
    terms = []
    for _ in range(draw(st.integers(1, max_terms))):
        c = draw(complex_numbers(nonzero=True))
        k = draw(st.integers(0, max_k))
        Q = draw(polys(0, max_q, constant_term=False))
        terms.append((c, k, Q))
    return ExpPoly(tuple(terms))


@pytest.fixture
def ex1():
    """f'' + e^z f' - (e^z + 1) f = 0, solved by e^z."""
    return parse_exppoly("e^{z}"), parse_exppoly("-e^{z} - 1")


@pytest.fixture
def ex2():
    """f'' + e^z f' - f = 0, solved by 1 - e^{-z}."""
    return parse_exppoly("e^{z}"), parse_exppoly("-1")


def rel_close(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def log_factorial(k):
    return math.lgamma(k + 1)
