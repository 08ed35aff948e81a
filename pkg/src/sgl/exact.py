"""Exact Taylor solutions of f'' + A f' + B f = 0 for exp-polynomial A, B.

The Taylor recurrence for these equations cancels catastrophically (terms of
size ~2^k/k! summing to ~1/k!), so coefficients are computed exactly.  The
engine works on derivative values ``F_k = f^(k)(0)``, where products obey
Leibniz' rule::

    F_{k+2} = -[ (A f')^(k)(0) + (B f)^(k)(0) ].

For a factor ``z^m e^{lam z}`` the Leibniz sum ``sum_i C(j,i) lam^i h_{j-i}`` is
produced online from a difference table whose new antidiagonal is a single
cumulative sum of the previous one.  Exponents of degree >= 2 fall back to the
direct O(j) Leibniz sum.

All inputs are doubles, hence dyadic rationals.  With ``alpha = 2**sigma`` the
substitution ``g(w) = 2**t f(alpha w)`` turns every constant into a Gaussian
integer, so the computation is exact Python-int arithmetic throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .exppoly import ExpPoly
from .scaled import ScaledComplex

_UNITS = {(1, 0), (-1, 0), (0, 1), (0, -1)}


def dyadic(x: complex) -> tuple[int, int, int]:
    """``(re, im, s)`` with ``x == (re + i*im) / 2**s`` and ``s >= 0`` minimal."""
    x = complex(x)
    if not (math.isfinite(x.real) and math.isfinite(x.imag)):
        raise DomainError(f"non-finite constant {x}")
    pr, qr = x.real.as_integer_ratio()
    pi, qi = x.imag.as_integer_ratio()
    s = max(qr.bit_length() - 1, qi.bit_length() - 1)
    return pr << (s - (qr.bit_length() - 1)), pi << (s - (qi.bit_length() - 1)), s


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _gmul(ar, ai, br, bi):
    return ar * br - ai * bi, ar * bi + ai * br


def _unit_mul(u, xr, xi):
    if u == (1, 0):
        return xr, xi
    if u == (-1, 0):
        return -xr, -xi
    if u == (0, 1):
        return -xi, xr
    return xi, -xr


def _unit_pow(u, k):
    r = (1, 0)
    for _ in range(k % 4):
        r = _gmul(*r, *u)
    return r


@dataclass(frozen=True)
class _IntTerm:
    cr: int
    ci: int
    m: int
    q: tuple[tuple[int, int], ...]  # exponent coefficients q_1..q_d (q_0 == 0)

    @property
    def lam(self):
        if not self.q:
            return (0, 0)
        if len(self.q) == 1:
            return self.q[0]
        return None


def _sigma_needed(e: ExpPoly, extra: int) -> int:
    """Smallest sigma making ``alpha**extra * e(alpha w)`` Gaussian-integral (apart from 2**t)."""
    sigma = 0
    for t in e.terms:
        for j, q in enumerate(t.Q.coeffs):
            if j == 0 or q == 0:
                continue
            sigma = max(sigma, _ceil_div(dyadic(q)[2], j))
    return sigma


def _coef_shift(e: ExpPoly) -> int:
    return max((dyadic(t.c)[2] for t in e.terms), default=0)


def _integerize(e: ExpPoly, sigma: int, extra: int, t_shift: int) -> list[_IntTerm]:
    """Terms of ``2**t_shift * alpha**extra * e(alpha w)`` as Gaussian-integer data."""
    out = []
    for term in e.terms:
        cr, ci, s = dyadic(term.c)
        up = sigma * (term.k + extra) + t_shift - s
        if up < 0:
            raise AssertionError("scaling too small to integerize coefficient")
        q = []
        for j, qj in enumerate(term.Q.coeffs):
            if j == 0:
                continue
            qr, qi, qs = dyadic(qj)
            q.append((qr << (sigma * j - qs), qi << (sigma * j - qs)))
        while q and q[-1] == (0, 0):
            q.pop()
        out.append(_IntTerm(cr << up, ci << up, term.k, tuple(q)))
    return out


class _LinearTable:
    """Online values ``T_j = (e^{lam z} h)^(j)(0)`` from values ``h_j``."""

    def __init__(self, lam, real: bool):
        self.lam = lam
        self.unit = lam in _UNITS
        self.real = real
        self.dr = self.di = None
        self.Tr: list[int] = []
        self.Ti: list[int] = []

    def push(self, hr, hi):
        j = len(self.Tr)
        lam = self.lam
        if self.unit:
            # store e_j = lam^{-j} d_j so the update is a bare cumulative sum
            inv = _unit_pow((lam[0], -lam[1]), j)
            pr, pi = _unit_mul(inv, hr, hi)
            self.dr = _prepend_cumsum(pr, self.dr)
            if not self.real:
                self.di = _prepend_cumsum(pi, self.di)
            er = self.dr[-1]
            ei = 0 if self.real else self.di[-1]
            tr, ti = _unit_mul(_unit_pow(lam, j), er, ei)
        else:
            a, b = lam
            if self.dr is None:
                lr = li = None
            elif self.real:
                lr, li = a * self.dr, None
            else:
                lr = a * self.dr - b * self.di
                li = a * self.di + b * self.dr
            self.dr = _prepend_cumsum(hr, lr)
            if not self.real:
                self.di = _prepend_cumsum(hi, li)
            tr = self.dr[-1]
            ti = 0 if self.real else self.di[-1]
        self.Tr.append(tr)
        self.Ti.append(ti)


def _prepend_cumsum(head, tail):
    n = 1 if tail is None else len(tail) + 1
    buf = np.empty(n, dtype=object)
    buf[0] = head
    if tail is not None:
        buf[1:] = tail
    return np.cumsum(buf)


class _ExpTable:
    """``(e^{Q} h)^(j)(0)`` for deg Q >= 2 by the direct Leibniz sum."""

    def __init__(self, q, N: int, real: bool, h_re, h_im):
        self.real = real
        self.h_re, self.h_im = h_re, h_im
        self.Gr, self.Gi = _exp_derivatives(q, N)
        self.row = np.array([1], dtype=object)
        self.Tr: list[int] = []
        self.Ti: list[int] = []

    def push(self, hr, hi):
        j = len(self.Tr)
        if j > 0:
            nxt = np.empty(j + 1, dtype=object)
            nxt[0] = nxt[-1] = 1
            nxt[1:-1] = self.row[:-1] + self.row[1:]
            self.row = nxt
        wr = self.row * self.Gr[: j + 1]
        xr = self.h_re[j::-1] if j > 0 else self.h_re[:1]
        tr = int(np.dot(wr, xr))
        if self.real:
            ti = 0
        else:
            wi = self.row * self.Gi[: j + 1]
            xi = self.h_im[j::-1] if j > 0 else self.h_im[:1]
            tr = tr - int(np.dot(wi, xi))
            ti = int(np.dot(wr, xi)) + int(np.dot(wi, xr))
        self.Tr.append(tr)
        self.Ti.append(ti)


def _exp_derivatives(q, N):
    """Derivatives at 0 of ``e^{Q}``, ``Q = sum_j q_j z^j`` with Gaussian-int q, via g' = Q' g."""
    d = len(q)
    D = [((j + 1) * math.factorial(j) * q[j][0], (j + 1) * math.factorial(j) * q[j][1]) for j in range(d)]
    Gr = np.empty(N + 1, dtype=object)
    Gi = np.empty(N + 1, dtype=object)
    Gr[0], Gi[0] = 1, 0
    for i in range(N):
        sr = si = 0
        for j in range(min(i, d - 1) + 1):
            cb = math.comb(i, j)
            pr, pi = _gmul(D[j][0], D[j][1], Gr[i - j], Gi[i - j])
            sr += cb * pr
            si += cb * pi
        Gr[i + 1], Gi[i + 1] = sr, si
    return Gr, Gi


@dataclass(frozen=True)
class ExactSeries:
    """Exact derivative values: ``f^(k)(0) = (re[k] + i im[k]) / 2**(sigma*k + t)``."""

    re: np.ndarray
    im: np.ndarray
    sigma: int = 0
    t: int = 0

    @property
    def N(self) -> int:
        return len(self.re) - 1

    def derivative_value(self, k: int) -> ScaledComplex:
        return ScaledComplex.from_gaussian_int(int(self.re[k]), int(self.im[k]), self.sigma * k + self.t)

    def to_power_series(self):
        from .series import PowerSeries

        mant = np.zeros(self.N + 1, dtype=complex)
        expo = np.zeros(self.N + 1, dtype=np.int64)
        fact = 1
        for k in range(self.N + 1):
            if k > 1:
                fact *= k
            v = ScaledComplex.from_gaussian_int(int(self.re[k]), int(self.im[k]), self.sigma * k + self.t)
            if not v.is_zero:
                v = v / ScaledComplex.from_gaussian_int(fact, 0)
            mant[k] = v.mantissa
            expo[k] = v.exponent
        return PowerSeries.from_arrays(mant, expo)

    def combine(self, a: complex, other: "ExactSeries", b: complex) -> "ExactSeries":
        """Exact ``a*self + b*other`` (same sigma required)."""
        if self.sigma != other.sigma or self.N != other.N:
            raise DomainError("series must share truncation and scaling")
        ar, ai, sa = dyadic(a)
        br, bi, sb = dyadic(b)
        t = max(self.t + sa, other.t + sb)
        ua, ub = t - self.t - sa, t - other.t - sb
        re = (ar * self.re - ai * self.im) * (1 << ua) + (br * other.re - bi * other.im) * (1 << ub)
        im = (ar * self.im + ai * self.re) * (1 << ua) + (br * other.im + bi * other.re) * (1 << ub)
        return ExactSeries(re, im, self.sigma, t)


def solve(A: ExpPoly, B: ExpPoly, f0: complex, f1: complex, N: int) -> ExactSeries:
    """Exact derivative values ``f^(k)(0)``, k <= N, of the solution with f(0)=f0, f'(0)=f1."""
    if N < 0:
        raise DomainError("truncation must be >= 0")
    r0, i0, s0 = dyadic(f0)
    r1, i1, s1 = dyadic(f1)
    sigma = max(
        _sigma_needed(A, 1), _sigma_needed(B, 2),
        _coef_shift(A), _ceil_div(_coef_shift(B), 2), s1,
    )
    t = s0
    a_terms = _integerize(A, sigma, 1, 0)
    b_terms = _integerize(B, sigma, 2, 0)
    # g(w) = 2^t f(alpha w): g(0) = 2^t f0, g'(0) = 2^t alpha f1
    F0 = (r0, i0)
    up = t + sigma - s1
    F1 = (r1 << up, i1 << up)
    re, im = _run(a_terms, b_terms, F0, F1, N)
    return ExactSeries(re, im, sigma, t)


def solve_basis(A: ExpPoly, B: ExpPoly, N: int, workers: int = 1) -> tuple[ExactSeries, ExactSeries]:
    """Solutions with (f0, f1) = (1, 0) and (0, 1); any other is an exact combination.

    With ``workers > 1`` the two independent solves run in separate processes.
    """
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=2) as pool:
            fu = pool.submit(solve, A, B, 1, 0, N)
            fv = pool.submit(solve, A, B, 0, 1, N)
            return fu.result(), fv.result()
    return solve(A, B, 1, 0, N), solve(A, B, 0, 1, N)


def _run(a_terms, b_terms, F0, F1, N):
    all_terms = a_terms + b_terms
    real = all(t.ci == 0 and all(q[1] == 0 for q in t.q) for t in all_terms) and F0[1] == 0 and F1[1] == 0
    Fr = np.empty(N + 2, dtype=object)
    Fi = np.empty(N + 2, dtype=object)
    Fr[:] = 0
    Fi[:] = 0
    Fr[0], Fi[0] = F0
    if N >= 1:
        Fr[1], Fi[1] = F1
    dFr, dFi = Fr[1:], Fi[1:]

    tables: dict = {}
    plan = []
    for src, terms in (("df", a_terms), ("f", b_terms)):
        hr, hi = (dFr, dFi) if src == "df" else (Fr, Fi)
        for term in terms:
            lam = term.lam
            key = (src, lam if lam is not None else term.q)
            if key not in tables:
                if lam == (0, 0):
                    tables[key] = None
                elif lam is not None:
                    tables[key] = _LinearTable(lam, real)
                else:
                    tables[key] = _ExpTable(term.q, N, real, hr, hi)
            plan.append((term.cr, term.ci, term.m, key))

    for k in range(N - 1):
        for key, tab in tables.items():
            if tab is None:
                continue
            j = k
            if key[0] == "df":
                tab.push(dFr[j], dFi[j])
            else:
                tab.push(Fr[j], Fi[j])
        sr = si = 0
        for cr, ci, m, key in plan:
            j = k - m
            if j < 0:
                continue
            tab = tables[key]
            if tab is None:
                if key[0] == "df":
                    tr, ti = dFr[j], dFi[j]
                else:
                    tr, ti = Fr[j], Fi[j]
            else:
                tr, ti = tab.Tr[j], tab.Ti[j]
            ff = math.perm(k, m)
            pr, pi = _gmul(cr * ff, ci * ff, tr, ti)
            sr += pr
            si += pi
        Fr[k + 2] = -sr
        Fi[k + 2] = -si
    return Fr[: N + 1].copy(), Fi[: N + 1].copy()


def series_values(e: ExpPoly, N: int) -> ExactSeries:
    """Exact derivative values of ``e`` itself (no ODE), in the same scaled form."""
    sigma = max(_sigma_needed(e, 0), 0)
    t = _coef_shift(e)
    terms = _integerize(e, sigma, 0, t)
    re = np.zeros(N + 1, dtype=object)
    im = np.zeros(N + 1, dtype=object)
    for term in terms:
        if term.q:
            if len(term.q) == 1:
                lr, li = term.q[0]
                Gr = np.empty(N + 1, dtype=object)
                Gi = np.empty(N + 1, dtype=object)
                gr, gi = 1, 0
                for i in range(N + 1):
                    Gr[i], Gi[i] = gr, gi
                    gr, gi = _gmul(gr, gi, lr, li)
            else:
                Gr, Gi = _exp_derivatives(term.q, N)
        else:
            Gr = np.zeros(N + 1, dtype=object)
            Gi = np.zeros(N + 1, dtype=object)
            Gr[0] = 1
        for k in range(term.m, N + 1):
            ff = math.perm(k, term.m)
            pr, pi = _gmul(term.cr * ff, term.ci * ff, Gr[k - term.m], Gi[k - term.m])
            re[k] += pr
            im[k] += pi
    return ExactSeries(re, im, sigma, t)
