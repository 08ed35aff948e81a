"""Truncated power series with scaled coefficients, ODE solutions and order estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from . import scaled as sc
from .errors import DomainError, ReliabilityError
from .exppoly import ExpPoly
from .scaled import ScaledComplex

TAIL_TOL = 1e-12
MIN_TAIL_COEFFS = 100


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Coefficients ``c_k = mant[k] * 2**exp[k]``, k = 0..N."""

    mant: np.ndarray
    exp: np.ndarray

    @classmethod
    def from_arrays(cls, mant, exp) -> "PowerSeries":
        m, e = sc.normalize(mant, exp)
        m.setflags(write=False)
        e.setflags(write=False)
        return cls(m, e)

    @classmethod
    def from_complex(cls, coeffs) -> "PowerSeries":
        return cls.from_arrays(*sc.from_complex_array(np.atleast_1d(np.asarray(coeffs, dtype=complex))))

    @classmethod
    def from_scaled(cls, values) -> "PowerSeries":
        values = list(values)
        return cls.from_arrays(
            np.array([v.mantissa for v in values], dtype=complex),
            np.array([v.exponent if not v.is_zero else 0 for v in values], dtype=np.int64),
        )

    @classmethod
    def from_log_abs(cls, logmag, phase=None) -> "PowerSeries":
        logmag = np.asarray(logmag, dtype=float)
        if phase is None:
            phase = np.zeros_like(logmag)
        return cls.from_arrays(*sc.from_log_phase_array(logmag, phase))

    @property
    def N(self) -> int:
        return len(self.mant) - 1

    def coeff(self, k: int) -> ScaledComplex:
        if not 0 <= k <= self.N:
            return ScaledComplex()
        return sc.to_scalar(self.mant[k], self.exp[k])

    @property
    def coeffs(self) -> list[ScaledComplex]:
        return [self.coeff(k) for k in range(self.N + 1)]

    def log_abs(self) -> np.ndarray:
        return sc.log_abs(self.mant, self.exp)

    def to_complex(self) -> np.ndarray:
        """Plain complex coefficients (may underflow to 0 or overflow to inf)."""
        e = np.clip(self.exp, -5000, 5000)
        return np.ldexp(self.mant.real, e) + 1j * np.ldexp(self.mant.imag, e)

    def is_zero(self) -> bool:
        return not np.any(self.mant != 0)

    def truncate(self, N: int) -> "PowerSeries":
        if N < 0:
            raise DomainError("truncation must be >= 0")
        if N > self.N:
            raise DomainError(f"cannot extend a series of order {self.N} to {N}")
        return PowerSeries(self.mant[: N + 1], self.exp[: N + 1])

    def scale(self, c) -> "PowerSeries":
        c = c if isinstance(c, ScaledComplex) else ScaledComplex.from_complex(c)
        if c.is_zero:
            return PowerSeries.from_complex(np.zeros(self.N + 1))
        return PowerSeries.from_arrays(self.mant * c.mantissa, self.exp + c.exponent)

    def __neg__(self) -> "PowerSeries":
        return PowerSeries(-self.mant, self.exp)

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.N, other.N) + 1
        m = np.stack([self.mant[:n], other.mant[:n]])
        e = np.stack([self.exp[:n], other.exp[:n]])
        return PowerSeries.from_arrays(*sc.vsum(m, e, axis=0))

    def __sub__(self, other: "PowerSeries") -> "PowerSeries":
        return self + (-other)

    def __mul__(self, other) -> "PowerSeries":
        if not isinstance(other, PowerSeries):
            return self.scale(other)
        n = min(self.N, other.N) + 1
        out_m = np.zeros(n, dtype=complex)
        out_e = np.zeros(n, dtype=np.int64)
        for k in range(n):
            m = self.mant[: k + 1] * other.mant[k::-1]
            e = self.exp[: k + 1] + other.exp[k::-1]
            out_m[k], out_e[k] = sc.vsum(m, e)
        return PowerSeries.from_arrays(out_m, out_e)

    __rmul__ = __mul__

    def derivative(self) -> "PowerSeries":
        k = np.arange(1, self.N + 1)
        if len(k) == 0:
            return PowerSeries.from_complex([0.0])
        return PowerSeries.from_arrays(self.mant[1:] * k, self.exp[1:])

    def allclose(self, other: "PowerSeries", rtol: float = 1e-12) -> bool:
        """Coefficient-wise agreement relative to each coefficient's magnitude."""
        if self.N != other.N:
            return False
        d = self - other
        la, lb, ld = self.log_abs(), other.log_abs(), d.log_abs()
        ref = np.maximum(la, lb)
        ok = (ld == -np.inf) | (ld <= ref + math.log(rtol))
        return bool(np.all(ok))


# --- construction -------------------------------------------------------------


def series_of(e: ExpPoly, N: int) -> PowerSeries:
    """Taylor coefficients of an exp-polynomial about 0 (exact, then rounded once)."""
    if N < 0:
        raise DomainError("truncation must be >= 0")
    return exact.series_values(e, N).to_power_series()


def _as_series(x, N: int) -> PowerSeries:
    if isinstance(x, PowerSeries):
        if x.N < N:
            raise DomainError(f"coefficient series of order {x.N} shorter than truncation {N}")
        return x.truncate(N)
    if isinstance(x, ExpPoly):
        return series_of(x, N)
    raise TypeError(f"expected ExpPoly or PowerSeries, got {type(x).__name__}")


def taylor_solve(A, B, f0: complex, f1: complex, N: int) -> PowerSeries:
    """Coefficients c_0..c_N of the solution of f'' + A f' + B f = 0, f(0)=f0, f'(0)=f1.

    Exp-polynomial coefficients go through the exact engine; power-series
    coefficients use the floating recurrence
    ``(k+2)(k+1) c_{k+2} = -sum_{j<=k} [(j+1) c_{j+1} A_{k-j} + c_j B_{k-j}]``.
    """
    if N < 2:
        raise DomainError("truncation must be >= 2")
    if isinstance(A, ExpPoly) and isinstance(B, ExpPoly):
        return exact.solve(A, B, f0, f1, N).to_power_series()
    return _float_solve(_as_series(A, N), _as_series(B, N), f0, f1, N)


def _float_solve(A: PowerSeries, B: PowerSeries, f0, f1, N) -> PowerSeries:
    cm = np.zeros(N + 1, dtype=complex)
    ce = np.full(N + 1, sc.ZERO_EXP, dtype=np.int64)
    m0, e0 = sc.normalize(np.array([f0, f1]), np.zeros(2, dtype=np.int64))
    cm[:2], ce[:2] = m0, e0
    for k in range(N - 1):
        j = np.arange(k + 1)
        m = np.concatenate([(j + 1) * cm[1 : k + 2] * A.mant[k::-1], cm[: k + 1] * B.mant[k::-1]])
        e = np.concatenate([ce[1 : k + 2] + A.exp[k::-1], ce[: k + 1] + B.exp[k::-1]])
        sm, se = sc.vsum(m, e)
        sm, se = sc.normalize(-sm / ((k + 2) * (k + 1)), se)
        cm[k + 2], ce[k + 2] = sm, se
    return PowerSeries.from_arrays(cm, ce)


def taylor_solve_many(A: ExpPoly, B: ExpPoly, ics, N: int, workers: int = 1) -> list[PowerSeries]:
    """Several initial conditions; beyond two, from exact basis solutions (linearity is exact)."""
    if N < 2:
        raise DomainError("truncation must be >= 2")
    ics = list(ics)
    if len(ics) <= 2:
        # a direct solve is never more work than the basis pair, and is much
        # cheaper when the requested solution is small but the basis is not
        if workers > 1 and len(ics) == 2:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=2) as pool:
                futs = [pool.submit(exact.solve, A, B, f0, f1, N) for f0, f1 in ics]
                return [fu.result().to_power_series() for fu in futs]
        return [exact.solve(A, B, f0, f1, N).to_power_series() for f0, f1 in ics]
    U, V = exact.solve_basis(A, B, N, workers)
    return [U.combine(f0, V, f1).to_power_series() for f0, f1 in ics]


def residual(f: PowerSeries, A, B) -> np.ndarray:
    """Per-k relative residual of f'' + A f' + B f, k = 0..N-2.

    Each entry is |coefficient of z^k in the sum| divided by the largest single
    product contributing to it.
    """
    N = f.N
    As, Bs = _as_series(A, N), _as_series(B, N)
    out = np.zeros(max(N - 1, 0))
    for k in range(N - 1):
        j = np.arange(k + 1)
        m = np.concatenate([
            [(k + 2) * (k + 1) * f.mant[k + 2]],
            (j + 1) * f.mant[1 : k + 2] * As.mant[k::-1],
            f.mant[: k + 1] * Bs.mant[k::-1],
        ])
        e = np.concatenate([[f.exp[k + 2]], f.exp[1 : k + 2] + As.exp[k::-1], f.exp[: k + 1] + Bs.exp[k::-1]])
        nz = m != 0
        if not np.any(nz):
            continue
        m, e = m[nz], e[nz]
        sm, se = sc.vsum(m, e)
        big = np.max(np.log(np.abs(m)) + e * sc.LN2)
        if sm != 0:
            out[k] = math.exp(math.log(abs(sm)) + se * sc.LN2 - big)
    return out


# --- order estimation ---------------------------------------------------------


def _lower_hull(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hx: list[float] = []
    hy: list[float] = []
    for xi, yi in zip(x.tolist(), y.tolist()):
        while len(hx) >= 2 and (hy[-1] - hy[-2]) * (xi - hx[-2]) >= (yi - hy[-2]) * (hx[-1] - hx[-2]):
            hx.pop()
            hy.pop()
        hx.append(xi)
        hy.append(yi)
    return np.array(hx), np.array(hy)


def _xlogx(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _three_point(H: np.ndarray, k: np.ndarray) -> np.ndarray:
    b, a = k // 2, k // 4
    g = lambda p, q: (_xlogx(q) - _xlogx(p)) / (q - p)
    h = lambda p, q: (H[q] - H[p]) / (q - p)
    num = g(b, k) - g(a, b)
    den = h(b, k) - h(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return est


@dataclass(frozen=True)
class OrderEstimate:
    estimate: float
    polynomial: bool
    window: tuple[int, int]
    indices: np.ndarray = field(repr=False)
    sequence: np.ndarray = field(repr=False)  # three-point estimates on the window
    classical: np.ndarray = field(repr=False)  # (k ln k) / (-ln|c_k|), nan at zero coefficients
    classical_sup: float = float("nan")


def order_from_coeffs(f: PowerSeries, window: float = 0.5) -> OrderEstimate:
    """Order of growth from the coefficient tail.

    ``-ln|c_k|`` is replaced by its lower convex hull H (the Newton polygon,
    which ignores zero and sub-dominant coefficients).  For
    ``H(k) ~ (k ln k)/rho + linear`` the second difference of slopes over the
    index triple (k/4, k/2, k) isolates ``1/rho`` independent of the linear
    part, so the estimate is unchanged by scaling the series.  The reported
    order is the supremum of these values over the last ``window`` fraction of
    indices.
    """
    if not 0 < window <= 1:
        raise DomainError("window must be in (0, 1]")
    N = f.N
    lo = int(math.floor(N * (1 - window)))
    lo = max(lo, 4)
    L = -f.log_abs()
    ks = np.arange(N + 1)
    finite = np.isfinite(L)
    tail_nonzero = int(np.count_nonzero(finite[lo:]))
    with np.errstate(divide="ignore", invalid="ignore"):
        classical = np.where(finite & (ks > 1), ks * np.log(np.maximum(ks, 1)) / L, np.nan)
    tail_classical = classical[lo:]
    csup = float(np.nanmax(tail_classical)) if np.any(np.isfinite(tail_classical)) else float("nan")
    if tail_nonzero == 0:
        return OrderEstimate(0.0, True, (lo, N), ks[lo:], np.zeros(N + 1 - lo), classical, csup)
    if tail_nonzero < MIN_TAIL_COEFFS:
        raise ReliabilityError(
            f"only {tail_nonzero} nonzero coefficients in the tail window; need {MIN_TAIL_COEFFS}"
        )
    hx, hy = _lower_hull(ks[finite].astype(float), L[finite])
    H = np.interp(ks.astype(float), hx, hy)
    idx = ks[lo:]
    seq = _three_point(H, idx)
    return OrderEstimate(float(np.max(seq)), False, (lo, N), idx, seq, classical, csup)


def running_order(f: PowerSeries, Ns, window: float = 0.5) -> list[float]:
    """``order_from_coeffs`` on the truncations ``f[:n]`` for each n in ``Ns``."""
    return [order_from_coeffs(f.truncate(int(n)), window).estimate for n in Ns]


# --- evaluation ---------------------------------------------------------------


def max_term_and_central_index(f: PowerSeries, r: float) -> tuple[ScaledComplex, int]:
    """Maximum term ``mu(r) = max |c_k| r^k`` and the largest index attaining it."""
    if not r > 0:
        raise DomainError("radius must be positive")
    if f.is_zero():
        raise DomainError("the zero series has no maximum term")
    t = f.log_abs() + np.arange(f.N + 1) * math.log(r)
    tmax = np.max(t)
    ties = np.nonzero(t >= tmax - 1e-12 * max(1.0, abs(tmax)))[0]
    nu = int(ties[-1])
    return ScaledComplex.from_log_phase(float(tmax), 0.0), nu


def _scaled_terms(f: PowerSeries, z: complex):
    """Terms c_k z^k in scaled form."""
    k = np.arange(f.N + 1)
    lz = math.log(abs(z))
    az = math.atan2(z.imag, z.real)
    lm = f.log_abs() + k * lz
    ph = sc.phase(f.mant) + k * az
    return lm, ph


def _tail_check(lm: np.ndarray, what: str):
    if len(lm) <= 1:
        return
    n_tail = min(max(5, len(lm) // 20), len(lm) // 2)
    top = np.max(lm)
    tail = np.max(lm[-n_tail:])
    if tail > top + math.log(TAIL_TOL):
        raise ReliabilityError(f"truncation insufficient for {what}: tail/max term = {math.exp(tail - top):.3e}")


def circle_values(f: PowerSeries, r: float, samples: int = 256) -> tuple[np.ndarray, int]:
    """``f(r e^{2 pi i j / samples})`` as (values * 2**shift, shift) after the tail check."""
    if not r > 0:
        raise DomainError("radius must be positive")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if f.is_zero():
        return np.zeros(samples, dtype=complex), 0
    k = np.arange(f.N + 1)
    lm = f.log_abs() + k * math.log(r)
    _tail_check(lm, f"|z| = {r}")
    top = np.max(lm[np.isfinite(lm)])
    shift = int(math.floor(top / sc.LN2))
    w = np.where(np.isfinite(lm), np.exp(np.minimum(lm - shift * sc.LN2, 700.0)), 0.0) * np.exp(1j * sc.phase(f.mant))
    folded = np.zeros(samples, dtype=complex)
    np.add.at(folded, k % samples, w)
    vals = np.fft.ifft(folded) * samples
    return vals, shift


def eval_on_circle(f: PowerSeries, r: float, samples: int = 256) -> ScaledComplex:
    """Max modulus estimate over ``samples`` equally spaced points of |z| = r."""
    vals, shift = circle_values(f, r, samples)
    m = float(np.max(np.abs(vals)))
    if m == 0:
        return ScaledComplex()
    return ScaledComplex.from_log_phase(math.log(m) + shift * sc.LN2, 0.0)


@dataclass(frozen=True)
class PointValue:
    values: tuple[ScaledComplex, ...]  # f, f', f'', ...
    rel_error: tuple[float, ...]  # rounding bound relative to each value

    @property
    def reliable(self) -> bool:
        return all(e <= 1e-6 for e in self.rel_error)


def evaluate_at(f: PowerSeries, z: complex, derivatives: int = 0) -> PointValue:
    """Value and derivatives of the series at ``z`` with a cancellation-based error bound.

    Raises ReliabilityError when the truncated tail is not negligible.
    """
    z = complex(z)
    series = f
    vals, errs = [], []
    for d in range(derivatives + 1):
        if z == 0:
            v = series.coeff(0)
            vals.append(v)
            errs.append(0.0 if not v.is_zero else math.inf)
        else:
            lm, ph = _scaled_terms(series, z)
            if d == 0:
                _tail_check(lm, f"z = {z}")
            top = np.max(lm) if np.any(np.isfinite(lm)) else -math.inf
            if top == -math.inf:
                vals.append(ScaledComplex())
                errs.append(math.inf)
            else:
                w = np.where(np.isfinite(lm), np.exp(lm - top), 0.0)
                s = complex(np.sum(w * np.exp(1j * ph)))
                v = ScaledComplex.from_complex(s) * ScaledComplex.from_log_phase(float(top), 0.0) if s != 0 else ScaledComplex()
                vals.append(v)
                absum = float(np.sum(w))
                errs.append(math.inf if s == 0 else 4 * (series.N + 1) * 2.2e-16 * absum / abs(s))
        series = series.derivative() if series.N > 0 else series
    return PointValue(tuple(vals), tuple(errs))


def reliable_radius(f: PowerSeries, r_hi: float = 1e6) -> float:
    """Largest radius (to 0.1%) where the truncation tail check passes."""
    def ok(r):
        try:
            k = np.arange(f.N + 1)
            _tail_check(f.log_abs() + k * math.log(r), "")
            return True
        except ReliabilityError:
            return False

    if f.is_zero() or ok(r_hi):
        return r_hi
    lo, hi = 1e-6, r_hi
    if not ok(lo):
        return 0.0
    while hi / lo > 1.001:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class ModulusOrder:
    estimate: float
    radii: np.ndarray
    loglog_M: np.ndarray


def modulus_order(f: PowerSeries, radii, samples: int = 256) -> ModulusOrder:
    """Slope of log log M(r) against log r over the radii where evaluation is reliable."""
    rs, ys = [], []
    for r in radii:
        try:
            M = eval_on_circle(f, float(r), samples)
        except ReliabilityError:
            continue
        lm = M.magnitude_log
        if lm > 1.0:
            rs.append(float(r))
            ys.append(math.log(lm))
    rs_a, ys_a = np.array(rs), np.array(ys)
    if len(rs) < 2 or rs_a[-1] / rs_a[0] < 2:
        return ModulusOrder(float("nan"), rs_a, ys_a)
    slope = float(np.polyfit(np.log(rs_a), ys_a, 1)[0])
    return ModulusOrder(slope, rs_a, ys_a)
