"""Ray-wise probes: growth exponents, lemma bounds, and Riccati traces of u = f'/f."""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, ReliabilityError
from .exppoly import ComplexPoly, ExpPoly, evaluate, exact_order
from .rays import Membership, delta, membership, partition
from .series import PowerSeries, evaluate_at

POLE_BOUND = 1e8
OVERFLOW_LOG = math.log(1e300)
MAX_STEPS = 10_000_000
LOG_FLOOR = 10.0
MEASURE_ZERO_CAVEAT = (
    "bounds hold for rays outside an exceptional set of linear measure zero; "
    "a finite ray sample can only approximate this"
)


class Growth(str, enum.Enum):
    BLOWS_UP = "BLOWS_UP"
    DECAYS = "DECAYS"
    NEITHER = "NEITHER"


class TraceStatus(str, enum.Enum):
    OK = "OK"
    POLE_ENCOUNTERED = "POLE_ENCOUNTERED"
    OVERFLOW_REGION = "OVERFLOW_REGION"
    STEP_LIMIT = "STEP_LIMIT"
    UNSTABLE = "UNSTABLE"
    FAILED = "FAILED"


@dataclass(frozen=True)
class RayTrace:
    """Samples along ``z = r e^{i theta}``.

    For Riccati traces ``values`` holds u(r) and ``log_f`` holds
    ``log f(r) - log f(r_start)``, the running integral of u dz.
    """

    theta: float
    radii: np.ndarray
    values: np.ndarray
    status: TraceStatus = TraceStatus.OK
    last_good_radius: float | None = None
    f_start: complex | None = None
    log_f: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if len(r) > 1 and np.any(np.diff(r) <= 0):
            raise DomainError("trace radii must be strictly increasing")


@dataclass(frozen=True)
class GrowthVerdict:
    exponent: float
    classification: Growth
    fit_residual: float
    flags: tuple[str, ...] = ()
    n_used: int = 0


def _ray_logs(g: ExpPoly, theta: float, radii: np.ndarray) -> np.ndarray:
    e = cmath.exp(1j * theta)
    return np.array([evaluate(g, r * e).magnitude_log for r in radii])


def growth_exponent(
    g: ExpPoly,
    theta: float,
    r_lo: float,
    r_hi: float,
    samples: int = 40,
    expected: float | None = None,
    tol: float = 0.05,
) -> GrowthVerdict:
    """Slope of log|log|g|| against log r along a ray, with a growth classification.

    Only radii with |log|g|| >= 10 are used, and the slope is fitted on the
    upper half (in log r) of those, where lower-order terms matter least.
    """
    if not (r_lo > 0 and r_hi / r_lo >= 100):
        raise DomainError("need r_lo > 0 and r_hi / r_lo >= 100")
    if samples < 20:
        raise DomainError("need at least 20 samples")
    if expected is None:
        expected = float(exact_order(g))
    radii = np.geomspace(r_lo, r_hi, samples)
    L = _ray_logs(g, theta, radii)
    if np.all(np.abs(L) <= 1e-12):
        return GrowthVerdict(float("nan"), Growth.NEITHER, float("nan"), ("unit_modulus",), 0)
    use = np.isfinite(L) & (np.abs(L) >= LOG_FLOOR)
    if np.count_nonzero(use) < 4:
        return GrowthVerdict(float("nan"), Growth.NEITHER, float("nan"), ("insufficient_growth",), int(np.count_nonzero(use)))
    r, Lu = radii[use], L[use]
    x = np.log(r)
    upper = x >= 0.5 * (x[0] + x[-1])
    if np.count_nonzero(upper) < 4:
        upper = np.zeros_like(upper)
        upper[-4:] = True
    x, y = x[upper], np.log(np.abs(Lu[upper]))
    coef = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    slope = float(coef[0])
    tail = Lu[upper][-3:]
    flags = []
    if np.all(tail > 0):
        cls = Growth.BLOWS_UP
    elif np.all(tail < 0):
        cls = Growth.DECAYS
    else:
        cls = Growth.NEITHER
        flags.append("sign_change")
    if cls is not Growth.NEITHER:
        if resid >= 0.05:
            flags.append("poor_fit")
            cls = Growth.NEITHER
        elif abs(slope - expected) > tol:
            flags.append("exponent_mismatch")
            cls = Growth.NEITHER
    return GrowthVerdict(slope, cls, resid, tuple(flags), int(len(x)))


@dataclass(frozen=True)
class Lemma3Result:
    theta: float
    eps: float
    delta: float
    radii: np.ndarray
    log_A: np.ndarray
    bound: np.ndarray
    margins: np.ndarray
    R_theta: float | None
    passed: bool


def lemma3_margin(d: ExpPoly, P: ComplexPoly, theta: float, eps: float, radii) -> Lemma3Result:
    """Margins ``log|A| - (1 - eps) delta(P, theta) r^n`` for ``A = d e^P``.

    PASS when the margins are non-negative from some sampled radius R(theta)
    onward.
    """
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    part = partition(P)
    if membership(part, theta) is Membership.CRITICAL:
        raise DomainError("lemma bound is degenerate on a critical ray")
    radii = np.asarray(radii, dtype=float)
    n = part.n
    dl = delta(P, theta)
    A = d.times_exp(P)
    logA = _ray_logs(A, theta, radii)
    bound = (1 - eps) * dl * radii ** n
    margins = logA - bound
    ok = margins >= 0
    R = None
    if ok[-1]:
        bad = np.nonzero(~ok)[0]
        R = float(radii[0] if len(bad) == 0 else radii[bad[-1] + 1])
    return Lemma3Result(theta, eps, dl, radii, logA, bound, margins, R, R is not None)


# --- Riccati -------------------------------------------------------------------


def _grouped_pairs(A: ExpPoly, B: ExpPoly):
    """Exponent Q -> (prefactor of A, prefactor of B), so equal exponentials cancel exactly."""
    ga, gb = A.grouped(), B.grouped()
    keys = list(ga)
    keys += [q for q in gb if q not in ga]
    return [(q, ga.get(q, ComplexPoly()), gb.get(q, ComplexPoly())) for q in keys]


class _Budget(Exception):
    pass


def riccati_trace(
    A: ExpPoly,
    B: ExpPoly,
    theta: float,
    u0: complex,
    r_max: float,
    r_start: float = 0.0,
    f_start: complex = 1.0,
    checkpoints: int = 200,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    method: str | None = None,
    max_steps: int = MAX_STEPS,
    stop_unstable: bool = False,
) -> RayTrace:
    """Integrate ``du/dr = e^{i theta} (-u^2 - A u - B)`` along a ray.

    The running integral of u dz is carried along, so ``f(r) = f_start *
    exp(log_f)``.  The trace stops with POLE_ENCOUNTERED when |u| reaches 1e8
    (f has a zero there) and with OVERFLOW_REGION where an exponential factor
    exceeds 1e300.

    A fifth state integrates ``max(Re(e^{i theta} (-2u - A)), 0)``, an upper
    bound on the log of the factor by which perturbations of u are amplified.  Once it exceeds
    ``log(1e-6 / rtol)`` the trace no longer follows the intended solution
    to 1e-6; that radius is recorded as ``unstable_radius`` and, with
    ``stop_unstable``, ends the trace with status UNSTABLE.
    """
    u0 = complex(u0)
    if not (math.isfinite(u0.real) and math.isfinite(u0.imag)):
        raise DomainError("u0 must be finite (f(r_start) != 0)")
    if not r_max > r_start >= 0:
        raise DomainError("need 0 <= r_start < r_max")
    e = cmath.exp(1j * theta)
    groups = _grouped_pairs(A, B)
    exps = [q for q, _, _ in groups if not q.is_zero()]
    dA = [(q, a) for q, a, _ in groups if not a.is_zero()]
    budget = [0]
    limit = 4 * max_steps

    def rhs(r, y):
        budget[0] += 1
        if budget[0] > limit:
            raise _Budget()
        z = r * e
        u = complex(y[0], y[1])
        s = 0j
        for q, a, b in groups:
            inner = (a(z) * u if not a.is_zero() else 0j) + (b(z) if not b.is_zero() else 0j)
            if inner != 0:
                s += (cmath.exp(q(z)) if not q.is_zero() else 1.0) * inner
        du = e * (-u * u - s)
        dw = e * u
        Az = sum((cmath.exp(q(z)) * a(z) for q, a in dA), 0j)
        ds = max((e * (-2 * u - Az)).real, 0.0)
        return np.array([du.real, du.imag, dw.real, dw.imag, ds])

    def jac(r, y):
        z = r * e
        u = complex(y[0], y[1])
        Az = sum((cmath.exp(q(z)) * a(z) for q, a in dA), 0j)
        J = e * (-2 * u - Az)
        a_, b_ = J.real, J.imag
        return np.array([
            [a_, -b_, 0, 0, 0], [b_, a_, 0, 0, 0],
            [e.real, -e.imag, 0, 0, 0], [e.imag, e.real, 0, 0, 0],
            [0, 0, 0, 0, 0],
        ])

    def pole(r, y):
        return math.hypot(y[0], y[1]) - POLE_BOUND

    pole.terminal = True

    def overflow(r, y):
        z = r * e
        return max((q(z).real for q in exps), default=-math.inf) - OVERFLOW_LOG if exps else -1.0

    overflow.terminal = True
    amp_limit = math.log(1e-6 / rtol)

    def unstable(r, y):
        return y[4] - amp_limit

    unstable.terminal = stop_unstable
    unstable.direction = 1

    if method is None:
        probe_r = np.linspace(r_start, r_max, 64)
        amax = 0.0
        for r in probe_r:
            z = r * e
            if exps and max(q(z).real for q in exps) > OVERFLOW_LOG:
                break
            amax = max(amax, abs(sum((cmath.exp(q(z)) * a(z) for q, a in dA), 0j)))
        method = "Radau" if amax * (r_max - r_start) > 1e4 else "DOP853"

    lo = r_start if r_start > 0 else min(1e-2, r_max / 100)
    pts = np.geomspace(lo, r_max, checkpoints)
    if r_start == 0:
        pts = np.concatenate([[0.0], pts])
    pts[0], pts[-1] = r_start, r_max
    pts = np.unique(pts)
    kwargs = dict(method=method, rtol=rtol, atol=[atol] * 4 + [1e-6], t_eval=pts, events=[pole, overflow, unstable])
    if method in ("Radau", "BDF", "LSODA"):
        kwargs["jac"] = jac
    y0 = np.array([u0.real, u0.imag, 0.0, 0.0, 0.0])
    try:
        sol = solve_ivp(rhs, (r_start, r_max), y0, **kwargs)
    except _Budget:
        return RayTrace(theta, np.array([r_start]), np.array([u0]), TraceStatus.STEP_LIMIT, r_start,
                        complex(f_start), np.array([0j]), {"method": method})
    radii = sol.t
    u = sol.y[0] + 1j * sol.y[1]
    w = sol.y[2] + 1j * sol.y[3]
    status = TraceStatus.OK
    last = float(radii[-1]) if len(radii) else r_start
    meta = {"method": method, "nfev": int(sol.nfev)}
    if len(sol.t_events[2]):
        meta["unstable_radius"] = float(sol.t_events[2][0])
    if sol.status == 1:
        if len(sol.t_events[2]) and stop_unstable:
            status = TraceStatus.UNSTABLE
        elif len(sol.t_events[0]):
            status = TraceStatus.POLE_ENCOUNTERED
            meta["pole_radius"] = float(sol.t_events[0][0])
        else:
            status = TraceStatus.OVERFLOW_REGION
            meta["overflow_radius"] = float(sol.t_events[1][0])
    elif sol.status != 0:
        status = TraceStatus.FAILED
        meta["message"] = sol.message
    return RayTrace(theta, radii, u, status, last, complex(f_start), w, meta)


@dataclass(frozen=True)
class Lemma2Result:
    c: complex
    valid: bool
    decay_exponent: float
    C: float
    tail_bound: float


def lemma2_limit(trace: RayTrace, alpha: float = 2.0, tail_tol: float = 1e-6) -> Lemma2Result:
    """Limit constant of f along the ray when |u| <= C r^{-alpha} on the sampled tail."""
    if not alpha > 1:
        raise DomainError("alpha must exceed 1")
    r = np.asarray(trace.radii, dtype=float)
    u = np.asarray(trace.values, dtype=complex)
    f_start = 1.0 + 0j if trace.f_start is None else complex(trace.f_start)
    if trace.log_f is not None:
        integral = complex(trace.log_f[-1])
    else:
        integral = complex(np.trapezoid(u * cmath.exp(1j * trace.theta), r)) if len(r) > 1 else 0j
    c = f_start * cmath.exp(integral) if integral.real < 700 else complex(math.inf, 0)
    pos = r > 0
    r, u = r[pos], u[pos]
    if len(r) < 2:
        return Lemma2Result(c, False, float("nan"), float("nan"), float("inf"))
    tail = r >= 0.5 * r[-1]
    if np.count_nonzero(tail) < 5:
        tail = np.zeros_like(tail)
        tail[-5:] = True
    rt, ut = r[tail], np.abs(u[tail])
    if np.all(ut == 0):
        return Lemma2Result(c, trace.status is TraceStatus.OK, float("inf"), 0.0, 0.0)
    nz = ut > 0
    if np.count_nonzero(nz) >= 2:
        decay = -float(np.polyfit(np.log(rt[nz]), np.log(ut[nz]), 1)[0])
    else:
        decay = float("inf")
    C = float(np.max(ut * rt ** alpha))
    tail_bound = C * rt[-1] ** (1 - alpha) / (alpha - 1)
    stable = "unstable_radius" not in trace.meta
    valid = trace.status is TraceStatus.OK and stable and decay >= alpha and tail_bound < tail_tol
    return Lemma2Result(c, bool(valid), decay, C, float(tail_bound))


# --- growth bound along rays ---------------------------------------------------

LEMMA1_PAIRS = ((2, 0), (1, 0), (2, 1))


@dataclass(frozen=True)
class Lemma1Row:
    k: int
    j: int
    r: float
    ratio: float
    bound: float
    status: str  # PASS, FAIL, SKIPPED


@dataclass(frozen=True)
class Lemma1Result:
    theta: float
    rows: tuple[Lemma1Row, ...]
    metadata: dict

    @property
    def passed(self) -> bool:
        checked = [row for row in self.rows if row.status != "SKIPPED"]
        return bool(checked) and all(row.status == "PASS" for row in checked)


def lemma1_check(f: PowerSeries, theta: float, rho: float, eps: float, radii, pairs=LEMMA1_PAIRS) -> Lemma1Result:
    """``|f^(k)/f^(j)| <= r^{(k-j)(rho - 1 + eps)}`` along a ray, per (k, j, r)."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    rows = []
    e = cmath.exp(1j * theta)
    for r in radii:
        r = float(r)
        try:
            pv = evaluate_at(f, r * e, derivatives=2)
        except ReliabilityError:
            rows.extend(Lemma1Row(k, j, r, float("nan"), float("nan"), "SKIPPED") for k, j in pairs)
            continue
        for k, j in pairs:
            bound = r ** ((k - j) * (rho - 1 + eps))
            num, den = pv.values[k], pv.values[j]
            if num.is_zero and pv.rel_error[j] <= 1e-6:
                rows.append(Lemma1Row(k, j, r, 0.0, bound, "PASS"))
                continue
            if den.is_zero or pv.rel_error[j] > 1e-6 or pv.rel_error[k] > 1e-6:
                rows.append(Lemma1Row(k, j, r, float("nan"), bound, "SKIPPED"))
                continue
            lr = num.magnitude_log - den.magnitude_log
            ratio = math.exp(min(lr, 700.0))
            rows.append(Lemma1Row(k, j, r, ratio, bound, "PASS" if lr <= math.log(bound) else "FAIL"))
    meta = {"caveat": MEASURE_ZERO_CAVEAT, "rho": rho, "eps": eps}
    return Lemma1Result(theta, tuple(rows), meta)


@dataclass(frozen=True)
class Lemma1Sweep:
    results: tuple[Lemma1Result, ...]
    n_passed: int
    required: int

    @property
    def passed(self) -> bool:
        return self.n_passed >= self.required


def lemma1_sweep(f: PowerSeries, rho: float, eps: float, radii, n_rays: int = 64, required: int = 60) -> Lemma1Sweep:
    """``lemma1_check`` on evenly spaced rays; the exceptional null set is absorbed by ``required``."""
    thetas = 2 * math.pi * np.arange(n_rays) / n_rays
    results = tuple(lemma1_check(f, float(t), rho, eps, radii) for t in thetas)
    return Lemma1Sweep(results, sum(r.passed for r in results), required)
