"""Instance classification, hypothesis checks, witness search and the proof-trace report."""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, ReliabilityError, SglError, StageError
from .exppoly import ComplexPoly, ExpPoly, evaluate, exact_order, render
from .probe import (
    Growth,
    GrowthVerdict,
    RayTrace,
    growth_exponent,
    lemma1_check,
    lemma2_limit,
    lemma3_margin,
    riccati_trace,
)
from .rays import ANGLE_TOL, Membership, critical_rays, interior_rays, membership, normalize_angle, partition
from .series import (
    PowerSeries,
    evaluate_at,
    modulus_order,
    order_from_coeffs,
    reliable_radius,
    taylor_solve_many,
)


class Rule(str, enum.Enum):
    THEOREM_A_FORCED = "THEOREM_A_FORCED"
    THEOREM_B_CASE_1 = "THEOREM_B_CASE_1"
    THEOREM_B_CASE_2 = "THEOREM_B_CASE_2"
    THEOREM_B_CASE_3 = "THEOREM_B_CASE_3"
    MAIN_THEOREM = "MAIN_THEOREM"
    FREI_FINITE = "FREI_FINITE"
    FREI_INFINITE = "FREI_INFINITE"
    INCONCLUSIVE = "INCONCLUSIVE"


class Prediction(str, enum.Enum):
    ALL_INFINITE = "ALL_INFINITE"
    FINITE_POSSIBLE = "FINITE_POSSIBLE"
    INCONCLUSIVE = "INCONCLUSIVE"


class Reading(str, enum.Enum):
    CONJUNCTIVE = "CONJUNCTIVE"
    RESPECTIVE = "RESPECTIVE"


@dataclass(frozen=True)
class Evidence:
    name: str
    passed: bool | None
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Verdict:
    rule_applied: Rule
    predicted: Prediction
    evidence: tuple[Evidence, ...] = ()
    detail: str = ""


def _order(e: ExpPoly) -> int:
    return 0 if e.is_zero() else exact_order(e)


def _structurally_equal(a: ExpPoly, b: ExpPoly, rtol: float = 1e-12) -> bool:
    if len(a.terms) != len(b.terms):
        return False
    for s, t in zip(a.terms, b.terms):
        if s.k != t.k or len(s.Q.coeffs) != len(t.Q.coeffs):
            return False
        if any(abs(x - y) > rtol * max(1.0, abs(x)) for x, y in zip(s.Q.coeffs, t.Q.coeffs)):
            return False
        if abs(s.c - t.c) > rtol * max(abs(s.c), abs(t.c)):
            return False
    return True


@dataclass(frozen=True)
class ProblemInstance:
    """``f'' + A f' + B f = 0`` with an optional splitting ``A = d e^P``."""

    A: ExpPoly
    B: ExpPoly
    decomposition: tuple[ExpPoly, ComplexPoly] | None = None

    def __post_init__(self):
        if self.decomposition is not None:
            d, P = self.decomposition
            if not _structurally_equal(d.times_exp(P), self.A):
                raise DomainError("decomposition d*e^P does not reproduce A")

    @classmethod
    def auto(cls, A: ExpPoly, B: ExpPoly) -> "ProblemInstance":
        """Attach ``d = prefactor, P = exponent`` when A carries a single non-trivial exponential."""
        groups = A.grouped()
        if len(groups) == 1:
            (Q, pre), = groups.items()
            if not Q.is_zero():
                return cls(A, B, (ExpPoly.from_poly(pre), Q))
        return cls(A, B)

    @property
    def rho_A(self) -> int:
        return _order(self.A)

    @property
    def rho_B(self) -> int:
        return _order(self.B)

    @property
    def n(self) -> int | None:
        return None if self.decomposition is None else int(max(self.decomposition[1].degree(), 0))

    @property
    def rho_d(self) -> int | None:
        return None if self.decomposition is None else _order(self.decomposition[0])

    @property
    def m(self) -> int | None:
        if not self.B.is_polynomial() or self.B.is_zero():
            return None
        return int(self.B.as_poly().degree())


# --- rules ---------------------------------------------------------------------


def theoremA_check(inst: ProblemInstance) -> Verdict:
    ra, rb = inst.rho_A, inst.rho_B
    ev = (Evidence("order_comparison", ra < rb, {"rho_A": ra, "rho_B": rb}),)
    if ra < rb:
        return Verdict(Rule.THEOREM_A_FORCED, Prediction.ALL_INFINITE, ev, f"rho(A)={ra} < rho(B)={rb}")
    return Verdict(Rule.INCONCLUSIVE, Prediction.FINITE_POSSIBLE, ev,
                   f"rho(B)={rb} <= rho(A)={ra}: necessary condition for a finite-order solution holds")


def is_negative_real_ratio(a: complex, b: complex) -> bool:
    """Exact test of ``a**2 / b`` being a negative real, on the given double literals."""
    if b == 0:
        raise DomainError("b must be nonzero")
    ar, ai = Fraction(a.real), Fraction(a.imag)
    br, bi = Fraction(b.real), Fraction(b.imag)
    sr, si = ar * ar - ai * ai, 2 * ar * ai
    # a^2 / b has the direction of a^2 * conj(b)
    re = sr * br + si * bi
    im = si * br - sr * bi
    return im == 0 and re < 0


def theoremB_classify(n: int, a_n: complex, m: int, b_m: complex) -> Verdict:
    if m < 1:
        raise DomainError("B must be a non-constant polynomial (m >= 1)")
    if n < 1:
        raise DomainError("P must be non-constant (n >= 1)")
    a_n, b_m = complex(a_n), complex(b_m)
    if a_n == 0 or b_m == 0:
        raise DomainError("leading coefficients must be nonzero")
    data = {"n": n, "m": m, "m_plus_2": m + 2, "two_n": 2 * n}
    if m + 2 < 2 * n:
        return Verdict(Rule.THEOREM_B_CASE_1, Prediction.ALL_INFINITE, (Evidence("m+2<2n", True, data),))
    if m + 2 > 2 * n:
        if (m + 2) % (2 * n) != 0:
            return Verdict(Rule.THEOREM_B_CASE_2, Prediction.ALL_INFINITE, (Evidence("m+2>2n, not a multiple of 2n", True, data),))
        k = (m + 2) // (2 * n)
        return Verdict(Rule.INCONCLUSIVE, Prediction.INCONCLUSIVE,
                       (Evidence("m+2>2n, not a multiple of 2n", False, {**data, "k": k}),),
                       f"m+2 = {m + 2} = 2kn with k = {k}")
    neg = is_negative_real_ratio(a_n, b_m)
    data.update(a_n=a_n, b_m=b_m, ratio_negative_real=neg)
    if not neg:
        return Verdict(Rule.THEOREM_B_CASE_3, Prediction.ALL_INFINITE, (Evidence("m+2=2n, a_n^2/b_m not negative real", True, data),))
    return Verdict(Rule.INCONCLUSIVE, Prediction.INCONCLUSIVE,
                   (Evidence("m+2=2n, a_n^2/b_m not negative real", False, data),),
                   "m+2 = 2n and a_n^2/b_m is a negative real")


def theoremB_check(inst: ProblemInstance) -> Verdict | None:
    """Leading-coefficient case analysis on an instance, or None when it does not apply."""
    if inst.decomposition is None or inst.m is None or inst.m < 1:
        return None
    d, P = inst.decomposition
    if inst.rho_d >= inst.n:
        return None
    v = theoremB_classify(inst.n, P.leading, inst.m, inst.B.as_poly().leading)
    ev = (Evidence("rho(d)<n", True, {"rho_d": inst.rho_d, "n": inst.n}),) + v.evidence
    return Verdict(v.rule_applied, v.predicted, ev, v.detail)


def frei_check(inst: ProblemInstance) -> Verdict | None:
    """``A = c e^{-z}`` with constant B: a finite-order solution exists iff B = -k^2."""
    terms = inst.A.terms
    if len(terms) != 1 or not inst.B.is_polynomial():
        return None
    t = terms[0]
    if t.k != 0 or t.Q.coeffs != (0j, -1 + 0j):
        return None
    Bp = inst.B.as_poly()
    if Bp.degree() > 0:
        return None
    b = Bp.coeff(0)
    k = None
    if b.imag == 0 and b.real <= 0:
        s = math.isqrt(int(-b.real)) if float(-b.real).is_integer() else None
        if s is not None and s * s == -b.real:
            k = s
    data = {"c": t.c, "B": b}
    if k is not None:
        return Verdict(Rule.FREI_FINITE, Prediction.FINITE_POSSIBLE,
                       (Evidence("B=-k^2", True, {**data, "k": k}),), f"B = -{k}^2")
    return Verdict(Rule.FREI_INFINITE, Prediction.ALL_INFINITE,
                   (Evidence("B=-k^2", False, data),), "constant B is not minus a square")


# --- main hypothesis -------------------------------------------------------------


@dataclass(frozen=True)
class RayEvidence:
    theta: float
    region: str  # E_PLUS or E_MINUS
    probe_ray: bool  # True for an extra ray on a critical direction of d
    inf_abs_d: float
    inf_radius: float
    bounded_away: bool
    growth: GrowthVerdict
    blows_up: bool
    passed: bool


@dataclass(frozen=True)
class HypothesisCheck:
    reading: Reading
    passed: bool
    preconditions: tuple[Evidence, ...]
    rays: tuple[RayEvidence, ...]

    @property
    def evidence(self) -> tuple:
        return self.preconditions + self.rays


def _log_abs_on_ray(d: ExpPoly, theta: float):
    e = cmath.exp(1j * theta)
    return lambda r: evaluate(d, r * e).magnitude_log


def _beat_samples(d: ExpPoly, r_lo: float, r_hi: float) -> int:
    """Samples resolving the fastest relative phase between two exponentials of d."""
    exps = d.exponents()
    rate = 0.0
    for i, Qi in enumerate(exps):
        for Qj in exps[i + 1:]:
            D = (Qi - Qj).derivative()
            rate = max(rate, sum(abs(c) * r_hi ** j for j, c in enumerate(D.coeffs)))
    return int(min(max(64, math.ceil((r_hi - r_lo) * rate * 8 / math.pi) + 64), 20000))


def _inf_abs(d: ExpPoly, theta: float, r_lo: float, r_hi: float, samples: int | None = None) -> tuple[float, float]:
    """Infimum of |d| on the ray segment: dense sampling, then bounded Brent refinement."""
    f = _log_abs_on_ray(d, theta)
    if samples is None:
        samples = _beat_samples(d, r_lo, r_hi)
    rs = np.linspace(r_lo, r_hi, samples)
    ls = np.array([f(r) for r in rs])
    i = int(np.argmin(ls))
    best_l, best_r = float(ls[i]), float(rs[i])
    if math.isfinite(best_l):
        a, b = rs[max(i - 1, 0)], rs[min(i + 1, samples - 1)]
        # search in t = (r - a)/(b - a): the optimizer's tolerance has a term
        # relative to |x| that would otherwise cap the resolution near a zero
        res = minimize_scalar(lambda t: max(f(a + t * (b - a)), -745.0), bounds=(0.0, 1.0),
                              method="bounded", options={"xatol": 1e-12})
        r_opt = float(a + res.x * (b - a))
        if res.fun < best_l:
            best_l, best_r = float(f(r_opt)), r_opt
    if best_l <= -745:
        return 0.0, best_r
    return (math.exp(best_l) if best_l < 709 else math.inf), best_r


def _probe_angles(inst: ProblemInstance, rays_per_sector: int):
    d, P = inst.decomposition
    part = partition(P)
    offset = math.pi / (8 * part.n)
    rays = [(t, s, False) for t, s in interior_rays(part, rays_per_sector, offset)]
    seen = [t for t, _, _ in rays]
    for Q in d.exponents():
        if Q.is_zero() or Q.degree() < 1:
            continue
        for c in critical_rays(Q):
            if membership(part, c) is Membership.CRITICAL:
                continue
            if min(abs(math.remainder(c - a, 2 * math.pi)) for a in part.critical_angles) < offset:
                continue
            if any(abs(math.remainder(c - t, 2 * math.pi)) <= ANGLE_TOL for t in seen):
                continue
            seen.append(c)
            rays.append((c, part.sector_of(c), True))
    rays.sort(key=lambda x: x[0])
    return part, rays


def main_hypothesis_check(
    inst: ProblemInstance,
    reading: Reading | str = Reading.CONJUNCTIVE,
    rays_per_sector: int = 4,
    threshold: float = 1e-6,
    r_max: float = 50.0,
) -> HypothesisCheck:
    """Sampled check of the hypotheses on d for ``A = d e^P``.

    Each ray gets (a) inf |d| over r in [10, r_max] against ``threshold`` and
    (b) a growth verdict for d.  CONJUNCTIVE needs (a) and (b) on every ray;
    RESPECTIVE needs (a) on E+ rays and (b) on E- rays.
    """
    reading = Reading(reading.upper() if isinstance(reading, str) else reading)
    if inst.decomposition is None:
        raise DomainError("main hypothesis check needs a decomposition A = d e^P")
    if r_max < 10:
        raise DomainError("r_max must be >= 10")
    d, P = inst.decomposition
    pre = []
    b_poly = inst.B.is_polynomial()
    pre.append(Evidence("B_polynomial", b_poly, {}))
    if d.is_zero() or P.degree() == -math.inf or P.degree() < 1:
        pre.append(Evidence("rho(d)>n", False, {"reason": "d is zero or P is constant"}))
        return HypothesisCheck(reading, False, tuple(pre), ())
    rho_d, n = inst.rho_d, inst.n
    order_ok = rho_d > n
    pre.append(Evidence("rho(d)>n", order_ok, {"rho_d": rho_d, "n": n}))
    if not (order_ok and b_poly):
        return HypothesisCheck(reading, False, tuple(pre), ())
    part, rays = _probe_angles(inst, rays_per_sector)
    out = []
    for theta, sector, extra in rays:
        region = "E_PLUS" if sector.sign > 0 else "E_MINUS"
        inf_d, inf_r = _inf_abs(d, theta, 10.0, r_max)
        bounded = inf_d >= threshold
        gv = growth_exponent(d, theta, 1.0, max(100.0, r_max), 40, expected=float(rho_d))
        blows = gv.classification is Growth.BLOWS_UP
        if reading is Reading.CONJUNCTIVE:
            ok = bounded and blows
        else:
            ok = bounded if region == "E_PLUS" else blows
        out.append(RayEvidence(theta, region, extra, inf_d, inf_r, bounded, gv, blows, ok))
    passed = all(r.passed for r in out)
    return HypothesisCheck(reading, passed, tuple(pre), tuple(out))


@dataclass(frozen=True)
class WitnessResult:
    candidate: str
    passed: bool
    witness_angle: float | None
    failed_condition: str | None
    check: HypothesisCheck


def witness_search(
    n: int,
    d_family: Sequence[ExpPoly],
    rays_per_sector: int = 4,
    P: ComplexPoly | None = None,
    B: ExpPoly | None = None,
    reading: Reading | str = Reading.CONJUNCTIVE,
    r_max: float = 50.0,
) -> list[WitnessResult]:
    """Score every candidate d against the main hypothesis with ``A = d e^P``.

    The witness angle is the first sampled ray on which d decays, or failing
    that the first ray that fails at all.
    """
    if not d_family:
        raise DomainError("empty candidate grid")
    if n < 1:
        raise DomainError("n must be >= 1")
    P = P if P is not None else ComplexPoly.monomial(1.0, n)
    if P.degree() != n:
        raise DomainError("P must have degree n")
    B = B if B is not None else ExpPoly.z()
    out = []
    for d in d_family:
        inst = ProblemInstance(d.times_exp(P), B, (d, P))
        chk = main_hypothesis_check(inst, reading, rays_per_sector, r_max=r_max)
        witness, cond = None, None
        if not chk.passed:
            failed_pre = [e for e in chk.preconditions if not e.passed]
            if failed_pre:
                cond = failed_pre[0].name
            else:
                decays = [r for r in chk.rays if r.growth.classification is Growth.DECAYS]
                bad = [r for r in chk.rays if not r.passed]
                pick = decays[0] if decays else bad[0]
                witness = pick.theta
                cond = "decays" if decays else ("not_bounded_away" if not pick.bounded_away else "no_blow_up")
        out.append(WitnessResult(render(d), chk.passed, witness, cond, chk))
    return out


def classify(
    inst: ProblemInstance,
    reading: Reading | str = Reading.CONJUNCTIVE,
    rays_per_sector: int = 4,
    r_max: float = 50.0,
) -> Verdict:
    """First applicable rule: order comparison, the c e^{-z} pattern, leading coefficients, then the hypothesis check."""
    va = theoremA_check(inst)
    if va.predicted is Prediction.ALL_INFINITE:
        return va
    evidence = list(va.evidence)
    vf = frei_check(inst)
    if vf is not None:
        return Verdict(vf.rule_applied, vf.predicted, tuple(evidence) + vf.evidence, vf.detail)
    vb = theoremB_check(inst)
    if vb is not None:
        if vb.predicted is Prediction.ALL_INFINITE:
            return Verdict(vb.rule_applied, vb.predicted, tuple(evidence) + vb.evidence, vb.detail)
        evidence.extend(vb.evidence)
    if inst.decomposition is not None and inst.B.is_polynomial() and inst.rho_d > inst.n:
        chk = main_hypothesis_check(inst, reading, rays_per_sector, r_max=r_max)
        evidence.append(Evidence("main_hypothesis", chk.passed, {"reading": chk.reading.value, "rays": len(chk.rays)}))
        if chk.passed:
            return Verdict(Rule.MAIN_THEOREM, Prediction.ALL_INFINITE, tuple(evidence), "hypotheses verified on all sampled rays")
    return Verdict(Rule.INCONCLUSIVE, va.predicted, tuple(evidence), "no rule forces infinite order")


# --- proof trace ---------------------------------------------------------------------

INFINITE_GAP = 0.1


@dataclass(frozen=True)
class RayReport:
    theta: float
    region: str
    status: str
    r_end: float
    u_end: complex
    decay_exponent: float
    limit: complex
    limit_valid: bool
    lemma3_passed: bool | None
    lemma3_R: float | None
    trace: RayTrace | None = field(default=None, repr=False, compare=False, metadata={"json": False})


@dataclass(frozen=True)
class SolutionReport:
    f0: complex
    f1: complex
    order_N: float
    order_half: float
    order_modulus: float
    observed: str  # FINITE or INFINITE
    lemma1_passed: bool | None
    rays: tuple[RayReport, ...]


@dataclass(frozen=True)
class GrowthReport:
    A: str
    B: str
    N: int
    r_max: float
    verdict: Verdict
    solutions: tuple[SolutionReport, ...]
    consistent: bool

    @property
    def flag(self) -> str:
        return "CONSISTENT" if self.consistent else "INCONSISTENT"


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (SglError, ArithmeticError, ValueError) as exc:
        raise StageError(name, exc) from exc


def _observed(rho_N: float, rho_half: float) -> str:
    if not math.isfinite(rho_N) or rho_N - rho_half > INFINITE_GAP:
        return "INFINITE"
    return "FINITE"


def _ray_directions(inst: ProblemInstance, rays_per_sector: int):
    if inst.decomposition is not None:
        part = partition(inst.decomposition[1])
        return [(t, "E_PLUS" if s.sign > 0 else "E_MINUS") for t, s in interior_rays(part, rays_per_sector)]
    return [(normalize_angle(2 * math.pi * j / (2 * rays_per_sector)), "UNSPLIT") for j in range(2 * rays_per_sector)]


def _trace_ray(inst, f: PowerSeries, f0, f1, theta, region, r_max, alpha, lemma3_eps):
    e = cmath.exp(1j * theta)
    if f0 != 0:
        r_start, f_start, u0 = 0.0, complex(f0), complex(f1) / complex(f0)
    else:
        r_start = 1.0
        pv = evaluate_at(f, e, derivatives=1)
        fv, dv = pv.values[0].to_complex(), pv.values[1].to_complex()
        if fv == 0 or not pv.reliable:
            raise ReliabilityError("cannot start the Riccati trace: f vanishes or is unreliable at r = 1")
        r_start, f_start, u0 = 1.0, fv, dv / fv
    tr = riccati_trace(inst.A, inst.B, theta, u0, r_max, r_start=r_start, f_start=f_start, stop_unstable=True)
    l2 = lemma2_limit(tr, alpha)
    l3_pass, l3_R = None, None
    if inst.decomposition is not None:
        d, P = inst.decomposition
        l3 = lemma3_margin(d, P, theta, lemma3_eps, np.linspace(10.0, r_max, 41))
        l3_pass, l3_R = l3.passed, l3.R_theta
    u_end = complex(tr.values[-1]) if len(tr.values) else complex(u0)
    return RayReport(theta, region, tr.status.value, float(tr.radii[-1]), u_end, l2.decay_exponent,
                     l2.c, l2.valid, l3_pass, l3_R, tr)


def proof_trace(
    inst: ProblemInstance,
    ics: Sequence[tuple[complex, complex]],
    N: int,
    r_max: float,
    rays_per_sector: int = 1,
    alpha: float = 2.0,
    lemma3_eps: float = 0.5,
    reading: Reading | str = Reading.CONJUNCTIVE,
    workers: int = 1,
) -> GrowthReport:
    """Consolidated report mirroring the proof's checklist for each initial condition.

    Observed behaviour is INFINITE when the coefficient order estimate still
    rises by more than 0.1 from truncation N/2 to N.  The report is
    INCONSISTENT only when the classifier predicts ALL_INFINITE and a solution
    looks finite.
    """
    if N < 100:
        raise DomainError("truncation must be >= 100")
    if r_max < 10:
        raise DomainError("r_max must be >= 10")
    ics = [(complex(a), complex(b)) for a, b in ics]
    if not ics or any(a == 0 and b == 0 for a, b in ics):
        raise DomainError("initial conditions must be non-empty and non-trivial")
    verdict = _stage("classify", classify, inst, reading)
    sols = _stage("solve", taylor_solve_many, inst.A, inst.B, ics, N, workers)
    directions = _ray_directions(inst, rays_per_sector)
    reports = []
    for (f0, f1), f in zip(ics, sols):
        est = _stage("order", order_from_coeffs, f)
        half = _stage("order", order_from_coeffs, f.truncate(N // 2))
        observed = "FINITE" if est.polynomial else _observed(est.estimate, half.estimate)
        r_rel = min(reliable_radius(f), 1e3)
        mo = modulus_order(f, np.geomspace(max(r_rel / 20, 1e-3), r_rel, 12)) if r_rel > 0 else None
        l1 = None
        if observed == "FINITE" and math.isfinite(est.estimate) and r_rel > 2:
            radii = np.geomspace(2.0, min(r_rel, r_max), 6)
            l1 = _stage("lemma1", lemma1_check, f, 0.0, est.estimate, 0.1, radii).passed
        rays = tuple(
            _stage(f"ray {theta:.6f}", _trace_ray, inst, f, f0, f1, theta, region, r_max, alpha, lemma3_eps)
            for theta, region in directions
        )
        reports.append(SolutionReport(
            f0, f1, est.estimate, half.estimate,
            float("nan") if mo is None else mo.estimate, observed, l1, rays,
        ))
    consistent = not (
        verdict.predicted is Prediction.ALL_INFINITE and any(s.observed == "FINITE" for s in reports)
    )
    return GrowthReport(render(inst.A), render(inst.B), N, float(r_max), verdict, tuple(reports), consistent)
