import cmath
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complex_numbers
from sgl.errors import DomainError, StageError
from sgl.exppoly import ComplexPoly, ExpPoly
from sgl.lab import (
    Prediction,
    ProblemInstance,
    Reading,
    Rule,
    classify,
    frei_check,
    is_negative_real_ratio,
    main_hypothesis_check,
    proof_trace,
    theoremA_check,
    theoremB_check,
    theoremB_classify,
    witness_search,
)
from sgl.parser import parse_exppoly as P
from sgl.parser import parse_poly
from sgl.probe import Growth
from sgl.rays import partition

PI = math.pi


def inst(A, B, d=None, Pp=None):
    dec = None if d is None else (P(d), parse_poly(Pp))
    return ProblemInstance(P(A), P(B), dec)


# --- instances ------------------------------------------------------------------


def test_decomposition_must_reproduce_A():
    with pytest.raises(DomainError):
        inst("e^{z}", "1", "2", "z")
    i = inst("z*e^{z^2 + z}", "1", "z*e^{z^2}", "z")
    assert (i.rho_A, i.rho_B, i.n, i.rho_d, i.m) == (2, 0, 1, 2, 0)


def test_auto_decomposition():
    i = ProblemInstance.auto(P("(z+1)*e^{2*z}"), P("z^3"))
    d, Pp = i.decomposition
    assert Pp == ComplexPoly((0, 2)) and i.rho_d == 0 and i.m == 3
    assert ProblemInstance.auto(P("e^{z} + e^{-z}"), P("1")).decomposition is None


# --- order comparison ----------------------------------------------------------


@pytest.mark.parametrize("A, B, predicted", [
    ("e^{z}", "-e^{z} - 1", Prediction.FINITE_POSSIBLE),
    ("e^{z}", "-1", Prediction.FINITE_POSSIBLE),
    ("e^{z}", "e^{z^2}", Prediction.ALL_INFINITE),
])
def test_order_comparison(A, B, predicted):
    v = theoremA_check(inst(A, B))
    assert v.predicted is predicted
    assert (v.rule_applied is Rule.THEOREM_A_FORCED) == (predicted is Prediction.ALL_INFINITE)


# --- leading coefficients --------------------------------------------------------


@pytest.mark.parametrize("n, a, m, b, rule", [
    (1, 1, 1, 1, Rule.THEOREM_B_CASE_2),
    (2, 1, 1, 1, Rule.THEOREM_B_CASE_1),
    (1, 1, 2, -1, Rule.INCONCLUSIVE),
    (2, 1, 2, 1, Rule.THEOREM_B_CASE_3),
    (2, 1j, 2, 1, Rule.INCONCLUSIVE),
    (2, 1, 2, -1, Rule.INCONCLUSIVE),
    (2, 1, 6, 1, Rule.INCONCLUSIVE),
    (2, 1, 5, 1, Rule.THEOREM_B_CASE_2),
])
def test_leading_coefficients_classify(n, a, m, b, rule):
    v = theoremB_classify(n, a, m, b)
    assert v.rule_applied is rule
    expected = Prediction.INCONCLUSIVE if rule is Rule.INCONCLUSIVE else Prediction.ALL_INFINITE
    assert v.predicted is expected
    if rule is Rule.INCONCLUSIVE:
        assert v.detail and v.evidence and v.evidence[0].passed is False


def test_leading_coefficients_rejects_constant_b():
    with pytest.raises(DomainError):
        theoremB_classify(1, 1, 0, 1)


def test_negative_real_test_is_exact():
    assert is_negative_real_ratio(1j, 1)
    assert not is_negative_real_ratio(1j, 1 + 1e-17j)
    assert not is_negative_real_ratio(1j, 1 + 2 ** -60 * 1j)
    assert is_negative_real_ratio(1 + 1j, -2j)


@given(complex_numbers(nonzero=True), complex_numbers(nonzero=True), st.sampled_from([2.0, 0.5, 4.0, 0.25, 1024.0]))
def test_negative_real_predicate_under_positive_scaling(a, b, t):
    # power-of-two factors keep the scaled literal exact
    assert is_negative_real_ratio(a, b) == is_negative_real_ratio(a, t * b)


def test_leading_coefficients_on_instances():
    v = theoremB_check(inst("e^{z}", "3*z + 1", "1", "z"))
    assert v.rule_applied is Rule.THEOREM_B_CASE_2
    assert theoremB_check(inst("e^{z^2}*e^{z}", "z", "e^{z^2}", "z")) is None  # rho(d) >= n
    assert theoremB_check(inst("e^{z}", "e^{z}", "1", "z")) is None


# --- c e^{-z} with constant B ---------------------------------------------------


@pytest.mark.parametrize("B, rule", [
    ("-1", Rule.FREI_FINITE),
    ("-4", Rule.FREI_FINITE),
    ("0", Rule.FREI_FINITE),
    ("-2", Rule.FREI_INFINITE),
    ("1", Rule.FREI_INFINITE),
    ("-1i", Rule.FREI_INFINITE),
])
def test_exp_minus_z(B, rule):
    assert frei_check(inst("e^{-z}", B)).rule_applied is rule


def test_exp_minus_z_does_not_apply_elsewhere():
    assert frei_check(inst("e^{z}", "-1")) is None
    assert frei_check(inst("e^{-z}", "z")) is None


# --- classification --------------------------------------------------------------


@pytest.mark.parametrize("A, B, dec, rule", [
    ("e^{z}", "z", ("1", "z"), Rule.THEOREM_B_CASE_2),
    ("e^{z}", "e^{z^2}", None, Rule.THEOREM_A_FORCED),
    ("e^{z}", "z^2", ("1", "z"), Rule.INCONCLUSIVE),
    ("e^{-z}", "-2", None, Rule.FREI_INFINITE),
    ("e^{z}", "-e^{z} - 1", None, Rule.INCONCLUSIVE),
    ("e^{z^2}*e^{z}", "z", ("e^{z^2}", "z"), Rule.INCONCLUSIVE),
])
def test_classify(A, B, dec, rule):
    i = inst(A, B, *dec) if dec else ProblemInstance.auto(P(A), P(B))
    assert classify(i, rays_per_sector=2, r_max=30).rule_applied is rule


# --- main hypothesis ---------------------------------------------------------------


def test_hypothesis_fails_where_d_decays():
    chk = main_hypothesis_check(inst("e^{z^2}*e^{z}", "z", "e^{z^2}", "z"), rays_per_sector=4, r_max=30)
    assert not chk.passed
    failing = [r for r in chk.rays if not r.passed]
    assert {r.region for r in failing} == {"E_PLUS", "E_MINUS"}
    assert all(r.growth.classification is Growth.DECAYS for r in failing if cmath.exp(2j * r.theta).real < -0.1)


def test_hypothesis_needs_order_above_n():
    chk = main_hypothesis_check(inst("e^{z}", "z", "1", "z"))
    assert not chk.passed and chk.rays == ()
    assert [e.name for e in chk.preconditions if not e.passed] == ["rho(d)>n"]
    chk = main_hypothesis_check(inst("e^{z^2}*e^{z^3}", "z", "e^{z^2}", "z^3"))
    assert not chk.passed


def test_hypothesis_needs_polynomial_b():
    chk = main_hypothesis_check(inst("e^{z^2}*e^{z}", "e^{z}", "e^{z^2}", "z"))
    assert not chk.passed and chk.preconditions[0].name == "B_polynomial"


def test_hypothesis_needs_decomposition():
    with pytest.raises(DomainError):
        main_hypothesis_check(inst("e^{z}", "z"))


def test_readings_differ_on_respective_structure():
    i = inst("e^{z^2}*e^{z}", "z", "e^{z^2}", "z")
    conj = main_hypothesis_check(i, Reading.CONJUNCTIVE, 4, r_max=30)
    resp = main_hypothesis_check(i, "respective", 4, r_max=30)
    assert conj.reading is Reading.CONJUNCTIVE and resp.reading is Reading.RESPECTIVE
    for c, r in zip(conj.rays, resp.rays):
        assert c.theta == r.theta
        if r.region == "E_PLUS":
            assert r.passed == r.bounded_away
        else:
            assert r.passed == r.blows_up
        assert c.passed == (c.bounded_away and c.blows_up)


def test_evidence_covers_every_sector():
    i = inst("e^{z^3}*e^{z}", "z", "e^{z^3}", "z")
    chk = main_hypothesis_check(i, rays_per_sector=3, r_max=20)
    part = partition(parse_poly("z"))
    for s in part.sectors:
        assert sum(1 for r in chk.rays if not r.probe_ray and part.sector_of(r.theta) == s) >= 3


def test_bounded_away_detects_oscillating_zeros():
    # e^{z^2} + e^{-z^2} = 2 cosh(z^2) vanishes on theta = pi/4 at r^2 = pi/2 + k pi
    chk = main_hypothesis_check(inst("(e^{z^2} + e^{-z^2})*e^{z}", "z", "e^{z^2} + e^{-z^2}", "z"), rays_per_sector=4, r_max=30)
    diag = [r for r in chk.rays if abs(math.remainder(r.theta - PI / 4, PI / 2)) < 1e-9]
    assert diag and all(not r.bounded_away for r in diag)


# --- witness search -------------------------------------------------------------


def test_witness_search_exponential_grid():
    grid = [ExpPoly.exp_of(ComplexPoly.monomial(c, 2)) for c in (1, 1j, -1, -1j)]
    res = witness_search(1, grid, rays_per_sector=4, r_max=30)
    assert len(res) == 4 and not any(r.passed for r in res)
    for c, r in zip((1, 1j, -1, -1j), res):
        assert r.failed_condition == "decays"
        assert (c * cmath.exp(2j * r.witness_angle)).real < 0


def test_witness_search_cosh_candidate():
    res = witness_search(1, [P("e^{z^2} + e^{-z^2}")], rays_per_sector=4, r_max=30)
    r = res[0]
    assert not r.passed
    bad = [x for x in r.check.rays if not x.passed]
    assert any(abs(math.remainder(x.theta - PI / 4, PI / 2)) < 1e-9 for x in bad)


def test_witness_search_rejects_empty_grid():
    with pytest.raises(DomainError):
        witness_search(1, [])


def test_witness_search_precondition_failure_is_named():
    res = witness_search(2, [P("e^{z}")])
    assert res[0].failed_condition == "rho(d)>n" and res[0].witness_angle is None


# --- proof trace ----------------------------------------------------------------


def test_proof_trace_exp_z_solution():
    rep = proof_trace(ProblemInstance.auto(P("e^{z}"), P("-e^{z} - 1")), [(1, 1)], 1000, 30)
    assert rep.consistent and rep.flag == "CONSISTENT"
    s = rep.solutions[0]
    assert s.observed == "FINITE"
    assert s.order_N == pytest.approx(1.0, abs=0.02)
    assert s.order_modulus == pytest.approx(1.0, abs=0.1)
    assert s.lemma1_passed
    assert rep.verdict.predicted is Prediction.FINITE_POSSIBLE
    # u = 1 is an exact fixed point; on the E- ray perturbations grow like e^{2r},
    # so that trace is cut short and flagged rather than trusted to r_max
    statuses = {ray.region: ray.status for ray in s.rays}
    assert statuses == {"E_PLUS": "OK", "E_MINUS": "UNSTABLE"}
    for ray in s.rays:
        assert abs(ray.u_end - 1) < 1e-8


def test_proof_trace_exp_minus_z_finite():
    rep = proof_trace(ProblemInstance.auto(P("e^{-z}"), P("-1")), [(2, 1)], 1000, 20)
    assert rep.verdict.rule_applied is Rule.FREI_FINITE
    assert rep.consistent
    assert rep.solutions[0].observed == "FINITE"
    assert rep.solutions[0].order_N == pytest.approx(1.0, abs=0.1)


def test_proof_trace_exp_minus_z_infinite():
    ics = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)] + [(2, 1)]
    rep = proof_trace(ProblemInstance.auto(P("e^{-z}"), P("-2")), ics, 600, 20)
    assert rep.verdict.predicted is Prediction.ALL_INFINITE
    assert all(s.observed == "INFINITE" for s in rep.solutions)
    assert rep.consistent


def test_proof_trace_order_comparison_instance_diverges():
    rep = proof_trace(ProblemInstance.auto(P("e^{z}"), P("e^{z^2}")), [(1, 0), (0, 1)], 600, 15)
    assert rep.verdict.rule_applied is Rule.THEOREM_A_FORCED
    assert all(s.observed == "INFINITE" for s in rep.solutions)
    assert rep.consistent


def test_proof_trace_tags_failing_stage():
    with pytest.raises(StageError) as info:
        proof_trace(ProblemInstance.auto(P("e^{z}"), P("-1")), [(1, 0)], 100, 20)
    assert info.value.stage == "order"


def test_proof_trace_preconditions():
    i = ProblemInstance.auto(P("e^{z}"), P("-1"))
    with pytest.raises(DomainError):
        proof_trace(i, [(0, 0)], 500, 20)
    with pytest.raises(DomainError):
        proof_trace(i, [(1, 0)], 50, 20)
