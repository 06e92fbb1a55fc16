import dataclasses
import math

import numpy as np
import pytest

from katolab import exponents as ex
from katolab import lifespan as ll
from katolab.errors import DomainError
from katolab.odi import Verdict
from katolab.wave import WaveProblem

EPS = tuple(np.geomspace(0.2, 0.02, 8))


def _synthetic(scenario, C, form="power", kappa=None, **kw):
    plan = ll.default_plan(scenario, **kw)
    return dataclasses.replace(plan, synthetic=(C, form), synthetic_kappa=kappa)


def test_plan_needs_five_points():
    base = WaveProblem(n=1, p=2.0, eps=0.1)
    with pytest.raises(DomainError, match="at least 5"):
        ll.SweepPlan("one_d_g_positive", (0.1,), base)


def test_plan_validation():
    base = WaveProblem(n=1, p=2.0, eps=0.1)
    with pytest.raises(DomainError, match="decreasing"):
        ll.SweepPlan("one_d_g_positive", EPS[::-1], base)
    with pytest.raises(DomainError, match="decade"):
        ll.SweepPlan("one_d_g_positive", tuple(np.geomspace(0.2, 0.05, 6)), base)
    # f-only needs g = 0 and f nonzero
    with pytest.raises(DomainError, match="g=zero"):
        ll.SweepPlan("one_d_f_only", EPS, base)
    two_d = WaveProblem(n=2, p=2.0, eps=0.1, f_profile="bump", g_profile="bump")
    with pytest.raises(DomainError, match="f=zero"):
        ll.SweepPlan("two_d_p2_f_zero", EPS, two_d)
    with pytest.raises(DomainError, match="p = 2"):
        ll.SweepPlan("two_d_p2_f_zero", EPS, WaveProblem(n=2, p=1.5, eps=0.1))
    with pytest.raises(DomainError, match="1 < p < 2"):
        ll.SweepPlan("two_d_sub2_f_zero", EPS, WaveProblem(n=2, p=2.0, eps=0.1))
    with pytest.raises(DomainError, match="p0"):
        ll.SweepPlan("general_nd", EPS, WaveProblem(n=3, p=3.0, eps=0.1))
    with pytest.raises(DomainError, match="nonzero"):
        ll.SweepPlan("general_nd", EPS, WaveProblem(n=3, p=2.0, eps=0.1, g_profile="zero"))


def test_synthetic_power_law_exact():
    res = ll.run_sweep(_synthetic("general_nd", 7.0, kappa=2.0))
    fit = ll.fit_power_law(res)
    assert fit.slope == pytest.approx(-2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(7.0), abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.verdict is Verdict.PASS and fit.npoints == 8


def test_theory_slopes():
    assert ll.theory_prediction("one_d_g_positive", 3.0, 1).slope == pytest.approx(-1.0)
    assert ll.theory_prediction("one_d_f_only", 2.0, 1).slope == pytest.approx(-2 / 3)
    assert ll.theory_prediction("general_nd", 2.0, 3).slope == pytest.approx(-2.0)
    sub2 = ll.theory_prediction("two_d_sub2_f_zero", 1.5, 2)
    assert sub2.slope == pytest.approx(-1 / 3)
    assert sub2.alt_kappa == pytest.approx(ex.lifespan_exponent(1.5, 2))
    assert ll.theory_prediction("two_d_p2_f_zero", 2.0, 2).special_form == "a_of_eps"
    with pytest.raises(DomainError):
        ll.theory_prediction("two_d_p2_f_zero", 1.5, 2)


@pytest.mark.parametrize("scenario,p,n,case", [
    ("general_nd", 2.0, 3, "general"), ("general_nd", 1.5, 4, "general"),
    ("one_d_g_positive", 2.5, 1, "one_d_g_positive"), ("one_d_f_only", 3.0, 1, "one_d_f_only"),
    ("two_d_p2_f_zero", 2.0, 2, "general"), ("two_d_sub2_f_zero", 1.3, 2, "two_d_sub2"),
])
def test_kappa_matches_exponents(scenario, p, n, case):
    assert ll.theory_prediction(scenario, p, n).kappa == ex.lifespan_exponent(p, n, case)


def test_a_scaling_synthetic():
    res = ll.run_sweep(_synthetic("two_d_p2_f_zero", 3.0, "a_of_eps"))
    rep = ll.check_a_scaling(res)
    assert rep.passed and np.allclose(rep.ratios, 3.0, rtol=1e-14)
    assert not rep.drifting


def test_inverse_eps_ratio_drifts():
    rep = ll.check_a_scaling([(e, 1.0 / e) for e in EPS])
    # 1 / (a(ε) ε) grows steadily as ε shrinks
    assert rep.monotone and rep.drifting and rep.drift < -0.05
    assert all(b > a for a, b in zip(rep.ratios, rep.ratios[1:]))


def test_a_scaling_scenario_guard():
    res = ll.run_sweep(_synthetic("general_nd", 1.0, kappa=2.0))
    with pytest.raises(DomainError, match="two_d_p2"):
        ll.check_a_scaling(res)
    with pytest.raises(DomainError):
        ll.check_a_scaling([(0.1, 1.0)] * 3)


def test_compare_to_theory():
    pred = ll.theory_prediction("general_nd", 2.0, 3)

    def fit(slope):
        return ll.FitResult(slope, 0.0, 1.0, (slope, slope), pred.slope, None, 0.15, 8)

    f = fit(-1.98)
    v = ll.compare_to_theory(f, pred)
    assert v.verdict is Verdict.PASS and v.slope == -1.98 and v.theory_slope == -2.0
    assert f.verdict is None
    assert ll.compare_to_theory(fit(-1.2), pred).verdict is Verdict.FAIL
    with pytest.raises(DomainError, match="mismatch"):
        ll.compare_to_theory(f, pred, scenario="one_d_f_only")


def test_sub2_compared_against_improved_exponent():
    pred = ll.theory_prediction("two_d_sub2_f_zero", 1.5, 2)
    f = ll.FitResult(-0.33, 0.0, 1.0, (-0.34, -0.32), pred.slope, None, 0.15, 8)
    v = ll.compare_to_theory(f, pred)
    assert v.theory_slope == pytest.approx(-1 / 3) and v.verdict is Verdict.PASS
    assert v.alt_slope == pytest.approx(-2 * 1.5 * 0.5 / ex.gamma(1.5, 2))


def test_degenerate_fit():
    with pytest.raises(DomainError, match="degenerate"):
        ll.fit_power_law([(0.1, 1.0)] * 6)
    with pytest.raises(DomainError, match="at least 5"):
        ll.fit_power_law([(0.1, 1.0), (0.2, 2.0)])


def test_bootstrap_reproducible():
    rng = np.random.default_rng(0)
    pts = [(e, 5 * e**-0.5 * math.exp(rng.normal(0, 0.02))) for e in EPS]
    a = ll.fit_power_law(pts, seed=3)
    b = ll.fit_power_law(pts, seed=3)
    assert a.slope_ci == b.slope_ci
    assert a.slope_ci[0] <= a.slope <= a.slope_ci[1]


def test_real_sweep_one_d():
    res = ll.run_sweep(ll.default_plan("one_d_g_positive", p=2.0))
    T = [pt.T_extrap for pt in res.converged_points]
    assert len(T) >= 5 and all(a < b for a, b in zip(T, T[1:]))
    fit = ll.fit_power_law(res)
    assert fit.verdict is Verdict.PASS


def test_sweep_aborts_and_records_failures():
    plan = ll.default_plan("one_d_g_positive", p=2.0, t_horizon=20.0)
    seen = []
    with pytest.raises(DomainError, match="converged"):
        ll.run_sweep(plan, on_point=seen.append)
    assert len(seen) == 8
    assert any(pt.status == "horizon" for pt in seen)


def test_resume_skips_done_points():
    plan = _synthetic("one_d_g_positive", 2.0)
    first = ll.run_sweep(plan)
    done = {pt.eps: pt for pt in first.points[:5]}
    seen = []
    again = ll.run_sweep(plan, done=done, on_point=seen.append)
    assert len(seen) == 3
    assert [pt.T_extrap for pt in again.points] == [pt.T_extrap for pt in first.points]


def test_parallel_matches_serial():
    plan = ll.default_plan("one_d_g_positive", p=2.0, count=5, eps_hi=0.2, eps_lo=0.02, levels=2)
    serial = ll.run_sweep(plan)
    par = ll.run_sweep(plan, workers=2)
    assert [pt.to_dict() for pt in serial.points] == [pt.to_dict() for pt in par.points]


def test_plot_rows():
    res = ll.run_sweep(_synthetic("two_d_p2_f_zero", 3.0, "a_of_eps"))
    rows = ll.plot_rows(res)
    assert len(rows) == 8 and len(rows[0]) == 6
    for eps, lo, hi, T, a, curve in rows:
        assert a == pytest.approx(ex.solve_a_of_eps(eps))
        assert curve == pytest.approx(T, rel=1e-12)
