import math

import pytest

from katolab import exponents as ex
from katolab.errors import DomainError


def test_p0_closed_forms():
    assert ex.p0(3) == pytest.approx(1 + math.sqrt(2), abs=1e-12)
    assert ex.p0(2) == pytest.approx((3 + math.sqrt(17)) / 2, abs=1e-12)


@pytest.mark.parametrize("n", range(2, 11))
def test_gamma_vanishes_at_p0(n):
    assert abs(ex.gamma(ex.p0(n), n)) < 1e-10


def test_p0_decreasing():
    vals = [ex.p0(n) for n in range(2, 30)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_gamma_values():
    assert ex.gamma(2, 3) == 2.0
    assert ex.gamma(2, 2) == 4.0
    # n = 1 reduces to 2 + 2p
    assert ex.gamma(3.0, 1) == 8.0


def test_p0_needs_n2():
    with pytest.raises(DomainError, match="n >= 2"):
        ex.p0(1)


@pytest.mark.parametrize("p,n", [(1.0, 3), (0.5, 2), (2.0, 0), (2.0, 2.5)])
def test_bad_inputs(p, n):
    with pytest.raises(DomainError):
        ex.gamma(p, n)


def test_lifespan_exponents():
    assert ex.lifespan_exponent(2, 3) == pytest.approx(2.0)
    assert ex.lifespan_exponent(3, 1, "one_d_g_positive") == pytest.approx(1.0)
    assert ex.lifespan_exponent(2, 1, "one_d_f_only") == pytest.approx(2 / 3)
    assert ex.lifespan_exponent(1.5, 2, "two_d_sub2") == pytest.approx(1 / 3)
    # n = 1: general coincides with the f-only value
    assert ex.lifespan_exponent(2, 1) == pytest.approx(ex.lifespan_exponent(2, 1, "one_d_f_only"))


def test_lifespan_exponent_domain():
    with pytest.raises(DomainError, match="gamma"):
        ex.lifespan_exponent(3.0, 3)
    with pytest.raises(DomainError):
        ex.lifespan_exponent(2.0, 2, "two_d_sub2")
    with pytest.raises(DomainError):
        ex.lifespan_exponent(2.0, 3, "one_d_f_only")


def test_regimes():
    assert ex.exponent_report(2, 3).regime is ex.Regime.SUBCRITICAL
    assert ex.exponent_report(ex.p0(3), 3).regime is ex.Regime.CRITICAL
    assert ex.exponent_report(3, 3).regime is ex.Regime.SUPERCRITICAL
    rep = ex.exponent_report(2, 1)
    assert rep.regime is ex.Regime.ONE_DIM and rep.p0 is None
    assert ex.exponent_report(3, 3).lifespan_exp is None


def test_report_dict():
    d = ex.exponent_report(2, 3).to_dict()
    assert d["gamma"] == 2.0 and d["lifespan_exp"] == 2.0 and d["regime"] == "subcritical"


def _bisect_a(eps):
    f = lambda a: a * a * eps * eps * math.log1p(a) - 1
    lo, hi = 0.0, 1.0
    while f(hi) < 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("eps", [1e-4, 0.02, 0.1, 0.5, 1.0, 10.0, 1e3])
def test_a_of_eps_against_bisection(eps):
    a = ex.solve_a_of_eps(eps)
    assert a == pytest.approx(_bisect_a(eps), rel=1e-13)
    assert abs(a * a * eps * eps * math.log1p(a) - 1) < 1e-12


def test_a_of_eps_inverse():
    for a in (0.01, 1.0, 7.0, 1e5):
        assert ex.solve_a_of_eps(ex.eps_of_a(a)) == pytest.approx(a, rel=1e-12)


def test_a_of_eps_domain():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(DomainError):
            ex.solve_a_of_eps(bad)
