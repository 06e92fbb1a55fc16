import numpy as np
import pytest

from katolab.errors import DomainError
from katolab.wave import Caps, FunctionalTrace, GridSpec, WaveProblem, simulate
from katolab.wave import checks as wc


def _run(n, p, eps, dx=0.1, horizon=100.0, **kw):
    prob = WaveProblem(n=n, p=p, eps=eps, grid=GridSpec(dx=dx), caps=Caps(t_horizon=horizon), **kw)
    return simulate(prob), prob


def _trace(times, F, Fpp, **kw):
    times = np.asarray(times, float)
    base = dict(sup_u=np.ones_like(times), eps=1.0, n=1, p=2.0, R=1.0, dx=0.1,
                dt=float(times[1] - times[0]), G=0.5, F0=float(F[0]), Fp0=0.0)
    base.update(kw)
    return FunctionalTrace(times, np.asarray(F, float), np.asarray(Fpp, float), **base)


def test_convexity_on_runs():
    for n in (1, 2, 3):
        run, _ = _run(n, 2.0, 0.5, horizon=20.0)
        assert wc.check_convexity_and_positivity(run.trace).passed


def test_convexity_detects_violation():
    t = np.linspace(0, 1, 11)
    tr = _trace(t, 1 + t, np.where(t > 0.5, -1.0, 0.0), Fp0=1.0)
    rep = wc.check_convexity_and_positivity(tr)
    assert not rep.passed and rep.violations[0]["kind"] == "Fpp<0"
    tr = _trace(t, 1 + 0.5 * t, np.zeros_like(t), Fp0=1.0)
    assert not wc.check_convexity_and_positivity(tr).passed


@pytest.mark.parametrize("n,p,eps", [(1, 2.0, 0.2), (1, 3.0, 0.2), (2, 2.0, 0.1), (3, 2.0, 2.0)])
def test_F_second_identity(n, p, eps):
    run, _ = _run(n, p, eps)
    rep = wc.check_F_second_identity(run.trace)
    assert rep.passed and rep.worst < 1e-2 and rep.checked > 100


def test_identity_detects_mismatch():
    t = np.linspace(0, 1, 101)
    tr = _trace(t, t**2, np.full_like(t, 3.0))
    assert not wc.check_F_second_identity(tr).passed


def test_odi_consistency_on_runs():
    for n, p, eps in [(2, 1.5, 0.05), (2, 2.0, 0.1), (3, 2.0, 1.0)]:
        run, prob = _run(n, p, eps, dx=0.05)
        rep = wc.check_odi_consistency(run.trace, prob)
        assert rep.passed and rep.worst >= 1.0


def test_odi_consistency_detects_violation():
    run, prob = _run(3, 2.0, 1.0, horizon=10.0)
    tr = run.trace
    weak = FunctionalTrace(tr.times, tr.F, tr.Fpp * 1e-3, tr.sup_u, tr.eps, tr.n, tr.p, tr.R,
                           tr.dx, tr.dt, tr.G, tr.F0, tr.Fp0)
    assert not wc.check_odi_consistency(weak, prob).passed


def test_step0_and_condition_F_3d():
    runs = []
    for eps in (1.0, 2.0):
        run, prob = _run(3, 2.0, eps, dx=0.1, horizon=1000.0)
        runs.append((run.trace, prob))
    s0 = wc.check_step0(runs)
    cF = wc.check_condition_F(runs)
    assert s0.exponent == 0.0 and cF.exponent == 2.0
    for rep in (s0, cF):
        assert rep.passed and all(c > 0 for c in rep.constants)
        assert 0.8 <= rep.ratio <= 1.25


def test_step0_needs_long_trace():
    run, prob = _run(3, 2.0, 1.0, horizon=0.5)
    with pytest.raises(DomainError, match="before"):
        wc.check_step0([(run.trace, prob)])
    with pytest.raises(DomainError):
        wc.check_step0([])


def test_band_failure_reported():
    runs = []
    for eps in (1.0, 4.0):
        run, prob = _run(3, 2.0, eps, dx=0.1, horizon=1000.0)
        runs.append((run.trace, prob))
    rep = wc.check_condition_F(runs, band=(0.99, 1.01))
    assert not rep.passed and rep.ratio > 1.01


def test_pointwise_2d():
    prob = WaveProblem(n=2, p=2.0, eps=0.1, grid=GridSpec(dx=0.05), caps=Caps(t_horizon=10.0),
                       snapshot_times=(4.0, 6.0, 8.0))
    run = simulate(prob)
    rep = wc.check_pointwise_2d(run.snapshots, prob)
    assert rep.passed and not rep.violations
    assert all(m > 0 for m in rep.constants)


def test_pointwise_2d_domain():
    prob = WaveProblem(n=2, p=2.0, eps=0.1, caps=Caps(t_horizon=3.0), snapshot_times=(1.0,))
    with pytest.raises(DomainError, match="empty"):
        wc.check_pointwise_2d(simulate(prob).snapshots, prob)
    with pytest.raises(DomainError):
        wc.check_pointwise_2d([], WaveProblem(n=3, p=2.0, eps=0.1))


def test_pointwise_bound_formula():
    # at r = t - R the bound is ε / (2√2 π √(t+R) √(2R))
    b = wc.pointwise_2d_bound(np.array([3.0]), 4.0, 0.1, 1.0)
    assert b[0] == pytest.approx(0.1 / (2 * np.sqrt(2) * np.pi * np.sqrt(5) * np.sqrt(2)))


def test_support_exact_cone_1d():
    prob = WaveProblem(n=1, p=2.0, eps=0.2, grid=GridSpec(dx=0.1, cfl=1.0),
                       caps=Caps(t_horizon=10.0), snapshot_times=(2.0, 5.0, 9.0))
    rep = wc.check_support(simulate(prob).snapshots, prob, margin_cells=2)
    assert rep.passed and rep.worst == 0.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_support_with_dispersive_margin(n):
    prob = WaveProblem(n=n, p=2.0, eps=0.5, grid=GridSpec(dx=0.1), caps=Caps(t_horizon=12.0),
                       snapshot_times=(3.0, 6.0, 11.0))
    rep = wc.check_support(simulate(prob).snapshots, prob, margin_cells=24)
    assert rep.passed, rep.worst


def test_odi_constants():
    B, q = wc.odi_constants(3, 2.0)
    assert B == pytest.approx(3 / (4 * np.pi)) and q == 3.0
