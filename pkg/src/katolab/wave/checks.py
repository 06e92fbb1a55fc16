"""Checks of simulation output against the inequalities used in the blow-up proofs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DomainError
from .problem import WaveProblem, ball_volume
from .solver import FunctionalTrace, Snapshot

__all__ = [
    "CheckReport",
    "BoundFitReport",
    "check_convexity_and_positivity",
    "check_step0",
    "check_condition_F",
    "check_pointwise_2d",
    "pointwise_2d_bound",
    "check_F_second_identity",
    "check_odi_consistency",
    "check_support",
    "odi_constants",
]


@dataclass
class CheckReport:
    name: str
    passed: bool
    violations: list[dict] = field(default_factory=list)
    worst: float = 0.0
    worst_t: float | None = None
    checked: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name, "passed": self.passed, "worst": self.worst,
            "worst_t": self.worst_t, "checked": self.checked,
            "violations": self.violations[:20], "n_violations": len(self.violations),
        }


@dataclass
class BoundFitReport:
    name: str
    exponent: float
    constants: list[float]
    eps: list[float]
    passed: bool
    ratio: float | None = None
    band: tuple[float, float] = (0.8, 1.25)
    violations: list[dict] = field(default_factory=list)
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name, "exponent": self.exponent, "constants": self.constants,
            "eps": self.eps, "passed": self.passed, "ratio": self.ratio,
            "band": list(self.band), "n_violations": len(self.violations),
            "violations": self.violations[:20], "detail": self.detail,
        }


def check_convexity_and_positivity(trace: FunctionalTrace, rtol: float = 1e-9) -> CheckReport:
    """F'' >= 0 everywhere and F(t) >= F'(0) t + F(0) on the trace."""
    scale = max(1.0, float(np.max(np.abs(trace.F)))) if len(trace) else 1.0
    tol = rtol * scale
    viol = []
    neg = np.nonzero(trace.Fpp < -tol)[0]
    for k in neg:
        viol.append({"t": float(trace.times[k]), "kind": "Fpp<0", "amount": float(-trace.Fpp[k])})
    line = trace.Fp0 * trace.times + trace.F0
    low = np.nonzero(trace.F < line - tol)[0]
    for k in low:
        viol.append({"t": float(trace.times[k]), "kind": "F<tangent",
                     "amount": float(line[k] - trace.F[k])})
    viol.sort(key=lambda v: v["t"])
    worst = max((v["amount"] for v in viol), default=0.0)
    return CheckReport("convexity_positivity", not viol, viol, worst, None, len(trace))


def _inf_ratio(trace: FunctionalTrace, values: np.ndarray, t_min: float, exponent: float,
               power: float) -> tuple[float, float]:
    mask = trace.times >= t_min - 1e-12
    if not np.any(mask):
        raise DomainError(f"trace ends at t={trace.times[-1]:.4g}, before t >= {t_min:.4g}")
    t = trace.times[mask]
    ratio = values[mask] / (trace.eps**power * t**exponent)
    k = int(np.argmin(ratio))
    return float(ratio[k]), float(t[k])


def _fit_report(name, exponent, runs, values_of, t_min_of, band) -> BoundFitReport:
    consts, epss, where = [], [], []
    for trace, prob in runs:
        c, t = _inf_ratio(trace, values_of(trace), t_min_of(prob), exponent, prob.p)
        consts.append(c)
        epss.append(trace.eps)
        where.append(t)
    positive = all(c > 0 for c in consts)
    ratio = None
    stable = True
    if len(consts) >= 2:
        ratio = max(consts) / min(consts) if positive else math.inf
        stable = band[0] <= ratio <= band[1]
    detail = ", ".join(f"eps={e:.4g}: C*={c:.6g} at t={t:.4g}" for e, c, t in zip(epss, consts, where))
    return BoundFitReport(name, exponent, consts, epss, positive and stable, ratio, band, [], detail)


def check_step0(runs: Sequence[tuple[FunctionalTrace, WaveProblem]],
                band: tuple[float, float] = (0.8, 1.25)) -> BoundFitReport:
    """Empirical C1* = inf F''(t) / (ε^p t^((n-1)(1-p/2))) over t >= R.

    With two or more runs the constants must agree within ``band`` (their
    max/min ratio), since the lower bound is ε-independent.
    """
    if not runs:
        raise DomainError("check_step0 needs at least one run")
    n, p = runs[0][1].n, runs[0][1].p
    expo = (n - 1) * (1 - p / 2)
    return _fit_report("step0", expo, runs, lambda tr: tr.Fpp, lambda pr: pr.R, band)


def check_condition_F(runs: Sequence[tuple[FunctionalTrace, WaveProblem]],
                      band: tuple[float, float] = (0.8, 1.25)) -> BoundFitReport:
    """Empirical C2* = inf F(t) / (ε^p t^(n+1-(n-1)p/2)) over t >= 4R."""
    if not runs:
        raise DomainError("check_condition_F needs at least one run")
    n, p = runs[0][1].n, runs[0][1].p
    expo = n + 1 - (n - 1) * p / 2
    return _fit_report("condition_F", expo, runs, lambda tr: tr.F, lambda pr: 4 * pr.R, band)


def pointwise_2d_bound(r: np.ndarray, t: float, eps: float, R: float, g_l1: float = 1.0) -> np.ndarray:
    """ε ||g||_1 / (2√2 π √(t+R) √(t-r+R)), the lower bound for u on R <= r <= t-R."""
    return eps * g_l1 / (2.0 * math.sqrt(2.0) * math.pi * math.sqrt(t + R) * np.sqrt(t - r + R))


def check_pointwise_2d(snapshots: Sequence[Snapshot], prob: WaveProblem,
                       tol: float = 0.0) -> BoundFitReport:
    """u(r,t) >= bound(r,t) - tol on every grid radius in [R, t-R]."""
    if prob.n != 2 or prob.f_profile != "zero":
        raise DomainError("pointwise bound applies to n=2 with f = 0")
    viol, margins = [], []
    for snap in snapshots:
        t = snap.t
        if t < 2 * prob.R - 1e-12:
            raise DomainError(f"region R <= r <= t-R is empty at t={t:.4g} < 2R")
        h = snap.x[1] - snap.x[0] if len(snap.x) > 1 else 0.0
        mask = (snap.x >= prob.R - 1e-9 * h) & (snap.x <= t - prob.R + 1e-9 * h)
        r = snap.x[mask]
        bound = pointwise_2d_bound(r, t, prob.eps, prob.R)
        gap = snap.u[mask] - bound
        margins.append(float(np.min(gap / bound)) if len(r) else math.nan)
        for ri, gi in zip(r, gap):
            if gi < -tol:
                viol.append({"t": t, "r": float(ri), "deficit": float(-gi)})
    detail = ", ".join(f"t={s.t:.4g}: min rel margin {m:.4g}" for s, m in zip(snapshots, margins))
    return BoundFitReport("pointwise_2d", 0.0, margins, [prob.eps], not viol, None,
                          (0.0, math.inf), viol, detail)


def check_F_second_identity(trace: FunctionalTrace, rtol: float = 1e-2, sup_cap: float = 1e3,
                            edge: int = 2) -> CheckReport:
    """Centred second difference of F against the quadrature of ∫|u|^p.

    Only interior samples with sup|u| <= sup_cap enter the pass criterion.
    """
    m = len(trace)
    if m < 2 * edge + 1:
        return CheckReport("F_second_identity", True, [], 0.0, None, 0)
    dt = trace.dt
    F = trace.F
    d2 = (F[2:] - 2 * F[1:-1] + F[:-2]) / dt**2
    k = np.arange(1, m - 1)
    keep = (k >= edge) & (k <= m - 1 - edge) & (trace.sup_u[1:-1] <= sup_cap)
    if not np.any(keep):
        return CheckReport("F_second_identity", True, [], 0.0, None, 0)
    fpp = trace.Fpp[1:-1][keep]
    # roundoff floor of a second difference of values of size |F|
    atol = max(64 * np.finfo(float).eps * float(np.max(np.abs(F))) / dt**2, np.finfo(float).tiny)
    err = np.abs(d2[keep] - fpp) / (np.abs(fpp) + atol)
    ts = trace.times[1:-1][keep]
    j = int(np.argmax(err))
    viol = [{"t": float(t), "rel_err": float(e)} for t, e in zip(ts, err) if e >= rtol]
    return CheckReport("F_second_identity", not viol, viol, float(err[j]), float(ts[j]), int(keep.sum()))


def odi_constants(n: int, p: float) -> tuple[float, float]:
    """(B, q) with B = |unit ball|^(1-p) and q = n(p-1)."""
    return ball_volume(n) ** (1.0 - p), n * (p - 1.0)


def check_odi_consistency(trace: FunctionalTrace, prob: WaveProblem, rtol: float = 1e-6) -> CheckReport:
    """F'' >= B (t+R)^(-q) |F|^p along the trace (Hölder over the support ball)."""
    B, q = odi_constants(prob.n, prob.p)
    t = trace.times
    rhs = B * (t + prob.R) ** (-q) * np.abs(trace.F) ** prob.p
    slack = trace.Fpp - rhs * (1.0 - rtol)
    bad = np.nonzero(slack < 0)[0]
    viol = [{"t": float(t[k]), "Fpp": float(trace.Fpp[k]), "rhs": float(rhs[k])} for k in bad]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, trace.Fpp / rhs, np.inf)
    j = int(np.argmin(ratio)) if len(ratio) else 0
    worst = float(ratio[j]) if len(ratio) else math.inf
    return CheckReport("odi_consistency", not viol, viol, worst, float(t[j]) if len(t) else None, len(t))


def check_support(snapshots: Sequence[Snapshot], prob: WaveProblem, atol: float = 1e-12,
                  margin_cells: int = 2) -> CheckReport:
    """u vanishes outside |x| <= t + R + margin_cells·dx on every snapshot.

    With cfl = 1 in 1D the discrete cone is exact and two cells suffice.  For
    cfl < 1 the scheme's numerical domain of dependence is wider than the
    light cone and a dispersive tail decays over roughly a dozen cells, so a
    wider margin is needed to reach atol.
    """
    viol = []
    dx = prob.grid.dx
    worst = 0.0
    for s in snapshots:
        outside = np.abs(s.x) > s.t + prob.R + margin_cells * dx
        if np.any(outside):
            m = float(np.max(np.abs(s.u[outside])))
            worst = max(worst, m)
            if m >= atol:
                viol.append({"t": s.t, "max_outside": m})
    return CheckReport("support", not viol, viol, worst, None, len(snapshots))
