"""Blow-up certificates for F'' >= B (t+R)^(-q) |F|^p and an ODE oracle.

The certificate side turns the growth/ODI hypotheses into an explicit upper
bound 2^(2/M) T_ref on the blow-up time.  The oracle side integrates the
equality case F'' = B (t+R)^(-q) |F|^p with an adaptive high-order method
and brackets its blow-up time, so the two can be checked against each other.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NoBlowupError

__all__ = [
    "OdiProblem",
    "KatoCertificate",
    "ExtremalControls",
    "OdeBlowupResult",
    "Verdict",
    "kato_M",
    "delta_limit",
    "c0_of_delta",
    "choose_delta",
    "certify_lemma1",
    "certify_lemma2",
    "certify",
    "a_threshold",
    "integrate_extremal",
    "verify_certificate",
    "sample_problems",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OdiProblem:
    """Parameters of the differential inequality and the data of F.

    ``t0`` is set only in the F'(0) = 0 variant, where it is a time with
    F(t0) >= 2 F(0).
    """

    p: float
    a: float
    q: float
    A: float
    B: float
    R: float
    T0: float
    F0: float
    F0p: float
    t0: float | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        for name in ("a", "q", "A", "B", "R", "T0"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")
        if self.t0 is not None and not self.t0 > 0:
            raise DomainError(f"t0 must be positive, got {self.t0}")

    @property
    def mode(self) -> str:
        return "lemma1" if self.t0 is None else "lemma2"

    @property
    def M(self) -> float:
        return kato_M(self.p, self.a, self.q)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class KatoCertificate:
    lemma: str
    M: float
    delta: float
    C0: float
    T_ref: float
    threshold: float
    hypothesis_ok: bool
    bound: float
    problem: OdiProblem

    def to_dict(self) -> dict:
        d = asdict(self)
        d["problem"] = self.problem.to_dict()
        return d


def kato_M(p: float, a: float, q: float) -> float:
    return (p - 1.0) / 2.0 * a - q / 2.0 + 1.0


def delta_limit(p: float, a: float, q: float) -> float:
    """Supremum of admissible δ: min((p-1)/2, M/(2a))."""
    return min((p - 1.0) / 2.0, kato_M(p, a, q) / (2.0 * a))


def c0_of_delta(delta: float, p: float, a: float, q: float, B: float) -> float:
    M = kato_M(p, a, q)
    core = 2.0 ** (-q / 2.0) * delta / (M - delta * a) * math.sqrt(B / (p + 1.0))
    return core ** (-1.0 / M)


def choose_delta(p: float, a: float, q: float, B: float, endpoint_tol: float = 1e-9) -> float:
    """δ minimising C0 by golden-section search on the open admissible interval.

    Falls back to half the admissible limit when the minimiser sits at an
    endpoint, which keeps δ strictly inside the interval.
    """
    hi = delta_limit(p, a, q)
    lo = 0.0

    def obj(d):
        return math.log(c0_of_delta(d, p, a, q, B))

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = obj(x1), obj(x2)
    while hi - lo > 1e-12 * delta_limit(p, a, q):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = obj(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = obj(x2)
    best = 0.5 * (lo + hi)
    limit = delta_limit(p, a, q)
    if best < endpoint_tol or limit - best < endpoint_tol:
        return 0.5 * limit
    return best


def _certify(prob: OdiProblem, T_ref: float, lemma: str) -> KatoCertificate:
    M = prob.M
    if not M > 0:
        raise DomainError(f"need M = (p-1)a/2 - q/2 + 1 > 0, got M={M}")
    delta = choose_delta(prob.p, prob.a, prob.q, prob.B)
    C0 = c0_of_delta(delta, prob.p, prob.a, prob.q, prob.B)
    threshold = C0 * prob.A ** (-(prob.p - 1.0) / (2.0 * M))
    return KatoCertificate(
        lemma=lemma,
        M=M,
        delta=delta,
        C0=C0,
        T_ref=T_ref,
        threshold=threshold,
        hypothesis_ok=bool(T_ref >= threshold),
        bound=2.0 ** (2.0 / M) * T_ref,
        problem=prob,
    )


def certify_lemma1(prob: OdiProblem) -> KatoCertificate:
    """Certificate for data F(0) >= 0, F'(0) > 0."""
    if prob.mode != "lemma1":
        raise DomainError("lemma1 certificate takes no t0")
    if not (prob.F0 >= 0 and prob.F0p > 0):
        raise DomainError(f"lemma1 needs F(0) >= 0 and F'(0) > 0, got {prob.F0}, {prob.F0p}")
    T_ref = max(prob.T0, prob.F0 / prob.F0p, prob.R)
    return _certify(prob, T_ref, "lemma1")


def certify_lemma2(prob: OdiProblem) -> KatoCertificate:
    """Certificate for data F(0) > 0, F'(0) = 0 with F(t0) >= 2F(0)."""
    if prob.t0 is None:
        raise DomainError("lemma2 certificate needs t0")
    if not (prob.F0 > 0 and prob.F0p == 0):
        raise DomainError(f"lemma2 needs F(0) > 0 and F'(0) = 0, got {prob.F0}, {prob.F0p}")
    T_ref = max(prob.T0, prob.t0, prob.R)
    return _certify(prob, T_ref, "lemma2")


def certify(prob: OdiProblem) -> KatoCertificate:
    return certify_lemma1(prob) if prob.mode == "lemma1" else certify_lemma2(prob)


def a_threshold(cert: KatoCertificate) -> float:
    """Growth constant A at which hypothesis_ok flips to true."""
    p = cert.problem.p
    return (cert.T_ref / cert.C0) ** (-2.0 * cert.M / (p - 1.0))


@dataclass
class ExtremalControls:
    rtol: float = 1e-10
    atol: float = 1e-12
    F_max: float = 1e8
    horizon: float = 1e6
    bracket_tol: float = 1e-3
    growth_samples: int = 1000
    # F_max is raised by 10x until the bracket is narrower than bracket_tol
    F_max_cap: float = 1e150
    max_step_collapse: float = 1e-14


@dataclass
class OdeBlowupResult:
    T_blow_lo: float
    T_blow_hi: float
    F_reach: float
    # hypotheses on F that the certificate takes as given: growth F >= A t^a
    # on [T0, T_blow_lo] and, in the F'(0) = 0 variant, F(t0) >= 2 F(0)
    growth_hypothesis_ok: bool
    trajectory: np.ndarray = field(repr=False)
    problem: OdiProblem | None = None
    # dense interpolant t -> (F, F') valid on [0, T_blow_lo]
    dense: Callable | None = field(default=None, repr=False, compare=False)

    @property
    def rel_width(self) -> float:
        return (self.T_blow_hi - self.T_blow_lo) / self.T_blow_lo

    def to_dict(self) -> dict:
        return {
            "T_blow_lo": self.T_blow_lo,
            "T_blow_hi": self.T_blow_hi,
            "rel_width": self.rel_width,
            "F_reach": self.F_reach,
            "growth_hypothesis_ok": self.growth_hypothesis_ok,
        }


def _tail_time(F: float, Fp: float, k: float, p: float) -> float:
    """Upper bound on the time F needs to go from F to infinity.

    With F'^2 >= Fp^2 + k (F^(p+1) - F_*^(p+1)) and s = F/F_*, the right side
    is at least m s^(p+1) with m = min(Fp^2, k F_*^(p+1)), which integrates
    in closed form.
    """
    m = min(Fp * Fp, k * F ** (p + 1.0))
    if not m > 0:
        return math.inf
    return 2.0 * F / ((p - 1.0) * math.sqrt(m))


def _upper_bound(t: float, F: float, Fp: float, prob: OdiProblem) -> float:
    """A time by which the extremal solution must have blown up."""
    T_u = t
    for _ in range(200):
        k = 2.0 * prob.B * (T_u + prob.R) ** (-prob.q) / (prob.p + 1.0)
        cand = t + _tail_time(F, Fp, k, prob.p)
        if cand <= T_u:
            return T_u
        T_u = cand * (1.0 + 1e-9)
    return math.inf


def integrate_extremal(prob: OdiProblem, controls: ExtremalControls | None = None) -> OdeBlowupResult:
    """Integrate F'' = B (t+R)^(-q) |F|^p and bracket the blow-up time.

    The lower end is the time F reaches 10 F_max (F is still finite there);
    the upper end adds a bound on the remaining time to infinity derived from
    the energy inequality, so the bracket contains the true blow-up time.
    """
    ctl = controls or ExtremalControls()
    p, B, q, R = prob.p, prob.B, prob.q, prob.R

    def rhs(t, y):
        return [y[1], B * (t + R) ** (-q) * abs(y[0]) ** p]

    F_max = ctl.F_max
    while True:
        targets = (F_max, 10.0 * F_max)
        ev_lo = lambda t, y: y[0] - targets[0]  # noqa: E731
        ev_hi = lambda t, y: y[0] - targets[1]  # noqa: E731
        ev_hi.terminal = True
        sol = solve_ivp(
            rhs,
            (0.0, ctl.horizon),
            [prob.F0, prob.F0p],
            method="DOP853",
            rtol=ctl.rtol,
            atol=ctl.atol,
            events=(ev_lo, ev_hi),
            dense_output=True,
        )
        if sol.status == -1 and not len(sol.t_events[1]):
            raise NoBlowupError(f"integration failed before reaching F_max: {sol.message}")
        if not len(sol.t_events[1]):
            raise NoBlowupError(
                f"no blow-up detected within t <= {ctl.horizon}: "
                "hypotheses likely unmet or horizon too small"
            )
        t1 = float(sol.t_events[0][0])
        t2 = float(sol.t_events[1][0])
        F2, Fp2 = sol.y_events[1][0]
        T_hi = _upper_bound(t2, float(F2), float(Fp2), prob)
        width = (T_hi - t2) / t2
        reach_gap = (t2 - t1) / t1
        if (width < ctl.bracket_tol and reach_gap < ctl.bracket_tol) or 10.0 * F_max > ctl.F_max_cap:
            break
        F_max *= 10.0

    growth_ok = True
    if prob.T0 < t2:
        ts = np.geomspace(prob.T0, t2, ctl.growth_samples)
        Fs = sol.sol(ts)[0]
        growth_ok = bool(np.all(Fs >= prob.A * ts ** prob.a))
    if prob.t0 is not None:
        if prob.t0 < t2:
            growth_ok = growth_ok and bool(sol.sol(prob.t0)[0] >= 2.0 * prob.F0)
    traj = np.column_stack([sol.t, sol.y[0], sol.y[1]])
    return OdeBlowupResult(t2, T_hi, 10.0 * F_max, growth_ok, traj, prob, sol.sol)


class Verdict(str, Enum):
    PASS = "PASS"
    VACUOUS = "VACUOUS"
    FAIL = "FAIL"


def verify_certificate(cert: KatoCertificate, ode: OdeBlowupResult) -> Verdict:
    if ode.problem is not None and ode.problem != cert.problem:
        raise DomainError("certificate and oracle result come from different problems")
    if not (cert.hypothesis_ok and ode.growth_hypothesis_ok):
        return Verdict.VACUOUS
    return Verdict.PASS if ode.T_blow_hi < cert.bound else Verdict.FAIL


def sample_problems(rng: np.random.Generator, count: int, mode: str = "lemma1",
                    controls: ExtremalControls | None = None,
                    max_tries: int | None = None) -> list[OdiProblem]:
    """Random admissible problems whose extremal solution meets every hypothesis.

    The growth constant A is read off the extremal trajectory itself, so the
    growth hypothesis holds by construction; problems whose certificate is
    still vacuous are discarded.
    """
    ctl = controls or ExtremalControls()
    out: list[OdiProblem] = []
    tries = 0
    max_tries = max_tries or 50 * count
    while len(out) < count and tries < max_tries:
        tries += 1
        p = rng.uniform(1.5, 4.0)
        a = rng.uniform(0.5, 4.0)
        q = rng.uniform(0.05, 0.95 * min(4.0, (p - 1.0) * a + 2.0))
        B = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
        R = rng.uniform(0.5, 3.0)
        if mode == "lemma1":
            F0 = rng.uniform(0.0, 2.0)
            F0p = math.exp(rng.uniform(math.log(0.1), math.log(2.0)))
        else:
            F0 = rng.uniform(0.1, 2.0)
            F0p = 0.0
        base = OdiProblem(p, a, q, 1.0, B, R, 1.0, F0, F0p, t0=1.0 if mode == "lemma2" else None)
        try:
            ode = integrate_extremal(base, ctl)
        except NoBlowupError:
            continue
        Tb = ode.T_blow_lo
        t0 = None
        if mode == "lemma2":
            traj = ode.trajectory
            idx = np.nonzero(traj[:, 1] >= 2.0 * F0)[0]
            if not len(idx):
                continue
            t0 = float(traj[idx[0], 0])
            if t0 >= Tb:
                continue
        T0 = rng.uniform(0.3, 0.95) * Tb
        ts = np.geomspace(T0, Tb, ctl.growth_samples)
        ode_F = ode.dense(ts)[0]
        A = 0.99 * float(np.min(ode_F / ts ** a))
        if not A > 0:
            continue
        prob = OdiProblem(p, a, q, A, B, R, T0, F0, F0p, t0)
        if certify(prob).hypothesis_ok:
            out.append(prob)
    return out
