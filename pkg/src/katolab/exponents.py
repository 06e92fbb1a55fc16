"""Closed-form exponents for u_tt - Δu = |u|^p and the log-corrected scale a(ε).

All functions are pure and use IEEE double precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.optimize import brentq

from .errors import DomainError

__all__ = [
    "LifespanCase",
    "Regime",
    "ExponentReport",
    "gamma",
    "p0",
    "lifespan_exponent",
    "solve_a_of_eps",
    "eps_of_a",
    "exponent_report",
]


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"
    ONE_DIM = "one_dim"


class LifespanCase(str, Enum):
    """Data/dimension combinations with a known upper-bound exponent."""

    GENERAL = "general"
    ONE_D_G_POSITIVE = "one_d_g_positive"
    ONE_D_F_ONLY = "one_d_f_only"
    TWO_D_SUB2 = "two_d_sub2"


def _check_pn(p: float, n: int) -> None:
    if not p > 1:
        raise DomainError(f"power p must satisfy p > 1, got p={p}")
    if int(n) != n or n < 1:
        raise DomainError(f"dimension n must be an integer >= 1, got n={n}")


def gamma(p: float, n: int) -> float:
    """Return 2 + (n+1)p - (n-1)p^2."""
    _check_pn(p, n)
    return 2.0 + (n + 1) * p - (n - 1) * p * p


def p0(n: int) -> float:
    """Strauss exponent: the positive root of gamma(., n) = 0 for n >= 2."""
    if int(n) != n or n < 2:
        raise DomainError(
            f"p0 requires n >= 2 (denominator 2(n-1) vanishes at n=1), got n={n}"
        )
    return (n + 1 + math.sqrt(n * n + 10 * n - 7)) / (2 * (n - 1))


def lifespan_exponent(p: float, n: int, case: LifespanCase | str = LifespanCase.GENERAL) -> float:
    """Magnitude kappa of the predicted lifespan scaling T(ε) ~ ε^(-kappa).

    ``general`` is 2p(p-1)/gamma(p,n) and needs gamma > 0; for n = 1 it
    coincides with the f-only exponent because gamma(p,1) = 2 + 2p.
    """
    _check_pn(p, n)
    case = LifespanCase(case)
    if case is LifespanCase.GENERAL:
        g = gamma(p, n)
        if g <= 0:
            raise DomainError(
                f"general exponent needs gamma(p,n) > 0, got gamma({p},{n})={g}"
            )
        return 2.0 * p * (p - 1.0) / g
    if case is LifespanCase.ONE_D_G_POSITIVE:
        if n != 1:
            raise DomainError(f"{case.value} is a one-dimensional case, got n={n}")
        return (p - 1.0) / 2.0
    if case is LifespanCase.ONE_D_F_ONLY:
        if n != 1:
            raise DomainError(f"{case.value} is a one-dimensional case, got n={n}")
        return p * (p - 1.0) / (p + 1.0)
    if n != 2 or not p < 2:
        raise DomainError(f"{case.value} needs n=2 and 1<p<2, got n={n}, p={p}")
    return (p - 1.0) / (3.0 - p)


def _a_residual(a: float, eps: float) -> float:
    return a * a * eps * eps * math.log1p(a) - 1.0


def solve_a_of_eps(eps: float) -> float:
    """Unique a > 0 with a^2 ε^2 log(1+a) = 1."""
    if not eps > 0 or not math.isfinite(eps):
        raise DomainError(f"eps must be a positive finite number, got {eps}")
    lo, hi = 1e-12, 1.0
    while _a_residual(hi, eps) < 0:
        lo, hi = hi, 2.0 * hi
    a = brentq(_a_residual, lo, hi, args=(eps,), xtol=1e-300, rtol=4 * 2.23e-16, maxiter=500)
    # polish: one Newton step removes the last ulp-level residual
    d = 2 * a * eps * eps * math.log1p(a) + a * a * eps * eps / (1 + a)
    a_new = a - _a_residual(a, eps) / d
    if abs(_a_residual(a_new, eps)) < abs(_a_residual(a, eps)):
        a = a_new
    return a


def eps_of_a(a: float) -> float:
    """Inverse map: the ε at which solve_a_of_eps returns a."""
    if not a > 0:
        raise DomainError(f"a must be positive, got {a}")
    return 1.0 / (a * math.sqrt(math.log1p(a)))


@dataclass(frozen=True)
class ExponentReport:
    p: float
    n: int
    gamma: float
    p0: float | None
    regime: Regime
    lifespan_exp: float | None
    # every case exponent defined for this (p, n)
    case_exponents: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "gamma": self.gamma,
            "p0": self.p0,
            "p0_defined": self.p0 is not None,
            "regime": self.regime.value,
            "lifespan_exp": self.lifespan_exp,
            "case_exponents": dict(self.case_exponents),
        }


def exponent_report(p: float, n: int, critical_tol: float = 1e-12) -> ExponentReport:
    g = gamma(p, n)
    if n == 1:
        exp0, regime = None, Regime.ONE_DIM
    else:
        exp0 = p0(n)
        if abs(g) <= critical_tol:
            regime = Regime.CRITICAL
        elif g > 0:
            regime = Regime.SUBCRITICAL
        else:
            regime = Regime.SUPERCRITICAL
    cases = {}
    for case in LifespanCase:
        try:
            cases[case.value] = lifespan_exponent(p, n, case)
        except DomainError:
            pass
    kappa = cases.get(LifespanCase.GENERAL.value) if g > 0 else None
    return ExponentReport(p, n, g, exp0, regime, kappa, cases)
