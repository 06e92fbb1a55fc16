"""Explicit leapfrog solvers for u_tt = Δu + |u|^p (1D line and radial n-D).

Both solvers use a conservative second-difference stencil whose weighted sum
telescopes, so the discrete functional F = Σ w u satisfies the leapfrog
analogue of F'' = ∫|u|^p.  Only the discrete domain of dependence of the
data is updated; it grows one cell per step, and the grid is sized so the
outer boundary is never touched before the horizon.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.linalg import eigvalsh_tridiagonal

from ..errors import DomainError
from .problem import WaveProblem, profile_integral, profile_values, sphere_area

log = logging.getLogger(__name__)

__all__ = [
    "FunctionalTrace",
    "Snapshot",
    "WaveRun",
    "BlowupEstimate",
    "radial_cfl_limit",
    "default_cfl",
    "simulate",
    "solve_1d",
    "solve_radial",
    "estimate_lifespan",
    "richardson",
]


@dataclass
class FunctionalTrace:
    times: np.ndarray
    F: np.ndarray
    Fpp: np.ndarray
    sup_u: np.ndarray
    eps: float
    n: int
    p: float
    R: float
    dx: float
    dt: float
    # (1/2) ∫ g dx of the unscaled profile
    G: float
    F0: float
    Fp0: float

    def __len__(self):
        return len(self.times)

    def csv_rows(self):
        for row in zip(self.times, self.F, self.Fpp, self.sup_u):
            yield tuple(float(v) for v in row)

    def meta(self) -> dict:
        return {
            "eps": self.eps, "n": self.n, "p": self.p, "R": self.R,
            "dx": self.dx, "dt": self.dt, "G": self.G, "F0": self.F0,
            "Fp0": self.Fp0, "samples": len(self),
        }


@dataclass
class Snapshot:
    t: float
    x: np.ndarray
    u: np.ndarray


@dataclass
class WaveRun:
    problem: WaveProblem
    trace: FunctionalTrace
    snapshots: list[Snapshot]
    blew_up: bool
    T_lo: float
    T_hi: float
    # blow-up time at this resolution, extrapolated inside the last step
    T_est: float
    reason: str


@dataclass
class BlowupEstimate:
    T_lo: float
    T_hi: float
    refinement: list[tuple[float, float]]
    extrapolated: float
    converged: bool
    order: float | None = None
    status: str = "blowup"
    runs: list[WaveRun] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "T_lo": self.T_lo, "T_hi": self.T_hi,
            "refinement": [list(r) for r in self.refinement],
            "extrapolated": self.extrapolated, "converged": self.converged,
            "order": self.order, "status": self.status,
        }


@lru_cache(maxsize=None)
def radial_cfl_limit(n: int, cells: int = 400) -> float:
    """Largest stable Courant number of the radial stencil in dimension n.

    The stencil is similar to a symmetric tridiagonal matrix; leapfrog is
    stable while dt^2 |λ_max| <= 4.
    """
    x = np.arange(cells + 1, dtype=float)
    rp = x + 0.5
    rm = np.maximum(x - 0.5, 0.0)
    V = (rp**n - rm**n) / n
    Ap = rp ** (n - 1)
    Am = np.where(x > 0, rm ** (n - 1), 0.0)
    Ap[-1] = 0.0
    diag = -(Ap + Am) / V
    off = Ap[:-1] / np.sqrt(V[:-1] * V[1:])
    lam = np.max(np.abs(eigvalsh_tridiagonal(diag, off)))
    return 2.0 / math.sqrt(lam)


def default_cfl(n: int) -> float:
    return 0.9 if n == 1 else 0.9 * radial_cfl_limit(n)


_FLUSH = 1e-250


@njit(cache=True)
def _pow_abs(v, p):
    if p == 2.0:
        return v * v
    if p == 3.0:
        return abs(v) * v * v
    return abs(v) ** p


@njit(cache=True)
def _advance(u_prev, u_cur, src_cur, u_next, src_next, cR, cL, w, dt2, p, nonlinear, lo, hi):
    F = 0.0
    Fpp = 0.0
    sup = 0.0
    for i in range(lo, hi):
        uc = u_cur[i]
        lap = cR[i] * (u_cur[i + 1] - uc)
        if i > 0:
            lap -= cL[i] * (uc - u_cur[i - 1])
        v = 2.0 * uc - u_prev[i] + dt2 * (lap + src_cur[i])
        # the precursor ahead of the light cone decays into subnormals,
        # which are orders of magnitude slower to operate on
        if abs(v) < _FLUSH:
            v = 0.0
        u_next[i] = v
        s = _pow_abs(v, p)
        src_next[i] = s if nonlinear else 0.0
        F += w[i] * v
        Fpp += w[i] * s
        a = abs(v)
        if a > sup:
            sup = a
    return F, Fpp, sup


class _Grid:
    """Node coordinates, stencil coefficients and quadrature weights."""

    def __init__(self, n: int, dx: float, cells: int):
        self.n = n
        self.dx = dx
        if n == 1:
            self.center = cells
            idx = np.arange(2 * cells + 1) - cells
            self.x = idx * dx
            self.cR = np.full(self.x.shape, 1.0 / dx**2)
            self.cL = self.cR.copy()
            self.w = np.full(self.x.shape, dx)
        else:
            self.center = 0
            self.x = np.arange(cells + 1) * dx
            rp = self.x + 0.5 * dx
            rm = np.maximum(self.x - 0.5 * dx, 0.0)
            V = (rp**n - rm**n) / n
            Ap = rp ** (n - 1)
            Am = np.where(self.x > 0, rm ** (n - 1), 0.0)
            self.cR = Ap / (dx * V)
            self.cL = Am / (dx * V)
            self.w = sphere_area(n) * V

    def window(self, reach: int) -> tuple[int, int]:
        size = len(self.x)
        if self.n == 1:
            return max(1, self.center - reach), min(size - 1, self.center + reach + 1)
        return 0, min(size - 1, reach + 1)

    def lap(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        out[:-1] += self.cR[:-1] * (u[1:] - u[:-1])
        out[1:] -= self.cL[1:] * (u[1:] - u[:-1])
        return out


def simulate(prob: WaveProblem) -> WaveRun:
    """Single-resolution run until blow-up, non-finite values or the horizon."""
    n, p, eps, R = prob.n, float(prob.p), prob.eps, prob.R
    dx = prob.grid.dx
    cfl = prob.grid.cfl if prob.grid.cfl is not None else default_cfl(n)
    if n == 1:
        if cfl > 1.0:
            raise DomainError(f"1D leapfrog needs cfl <= 1, got {cfl}")
    elif cfl > radial_cfl_limit(n):
        raise DomainError(
            f"cfl={cfl} exceeds the radial stencil's stability limit "
            f"{radial_cfl_limit(n):.4f} for n={n}"
        )
    dt = cfl * dx
    horizon = prob.caps.t_horizon
    nsteps = int(math.ceil(horizon / dt - 1e-9))
    data_cells = int(math.ceil(R / dx)) + 1
    cells = data_cells + nsteps + 4
    if prob.grid.L is not None:
        cells = max(cells, int(math.ceil(prob.grid.L / dx)))
    g = _Grid(n, dx, cells)

    f = eps * profile_values(prob.f_profile, g.x, n, R)
    gv = eps * profile_values(prob.g_profile, g.x, n, R)
    src0 = _pow_abs_np(f, p)
    u0 = f
    u1 = f + dt * gv + 0.5 * dt * dt * (g.lap(f) + (src0 if prob.nonlinear else 0.0))
    src1 = _pow_abs_np(u1, p)

    times = np.empty(nsteps + 1)
    F = np.empty(nsteps + 1)
    Fpp = np.empty(nsteps + 1)
    sup = np.empty(nsteps + 1)
    times[0], F[0], Fpp[0], sup[0] = 0.0, g.w @ u0, g.w @ src0, np.max(np.abs(u0))
    times[1], F[1], Fpp[1], sup[1] = dt, g.w @ u1, g.w @ src1, np.max(np.abs(u1))
    if not prob.nonlinear:
        src0 = np.zeros_like(u0)
        src1 = np.zeros_like(u1)

    pending = sorted(prob.snapshot_times)
    snaps: list[Snapshot] = []

    def take(k, u):
        while pending and abs(pending[0] - k * dt) <= 0.5 * dt + 1e-12:
            lo, hi = g.window(data_cells + k)
            snaps.append(Snapshot(k * dt, g.x[lo:hi].copy(), u[lo:hi].copy()))
            pending.pop(0)
        while pending and pending[0] < k * dt - 0.5 * dt:
            pending.pop(0)

    take(0, u0)
    take(1, u1)
    u_prev, u_cur = u0.copy(), u1
    src_cur = src1
    u_next = np.zeros_like(u0)
    src_next = np.zeros_like(u0)
    dt2 = dt * dt
    U_max = prob.caps.U_max
    last = 1
    blew_up = False
    reason = "horizon"
    T_est = math.inf
    for k in range(1, nsteps):
        lo, hi = g.window(data_cells + k + 1)
        Fk, Fppk, supk = _advance(u_prev, u_cur, src_cur, u_next, src_next,
                                  g.cR, g.cL, g.w, dt2, p, prob.nonlinear, lo, hi)
        finite = math.isfinite(Fk) and math.isfinite(Fppk) and math.isfinite(supk)
        if not finite or supk > U_max:
            blew_up = True
            reason = "non-finite" if not finite else "U_max"
            y_k = _y(sup[k], p)
            T_est = (k + 1) * dt
            if finite:
                y_n = _y(supk, p)
                if y_k > y_n:
                    T_est = (k + 1) * dt + dt * y_n / (y_k - y_n)
            break
        times[k + 1], F[k + 1], Fpp[k + 1], sup[k + 1] = (k + 1) * dt, Fk, Fppk, supk
        last = k + 1
        u_prev, u_cur, u_next = u_cur, u_next, u_prev
        src_cur, src_next = src_next, src_cur
        take(k + 1, u_cur)

    s = slice(0, last + 1)
    trace = FunctionalTrace(
        times=times[s].copy(), F=F[s].copy(), Fpp=Fpp[s].copy(), sup_u=sup[s].copy(),
        eps=eps, n=n, p=p, R=R, dx=dx, dt=dt,
        G=0.5 * profile_integral(prob.g_profile),
        F0=float(g.w @ u0), Fp0=float(g.w @ gv),
    )
    T_lo = last * dt
    T_hi = (last + 1) * dt if blew_up else math.inf
    return WaveRun(prob, trace, snaps, blew_up, T_lo, T_hi, T_est, reason)


def _y(s: float, p: float) -> float:
    return s ** (-(p - 1.0) / 2.0) if s > 0 else math.inf


def _pow_abs_np(u: np.ndarray, p: float) -> np.ndarray:
    return np.abs(u) ** p


def richardson(Ts: list[float], ratio: float = 2.0, conv_tol: float = 0.02):
    """Extrapolate T(dx) over successive halvings with observed order.

    Returns (extrapolated, order, converged).  With fewer than three levels
    the order is assumed to be 2.
    """
    if len(Ts) == 1:
        return Ts[0], None, False
    t1, t2 = Ts[-2], Ts[-1]
    converged = abs(t2 - t1) / abs(t2) < conv_tol
    if len(Ts) == 2:
        return t2 + (t2 - t1) / (ratio**2 - 1.0), 2.0, converged
    t0 = Ts[-3]
    d_coarse, d_fine = t0 - t1, t1 - t2
    converged = converged and abs(d_fine) < abs(d_coarse)
    if d_fine == 0.0:
        return t2, None, converged
    r = d_coarse / d_fine
    if r <= 1.0 + 1e-12:
        # no monotone convergence: report the finest value unextrapolated
        return t2, None, converged
    order = math.log(r) / math.log(ratio)
    return t2 - d_fine / (r - 1.0), order, converged


def _estimate(prob: WaveProblem, levels: int) -> tuple[FunctionalTrace, BlowupEstimate]:
    runs = [simulate(prob.with_(dx=prob.grid.dx / 2**k)) for k in range(levels)]
    finest = runs[-1]
    refinement = [(r.problem.grid.dx, r.T_est) for r in runs]
    if not all(r.blew_up for r in runs):
        status = "horizon" if not any(r.blew_up for r in runs) else "mixed"
        est = BlowupEstimate(finest.T_lo, finest.T_hi, refinement, math.nan, False,
                             None, status, runs)
        return finest.trace, est
    ext, order, conv = richardson([T for _, T in refinement])
    est = BlowupEstimate(finest.T_lo, finest.T_hi, refinement, ext, conv, order, "blowup", runs)
    return finest.trace, est


def solve_1d(prob: WaveProblem, levels: int = 1) -> tuple[FunctionalTrace, BlowupEstimate]:
    """Leapfrog on the line; ``levels`` > 1 adds dx-halving refinement."""
    if prob.n != 1:
        raise DomainError(f"solve_1d needs n = 1, got n={prob.n}")
    return _estimate(prob, levels)


def solve_radial(prob: WaveProblem, levels: int = 1) -> tuple[FunctionalTrace, BlowupEstimate]:
    """Radially symmetric leapfrog with the regularised origin row n·u_rr."""
    if prob.n < 2:
        raise DomainError(f"solve_radial needs n >= 2, got n={prob.n}")
    return _estimate(prob, levels)


def estimate_lifespan(prob: WaveProblem, levels: int = 3) -> tuple[FunctionalTrace, BlowupEstimate]:
    return solve_1d(prob, levels) if prob.n == 1 else solve_radial(prob, levels)

