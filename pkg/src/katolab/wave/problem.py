"""Problem description for u_tt - Δu = |u|^p with compactly supported data."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import gamma as gamma_fn

from ..errors import DomainError

PROFILES = ("zero", "bump")


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^(n-1); 2 for n = 1."""
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def ball_volume(n: int) -> float:
    return sphere_area(n) / n


def bump_integral(n: int, R: float) -> float:
    """Exact integral over R^n of (1 - (|x|/R)^2)^4 on |x| <= R."""
    return sphere_area(n) * R**n * beta_fn(n / 2.0, 5.0) / 2.0


def profile_values(name: str, r: np.ndarray, n: int, R: float) -> np.ndarray:
    """Radial profile on the grid, normalised to unit integral over R^n."""
    if name == "zero":
        return np.zeros_like(r)
    if name == "bump":
        s = np.abs(r) / R
        return np.where(s < 1.0, (1.0 - s * s) ** 4, 0.0) / bump_integral(n, R)
    raise DomainError(f"unknown profile {name!r}; choose from {PROFILES}")


def profile_integral(name: str) -> float:
    return 0.0 if name == "zero" else 1.0


@dataclass(frozen=True)
class GridSpec:
    dx: float = 0.1
    # None picks 0.9 (1D) or 0.9 x the stencil's stability limit (radial)
    cfl: float | None = None
    # None sizes the domain so the boundary is never reached before t_horizon
    L: float | None = None


@dataclass(frozen=True)
class Caps:
    U_max: float = 1e6
    t_horizon: float = 100.0


@dataclass(frozen=True)
class WaveProblem:
    n: int
    p: float
    eps: float
    f_profile: str = "zero"
    g_profile: str = "bump"
    R: float = 1.0
    grid: GridSpec = field(default_factory=GridSpec)
    caps: Caps = field(default_factory=Caps)
    nonlinear: bool = True
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not self.p > 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not self.R > 0:
            raise DomainError(f"R must be positive, got {self.R}")
        for prof in (self.f_profile, self.g_profile):
            if prof not in PROFILES:
                raise DomainError(f"unknown profile {prof!r}; choose from {PROFILES}")
        if not self.grid.dx > 0:
            raise DomainError(f"dx must be positive, got {self.grid.dx}")
        if self.grid.cfl is not None and not self.grid.cfl > 0:
            raise DomainError(f"cfl must be positive, got {self.grid.cfl}")
        if not (self.caps.U_max > 0 and self.caps.t_horizon > 0):
            raise DomainError("U_max and t_horizon must be positive")
        if self.grid.L is not None and self.grid.L < self.caps.t_horizon + self.R:
            raise DomainError(
                f"domain L={self.grid.L} must be at least t_horizon + R "
                f"= {self.caps.t_horizon + self.R}"
            )
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))

    @property
    def nonneg_data(self) -> bool:
        # every named profile is pointwise nonnegative
        return True

    @property
    def has_data(self) -> bool:
        return self.f_profile != "zero" or self.g_profile != "zero"

    def with_(self, **kw) -> "WaveProblem":
        grid_kw = {k: kw.pop(k) for k in ("dx", "cfl", "L") if k in kw}
        caps_kw = {k: kw.pop(k) for k in ("U_max", "t_horizon") if k in kw}
        prob = replace(self, **kw)
        if grid_kw:
            prob = replace(prob, grid=replace(prob.grid, **grid_kw))
        if caps_kw:
            prob = replace(prob, caps=replace(prob.caps, **caps_kw))
        return prob

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snapshot_times"] = list(self.snapshot_times)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WaveProblem":
        d = dict(d)
        d["grid"] = GridSpec(**d.get("grid", {}))
        d["caps"] = Caps(**d.get("caps", {}))
        d["snapshot_times"] = tuple(d.get("snapshot_times", ()))
        return cls(**d)
