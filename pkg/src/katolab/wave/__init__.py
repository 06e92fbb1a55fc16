"""Finite-difference simulation of u_tt - Δu = |u|^p and checks on F(t) = ∫u dx."""
from .problem import Caps, GridSpec, WaveProblem, ball_volume, bump_integral, sphere_area
from .solver import (
    BlowupEstimate,
    FunctionalTrace,
    Snapshot,
    WaveRun,
    default_cfl,
    estimate_lifespan,
    radial_cfl_limit,
    richardson,
    simulate,
    solve_1d,
    solve_radial,
)

__all__ = [
    "BlowupEstimate", "Caps", "FunctionalTrace", "GridSpec", "Snapshot", "WaveProblem", "WaveRun",
    "ball_volume", "bump_integral", "default_cfl", "estimate_lifespan", "radial_cfl_limit",
    "richardson", "simulate", "solve_1d", "solve_radial", "sphere_area",
]
