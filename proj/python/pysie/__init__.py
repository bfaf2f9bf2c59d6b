"""Forced systems with impulse effects: simulation, periodic orbits and ISS experiments."""

import json

from ._core import (
    Model,
    Orbit,
    SieError,
    StabilityReport,
    build_orbit,
    catalog,
    certify_prop1,
    find_fixed_point,
    format_number,
    linearize,
    run_cli,
)
from ._core import _run_sweep as _core_sweep
from ._core import _simulate as _core_simulate

__all__ = [
    "Model",
    "Orbit",
    "SieError",
    "StabilityReport",
    "build_orbit",
    "catalog",
    "certify_prop1",
    "find_fixed_point",
    "format_number",
    "linearize",
    "run_cli",
    "run_sweep",
    "simulate",
    "solve",
]


def _spec(obj):
    if obj is None or isinstance(obj, str):
        return obj
    return json.dumps(obj)


def simulate(model, x0, t_final, u=None, v=None, sample_dt=None):
    """Hybrid trajectory from x0. `u` and `v` are input specs in the config-file format."""
    return _core_simulate(model, x0, t_final, _spec(u), _spec(v), sample_dt)


def solve(model, guess=None):
    """Fixed point, linearization and orbit in one call."""
    report = linearize(model, find_fixed_point(model, guess))
    return report, build_orbit(model, report)


def run_sweep(model, orbit, report, *, offsets=(1e-2,), u_amps=(0.0,), v_amps=(0.0,), paired=False,
              trials=10, horizon_periods=40.0, cutoff=0.5, seed=0, u=None, v=None, threads=1,
              F_max=10.0, zero_floor=1e-6):
    return _core_sweep(model, orbit, report, list(offsets), list(u_amps), list(v_amps), paired, trials,
                       horizon_periods, cutoff, seed, _spec(u), _spec(v), threads, F_max, zero_floor)
