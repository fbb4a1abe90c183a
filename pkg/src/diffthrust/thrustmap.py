"""Rudder-pedal to differential-thrust mapping and its physical limits.

Positive differential thrust means engine 1 (left outboard) produces more
than engine 4, which yaws the nose right like positive rudder deflection.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .airframe import FlightCondition, GeometryConfig
from .engine import EngineParams, simulate_engine


@dataclass(frozen=True)
class MappingParams:
    k_map: float
    saturation: float = 43729.0
    rate_limit: float = 12726.0
    engine: EngineParams = field(default_factory=EngineParams)

    def __post_init__(self):
        if self.k_map <= 0:
            raise ValueError("k_map must be positive")
        if self.saturation <= 0 or self.rate_limit <= 0:
            raise ValueError("limits must be positive")


def conversion_factor(cond: FlightCondition, geom: GeometryConfig, Cn_dr: float) -> float:
    """Differential thrust (lbf) producing the yawing moment of one radian of rudder."""
    if geom.y_e == 0:
        raise ZeroDivisionError("engine moment arm is zero")
    return abs(cond.qbar * geom.S * geom.b * Cn_dr) / geom.y_e


def rudder_to_thrust(rudder, k_map: float):
    return k_map * np.asarray(rudder, dtype=float) if np.ndim(rudder) else k_map * float(rudder)


def thrust_to_equivalent_radians(thrust, k_map: float):
    if k_map <= 0:
        raise ValueError("k_map must be positive")
    return np.asarray(thrust, dtype=float) / k_map if np.ndim(thrust) else float(thrust) / k_map


def available_thrust(command, params: MappingParams, dt: float, engine_lag: bool = True) -> np.ndarray:
    """Differential thrust the engine pair can actually deliver.

    The command is clipped to the saturation, delayed and lagged by the
    engine model, then slope-limited sample by sample. With
    ``engine_lag=False`` only the clip and slope limit remain.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cmd = np.ascontiguousarray(command, dtype=float)
    if engine_lag:
        return simulate_engine(params.engine, cmd, dt, initial=0.0, saturation=params.saturation,
                               rate_limit=params.rate_limit)
    from ._kernels import rate_limit_kernel

    return rate_limit_kernel(np.clip(cmd, -params.saturation, params.saturation), params.rate_limit, dt, 0.0)


def split_engines(diff_thrust: float, trim: float, T_max: float = np.inf) -> tuple[float, float, float, float]:
    """Symmetric allocation ``T1 = trim + dT/2``, ``T4 = trim - dT/2``; inboard engines stay at trim."""
    t1 = trim + 0.5 * diff_thrust
    t4 = trim - 0.5 * diff_thrust
    for name, v in (("T1", t1), ("T4", t4)):
        if v < 0 or v > T_max:
            raise ValueError(f"{name} = {v:.1f} lbf outside engine envelope [0, {T_max}]")
    return (t1, trim, trim, t4)
