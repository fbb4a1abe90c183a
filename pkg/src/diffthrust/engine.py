"""Second-order, time-delayed turbofan thrust response."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lti import StateSpaceModel


@dataclass(frozen=True)
class EngineParams:
    """Engine lag constants.

    ``tau`` is the inverse bandwidth (s), ``delay`` the transport delay (s),
    thrusts in lbf and ``rate_limit`` in lbf/s. ``saturation`` bounds the
    differential thrust command.
    """

    tau: float = 1.25
    zeta: float = 1.0
    delay: float = 0.4
    T_max: float = 46500.0
    T_trim: float = 3221.0
    rate_limit: float = 12726.0
    saturation: float = 43729.0

    def __post_init__(self):
        if self.tau <= 0 or self.zeta <= 0:
            raise ValueError("tau and zeta must be positive")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if not (0 <= self.T_trim < self.T_max):
            raise ValueError("need 0 <= T_trim < T_max")
        if self.rate_limit <= 0 or self.saturation <= 0:
            raise ValueError("limits must be positive")

    @property
    def bandwidth(self) -> float:
        return 1.0 / self.tau


@dataclass(frozen=True)
class ThrustTrace:
    t: np.ndarray
    commanded: np.ndarray
    delivered: np.ndarray

    def __post_init__(self):
        if not (len(self.t) == len(self.commanded) == len(self.delivered)):
            raise ValueError("trace arrays must have equal length")


def engine_state_space(p: EngineParams) -> StateSpaceModel:
    """Unit-DC-gain second-order lag from commanded to delivered thrust.

    The transport delay is not part of this model; see :func:`pade_delay`.
    """
    if p.tau == 0:
        raise ZeroDivisionError("tau must be nonzero")
    w = p.bandwidth
    A = np.array([[0.0, 1.0], [-w * w, -2.0 * p.zeta * w]])
    B = np.array([[0.0], [w * w]])
    C = np.array([[1.0, 0.0]])
    return StateSpaceModel(A, B, C, np.zeros((1, 1)), ("thrust", "thrust_rate"), ("command",), ("thrust",))


def delay_samples(delay: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return int(round(delay / dt))


def pade_delay(delay: float, order: int = 2) -> StateSpaceModel:
    """Rational approximation of ``exp(-s*delay)`` (orders 1 or 2)."""
    if delay == 0:
        return StateSpaceModel.static(np.eye(1))
    T = delay
    if order == 1:
        num, den = [-T / 2, 1.0], [T / 2, 1.0]
    elif order == 2:
        num, den = [T * T / 12, -T / 2, 1.0], [T * T / 12, T / 2, 1.0]
    else:
        raise ValueError("order must be 1 or 2")
    from .lti import TransferMatrix

    return TransferMatrix.diagonal([(num, den)]).to_state_space()


def simulate_engine(p: EngineParams, command: np.ndarray, dt: float, initial: float = 0.0,
                    saturation: float = math.inf, rate_limit: float = math.inf) -> np.ndarray:
    """Delivered thrust for a sampled command, starting in equilibrium at ``initial``.

    The command is clipped to ``+-saturation``, delayed by ``round(delay/dt)``
    samples, filtered by the lag and finally slope-limited.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    ss = engine_state_space(p)
    cmd = np.ascontiguousarray(command, dtype=float)
    x0 = np.array([initial, 0.0])
    return _kernels.engine_kernel(np.ascontiguousarray(ss.A), np.ascontiguousarray(ss.B),
                                  np.ascontiguousarray(ss.C), cmd, delay_samples(p.delay, dt), dt, x0,
                                  float(initial), float(saturation), float(rate_limit), float(initial))


def thrust_step(p: EngineParams, command: float, duration: float, dt: float = 0.01,
                rate_limited: bool = False) -> ThrustTrace:
    """Response to a step in commanded thrust applied at t = 0 from trim."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (0 <= command <= p.T_max):
        raise ValueError(f"command {command} outside [0, {p.T_max}]")
    nt = int(round(duration / dt)) + 1
    t = np.arange(nt) * dt
    cmd = np.full(nt, float(command))
    rate = p.rate_limit if rate_limited else math.inf
    delivered = simulate_engine(p, cmd, dt, initial=p.T_trim, rate_limit=rate)
    return ThrustTrace(t, cmd, delivered)


def peak_slope(trace: ThrustTrace) -> float:
    return float(np.max(np.abs(np.diff(trace.delivered))) / (trace.t[1] - trace.t[0]))
