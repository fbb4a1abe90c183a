"""Aircraft configuration, tail-loss damage rules and the lateral plant.

All plant matrices use radians and radians per second. The differential
thrust input is expressed in rudder-equivalent radians; the conversion to
pounds of thrust lives in :mod:`diffthrust.thrustmap`.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .lti import StateSpaceModel

STATE_LABELS = ("phi", "p", "beta", "r")
INPUT_LABELS = ("aileron", "diff_thrust")


@dataclass(frozen=True)
class FlightCondition:
    """Trimmed flight condition (ft, slug/ft^3, ft/s)."""

    altitude: float
    rho: float
    airspeed: float
    mach: float
    g: float = 32.174

    def __post_init__(self):
        if not (self.rho > 0 and self.airspeed > 0):
            raise ValueError("rho and airspeed must be positive")
        if self.g <= 0:
            raise ValueError("g must be positive")

    @property
    def qbar(self) -> float:
        return 0.5 * self.rho * self.airspeed ** 2


@dataclass(frozen=True)
class TailGeometry:
    area: float
    arm: float
    height: float
    volume_ratio: float
    efficiency: float
    fin_efficiency: float
    sidewash_gradient: float
    lift_slope: float


@dataclass(frozen=True)
class GeometryConfig:
    S: float
    b: float
    cbar: float
    y_e: float
    tail: TailGeometry | None = None

    def __post_init__(self):
        if min(self.S, self.b, self.y_e) <= 0:
            raise ValueError("wing area, span and engine arm must be positive")


@dataclass(frozen=True)
class InertiaConfig:
    """Weight (lbf), mass (slug) and inertias (slug ft^2)."""

    W: float
    m: float
    Ixx: float
    Iyy: float
    Izz: float
    Ixz: float = 0.0

    def __post_init__(self):
        if min(self.W, self.m, self.Ixx, self.Iyy, self.Izz) <= 0:
            raise ValueError("weight, mass and principal inertias must be positive")
        if self.determinant <= 0:
            raise ValueError("Ixx*Izz - Ixz^2 must be positive")

    @property
    def determinant(self) -> float:
        return self.Ixx * self.Izz - self.Ixz ** 2


@dataclass(frozen=True)
class DerivativeSet:
    """Dimensionless lateral stability and control derivatives (per rad)."""

    Cl_beta: float
    Cl_p: float
    Cl_r: float
    Cl_da: float
    Cl_dr: float
    Cn_beta: float
    Cn_p: float
    Cn_r: float
    Cn_da: float
    Cn_dr: float
    Cy_beta: float
    Cy_p: float = 0.0
    Cy_r: float = 0.0
    Cy_da: float = 0.0
    Cy_dr: float = 0.0
    CL_trim: float = 0.0

    def __post_init__(self):
        vals = dataclasses.astuple(self)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("derivatives must be finite")
        if self.CL_trim < 0:
            raise ValueError("trim lift coefficient must be non-negative")


@dataclass(frozen=True)
class TrimState:
    theta: float = 0.0
    gamma: float = 0.0
    beta: float = 0.0
    engine_thrust: float = 3221.0

    def __post_init__(self):
        if max(abs(self.theta), abs(self.gamma), abs(self.beta)) >= math.pi / 2:
            raise ValueError("trim angles must lie inside (-pi/2, pi/2)")


@dataclass(frozen=True)
class DimensionalDerivatives:
    """Dimensional derivatives.

    Rolling/yawing terms are angular accelerations per unit state (1/s^2 or
    1/s); side-force terms are accelerations (ft/s^2 per rad, ft/s per
    rad/s). ``L_dT``/``N_dT`` are per rudder-equivalent radian.
    """

    L_beta: float
    L_p: float
    L_r: float
    L_da: float
    N_beta: float
    N_p: float
    N_r: float
    N_da: float
    N_dT: float
    Y_beta: float
    Y_p: float
    Y_r: float
    Y_da: float
    L_dT: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in dataclasses.astuple(self)):
            raise ValueError("dimensional derivatives must be finite")


@dataclass(frozen=True)
class AircraftConfig:
    flight: FlightCondition
    geometry: GeometryConfig
    nominal_inertia: InertiaConfig
    damaged_inertia: InertiaConfig
    derivatives: DerivativeSet
    trim: TrimState = field(default_factory=TrimState)


def trim_lift_coefficient(cond: FlightCondition, geom: GeometryConfig, inertia: InertiaConfig) -> float:
    qS = cond.qbar * geom.S
    if qS == 0:
        raise ZeroDivisionError("qbar * S is zero")
    return inertia.W / qS


def damage_derivatives(nominal: DerivativeSet, cond: FlightCondition, geom: GeometryConfig,
                       inertia_damaged: InertiaConfig) -> DerivativeSet:
    """Strip the fin contributions from a nominal derivative set.

    Side force and yawing moment due to sideslip and yaw rate vanish with
    the fin. Roll due to yaw rate falls back to the wing-only estimate
    ``CL/4`` at the damaged trim lift coefficient. Rudder terms are kept so
    the thrust mapping can still reference them.
    """
    CL = trim_lift_coefficient(cond, geom, inertia_damaged)
    return dataclasses.replace(nominal, Cy_beta=0.0, Cy_r=0.0, Cn_r=0.0, Cn_beta=0.0,
                               Cl_r=CL / 4.0, CL_trim=CL)


def dimensionalize(derivs: DerivativeSet, cond: FlightCondition, geom: GeometryConfig,
                   inertia: InertiaConfig) -> DimensionalDerivatives:
    """Scale coefficients into body-axis accelerations.

    Product-of-inertia coupling (primed derivatives) is ignored. The thrust
    column is the outboard-engine moment arm over the inertia determinant,
    multiplied by the rudder-to-thrust factor so that one unit of input
    yaws the aircraft like one radian of rudder would have.
    """
    q, S, b, V = cond.qbar, geom.S, geom.b, cond.airspeed
    Ixx, Izz, m = inertia.Ixx, inertia.Izz, inertia.m
    if min(Ixx, Izz, m) <= 0:
        raise ZeroDivisionError("zero inertia or mass")
    qSb = q * S * b
    rate = b / (2.0 * V)
    k_map = abs(qSb * derivs.Cn_dr) / geom.y_e
    det = inertia.determinant
    return DimensionalDerivatives(
        L_beta=qSb * derivs.Cl_beta / Ixx,
        L_p=qSb * rate * derivs.Cl_p / Ixx,
        L_r=qSb * rate * derivs.Cl_r / Ixx,
        L_da=qSb * derivs.Cl_da / Ixx,
        N_beta=qSb * derivs.Cn_beta / Izz,
        N_p=qSb * rate * derivs.Cn_p / Izz,
        N_r=qSb * rate * derivs.Cn_r / Izz,
        N_da=qSb * derivs.Cn_da / Izz,
        N_dT=inertia.Ixx * geom.y_e / det * k_map,
        Y_beta=q * S * derivs.Cy_beta / m,
        Y_p=q * S * rate * derivs.Cy_p / m,
        Y_r=q * S * rate * derivs.Cy_r / m,
        Y_da=q * S * derivs.Cy_da / m,
        L_dT=inertia.Ixz * geom.y_e / det * k_map,
    )


def _apply_overrides(A, B, overrides):
    for key, value in (overrides or {}).items():
        name, row, col = key
        target = {"A": A, "B": B}[name.upper()]
        target[row - 1, col - 1] = value


def assemble_plant(dim: DimensionalDerivatives, cond: FlightCondition, trim: TrimState | None = None,
                   inertia: InertiaConfig | None = None, geom: GeometryConfig | None = None,
                   overrides: dict | None = None, round_decimals: int | None = None) -> StateSpaceModel:
    """Lateral/directional plant with states (phi, p, beta, r).

    Parameters
    ----------
    dim : DimensionalDerivatives
    cond : FlightCondition
    trim : TrimState, optional
        Level cruise when omitted.
    inertia, geom : optional
        Only used to validate the inertia determinant.
    overrides : dict, optional
        ``{("A", row, col): value}`` with 1-based indices, applied last.
    round_decimals : int, optional
        Round the computed entries before overrides are applied.
    """
    trim = trim or TrimState()
    if inertia is not None and inertia.determinant <= 0:
        raise ValueError("singular inertia determinant")
    V, g = cond.airspeed, cond.g
    A = np.array([
        [0.0, 1.0, 0.0, trim.theta],
        [0.0, dim.L_p, dim.L_beta, dim.L_r],
        [g / V, dim.Y_p / V, (dim.Y_beta + g * trim.gamma) / V, dim.Y_r / V - 1.0],
        [0.0, dim.N_p, dim.N_beta, dim.N_r],
    ])
    B = np.array([
        [0.0, 0.0],
        [dim.L_da, dim.L_dT],
        [dim.Y_da / V, 0.0],
        [dim.N_da, dim.N_dT],
    ])
    if round_decimals is not None:
        A = np.round(A, round_decimals) + 0.0
        B = np.round(B, round_decimals) + 0.0
    _apply_overrides(A, B, overrides)
    return StateSpaceModel(A, B, np.eye(4), np.zeros((4, 2)), STATE_LABELS, INPUT_LABELS, STATE_LABELS)


GOLDEN_A = (
    (0.0, 1.0, 0.0, 0.0),
    (0.0, -0.8566, -2.7681, 0.1008),
    (0.0478, 0.0, 0.0, -1.0),
    (0.0, -0.0248, 0.0, 0.0),
)
GOLDEN_B = (
    (0.0, 0.0),
    (0.2249, 0.0142),
    (0.0, 0.0),
    (0.0118, 0.6784),
)


def golden_plant() -> StateSpaceModel:
    """Published damaged-aircraft matrices, used as the reference plant."""
    return StateSpaceModel(np.array(GOLDEN_A), np.array(GOLDEN_B), np.eye(4), np.zeros((4, 2)),
                           STATE_LABELS, INPUT_LABELS, STATE_LABELS)


@dataclass(frozen=True)
class EntryDeviation:
    matrix: str
    row: int
    col: int
    derived: float
    reference: float

    @property
    def relative(self) -> float:
        if self.reference == 0:
            return math.inf if self.derived != 0 else 0.0
        return abs(self.derived - self.reference) / abs(self.reference)


def deviation_report(plant: StateSpaceModel, reference: StateSpaceModel | None = None,
                     atol: float = 5e-5) -> list[EntryDeviation]:
    """Entries of ``plant.A``/``plant.B`` that differ from ``reference`` (1-based)."""
    reference = reference or golden_plant()
    out = []
    for name in ("A", "B"):
        M, R = getattr(plant, name), getattr(reference, name)
        for (i, j), v in np.ndenumerate(M):
            if abs(v - R[i, j]) > atol:
                out.append(EntryDeviation(name, i + 1, j + 1, float(v), float(R[i, j])))
    return out


def build_plant(aircraft: AircraftConfig, overrides: dict | None = None,
                round_decimals: int | None = None) -> StateSpaceModel:
    """Damage rules, dimensionalization and assembly in one call."""
    d = damage_derivatives(aircraft.derivatives, aircraft.flight, aircraft.geometry, aircraft.damaged_inertia)
    dim = dimensionalize(d, aircraft.flight, aircraft.geometry, aircraft.damaged_inertia)
    return assemble_plant(dim, aircraft.flight, aircraft.trim, aircraft.damaged_inertia, aircraft.geometry,
                          overrides=overrides, round_decimals=round_decimals)
