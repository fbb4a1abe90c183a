"""TOML configuration loading and validation.

A user file is merged over the bundled defaults, so it only needs the
sections it changes. Unknown keys are rejected to catch typos.
"""
from __future__ import annotations

import copy
import hashlib
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .airframe import (
    AircraftConfig,
    DerivativeSet,
    FlightCondition,
    GeometryConfig,
    InertiaConfig,
    TrimState,
    build_plant,
    golden_plant,
)
from .engine import EngineParams
from .lti import StateSpaceModel, TransferMatrix
from .robustness import UncertaintySpec
from .sim import SimConfig
from .synthesis import LoopShapingWeights
from .thrustmap import MappingParams, conversion_factor


class ConfigError(ValueError):
    pass


def default_config_bytes() -> bytes:
    return resources.files("diffthrust").joinpath("default_config.toml").read_bytes()


def _merge(base: dict, user: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in user.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a table")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class ToolConfig:
    raw: dict
    digest: str
    aircraft: AircraftConfig
    plant_source: str
    overrides: dict
    round_decimals: int | None
    engine: EngineParams
    saturation_envelope: float
    weights: LoopShapingWeights
    gamma_rel_tol: float
    sim: SimConfig
    uncertainty: UncertaintySpec
    monte_duration: float
    workers: int

    @property
    def k_map(self) -> float:
        a = self.aircraft
        return conversion_factor(a.flight, a.geometry, a.derivatives.Cn_dr)

    @property
    def mapping(self) -> MappingParams:
        return MappingParams(self.k_map, self.engine.saturation, self.engine.rate_limit, self.engine)

    def plant(self) -> StateSpaceModel:
        if self.plant_source == "golden":
            return golden_plant()
        return build_plant(self.aircraft, self.overrides, self.round_decimals)

    def assembled_plant(self) -> StateSpaceModel:
        return build_plant(self.aircraft, self.overrides, self.round_decimals)

    def section(self, name: str) -> dict:
        return self.raw[name]


def _float(section: dict, key: str, where: str) -> float:
    try:
        v = float(section[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"'{where}.{key}' must be a number") from exc
    if math.isnan(v):
        raise ConfigError(f"'{where}.{key}' is NaN")
    return v


def _weights(spec, where: str) -> TransferMatrix:
    try:
        channels = [(list(map(float, num)), list(map(float, den))) for num, den in spec]
        return TransferMatrix.diagonal(channels)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{where}' must be a list of [numerator, denominator] pairs: {exc}") from exc


def _build(raw: dict, digest: str) -> ToolConfig:
    try:
        f = raw["flight"]
        flight = FlightCondition(_float(f, "altitude_ft", "flight"), _float(f, "rho", "flight"),
                                 _float(f, "airspeed", "flight"), _float(f, "mach", "flight"),
                                 _float(f, "g", "flight"))
        g = raw["geometry"]
        geometry = GeometryConfig(*(_float(g, k, "geometry") for k in ("S", "b", "cbar", "y_e")))
        inertia = {}
        for name in ("nominal", "damaged"):
            sec = raw["inertia"][name]
            inertia[name] = InertiaConfig(*(_float(sec, k, f"inertia.{name}")
                                            for k in ("W", "m", "Ixx", "Iyy", "Izz", "Ixz")))
        d = raw["derivatives"]
        derivs = DerivativeSet(**{k: _float(d, k, "derivatives") for k in d})
        t = raw["trim"]
        trim = TrimState(**{k: _float(t, k, "trim") for k in t})
        aircraft = AircraftConfig(flight, geometry, inertia["nominal"], inertia["damaged"], derivs, trim)

        p = raw["plant"]
        source = p.get("source", "golden")
        if source not in ("golden", "assembled"):
            raise ConfigError("'plant.source' must be 'golden' or 'assembled'")
        overrides = {}
        for item in p.get("overrides", []):
            key = (str(item["matrix"]).upper(), int(item["row"]), int(item["col"]))
            if key[0] not in ("A", "B") or not (1 <= key[1] <= 4) or not (1 <= key[2] <= (4 if key[0] == "A" else 2)):
                raise ConfigError(f"override {key} out of range")
            overrides[key] = float(item["value"])
        rd = p.get("round_decimals")

        e = raw["engine"]
        engine = EngineParams(**{k: _float(e, k, "engine") for k in
                                 ("tau", "zeta", "delay", "T_max", "T_trim", "rate_limit", "saturation")})
        w = raw["weights"]
        weights = LoopShapingWeights(_weights(w["W1"], "weights.W1"), _weights(w["W2"], "weights.W2"))

        s = raw["sim"]
        sim = SimConfig(**{k: _float(s, k, "sim") for k in s})
        mc = raw["monte_carlo"]
        unc = UncertaintySpec(level=_float(mc, "level", "monte_carlo"), seed=int(mc["seed"]),
                              count=int(mc["runs"]), omega_lo=_float(mc, "omega_lo", "monte_carlo"),
                              omega_hi=_float(mc, "omega_hi", "monte_carlo"), n_grid=int(mc["n_grid"]))
        return ToolConfig(
            raw=raw, digest=digest, aircraft=aircraft, plant_source=source, overrides=overrides,
            round_decimals=None if rd is None else int(rd), engine=engine,
            saturation_envelope=_float(e, "saturation_envelope", "engine"), weights=weights,
            gamma_rel_tol=_float(raw["synthesis"], "gamma_rel_tol", "synthesis"), sim=sim,
            uncertainty=unc, monte_duration=_float(mc, "duration", "monte_carlo"),
            workers=int(mc.get("workers", 1)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def parse_config(text: bytes | None = None) -> ToolConfig:
    """Parse configuration bytes (``None`` = bundled defaults)."""
    base_bytes = default_config_bytes()
    base = tomllib.loads(base_bytes.decode("utf-8"))
    if text is None:
        return _build(base, hashlib.sha256(base_bytes).hexdigest())
    try:
        user = tomllib.loads(text.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    if not user:
        raise ConfigError("configuration file is empty")
    return _build(_merge(base, user), hashlib.sha256(text).hexdigest())


def load_config(path: str | Path | None = None) -> ToolConfig:
    if path is None:
        return parse_config(None)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return parse_config(data)
