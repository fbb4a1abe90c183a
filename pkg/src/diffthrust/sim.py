"""Open- and closed-loop time simulation with actuator and engine limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .engine import delay_samples, engine_state_space
from .lti import LTIError, StateSpaceModel, UnstableSystemError, feedback, series
from .synthesis import SynthesisResult
from .thrustmap import MappingParams

DEG = math.pi / 180.0
CSV_COLUMNS = ("t", "phi_deg", "p_dps", "beta_deg", "r_dps", "da_cmd_deg", "da_deg", "dT_cmd_lbf", "dT_lbf")


class SimulationDivergedError(LTIError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Time grid, pilot steps (deg) and limits (deg, deg/s).

    ``pilot_aileron_limit_deg`` clips the aileron command entering the loop;
    ``aileron_limit_deg`` and ``aileron_rate_limit_dps`` act on the surface.
    ``guard`` is the state magnitude (rad, rad/s) treated as divergence.
    """

    dt: float = 0.01
    duration: float = 40.0
    aileron_step_deg: float = 1.0
    rudder_step_deg: float = 1.0
    step_time: float = 0.0
    aileron_limit_deg: float = 26.0
    pilot_aileron_limit_deg: float = 26.0
    aileron_rate_limit_dps: float = math.inf
    apply_limits: bool = True
    engine_lag: bool = True
    guard: float = 1.0
    settle_band: float = 0.02
    settle_window: float = 1.0
    integrator: str = "rk4"

    def __post_init__(self):
        if self.dt <= 0 or self.duration < self.dt:
            raise ValueError("need dt > 0 and duration >= dt")
        if min(self.aileron_limit_deg, self.pilot_aileron_limit_deg, self.aileron_rate_limit_dps) <= 0:
            raise ValueError("limits must be positive")
        if self.integrator != "rk4":
            raise ValueError(f"unsupported integrator {self.integrator!r}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


@dataclass(frozen=True)
class SimTrace:
    t: np.ndarray
    phi_deg: np.ndarray
    p_dps: np.ndarray
    beta_deg: np.ndarray
    r_dps: np.ndarray
    da_cmd_deg: np.ndarray
    da_deg: np.ndarray
    dT_cmd_lbf: np.ndarray
    dT_lbf: np.ndarray
    settling_times: tuple = ()
    diverged: bool = False
    pilot_dT_lbf: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.t)
        for name in CSV_COLUMNS[1:]:
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from time grid")

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.phi_deg, self.p_dps, self.beta_deg, self.r_dps])

    @property
    def settling_time(self) -> float:
        if self.diverged or not self.settling_times:
            return math.inf
        return max(self.settling_times)

    @property
    def settled(self) -> bool:
        return math.isfinite(self.settling_time)

    def table(self) -> np.ndarray:
        return np.column_stack([getattr(self, c) for c in CSV_COLUMNS])


def settling_metrics(trace, band_fraction: float = 0.02, window: float = 1.0, dt: float | None = None) -> tuple:
    """Per-column time after which the signal stays inside the band.

    The final value is the mean over the last ``window`` seconds and the
    band is ``band_fraction * max(|final|, peak)``. Unsettled columns
    (including a diverged trace) report ``inf``.
    """
    if isinstance(trace, SimTrace):
        if trace.diverged:
            return (math.inf,) * 4
        y, t = trace.states, trace.t
    else:
        y = np.asarray(trace, dtype=float)
        y = y.reshape(-1, 1) if y.ndim == 1 else y
        if dt is None:
            raise ValueError("dt is required for raw arrays")
        t = np.arange(y.shape[0]) * dt
    if y.shape[0] == 0:
        raise ValueError("empty trace")
    step = t[1] - t[0] if len(t) > 1 else 1.0
    if not np.all(np.isfinite(y)):
        return (math.inf,) * y.shape[1]
    w = max(1, int(round(window / step)))
    idx = _kernels.settling_kernel(np.ascontiguousarray(y), float(band_fraction), w)
    return tuple(float(t[i]) if i >= 0 else math.inf for i in idx)


def _step_inputs(config: SimConfig) -> np.ndarray:
    t = config.time()
    on = (t >= config.step_time - 1e-12).astype(float)
    return np.column_stack([on * config.aileron_step_deg * DEG, on * config.rudder_step_deg * DEG])


def simulate_open_loop(plant: StateSpaceModel, config: SimConfig | None = None,
                       mapping: MappingParams | None = None) -> SimTrace:
    """Unconstrained plant response to the configured pilot steps.

    The thrust columns are reported in lbf when ``mapping`` is given and are
    NaN otherwise.
    """
    config = config or SimConfig()
    U = _step_inputs(config)
    X = _kernels.rk4_lti_kernel(np.ascontiguousarray(plant.A), np.ascontiguousarray(plant.B),
                                np.ascontiguousarray(U), np.zeros(plant.n_states), config.dt)
    Y = X @ plant.C.T + U @ plant.D.T
    k = mapping.k_map if mapping is not None else math.nan
    dT = U[:, 1] * k
    trace = SimTrace(config.time(), Y[:, 0] / DEG, Y[:, 1] / DEG, Y[:, 2] / DEG, Y[:, 3] / DEG,
                     U[:, 0] / DEG, U[:, 0] / DEG, dT, dT)
    return _with_settling(trace, config)


def _with_settling(trace: SimTrace, config: SimConfig) -> SimTrace:
    st = settling_metrics(trace, config.settle_band, config.settle_window)
    return SimTrace(**{**trace.__dict__, "settling_times": st})


def _pad(sys: StateSpaceModel | None, n_in: int, n_out: int):
    """A/B/C/D arrays with at least one (decoupled, stable) state for the kernel."""
    if sys is None:
        sys = StateSpaceModel.static(np.eye(n_out, n_in))
    if sys.n_states:
        return (sys.A, sys.B, sys.C, sys.D)
    return (-np.ones((1, 1)), np.zeros((1, n_in)), np.zeros((n_out, 1)), sys.D)


@dataclass(frozen=True)
class LoopParts:
    """Feedback path (``fb``, output-to-summing-junction) and pre-compensator."""

    fb: StateSpaceModel
    pre: StateSpaceModel | None
    full: StateSpaceModel


def controller_parts(K) -> LoopParts:
    """Split a design into ``Ks W2`` in the feedback path and ``W1`` after the junction.

    A bare StateSpaceModel is used as the whole feedback path.
    """
    if isinstance(K, SynthesisResult):
        if K.weights is None:
            return LoopParts(K.Ks, None, K.Ks)
        W1, W2 = K.weights
        return LoopParts(series(W2, K.Ks), W1, K.K if K.K is not None else series(series(W2, K.Ks), W1))
    return LoopParts(K, None, K)


def closed_loop_arrays(plant: StateSpaceModel, K, prefilter, mapping: MappingParams, config: SimConfig,
                       perturbation=None):
    """Assemble contiguous kernel arguments. Returned as a dict so campaigns can reuse it."""
    parts = controller_parts(K)
    if np.any(parts.fb.D != 0):
        raise ValueError("feedback path must be strictly proper")
    Dp = plant.D + (0.0 if perturbation is None else np.asarray(perturbation, dtype=float))
    Ac, Bc, Cc, _ = _pad(parts.fb, plant.n_outputs, 2)
    Aw, Bw, Cw, Dw = _pad(parts.pre, 2, 2)
    eng = engine_state_space(mapping.engine)
    pilot = _step_inputs(config) @ np.asarray(prefilter, dtype=float).T
    inf = math.inf
    if config.apply_limits:
        limits = [config.pilot_aileron_limit_deg * DEG, config.aileron_limit_deg * DEG,
                  config.aileron_rate_limit_dps * DEG, mapping.saturation, mapping.rate_limit]
    else:
        limits = [inf] * 5
    c = np.ascontiguousarray
    return dict(
        Ap=c(plant.A), Bp=c(plant.B), Cp=c(plant.C), Dp=c(Dp),
        Ac=c(Ac), Bc=c(Bc), Cc=c(-Cc), Aw=c(Aw), Bw=c(Bw), Cw=c(Cw), Dw=c(Dw),
        Ae=c(eng.A), Be=c(eng.B), Ce=c(eng.C),
        pilot=c(pilot), limits=np.array(limits, dtype=float), kmap=float(mapping.k_map),
        delay=delay_samples(mapping.engine.delay, config.dt) if config.engine_lag else 0,
        dt=float(config.dt), guard=float(config.guard), use_engine=bool(config.engine_lag),
    )


def run_loop(args: dict, config: SimConfig) -> SimTrace:
    sig, status = _kernels.closed_loop_kernel(**args)
    n = sig.shape[0]
    t = config.time()[:n]
    trace = SimTrace(t, sig[:, 0] / DEG, sig[:, 1] / DEG, sig[:, 2] / DEG, sig[:, 3] / DEG,
                     sig[:, 4] / DEG, sig[:, 5] / DEG, sig[:, 6], sig[:, 7], diverged=status >= 0,
                     pilot_dT_lbf=sig[:, 8])
    return _with_settling(trace, config)


def check_stabilizing(plant: StateSpaceModel, K) -> None:
    full = controller_parts(K).full
    cl = feedback(series(full, plant), sign=-1.0)
    if not cl.is_stable():
        raise UnstableSystemError(
            f"controller does not stabilize the plant (spectral abscissa {cl.spectral_abscissa():.3g})")


def simulate_closed_loop(plant: StateSpaceModel, K, prefilter, mapping: MappingParams,
                         config: SimConfig | None = None, perturbation=None,
                         raise_on_divergence: bool = True, check: bool = True) -> SimTrace:
    """Constrained closed-loop response to pilot steps.

    Parameters
    ----------
    plant : StateSpaceModel
        Four-output lateral plant; thrust input in rudder-equivalent rad.
    K : SynthesisResult or StateSpaceModel
        A loop-shaping result is wired with ``Ks W2`` on the measurements and
        ``W1`` after the summing junction. A bare model is the whole
        negative-feedback controller.
    prefilter : array (2, 2)
        Static gain from pilot (aileron, rudder) to junction references.
    mapping : MappingParams
        Thrust conversion, saturation, slope limit and engine model.
    perturbation : array (4, 2), optional
        Constant additive block on the plant feedthrough.
    """
    config = config or SimConfig()
    if check:
        check_stabilizing(plant, K)
    args = closed_loop_arrays(plant, K, prefilter, mapping, config, perturbation)
    trace = run_loop(args, config)
    if trace.diverged and raise_on_divergence:
        raise SimulationDivergedError(
            f"state magnitude exceeded guard {config.guard} at t = {trace.t[-1]:.2f} s")
    return trace


def steady_value(x: np.ndarray, dt: float, window: float = 1.0) -> float:
    w = max(1, int(round(window / dt)))
    return float(np.mean(x[-w:]))
