"""Seeded Monte-Carlo campaigns under full-block additive plant uncertainty."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lti import StateSpaceModel, UnstableSystemError, singular_values
from .sim import SimConfig, check_stabilizing, closed_loop_arrays, run_loop, steady_value
from .thrustmap import MappingParams

METRICS = ("settling_time", "peak_da_deg", "peak_dT_lbf", "steady_dT_lbf")


@dataclass(frozen=True)
class UncertaintySpec:
    """Perturbation level (fraction of peak plant gain) and sampling controls.

    The reference gain is the largest singular value of the plant over
    ``n_grid`` log-spaced frequencies in ``[omega_lo, omega_hi]`` rad/s.
    """

    level: float = 0.30
    structure: str = "full_block_additive"
    seed: int = 20240601
    count: int = 1000
    omega_lo: float = 3.0
    omega_hi: float = 100.0
    n_grid: int = 200

    def __post_init__(self):
        if not (0.0 <= self.level <= 1.0):
            raise ValueError("level must lie in [0, 1]")
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if self.structure != "full_block_additive":
            raise ValueError(f"unsupported uncertainty structure {self.structure!r}")
        if not (0 < self.omega_lo < self.omega_hi) or self.n_grid < 2:
            raise ValueError("invalid reference frequency grid")
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must be an unsigned 64-bit integer")


def reference_gain(plant: StateSpaceModel, spec: UncertaintySpec) -> tuple[float, float]:
    """``(omega*, sigma_max(G(j omega*)))`` on the frequency grid held by ``spec``."""
    grid = np.logspace(math.log10(spec.omega_lo), math.log10(spec.omega_hi), spec.n_grid)
    smax = singular_values(plant, grid)[:, 0]
    k = int(np.argmax(smax))
    return float(grid[k]), float(smax[k])


def run_generator(seed: int, run_index: int) -> np.random.Generator:
    """PCG64 stream for one run: the base state advanced by ``run_index`` jumps."""
    return np.random.Generator(np.random.PCG64(seed).jumped(run_index))


def sample_perturbation(spec: UncertaintySpec, run_index: int, gain: float = 1.0,
                        shape: tuple = (4, 2)) -> np.ndarray:
    """Constant additive block with ``sigma_max = level * gain * u``, ``u ~ U(0, 1]``.

    The direction is a standard normal matrix scaled to unit spectral norm.
    """
    if spec.level == 0.0:
        return np.zeros(shape)
    rng = run_generator(spec.seed, run_index)
    M = rng.standard_normal(shape)
    M /= np.linalg.norm(M, 2)
    u = 1.0 - rng.random()
    return spec.level * gain * u * M


@dataclass(frozen=True)
class RunRecord:
    index: int
    stable: bool
    settling_time: float
    peak_da_deg: float
    peak_dT_lbf: float
    steady_dT_lbf: float
    rate_limited: bool
    delta_norm: float


@dataclass(frozen=True)
class MetricStats:
    min: float
    max: float
    mean: float


@dataclass(frozen=True)
class MonteCarloReport:
    spec: UncertaintySpec
    omega_ref: float
    gain_ref: float
    runs: tuple
    stats: dict = field(default_factory=dict)

    @property
    def stable_fraction(self) -> float:
        return sum(r.stable for r in self.runs) / len(self.runs)

    @property
    def rate_limit_hits(self) -> int:
        return sum(r.rate_limited for r in self.runs)

    def to_text(self) -> str:
        """Deterministic key = value rendering."""
        s = self.spec
        lines = [
            f"level = {s.level:.6f}",
            f"structure = {s.structure}",
            f"seed = {s.seed}",
            f"runs = {len(self.runs)}",
            f"omega_ref = {self.omega_ref:.6f}",
            f"gain_ref = {self.gain_ref:.6f}",
            f"delta_bound = {s.level * self.gain_ref:.6f}",
            f"stable_fraction = {self.stable_fraction:.6f}",
            f"rate_limit_hits = {self.rate_limit_hits}",
        ]
        for name in METRICS:
            st = self.stats.get(name)
            if st is not None:
                lines += [f"{name}.min = {st.min:.6f}", f"{name}.max = {st.max:.6f}",
                          f"{name}.mean = {st.mean:.6f}"]
        for r in self.runs:
            lines.append(
                f"run.{r.index:05d} = stable={int(r.stable)} settle={r.settling_time:.2f} "
                f"peak_da={r.peak_da_deg:.6f} peak_dT={r.peak_dT_lbf:.3f} "
                f"steady_dT={r.steady_dT_lbf:.3f} rate_limited={int(r.rate_limited)} "
                f"delta={r.delta_norm:.6f}")
        return "\n".join(lines) + "\n"


def _aggregate(runs) -> dict:
    stable = [r for r in runs if r.stable]
    out = {}
    for name in METRICS:
        vals = np.array([getattr(r, name) for r in stable], dtype=float)
        if vals.size:
            out[name] = MetricStats(float(vals.min()), float(vals.max()), float(vals.mean()))
    return out


def _hit_rate(x: np.ndarray, rate: float, dt: float) -> bool:
    if x.size < 2 or not math.isfinite(rate):
        return False
    return bool(np.any(np.abs(np.diff(x)) >= rate * dt * (1.0 - 1e-9)))


def _evaluate(args: dict, config: SimConfig, rate: float, index: int, delta_norm: float) -> RunRecord:
    tr = run_loop(args, config)
    horizon = config.duration - config.settle_window
    stable = (not tr.diverged) and tr.settling_time <= horizon
    hit = _hit_rate(tr.dT_lbf, rate, config.dt) or _hit_rate(tr.pilot_dT_lbf, rate, config.dt)
    return RunRecord(
        index=index,
        stable=bool(stable),
        settling_time=float(tr.settling_time),
        peak_da_deg=float(np.max(np.abs(tr.da_deg))),
        peak_dT_lbf=float(np.max(np.abs(tr.dT_lbf))),
        steady_dT_lbf=steady_value(tr.dT_lbf, config.dt, config.settle_window),
        rate_limited=hit,
        delta_norm=delta_norm,
    )


def run_campaign(plant: StateSpaceModel, K, prefilter, mapping: MappingParams, spec: UncertaintySpec,
                 sim_config: SimConfig | None = None, workers: int = 1) -> MonteCarloReport:
    """Simulate ``spec.count`` perturbed closed loops and aggregate the outcomes.

    The nominal loop is simulated first and must settle; otherwise the
    campaign is aborted with :class:`UnstableSystemError`. Runs are
    independent; with ``workers > 1`` they execute on a thread pool (the
    compiled kernels release the GIL). Results are ordered by run index.
    """
    config = sim_config or SimConfig()
    check_stabilizing(plant, K)
    nominal = run_loop(closed_loop_arrays(plant, K, prefilter, mapping, config), config)
    if nominal.diverged or not nominal.settled:
        raise UnstableSystemError("nominal closed loop does not settle; campaign aborted")
    omega, gain = reference_gain(plant, spec)
    shape = (plant.n_outputs, plant.n_inputs)

    def one(i):
        delta = sample_perturbation(spec, i, gain, shape)
        args = closed_loop_arrays(plant, K, prefilter, mapping, config, perturbation=delta)
        return _evaluate(args, config, mapping.rate_limit, i, float(np.linalg.norm(delta, 2)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, range(spec.count)))
    else:
        runs = [one(i) for i in range(spec.count)]
    runs.sort(key=lambda r: r.index)
    return MonteCarloReport(spec, omega, gain, tuple(runs), _aggregate(runs))


def worst_case_summary(report: MonteCarloReport) -> list:
    """Runs ordered worst first: unstable, then slowest settling, then largest thrust peak."""
    if not report.runs:
        raise ValueError("empty report")
    return sorted(report.runs, key=lambda r: (r.stable, -r.settling_time, -r.peak_dT_lbf, r.index))
