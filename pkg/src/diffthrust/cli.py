"""Command-line front end.

Every subcommand writes its outputs into ``--out`` (created if needed): a
``<name>.txt`` key = value report, CSV traces, SVG figures and a
``manifest.txt``. Exit codes: 0 success, 2 configuration error, 3 numerical
failure. Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .airframe import assemble_plant, damage_derivatives, deviation_report, dimensionalize, golden_plant
from .config import ConfigError, ToolConfig, load_config
from .engine import engine_state_space, pade_delay, peak_slope, thrust_step
from .lti import LTIError, StateSpaceModel, append_diagonal, modal_analysis, series, singular_values
from .robustness import UncertaintySpec, run_campaign, sample_perturbation, worst_case_summary
from .sim import CSV_COLUMNS, DEG, SimConfig, simulate_closed_loop, simulate_open_loop, steady_value
from .synthesis import SynthesisError, closed_loop_maps, left_coprime_factors, loop_margins, \
    loop_shaping_design, ncf_all_pass_error
from .thrustmap import available_thrust, rudder_to_thrust

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class _Run:
    """Collects written files for the manifest."""

    def __init__(self, out: Path, name: str):
        self.out = out
        self.name = name
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, filename: str) -> Path:
        self.files.append(filename)
        return self.out / filename


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".10g")
    if isinstance(v, complex):
        return f"{_fmt(v.real)}{'+' if v.imag >= 0 else '-'}{_fmt(abs(v.imag))}j"
    if isinstance(v, np.ndarray):
        return "[" + "; ".join(", ".join(_fmt(x) for x in row) for row in np.atleast_2d(v)) + "]"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def write_report(path: Path, records: dict) -> None:
    path.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in records.items()))


def write_csv(path: Path, columns, table) -> None:
    np.savetxt(path, np.asarray(table), delimiter=",", header=",".join(columns), comments="", fmt="%.9g")


def write_trace(path: Path, trace) -> None:
    write_csv(path, CSV_COLUMNS, trace.table())


# ---------------------------------------------------------------- commands

def cmd_model(cfg: ToolConfig, run: _Run, args) -> dict:
    a = cfg.aircraft
    damaged = damage_derivatives(a.derivatives, a.flight, a.geometry, a.damaged_inertia)
    dim = dimensionalize(damaged, a.flight, a.geometry, a.damaged_inertia)
    derived = assemble_plant(dim, a.flight, a.trim, a.damaged_inertia, a.geometry)
    assembled = cfg.assembled_plant()
    golden = golden_plant()
    plant = cfg.plant()
    rec = {
        "qbar_psf": a.flight.qbar,
        "CL_trim": damaged.CL_trim,
        "Cl_r_damaged": damaged.Cl_r,
        "k_map_lbf_per_rad": cfg.k_map,
        "plant_source": cfg.plant_source,
        "A": plant.A,
        "B": plant.B,
        "C": plant.C,
        "D": plant.D,
        "assembled_matches_golden": not deviation_report(assembled, golden),
    }
    for name, value in dim.__dict__.items():
        rec[f"dim.{name}"] = value
    for dev in deviation_report(derived, golden):
        rec[f"deviation.{dev.matrix}{dev.row}{dev.col}"] = (dev.derived, dev.reference, dev.relative)
    return rec


def cmd_modes(cfg: ToolConfig, run: _Run, args) -> dict:
    rep = modal_analysis(cfg.plant())
    rec = {}
    for m in rep:
        rec[f"{m.name}.pole"] = m.pole
        rec[f"{m.name}.damping"] = m.damping
        rec[f"{m.name}.frequency"] = m.frequency
        rec[f"{m.name}.period"] = m.period
    return rec


def cmd_engine(cfg: ToolConfig, run: _Run, args) -> dict:
    demo = cfg.section("engine_demo")
    dt = args.dt or cfg.sim.dt
    tr = thrust_step(cfg.engine, float(demo["command"]), args.duration or float(demo["duration"]), dt)
    write_csv(run.path("engine.csv"), ("t", "T_cmd_lbf", "T_lbf"), np.column_stack([tr.t, tr.commanded, tr.delivered]))
    from .plotting import plot_series

    plot_series(run.path("engine.svg"), tr.t, {"commanded": tr.commanded, "delivered": tr.delivered},
                "Engine thrust step", "thrust (lbf)")
    target = cfg.engine.T_trim + 0.98 * (tr.commanded[-1] - cfg.engine.T_trim)
    reached = np.nonzero(tr.delivered >= target)[0]
    return {
        "command_lbf": tr.commanded[-1],
        "final_lbf": tr.delivered[-1],
        "time_to_98pct_s": tr.t[reached[0]] if reached.size else math.inf,
        "peak_slope_lbf_per_s": peak_slope(tr),
        "analytic_peak_slope_lbf_per_s": (tr.commanded[-1] - cfg.engine.T_trim) / (cfg.engine.tau * math.e),
        "delay_samples": int(round(cfg.engine.delay / dt)),
    }


def cmd_map(cfg: ToolConfig, run: _Run, args) -> dict:
    demo = cfg.section("map_demo")
    dt = args.dt or cfg.sim.dt
    duration = args.duration or float(demo["duration"])
    t = np.arange(int(round(duration / dt)) + 1) * dt
    cmd = np.full(t.size, rudder_to_thrust(float(demo["rudder_deg"]) * DEG, cfg.k_map))
    delivered = available_thrust(cmd, cfg.mapping, dt)
    write_csv(run.path("map.csv"), ("t", "dT_cmd_lbf", "dT_lbf"), np.column_stack([t, cmd, delivered]))
    from .plotting import plot_series

    plot_series(run.path("map.svg"), t, {"commanded": cmd, "available": delivered},
                "Differential thrust for a rudder step", "differential thrust (lbf)")
    reached = np.nonzero(delivered >= 0.98 * cmd[-1])[0]
    return {
        "k_map_lbf_per_rad": cfg.k_map,
        "thrust_per_deg_lbf": rudder_to_thrust(DEG, cfg.k_map),
        "command_lbf": cmd[-1],
        "final_lbf": delivered[-1],
        "time_to_98pct_s": t[reached[0]] if reached.size else math.inf,
        "saturation_lbf": cfg.engine.saturation,
        "saturation_envelope_lbf": cfg.saturation_envelope,
    }


def _sim_config(cfg: ToolConfig, args, duration=None) -> SimConfig:
    s = cfg.sim
    kw = dict(s.__dict__)
    if args.dt:
        kw["dt"] = args.dt
    if duration is not None:
        kw["duration"] = duration
    if args.duration:
        kw["duration"] = args.duration
    return SimConfig(**kw)


def cmd_openloop(cfg: ToolConfig, run: _Run, args) -> dict:
    sc = _sim_config(cfg, args, float(cfg.section("openloop")["duration"]))
    tr = simulate_open_loop(cfg.plant(), sc, cfg.mapping)
    write_trace(run.path("openloop.csv"), tr)
    from .plotting import plot_states

    plot_states(run.path("openloop.svg"), tr, "Open-loop response, 1 deg steps")
    i20 = min(int(round(20.0 / sc.dt)), len(tr.t) - 1)
    rec = {"duration_s": sc.duration}
    for name in ("phi_deg", "p_dps", "beta_deg", "r_dps"):
        y = np.abs(getattr(tr, name))
        rec[f"{name}.at_20s"] = y[i20]
        rec[f"{name}.final"] = y[-1]
        rec[f"{name}.growth_ratio"] = y[-1] / y[i20] if y[i20] > 0 else math.inf
    return rec


def _design(cfg: ToolConfig):
    return loop_shaping_design(cfg.plant(), cfg.weights, cfg.gamma_rel_tol)


def cmd_synth(cfg: ToolConfig, run: _Run, args) -> dict:
    res = _design(cfg)
    grid = np.logspace(-3, 3, 50)
    N, M = left_coprime_factors(res.Gs, res.Z)
    w = np.logspace(-3, 3, 300)
    G = cfg.plant()
    maps = closed_loop_maps(G, res.K)
    from .plotting import plot_sigma

    plot_sigma(run.path("shaped_plant.svg"), w, {"G": singular_values(G, w), "Gs": singular_values(res.Gs, w)},
               "Open-loop and shaped plant")
    plot_sigma(run.path("sensitivity.svg"), w, {k: singular_values(v, w) for k, v in maps.items()},
               "Sensitivity and complementary sensitivity")
    return {
        "gamma_min": res.gamma_min,
        "e_max": res.e_max,
        "gamma": res.gamma,
        "verification_norm": res.verification_norm,
        "shaped_plant_states": res.Gs.n_states,
        "Ks_states": res.Ks.n_states,
        "K_states": res.K.n_states,
        "closed_loop_abscissa": -_abscissa_margin(G, res.K),
        "ncf_all_pass_error": ncf_all_pass_error(N, M, grid),
        "prefilter": res.prefilter,
    }


def _abscissa_margin(G, K) -> float:
    from .lti import feedback

    return -feedback(series(K, G), -1.0).spectral_abscissa()


def cmd_margins(cfg: ToolConfig, run: _Run, args) -> dict:
    res = _design(cfg)
    G = cfg.plant()
    opts = cfg.section("margins")
    delay_model = "none"
    if opts.get("include_engine", False):
        order = int(opts.get("pade_order", 2))
        lag = series(pade_delay(cfg.engine.delay, order), engine_state_space(cfg.engine))
        G = series(append_diagonal(StateSpaceModel.static(np.eye(1)), lag), G)
        G = G.relabel(input_labels=("aileron", "diff_thrust"), output_labels=cfg.plant().output_labels)
        delay_model = f"pade{order}+engine_lag"
    reps = loop_margins(G, res.K)
    from .plotting import plot_margins

    plot_margins(run.path("margins.svg"), reps, "Disk margins")
    rec = {"delay_model": delay_model}
    for side, rep in reps.items():
        for c in rep.channels + (rep.multiloop,):
            key = f"{side}.{c.channel}"
            rec[f"{key}.alpha"] = c.alpha
            rec[f"{key}.gain_interval"] = c.gain_interval
            rec[f"{key}.phase_margin_deg"] = c.phase_margin
    return rec


def _trace_metrics(tr, dt) -> dict:
    return {
        "diverged": tr.diverged,
        "settled": tr.settled,
        "settling_time_s": tr.settling_time,
        "settling_times_s": tr.settling_times,
        "max_abs_da_deg": float(np.max(np.abs(tr.da_deg))),
        "max_abs_dT_lbf": float(np.max(np.abs(tr.dT_lbf))),
        "steady_dT_lbf": steady_value(tr.dT_lbf, dt),
        "steady_da_deg": steady_value(tr.da_deg, dt),
        "final_states": tr.states[-1],
    }


def cmd_sim(cfg: ToolConfig, run: _Run, args) -> dict:
    res = _design(cfg)
    sc = _sim_config(cfg, args)
    tr = simulate_closed_loop(cfg.plant(), res, res.prefilter, cfg.mapping, sc)
    write_trace(run.path("sim.csv"), tr)
    from .plotting import plot_efforts, plot_states

    plot_states(run.path("sim_states.svg"), tr, "Closed-loop response, 1 deg steps")
    plot_efforts(run.path("sim_efforts.svg"), tr, "Closed-loop control effort")
    rec = _trace_metrics(tr, sc.dt)
    rec["max_dT_slope_lbf_per_s"] = float(np.max(np.abs(np.diff(tr.dT_lbf))) / sc.dt)
    return rec


def cmd_monte(cfg: ToolConfig, run: _Run, args) -> dict:
    res = _design(cfg)
    u = cfg.uncertainty
    spec = UncertaintySpec(
        level=u.level if args.uncertainty is None else args.uncertainty,
        seed=u.seed if args.seed is None else args.seed,
        count=u.count if args.runs is None else args.runs,
        omega_lo=u.omega_lo, omega_hi=u.omega_hi, n_grid=u.n_grid,
    )
    sc = _sim_config(cfg, args, cfg.monte_duration)
    G = cfg.plant()
    report = run_campaign(G, res, res.prefilter, cfg.mapping, spec, sc, workers=cfg.workers)
    run.path("monte.txt").write_text(report.to_text())
    worst = worst_case_summary(report)[0]
    delta = sample_perturbation(spec, worst.index, report.gain_ref, (G.n_outputs, G.n_inputs))
    tr = simulate_closed_loop(G, res, res.prefilter, cfg.mapping, sc, perturbation=delta,
                              raise_on_divergence=False, check=False)
    write_trace(run.path("monte_worst.csv"), tr)
    from .plotting import plot_histograms

    plot_histograms(run.path("monte.svg"), {
        "settling time (s)": [r.settling_time for r in report.runs if r.stable],
        "peak differential thrust (lbf)": [r.peak_dT_lbf for r in report.runs if r.stable],
        "steady differential thrust (lbf)": [r.steady_dT_lbf for r in report.runs if r.stable],
    }, "Monte-Carlo outcomes")
    return {"worst_run": worst.index, "stable_fraction": report.stable_fraction,
            "rate_limit_hits": report.rate_limit_hits}


COMMANDS = {
    "model": (cmd_model, "plant matrices, dimensional derivatives and deviations"),
    "modes": (cmd_modes, "modal damping, frequency and period table"),
    "engine": (cmd_engine, "engine thrust step trace"),
    "map": (cmd_map, "available differential thrust for a rudder step"),
    "openloop": (cmd_openloop, "open-loop step response of the damaged plant"),
    "synth": (cmd_synth, "loop-shaping synthesis summary"),
    "margins": (cmd_margins, "disk margins at plant input and output"),
    "sim": (cmd_sim, "constrained closed-loop step response"),
    "monte": (cmd_monte, "Monte-Carlo robustness campaign"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file merged over the bundled defaults")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed")
    common.add_argument("--runs", type=int, help="Monte-Carlo run count")
    common.add_argument("--uncertainty", type=float, help="Monte-Carlo uncertainty level (fraction)")
    common.add_argument("--dt", type=float, help="integration step (s)")
    common.add_argument("--duration", type=float, help="simulation horizon (s)")
    parser = argparse.ArgumentParser(prog="diffthrust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _fail(kind: str, code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}, sort_keys=True) + "\n")
    return code


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = _now()
    try:
        cfg = load_config(args.config)
        if args.dt is not None and args.dt <= 0:
            raise ConfigError("--dt must be positive")
        if args.duration is not None and args.duration <= 0:
            raise ConfigError("--duration must be positive")
        if args.runs is not None and args.runs < 1:
            raise ConfigError("--runs must be at least 1")
        if args.uncertainty is not None and not 0 <= args.uncertainty <= 1:
            raise ConfigError("--uncertainty must lie in [0, 1]")
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, str(exc))
    func, _ = COMMANDS[args.command]
    run = _Run(args.out, args.command)
    try:
        records = func(cfg, run, args)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, str(exc))
    except (LTIError, SynthesisError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail("numerical", EXIT_NUMERIC, f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        return _fail("config", EXIT_CONFIG, str(exc))
    report = run.path(f"{args.command}.txt") if args.command != "monte" else run.path("monte_summary.txt")
    write_report(report, records)
    seed = cfg.uncertainty.seed if args.seed is None else args.seed
    manifest = {
        "tool": "diffthrust",
        "version": __version__,
        "subcommand": args.command,
        "config_digest": f"sha256:{cfg.digest}",
        "seed": seed,
        "backend": _kernels.backend(),
        "started_utc": started,
        "finished_utc": _now(),
        "outputs": sorted(run.files),
    }
    write_report(args.out / "manifest.txt", manifest)
    sys.stdout.write(f"{args.command}: wrote {len(run.files)} files to {args.out}\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
