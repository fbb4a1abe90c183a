from __future__ import annotations

import math

import numpy as np
import pytest

from diffthrust.lti import StateSpaceModel, feedback, series, step_response
from diffthrust.sim import (
    CSV_COLUMNS,
    DEG,
    SimConfig,
    SimulationDivergedError,
    settling_metrics,
    simulate_closed_loop,
    simulate_open_loop,
    steady_value,
)


@pytest.fixture(scope="module")
def nominal(plant, design, mapping):
    return simulate_closed_loop(plant, design, design.prefilter, mapping, SimConfig())


# ------------------------------------------------------------ settling

def test_settling_constant_trace():
    assert settling_metrics(np.ones((500, 2)), dt=0.01) == (0.0, 0.0)


def test_settling_divergent_trace():
    y = np.exp(np.arange(500) * 0.01)
    assert math.isinf(settling_metrics(y, dt=0.01)[0])
    assert math.isinf(settling_metrics(np.array([0.0, np.inf, 1.0]), dt=0.01)[0])


def test_settling_first_order_oracle():
    # 1 - exp(-t) enters a 2% band around 1 at t = ln(50)
    dt = 0.001
    t = np.arange(int(20 / dt) + 1) * dt
    ts = settling_metrics(1 - np.exp(-t), dt=dt)[0]
    assert ts == pytest.approx(math.log(50.0), abs=2 * dt)


def test_settling_requires_dt():
    with pytest.raises(ValueError):
        settling_metrics(np.ones(10))


def test_stable_test_plant_settles_to_dc_gain():
    g = StateSpaceModel(-np.eye(4), np.ones((4, 2)), np.eye(4), np.zeros((4, 2)))
    tr = simulate_open_loop(g, SimConfig(duration=15.0))
    assert tr.settled
    np.testing.assert_allclose(tr.states[-1], 2.0 * (1 - math.exp(-15.0)), rtol=1e-6)


# ----------------------------------------------------------- open loop

def test_open_loop_diverges_in_all_states(plant, mapping):
    tr = simulate_open_loop(plant, SimConfig(duration=100.0), mapping)
    k = int(round(1.0 / 0.01))
    early = np.max(np.abs(tr.states[: k + 1]), axis=0)
    late = np.abs(tr.states[-1])
    assert np.all(late > 10 * early)
    assert not tr.settled


def test_open_loop_thrust_columns(plant, mapping):
    tr = simulate_open_loop(plant, SimConfig(duration=1.0), mapping)
    assert tr.dT_lbf[-1] == pytest.approx(mapping.k_map * DEG)
    assert np.all(np.isnan(simulate_open_loop(plant, SimConfig(duration=1.0)).dT_lbf))


# --------------------------------------------------------- closed loop

def test_nominal_settles_within_15s(nominal):
    assert nominal.settled
    assert max(nominal.settling_times) <= 15.0


def test_nominal_efforts(nominal):
    assert 2.0 <= np.max(np.abs(nominal.da_deg)) <= 2.8
    assert 3000 <= np.max(np.abs(nominal.dT_lbf)) <= 3700
    assert 5 <= steady_value(nominal.dT_lbf, 0.01) <= 30


def test_nominal_respects_limits(nominal, mapping):
    assert np.all(np.abs(nominal.da_deg) <= 26.0)
    assert np.all(np.abs(nominal.dT_lbf) <= mapping.saturation)
    assert np.all(np.abs(np.diff(nominal.dT_lbf)) <= mapping.rate_limit * 0.01 * (1 + 1e-9))


def test_trace_columns(nominal):
    assert nominal.table().shape == (4001, len(CSV_COLUMNS))
    assert nominal.t[-1] == pytest.approx(40.0)


def test_large_steps_hit_limits_without_violation(plant, design, mapping):
    cfg = SimConfig(aileron_step_deg=20.0, rudder_step_deg=15.0, aileron_rate_limit_dps=40.0, duration=30.0)
    tr = simulate_closed_loop(plant, design, design.prefilter, mapping, cfg, raise_on_divergence=False)
    dt = cfg.dt
    assert np.all(np.abs(tr.da_deg) <= 26.0 + 1e-9)
    assert np.all(np.abs(np.diff(tr.da_deg)) <= 40.0 * dt * (1 + 1e-9))
    assert np.all(np.abs(tr.dT_lbf) <= mapping.saturation * (1 + 1e-12))
    assert np.all(np.abs(np.diff(tr.dT_lbf)) <= mapping.rate_limit * dt * (1 + 1e-9))
    # the slope limit is actually exercised
    assert np.max(np.abs(np.diff(tr.dT_lbf))) >= 0.99 * mapping.rate_limit * dt


def test_dt_halving(plant, design, mapping):
    a = simulate_closed_loop(plant, design, design.prefilter, mapping, SimConfig(dt=0.01))
    b = simulate_closed_loop(plant, design, design.prefilter, mapping, SimConfig(dt=0.005))
    for x, y in zip(a.settling_times, b.settling_times):
        assert abs(x - y) < 2 * 0.01
    for col in ("da_deg", "dT_lbf"):
        pa, pb = np.max(np.abs(getattr(a, col))), np.max(np.abs(getattr(b, col)))
        assert abs(pa - pb) <= 0.005 * pb


def _linear_error(plant, design, mapping, dt):
    cfg = SimConfig(dt=dt, apply_limits=False, engine_lag=False, duration=20.0)
    tr = simulate_closed_loop(plant, design, design.prefilter, mapping, cfg)
    W1, W2 = design.weights
    cl = feedback(series(W1, plant), -1.0, series(W2, design.Ks))
    t, Y = step_response(cl, 20.0, dt)
    ref = Y @ (design.prefilter @ np.array([DEG, DEG]))
    return np.max(np.abs(tr.states * DEG - ref)), np.max(np.abs(ref))


def test_matches_linear_closed_loop(plant, design, mapping):
    """With limits and engine removed the loop is LTI; compare with an exact step response."""
    err, scale = _linear_error(plant, design, mapping, 0.0025)
    assert err <= 1e-8 * max(1.0, scale)


def test_rk4_convergence_order(plant, design, mapping):
    e1, _ = _linear_error(plant, design, mapping, 0.01)
    e2, _ = _linear_error(plant, design, mapping, 0.005)
    assert e1 / e2 >= 12.0


def test_unstabilizing_controller_rejected(plant, mapping):
    from diffthrust.lti import UnstableSystemError

    K = StateSpaceModel.static(np.zeros((2, 4)))
    with pytest.raises(UnstableSystemError):
        simulate_closed_loop(plant, K, np.zeros((2, 2)), mapping)


def test_divergence_guard(plant, design, mapping):
    huge = np.full((4, 2), 50.0)
    with pytest.raises(SimulationDivergedError):
        simulate_closed_loop(plant, design, design.prefilter, mapping, perturbation=huge)
    tr = simulate_closed_loop(plant, design, design.prefilter, mapping, perturbation=huge,
                              raise_on_divergence=False)
    assert tr.diverged and math.isinf(tr.settling_time)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(integrator="euler")
