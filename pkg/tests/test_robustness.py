from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffthrust.lti import StateSpaceModel, UnstableSystemError
from diffthrust.robustness import (
    MonteCarloReport,
    RunRecord,
    UncertaintySpec,
    reference_gain,
    run_campaign,
    run_generator,
    sample_perturbation,
    worst_case_summary,
)
from diffthrust.sim import SimConfig, simulate_closed_loop

SHORT = SimConfig(duration=30.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        UncertaintySpec(level=1.5)
    with pytest.raises(ValueError):
        UncertaintySpec(count=0)
    with pytest.raises(ValueError):
        UncertaintySpec(structure="diagonal")
    with pytest.raises(ValueError):
        UncertaintySpec(omega_lo=10.0, omega_hi=1.0)


def test_reference_gain_on_grid(plant):
    spec = UncertaintySpec()
    w, g = reference_gain(plant, spec)
    assert spec.omega_lo <= w <= spec.omega_hi
    # oracle: brute-force SVD on the same grid
    grid = np.logspace(math.log10(spec.omega_lo), math.log10(spec.omega_hi), spec.n_grid)
    ref = max(np.linalg.norm(np.linalg.solve(1j * x * np.eye(4) - plant.A, plant.B), 2) for x in grid)
    assert g == pytest.approx(ref, rel=1e-12)


def test_streams_are_independent_and_reproducible():
    a = run_generator(7, 3).random(5)
    np.testing.assert_array_equal(a, run_generator(7, 3).random(5))
    assert not np.allclose(a, run_generator(7, 4).random(5))


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0), st.integers(0, 2 ** 63), st.integers(0, 5000))
def test_perturbation_norm_bound(level, seed, idx):
    spec = UncertaintySpec(level=level, seed=seed)
    d = sample_perturbation(spec, idx, gain=2.0)
    assert d.shape == (4, 2)
    assert np.linalg.norm(d, 2) <= level * 2.0 * (1 + 1e-12)


def test_zero_level_is_nominal(plant, design, mapping):
    spec = UncertaintySpec(level=0.0, count=3)
    rep = run_campaign(plant, design, design.prefilter, mapping, spec, SHORT)
    nom = simulate_closed_loop(plant, design, design.prefilter, mapping, SHORT)
    for r in rep.runs:
        assert r.delta_norm == 0.0
        assert r.settling_time == nom.settling_time
        assert r.peak_dT_lbf == pytest.approx(np.max(np.abs(nom.dT_lbf)), rel=1e-12)


def test_campaign_deterministic(plant, design, mapping):
    spec = UncertaintySpec(count=12, seed=99)
    a = run_campaign(plant, design, design.prefilter, mapping, spec, SHORT).to_text()
    b = run_campaign(plant, design, design.prefilter, mapping, spec, SHORT, workers=3).to_text()
    assert a == b
    c = run_campaign(plant, design, design.prefilter, mapping, dataclasses.replace(spec, seed=100), SHORT)
    assert c.to_text() != a


def test_campaign_statistics(plant, design, mapping):
    rep = run_campaign(plant, design, design.prefilter, mapping, UncertaintySpec(count=20), SHORT)
    assert len(rep.runs) == 20 and [r.index for r in rep.runs] == list(range(20))
    assert rep.stable_fraction == 1.0
    st_ = rep.stats["peak_dT_lbf"]
    assert st_.min <= st_.mean <= st_.max
    assert "stable_fraction = 1.000000" in rep.to_text()


def test_nominal_instability_aborts(plant, mapping):
    with pytest.raises(UnstableSystemError):
        run_campaign(plant, StateSpaceModel.static(np.zeros((2, 4))), np.zeros((2, 2)), mapping,
                     UncertaintySpec(count=2), SHORT)


def _rec(i, stable, settle, peak):
    return RunRecord(i, stable, settle, 1.0, peak, 10.0, False, 0.1)


def test_worst_case_ordering():
    runs = (_rec(0, True, 5.0, 100.0), _rec(1, False, math.inf, 50.0), _rec(2, True, 8.0, 10.0),
            _rec(3, True, 8.0, 20.0), _rec(4, True, 8.0, 20.0))
    rep = MonteCarloReport(UncertaintySpec(count=5), 1.0, 1.0, runs)
    assert [r.index for r in worst_case_summary(rep)] == [1, 3, 4, 2, 0]
    with pytest.raises(ValueError):
        worst_case_summary(MonteCarloReport(UncertaintySpec(), 1.0, 1.0, ()))
