from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from diffthrust.lti import StateSpaceModel, TransferMatrix, feedback, freq_response, hinf_norm, series
from diffthrust.synthesis import (
    LoopShapingWeights,
    SynthesisError,
    build_weights,
    closed_loop_maps,
    decode_packed,
    disk_from_alpha,
    disk_margin,
    left_coprime_factors,
    loop_margins,
    ncf_all_pass_error,
    ncf_synthesis,
    robust_stabilization_map,
    shape_plant,
)

GRID50 = np.logspace(-3, 3, 50)


def hankel_emax(Gs):
    """Independent route: e_max = sqrt(1 - ||[N M]||_H^2) from the factor Gramians."""
    A, B, C = Gs.A, Gs.B, Gs.C
    Z = spla.solve_continuous_are(A.T, C.T, B @ B.T, np.eye(C.shape[0]))
    H = -Z @ C.T
    Af = A + H @ C
    Bf = np.hstack([B, H])
    P = spla.solve_continuous_lyapunov(Af, -Bf @ Bf.T)
    Q = spla.solve_continuous_lyapunov(Af.T, -C.T @ C)
    hankel = math.sqrt(max(np.linalg.eigvals(P @ Q).real))
    return math.sqrt(1.0 - hankel ** 2)


# -------------------------------------------------------------- weights

def test_weight_dc_gains():
    W1, W2 = build_weights().as_state_space()
    np.testing.assert_allclose(np.diag(W1.dc_gain()), [0.3, 0.2])
    np.testing.assert_allclose(np.diag(W2.dc_gain()), [1, 1, 1, 1])
    W1u, _ = build_weights(roll_gain=1.0).as_state_space()
    assert W1u.dc_gain()[0, 0] == pytest.approx(0.1)


def test_weight_realization_sizes():
    W1, W2 = build_weights().as_state_space()
    assert (W1.n_states, W2.n_states) == (2, 4)


def test_decode_packed_matches_aileron_weight():
    # (12 s + 3)/(4 s + 10) = 3 - 27/(4 s + 10): A = -2.5, B = 1, C = -6.75, D = 3
    packed = [[-2.5, 1.0, 1.0], [-6.75, 3.0, 0.0], [0.0, 0.0, -np.inf]]
    sysm = decode_packed(packed)
    W1, _ = build_weights().as_state_space()
    for w in GRID50:
        assert freq_response(sysm, w)[0, 0] == pytest.approx(freq_response(W1, w)[0, 0], rel=1e-12)
    with pytest.raises(ValueError):
        decode_packed([[1.0, 2.0], [3.0, 4.0]])


def test_weight_validation():
    bad_pole = TransferMatrix.diagonal([([1.0], [1.0, -1.0])])
    ok = TransferMatrix.diagonal([([1.0], [1.0, 1.0])])
    with pytest.raises(ValueError):
        LoopShapingWeights(bad_pole, ok)
    nonmin = TransferMatrix.diagonal([([1.0, -1.0], [1.0, 1.0])])
    with pytest.raises(ValueError):
        LoopShapingWeights(ok, nonmin)


def test_shape_plant_dimension_mismatch(plant):
    W1, W2 = build_weights().as_state_space()
    with pytest.raises(ValueError):
        shape_plant(plant, (W2, W1))


def test_shape_plant_rejects_unstabilizable(plant):
    G = StateSpaceModel(plant.A, np.zeros((4, 2)), plant.C, plant.D)
    with pytest.raises(SynthesisError):
        shape_plant(G, build_weights())


def test_shaped_plant_is_minimal_and_strictly_proper(design):
    assert design.Gs.n_states == 9
    assert np.all(design.Gs.D == 0)


# ------------------------------------------------------------ synthesis

def test_emax_value(design):
    assert design.e_max == pytest.approx(0.2763, abs=0.01)
    assert 0.25 < design.e_max < 0.30


def test_emax_matches_hankel_oracle(design):
    assert design.e_max == pytest.approx(hankel_emax(design.Gs), rel=1e-6)


def test_riccati_solutions_match_scipy(design):
    Gs = design.Gs
    X = spla.solve_continuous_are(Gs.A, Gs.B, Gs.C.T @ Gs.C, np.eye(2))
    np.testing.assert_allclose(design.X, X, rtol=1e-6, atol=1e-9 * np.abs(X).max())


def test_gamma_and_verification(design):
    assert design.gamma == pytest.approx(1.05 * design.gamma_min)
    assert design.verification_norm <= design.gamma * (1 + 1e-6)
    assert design.verification_norm >= design.gamma_min * (1 - 1e-6)


def test_ncf_all_pass(design):
    N, M = left_coprime_factors(design.Gs, design.Z)
    assert ncf_all_pass_error(N, M, np.logspace(-2, 2, 50)) <= 1e-6
    assert M.is_stable() and N.is_stable()
    # Gs = M^-1 N on the grid
    for w in GRID50[::7]:
        G = freq_response(design.Gs, w)
        np.testing.assert_allclose(np.linalg.solve(freq_response(M, w), freq_response(N, w)), G,
                                   rtol=1e-8, atol=1e-10)


def test_controller_stabilizes_shaped_and_true_plant(design, plant):
    assert feedback(series(design.Ks, design.Gs), -1.0).is_stable()
    assert feedback(series(design.K, plant), -1.0).is_stable()


def test_controller_is_composition(design):
    W1, W2 = design.weights
    for w in GRID50[::5]:
        ref = freq_response(W1, w) @ freq_response(design.Ks, w) @ freq_response(W2, w)
        np.testing.assert_allclose(freq_response(design.K, w), ref, rtol=1e-9, atol=1e-12)


def test_prefilter(design):
    W2 = design.weights[1]
    P = design.Ks.dc_gain() @ W2.dc_gain()
    np.testing.assert_allclose(design.prefilter[:, 0], P[:, 0] + P[:, 1])
    np.testing.assert_allclose(design.prefilter[:, 1], P[:, 2] + P[:, 3])


def test_rejects_feedthrough():
    with pytest.raises(SynthesisError):
        ncf_synthesis(StateSpaceModel(-np.eye(1), np.eye(1), np.eye(1), np.eye(1)))


def test_scalar_ncf_closed_form():
    # G = 1/s: X = Z = 1, gamma_min = sqrt(2)
    res = ncf_synthesis(StateSpaceModel(np.zeros((1, 1)), np.eye(1), np.eye(1), np.zeros((1, 1))))
    assert res.gamma_min == pytest.approx(math.sqrt(2.0), rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.integers(1, 4))
def test_random_plants_verify(seed, n):
    rng = np.random.default_rng(seed)
    Gs = StateSpaceModel(rng.standard_normal((n, n)), rng.standard_normal((n, 2)),
                         rng.standard_normal((2, n)), np.zeros((2, 2)))
    res = ncf_synthesis(Gs, 0.1)
    assert res.gamma_min >= 1.0
    assert res.e_max == pytest.approx(hankel_emax(Gs), rel=1e-5)
    T = robust_stabilization_map(Gs, -res.Ks)
    assert hinf_norm(T) <= res.gamma * (1 + 1e-5)


# -------------------------------------------------------------- margins

def test_disk_margin_integrator():
    rep = disk_margin(StateSpaceModel(np.zeros((1, 1)), np.eye(1), np.eye(1), np.zeros((1, 1))))
    m = rep.channels[0]
    assert m.alpha == pytest.approx(1.0, abs=1e-6)
    assert m.gain_interval[0] == pytest.approx(1 / 3, abs=1e-6)
    assert m.gain_interval[1] == pytest.approx(3.0, abs=1e-5)
    assert m.phase_margin == pytest.approx(53.13, abs=0.01)


@pytest.mark.parametrize("k", [0.5, 3.0, 10.0])
def test_disk_margin_static_gain(k):
    alpha = disk_margin(StateSpaceModel.static([[k]])).channels[0].alpha
    assert alpha == pytest.approx((1 + k) / abs(1 - k))


def test_disk_margin_unity_gain_is_unbounded():
    m = disk_margin(StateSpaceModel.static([[1.0]])).channels[0]
    assert math.isinf(m.alpha) and m.phase_margin == 180.0 and m.gain_interval == (-1.0, math.inf)


def test_disk_from_alpha_large():
    m = disk_from_alpha(2.5)
    assert m.gain_interval[1] == math.inf


def test_disk_margin_unstable_loop():
    from diffthrust.lti import UnstableSystemError

    with pytest.raises(UnstableSystemError):
        disk_margin(StateSpaceModel(-np.eye(1), np.eye(1), -2 * np.eye(1), np.zeros((1, 1))))


def test_design_margins_positive(design, plant):
    rep = loop_margins(plant, design.K)
    for side in ("input", "output"):
        for ch in rep[side].channels:
            assert ch.alpha > 0
        assert rep[side].multiloop.alpha > 0
    assert {c.channel for c in rep["input"].channels} == {"aileron", "diff_thrust"}


def test_sensitivity_identity(design, plant):
    maps = closed_loop_maps(plant, design.K)
    for w in GRID50[::5]:
        S, T = freq_response(maps["S_out"], w), freq_response(maps["T_out"], w)
        np.testing.assert_allclose(S + T, np.eye(4), atol=1e-9)
        S, T = freq_response(maps["S_in"], w), freq_response(maps["T_in"], w)
        np.testing.assert_allclose(S + T, np.eye(2), atol=1e-9)
