"""Loop-shaping robust stabilization around normalized coprime factors.

Controllers returned here follow the negative feedback convention
``u = -K y``. Internally the central controller formulas are written for
positive feedback and the sign is flipped once on the way out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lti import (
    LTIError,
    RiccatiError,
    StateSpaceModel,
    TransferMatrix,
    UnstableSystemError,
    feedback,
    freq_response,
    hinf_norm,
    minimal_realization,
    parallel,
    series,
    solve_are,
)

# aileron drives the roll references, pedal drives the yaw references
PILOT_ROUTING = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])


class SynthesisError(LTIError):
    pass


@dataclass(frozen=True)
class LoopShapingWeights:
    W1: TransferMatrix
    W2: TransferMatrix

    def __post_init__(self):
        for name in ("W1", "W2"):
            W = getattr(self, name)
            rows, cols = W.shape
            if rows != cols:
                raise ValueError(f"{name} must be square")
            for i in range(rows):
                for j in range(cols):
                    num, den = W.channel(i, j)
                    if i != j and np.any(np.asarray(num) != 0):
                        raise ValueError(f"{name} must be diagonal")
                    if i == j:
                        if np.any(np.roots(den).real >= 0):
                            raise ValueError(f"{name}[{i},{i}] is not stable")
                        if np.any(np.roots(np.trim_zeros(num, "f")).real >= 0):
                            raise ValueError(f"{name}[{i},{i}] is not minimum phase")

    def as_state_space(self) -> tuple[StateSpaceModel, StateSpaceModel]:
        return self.W1.to_state_space(), self.W2.to_state_space()


def build_weights(roll_gain: float = 3.0) -> LoopShapingWeights:
    """Pre- and post-compensators for the damaged-aircraft design.

    Parameters
    ----------
    roll_gain : float
        Multiplier on the aileron pre-compensator ``(4s+1)/(4s+10)``. The
        default of 3 matches the packed realization of that weight (its
        feedthrough term is 3); ``roll_gain=1`` gives the bare fraction.
    """
    W1 = TransferMatrix.diagonal([
        ([4.0 * roll_gain, roll_gain], [4.0, 10.0]),
        ([50.0, 5.0], [18.0, 25.0]),
    ])
    W2 = TransferMatrix.diagonal([([16.0], [1.0, 16.0])] + [([120.0], [1.0, 120.0])] * 3)
    return LoopShapingWeights(W1, W2)


def decode_packed(M) -> StateSpaceModel:
    """Unpack a ``[A B n; C D 0; 0 0 -inf]`` system-matrix display."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or not np.isneginf(M[-1, -1]):
        raise ValueError("packed matrix must end with a -inf sentinel")
    n = int(round(M[0, -1]))
    body = M[:-1, :-1]
    return StateSpaceModel(body[:n, :n], body[:n, n:], body[n:, :n], body[n:, n:])


def _as_ss(W) -> StateSpaceModel:
    return W.to_state_space() if isinstance(W, TransferMatrix) else W


def shape_plant(G: StateSpaceModel, weights, minimal: bool = True) -> StateSpaceModel:
    """``Gs = W2 G W1``. ``weights`` is a LoopShapingWeights or a (W1, W2) pair."""
    W1, W2 = (weights.W1, weights.W2) if isinstance(weights, LoopShapingWeights) else weights
    W1, W2 = _as_ss(W1), _as_ss(W2)
    if W1.n_outputs != G.n_inputs or W2.n_inputs != G.n_outputs:
        raise ValueError("weight dimensions do not match the plant")
    Gs = series(series(W1, G), W2)
    if not minimal:
        return Gs
    Gm = minimal_realization(Gs)
    # a non-decaying mode removed by the reduction cannot be stabilized or seen by feedback
    if _count_nondecaying(Gm) < _count_nondecaying(Gs):
        raise SynthesisError("shaped plant is not stabilizable and detectable")
    return Gm


def _count_nondecaying(sys: StateSpaceModel, tol: float = 1e-9) -> int:
    return int(np.sum(sys.poles().real > -tol)) if sys.n_states else 0


@dataclass(frozen=True)
class SynthesisResult:
    Gs: StateSpaceModel
    Ks: StateSpaceModel
    gamma_min: float
    gamma: float
    X: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    verification_norm: float
    plant: StateSpaceModel | None = None
    weights: tuple | None = field(default=None, repr=False)
    K: StateSpaceModel | None = None
    prefilter: np.ndarray | None = None

    @property
    def e_max(self) -> float:
        return 1.0 / self.gamma_min


def ncf_riccati(Gs: StateSpaceModel) -> tuple[np.ndarray, np.ndarray]:
    """Control and filter Riccati solutions of a strictly proper plant."""
    if np.any(Gs.D != 0):
        raise SynthesisError("shaped plant must be strictly proper")
    A, B, C = Gs.A, Gs.B, Gs.C
    try:
        X = solve_are(A, B, C.T @ C, np.eye(B.shape[1]))
        Z = solve_are(A.T, C.T, B @ B.T, np.eye(C.shape[0]))
    except RiccatiError as exc:
        raise SynthesisError(f"synthesis infeasible: {exc}") from exc
    return X, Z


def gamma_min(X: np.ndarray, Z: np.ndarray) -> float:
    lam = np.linalg.eigvals(X @ Z).real
    return math.sqrt(1.0 + max(0.0, float(lam.max())))


def central_controller(Gs: StateSpaceModel, X, Z, gamma: float) -> StateSpaceModel:
    """Central sub-optimal controller for positive feedback ``u = K y``."""
    A, B, C = Gs.A, Gs.B, Gs.C
    n = A.shape[0]
    g2 = gamma * gamma
    L = (1.0 - g2) * np.eye(n) + X @ Z
    if np.linalg.cond(L) > 1e14:
        raise SynthesisError("gamma too close to the optimum; central controller is singular")
    LinvT_Z = np.linalg.solve(L.T, Z)
    AK = A - B @ B.T @ X + g2 * LinvT_Z @ C.T @ C
    BK = g2 * LinvT_Z @ C.T
    CK = B.T @ X
    DK = np.zeros((B.shape[1], C.shape[0]))
    return StateSpaceModel(AK, BK, CK, DK, (), Gs.output_labels, Gs.input_labels)


def left_coprime_factors(Gs: StateSpaceModel, Z=None) -> tuple[StateSpaceModel, StateSpaceModel]:
    """Normalized left factors ``(N, M)`` with ``Gs = M^-1 N``."""
    if Z is None:
        _, Z = ncf_riccati(Gs)
    H = -Z @ Gs.C.T
    Af = Gs.A + H @ Gs.C
    N = StateSpaceModel(Af, Gs.B, Gs.C, Gs.D)
    M = StateSpaceModel(Af, H, Gs.C, np.eye(Gs.n_outputs))
    return N, M


def ncf_all_pass_error(N: StateSpaceModel, M: StateSpaceModel, omega) -> float:
    """Largest ``|M M* + N N* - I|`` entry over the grid."""
    worst = 0.0
    for w in np.atleast_1d(omega):
        Nw, Mw = freq_response(N, w), freq_response(M, w)
        E = Mw @ Mw.conj().T + Nw @ Nw.conj().T - np.eye(Mw.shape[0])
        worst = max(worst, float(np.abs(E).max()))
    return worst


def robust_stabilization_map(G: StateSpaceModel, K_pos: StateSpaceModel) -> StateSpaceModel:
    """``[I; K](I - G K)^-1 [I, G]`` for a positive-feedback controller.

    Inputs are (output disturbance, input disturbance); outputs are
    (plant output, controller output).
    """
    p, m = G.n_outputs, G.n_inputs
    ng, nk = G.n_states, K_pos.n_states
    F = np.linalg.inv(np.eye(p) - G.D @ K_pos.D)
    # y = F (Cg xg + Dg Ck xk + w1 + Dg w2);  u = Ck xk + Dk y + w2
    Cy = F @ np.hstack([G.C, G.D @ K_pos.C])
    Dy = F @ np.hstack([np.eye(p), G.D])
    Cu = np.hstack([np.zeros((m, ng)), K_pos.C]) + K_pos.D @ Cy
    Du = K_pos.D @ Dy + np.hstack([np.zeros((m, p)), np.eye(m)])
    A = np.zeros((ng + nk, ng + nk))
    A[:ng, :ng] = G.A
    A[:ng] += G.B @ Cu
    A[ng:, ng:] = K_pos.A
    A[ng:] += K_pos.B @ Cy
    B = np.vstack([G.B @ Du, K_pos.B @ Dy])
    Ko = np.hstack([np.zeros((m, ng)), K_pos.C]) + K_pos.D @ Cy
    Dko = K_pos.D @ Dy
    return StateSpaceModel(A, B, np.vstack([Cy, Ko]), np.vstack([Dy, Dko]))


def ncf_synthesis(Gs: StateSpaceModel, gamma_rel_tol: float = 0.05, verify: bool = True) -> SynthesisResult:
    """Robust stabilization of the shaped plant against coprime-factor uncertainty.

    Returns the central controller at ``gamma = gamma_min * (1 + gamma_rel_tol)``
    in negative-feedback form. With ``verify`` the closed loop is checked for
    internal stability and its robust-stabilization norm against ``gamma``.
    """
    X, Z = ncf_riccati(Gs)
    gmin = gamma_min(X, Z)
    gamma = gmin * (1.0 + gamma_rel_tol)
    K_pos = central_controller(Gs, X, Z, gamma)
    T = robust_stabilization_map(Gs, K_pos)
    norm = math.nan
    if verify:
        if not T.is_stable():
            raise SynthesisError("shaped closed loop is not internally stable")
        norm = hinf_norm(T, tol=1e-7)
        if norm > gamma * (1.0 + 1e-6):
            raise SynthesisError(f"verification failed: norm {norm:.6g} exceeds gamma {gamma:.6g}")
    return SynthesisResult(Gs=Gs, Ks=-K_pos, gamma_min=gmin, gamma=gamma, X=X, Z=Z, verification_norm=norm)


def final_controller(result: SynthesisResult, plant: StateSpaceModel | None = None) -> StateSpaceModel:
    """``K = W1 Ks W2`` for negative feedback around the unshaped plant."""
    if result.weights is None:
        K = result.Ks
    else:
        W1, W2 = result.weights
        K = series(series(W2, result.Ks), W1)
    plant = plant if plant is not None else result.plant
    if plant is not None:
        cl = feedback(series(K, plant), sign=-1.0)
        if not cl.is_stable():
            raise UnstableSystemError(
                f"closed loop with final controller is unstable (abscissa {cl.spectral_abscissa():.3g})")
    return K


def prefilter_gain(result: SynthesisResult, routing=PILOT_ROUTING) -> np.ndarray:
    """Static reference gain ``Ks(0) W2(0)`` mapped onto the two pilot channels."""
    Ks = result.Ks
    if Ks.n_states and np.linalg.cond(Ks.A) > 1e12:
        raise SynthesisError("controller has a pole at the origin; DC gain undefined")
    P = Ks.dc_gain()
    if result.weights is not None:
        P = P @ result.weights[1].dc_gain()
    return P @ np.asarray(routing, dtype=float)


def loop_shaping_design(G: StateSpaceModel, weights: LoopShapingWeights | None = None,
                        gamma_rel_tol: float = 0.05) -> SynthesisResult:
    """Shape, synthesize, then attach the final controller and prefilter."""
    weights = weights or build_weights()
    W1, W2 = weights.as_state_space()
    Gs = shape_plant(G, (W1, W2))
    res = ncf_synthesis(Gs, gamma_rel_tol)
    res = SynthesisResult(**{**res.__dict__, "plant": G, "weights": (W1, W2)})
    K = final_controller(res, G)
    return SynthesisResult(**{**res.__dict__, "K": K, "prefilter": prefilter_gain(res)})


# ------------------------------------------------------------ loop analysis

def _identity(n):
    return StateSpaceModel.static(np.eye(n))


def closed_loop_maps(G: StateSpaceModel, K: StateSpaceModel) -> dict:
    """Input/output sensitivity and complementary sensitivity for ``u = -K y``."""
    Li = series(G, K)
    Lo = series(K, G)
    S_in = feedback(_identity(Li.n_outputs), -1.0, Li)
    S_out = feedback(_identity(Lo.n_outputs), -1.0, Lo)
    T_in = feedback(Li, -1.0)
    T_out = feedback(Lo, -1.0)
    return {"S_in": S_in, "S_out": S_out, "T_in": T_in, "T_out": T_out}


@dataclass(frozen=True)
class ChannelMargin:
    channel: str
    alpha: float
    gain_interval: tuple
    phase_margin: float


@dataclass(frozen=True)
class MarginReport:
    channels: tuple
    multiloop: ChannelMargin

    def by_channel(self, name: str) -> ChannelMargin:
        for c in self.channels:
            if c.channel == name:
                return c
        raise KeyError(name)


def disk_from_alpha(alpha: float, channel: str = "") -> ChannelMargin:
    alpha = float(alpha)
    if alpha >= 2.0:
        gi = ((2.0 - alpha) / (2.0 + alpha) if math.isfinite(alpha) else -1.0, math.inf)
    else:
        gi = ((2.0 - alpha) / (2.0 + alpha), (2.0 + alpha) / (2.0 - alpha))
    pm = 180.0 if not math.isfinite(alpha) else math.degrees(2.0 * math.atan(alpha / 2.0))
    return ChannelMargin(channel, alpha, gi, pm)


def _disk_alpha(S: StateSpaceModel) -> float:
    # (I - L)(I + L)^-1 = 2 S - I
    E = parallel(StateSpaceModel(S.A, S.B, 2.0 * S.C, 2.0 * S.D), _identity(S.n_outputs), sign=-1.0)
    norm = hinf_norm(E) if E.n_states else float(np.linalg.norm(E.D, 2))
    return math.inf if norm == 0.0 else 1.0 / norm


def disk_margin(L: StateSpaceModel, labels=None) -> MarginReport:
    """Balanced disk margins of a square loop ``L`` under negative feedback.

    Per-channel values are loop-at-a-time (all other loops closed); the
    multiloop record perturbs every channel simultaneously. An infinite
    ``alpha`` means no finite disk perturbation destabilizes the loop.
    """
    if L.n_inputs != L.n_outputs:
        raise ValueError("loop transfer must be square")
    n = L.n_outputs
    S = feedback(_identity(n), -1.0, L)
    if S.n_states and not S.is_stable():
        raise UnstableSystemError("nominal closed loop is unstable")
    labels = labels or L.output_labels or tuple(f"ch{i}" for i in range(n))
    chans = tuple(disk_from_alpha(_disk_alpha(S.select([i], [i])), labels[i]) for i in range(n))
    return MarginReport(chans, disk_from_alpha(_disk_alpha(S), "multiloop"))


def loop_margins(G: StateSpaceModel, K: StateSpaceModel) -> dict:
    """Disk margins at the plant input (``K G``) and output (``G K``)."""
    Li = series(G, K)
    Lo = series(K, G)
    return {
        "input": disk_margin(Li, labels=G.input_labels or None),
        "output": disk_margin(Lo, labels=G.output_labels or None),
    }
