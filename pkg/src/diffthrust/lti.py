"""Continuous-time LTI systems: realizations, interconnections and solvers.

Everything here is a pure function of immutable values. Matrices follow the
usual ``x' = A x + B u, y = C x + D u`` convention and angles are radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as spla

from ._kernels import lti_step_kernel


class LTIError(Exception):
    """Numerical failure in the LTI layer."""


class SingularSystemError(LTIError):
    pass


class AlgebraicLoopError(LTIError):
    pass


class RiccatiError(LTIError):
    pass


class UnstableSystemError(LTIError):
    pass


def _as_matrix(M, rows=None, cols=None, name="matrix") -> np.ndarray:
    M = np.array(M, dtype=float, copy=True)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim == 1:
        M = M.reshape(1, -1) if rows in (None, 1) else M.reshape(-1, 1)
    if M.size == 0:
        M = np.zeros((rows or 0, cols or 0))
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class StateSpaceModel:
    """State-space quadruple with channel labels.

    Arrays are copied and frozen on construction, so instances can be shared
    freely between threads.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.size == 0:
            A = np.zeros((0, 0))
        A = _as_matrix(A, name="A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        D = _as_matrix(self.D, name="D")
        p, m = D.shape
        B = _as_matrix(self.B, n, m, "B") if n else np.zeros((0, m))
        C = _as_matrix(self.C, p, n, "C") if n else np.zeros((p, 0))
        if B.shape != (n, m):
            raise ValueError(f"B must be {n}x{m}, got {B.shape}")
        if C.shape != (p, n):
            raise ValueError(f"C must be {p}x{n}, got {C.shape}")
        for M in (A, B, C, D):
            if not np.all(np.isfinite(M)):
                raise ValueError("state-space matrices must be finite")
            M.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        for attr, count, prefix in (("state_labels", n, "x"),
                                    ("input_labels", m, "u"),
                                    ("output_labels", p, "y")):
            labels = tuple(getattr(self, attr)) or tuple(f"{prefix}{i}" for i in range(count))
            if len(labels) != count:
                raise ValueError(f"{attr} has {len(labels)} entries, expected {count}")
            object.__setattr__(self, attr, labels)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    @classmethod
    def static(cls, gain, input_labels=(), output_labels=()) -> "StateSpaceModel":
        D = _as_matrix(gain)
        return cls(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D,
                   (), input_labels, output_labels)

    def relabel(self, state_labels=None, input_labels=None, output_labels=None) -> "StateSpaceModel":
        return StateSpaceModel(self.A, self.B, self.C, self.D,
                               self.state_labels if state_labels is None else tuple(state_labels),
                               self.input_labels if input_labels is None else tuple(input_labels),
                               self.output_labels if output_labels is None else tuple(output_labels))

    def evaluate(self, s: complex) -> np.ndarray:
        """Transfer matrix ``C (sI - A)^-1 B + D`` at the complex point ``s``."""
        if self.n_states == 0:
            return self.D.astype(complex)
        M = s * np.eye(self.n_states) - self.A
        try:
            X = np.linalg.solve(M, self.B)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"sI - A is singular at s={s}") from exc
        if np.linalg.cond(M) > 1e14:
            raise SingularSystemError(f"sI - A is singular at s={s}")
        return self.C @ X + self.D

    def dc_gain(self) -> np.ndarray:
        return self.evaluate(0.0).real

    def poles(self) -> np.ndarray:
        return eigenvalues(self.A) if self.n_states else np.zeros(0, dtype=complex)

    def spectral_abscissa(self) -> float:
        return float(np.max(self.poles().real)) if self.n_states else -math.inf

    def is_stable(self) -> bool:
        return self.spectral_abscissa() < 0.0

    def transform(self, T) -> "StateSpaceModel":
        """Similarity transform with new state ``z = T^-1 x``."""
        T = np.asarray(T, dtype=float)
        Ti = np.linalg.inv(T)
        return StateSpaceModel(Ti @ self.A @ T, Ti @ self.B, self.C @ T, self.D,
                               (), self.input_labels, self.output_labels)

    def select(self, outputs=None, inputs=None) -> "StateSpaceModel":
        o = slice(None) if outputs is None else list(outputs)
        i = slice(None) if inputs is None else list(inputs)
        out_l = np.array(self.output_labels, dtype=object)[o]
        in_l = np.array(self.input_labels, dtype=object)[i]
        return StateSpaceModel(self.A, self.B[:, i], self.C[o, :], self.D[o][:, i],
                               self.state_labels, tuple(in_l), tuple(out_l))

    def __neg__(self) -> "StateSpaceModel":
        return StateSpaceModel(self.A, self.B, -self.C, -self.D, self.state_labels,
                               self.input_labels, self.output_labels)


@dataclass(frozen=True)
class TransferMatrix:
    """Rational transfer matrix stored channel by channel.

    ``num[i][j]`` and ``den[i][j]`` are coefficient sequences in descending
    powers of ``s`` for output ``i`` and input ``j``.
    """

    num: tuple
    den: tuple

    def __post_init__(self):
        num = tuple(tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in row) for row in self.num)
        den = tuple(tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in row) for row in self.den)
        if len(num) != len(den) or any(len(a) != len(b) for a, b in zip(num, den)):
            raise ValueError("numerator and denominator layouts differ")
        if len({len(row) for row in num}) > 1:
            raise ValueError("ragged transfer matrix")
        for nrow, drow in zip(num, den):
            for nc, dc in zip(nrow, drow):
                nc, dc = np.trim_zeros(nc, "f"), np.trim_zeros(dc, "f")
                if dc.size == 0 or dc[0] == 0.0:
                    raise ValueError("denominator leading coefficient must be nonzero")
                if nc.size > dc.size:
                    raise ValueError("improper channel: numerator degree exceeds denominator")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def diagonal(cls, channels: Sequence[tuple]) -> "TransferMatrix":
        k = len(channels)
        num = [[(0.0,) for _ in range(k)] for _ in range(k)]
        den = [[(1.0,) for _ in range(k)] for _ in range(k)]
        for i, (nc, dc) in enumerate(channels):
            num[i][i], den[i][i] = nc, dc
        return cls(num, den)

    @property
    def shape(self):
        return len(self.num), len(self.num[0]) if self.num else 0

    def evaluate(self, s: complex) -> np.ndarray:
        p, m = self.shape
        out = np.zeros((p, m), dtype=complex)
        for i in range(p):
            for j in range(m):
                out[i, j] = np.polyval(self.num[i][j], s) / np.polyval(self.den[i][j], s)
        return out

    def dc_gain(self) -> np.ndarray:
        return self.evaluate(0.0).real

    def channel(self, i: int, j: int) -> tuple:
        return self.num[i][j], self.den[i][j]

    def to_state_space(self, input_labels=(), output_labels=()) -> StateSpaceModel:
        """Controllable canonical form per channel, aggregated block-diagonally."""
        p, m = self.shape
        blocks = []
        for i in range(p):
            for j in range(m):
                a, b, c, d = _channel_realization(self.num[i][j], self.den[i][j])
                blocks.append((i, j, a, b, c, d))
        n = sum(blk[2].shape[0] for blk in blocks)
        A = np.zeros((n, n))
        B = np.zeros((n, m))
        C = np.zeros((p, n))
        D = np.zeros((p, m))
        k = 0
        for i, j, a, b, c, d in blocks:
            r = a.shape[0]
            A[k:k + r, k:k + r] = a
            B[k:k + r, j] = b[:, 0]
            C[i, k:k + r] = c[0]
            D[i, j] += d
            k += r
        return StateSpaceModel(A, B, C, D, (), input_labels, output_labels)


def _channel_realization(num, den):
    num = np.trim_zeros(np.asarray(num, dtype=float), "f")
    den = np.trim_zeros(np.asarray(den, dtype=float), "f")
    if num.size == 0:
        num = np.zeros(1)
    num, den = num / den[0], den / den[0]
    n = den.size - 1
    num = np.concatenate([np.zeros(n + 1 - num.size), num])
    d = num[0]
    if n == 0 or np.allclose(num[1:] - d * den[1:], 0.0):
        return np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), d
    rem = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    return A, B, rem.reshape(1, n), d


# ---------------------------------------------------------------- analysis

def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a square real matrix (LAPACK Hessenberg-QR)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"eigenvalues needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if M.size == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(M).astype(complex)


def freq_response(sys: StateSpaceModel, omega: float) -> np.ndarray:
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return sys.evaluate(1j * omega)


def singular_values(sys: StateSpaceModel, omega_grid) -> np.ndarray:
    """Singular values (descending) of the frequency response on a grid.

    Returns an array of shape ``(len(omega_grid), min(p, m))``.
    """
    w = np.asarray(omega_grid, dtype=float).ravel()
    if w.size == 0:
        raise ValueError("empty frequency grid")
    if np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise ValueError("frequency grid must be positive and strictly increasing")
    return np.array([np.linalg.svd(freq_response(sys, x), compute_uv=False) for x in w])


def step_response(sys: StateSpaceModel, duration: float, dt: float):
    """Zero-state unit-step response of every input channel.

    Returns ``(t, Y)`` where ``Y[k, i, j]`` is output ``i`` at ``t[k]`` for a
    unit step on input ``j``. The discretization is exact for step inputs.
    """
    if dt <= 0 or duration < dt:
        raise ValueError("need dt > 0 and duration >= dt")
    nt = int(round(duration / dt)) + 1
    t = np.arange(nt) * dt
    n, m, p = sys.n_states, sys.n_inputs, sys.n_outputs
    Y = np.zeros((nt, p, m))
    if n == 0:
        Y[:] = sys.D
        return t, Y
    M = np.zeros((n + m, n + m))
    M[:n, :n] = sys.A * dt
    M[:n, n:] = sys.B * dt
    E = spla.expm(M)
    Ad, Bd = E[:n, :n], E[:n, n:]
    X = lti_step_kernel(np.ascontiguousarray(Ad), np.ascontiguousarray(Bd), nt)
    for j in range(m):
        Y[:, :, j] = X[:, :, j] @ sys.C.T + sys.D[:, j]
    return t, Y


@dataclass(frozen=True)
class Mode:
    name: str
    pole: complex
    damping: float
    frequency: float
    period: float


@dataclass(frozen=True)
class ModeReport:
    modes: tuple = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)

    def by_name(self, name: str) -> Mode:
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)


def _mode_record(pole: complex, name: str) -> Mode:
    wn = abs(pole)
    if wn == 0.0:
        return Mode(name, pole, -1.0 if pole.real >= 0 else 1.0, 0.0, math.inf)
    damping = -pole.real / wn
    return Mode(name, pole, damping, wn, 2.0 * math.pi / wn)


def modal_analysis(sys, conj_tol: float = 1e-9) -> ModeReport:
    """Pole/damping/frequency/period table, one row per real pole or pair.

    Periods are ``2*pi/wn`` with ``wn = |pole|``. For a four-state
    lateral model (one complex pair, two real poles) the rows are tagged
    dutch_roll / roll / spiral; otherwise oscillatory_k / real_k.
    """
    A = sys.A if isinstance(sys, StateSpaceModel) else np.asarray(sys, dtype=float)
    poles = eigenvalues(A)
    used = np.zeros(poles.size, dtype=bool)
    pairs, reals = [], []
    for k, lam in enumerate(poles):
        if used[k]:
            continue
        used[k] = True
        if abs(lam.imag) <= conj_tol * max(1.0, abs(lam)):
            reals.append(complex(lam.real, 0.0))
            continue
        partner = np.argmin(np.where(used, np.inf, np.abs(poles - lam.conjugate())))
        used[partner] = True
        pairs.append(complex(lam.real, abs(lam.imag)))
    modes = []
    if len(pairs) == 1 and len(reals) == 2:
        spiral, roll = sorted(reals, key=abs)
        modes = [_mode_record(pairs[0], "dutch_roll"), _mode_record(spiral, "spiral"),
                 _mode_record(roll, "roll")]
    else:
        modes += [_mode_record(p, f"oscillatory_{i}") for i, p in enumerate(pairs)]
        modes += [_mode_record(p, f"real_{i}") for i, p in enumerate(reals)]
    return ModeReport(tuple(modes))


# ---------------------------------------------------------- interconnection

def series(sys1: StateSpaceModel, sys2: StateSpaceModel) -> StateSpaceModel:
    """``sys2 * sys1``: the output of ``sys1`` drives ``sys2``."""
    if sys1.n_outputs != sys2.n_inputs:
        raise ValueError(f"series: {sys1.n_outputs} outputs cannot feed {sys2.n_inputs} inputs")
    n1, n2 = sys1.n_states, sys2.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = sys1.A
    A[n1:, :n1] = sys2.B @ sys1.C
    A[n1:, n1:] = sys2.A
    B = np.vstack([sys1.B, sys2.B @ sys1.D])
    C = np.hstack([sys2.D @ sys1.C, sys2.C])
    D = sys2.D @ sys1.D
    return StateSpaceModel(A, B, C, D, sys1.state_labels + sys2.state_labels,
                           sys1.input_labels, sys2.output_labels)


def parallel(sys1: StateSpaceModel, sys2: StateSpaceModel, sign: float = 1.0) -> StateSpaceModel:
    if (sys1.n_inputs, sys1.n_outputs) != (sys2.n_inputs, sys2.n_outputs):
        raise ValueError("parallel: systems must have identical input/output counts")
    A = spla.block_diag(sys1.A, sys2.A)
    B = np.vstack([sys1.B, sys2.B])
    C = np.hstack([sys1.C, sign * sys2.C])
    return StateSpaceModel(A, B, C, sys1.D + sign * sys2.D, sys1.state_labels + sys2.state_labels,
                           sys1.input_labels, sys1.output_labels)


def append_diagonal(*systems: StateSpaceModel) -> StateSpaceModel:
    A = spla.block_diag(*[s.A for s in systems])
    B = spla.block_diag(*[s.B for s in systems])
    C = spla.block_diag(*[s.C for s in systems])
    D = spla.block_diag(*[s.D for s in systems])
    n = sum(s.n_states for s in systems)
    A = A.reshape(n, n)
    B = B.reshape(n, -1)
    C = C.reshape(-1, n)
    labels = lambda attr: sum((getattr(s, attr) for s in systems), ())
    return StateSpaceModel(A, B, C, D, labels("state_labels"), labels("input_labels"),
                           labels("output_labels"))


def feedback(loop: StateSpaceModel, sign: float = -1.0, other: StateSpaceModel | None = None):
    """Close ``loop`` with ``other`` (default: identity) in the return path.

    ``y = loop(u + sign * other(y))``; ``sign=-1`` is negative feedback.
    """
    G1 = loop
    G2 = other if other is not None else StateSpaceModel.static(np.eye(G1.n_outputs))
    if G2.n_inputs != G1.n_outputs or G2.n_outputs != G1.n_inputs:
        raise ValueError("feedback: dimension mismatch between loop and return path")
    n1, n2 = G1.n_states, G2.n_states
    M = np.eye(G1.n_outputs) - sign * G1.D @ G2.D
    if np.linalg.cond(M) > 1e12:
        raise AlgebraicLoopError("I - sign*D1*D2 is singular")
    F = np.linalg.inv(M)
    # y1 = F (C1 x1 + sign D1 C2 x2 + D1 u);  e = u + sign (C2 x2 + D2 y1)
    Cy = np.hstack([F @ G1.C, sign * F @ G1.D @ G2.C])
    Dy = F @ G1.D
    Ce = sign * G2.D @ Cy + np.hstack([np.zeros((G1.n_inputs, n1)), sign * G2.C])
    De = np.eye(G1.n_inputs) + sign * G2.D @ Dy
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1] = G1.B @ Ce
    A[:n1, :n1] += G1.A
    A[n1:] = G2.B @ Cy
    A[n1:, n1:] += G2.A
    B = np.vstack([G1.B @ De, G2.B @ Dy])
    return StateSpaceModel(A, B, Cy, Dy, G1.state_labels + G2.state_labels,
                           G1.input_labels, G1.output_labels)


def _orth_range(M, tol):
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, s > tol]


def _reachable_basis(A, B, tol):
    n = A.shape[0]
    basis = _orth_range(B, tol)
    new = basis
    while basis.shape[1] < n and new.shape[1]:
        W = A @ new
        W = W - basis @ (basis.T @ W)
        new = _orth_range(W, tol)
        basis = np.hstack([basis, new])
    return basis


def minimal_realization(sys: StateSpaceModel, tol: float = 1e-8) -> StateSpaceModel:
    """Drop uncontrollable then unobservable states (orthogonal staircase)."""
    if sys.n_states == 0:
        return sys
    scale = max(1.0, np.linalg.norm(sys.A), np.linalg.norm(sys.B), np.linalg.norm(sys.C))
    V = _reachable_basis(sys.A, sys.B, tol * scale)
    A, B, C = V.T @ sys.A @ V, V.T @ sys.B, sys.C @ V
    W = _reachable_basis(A.T, C.T, tol * scale)
    A, B, C = W.T @ A @ W, W.T @ B, C @ W
    return StateSpaceModel(A, B, C, sys.D, (), sys.input_labels, sys.output_labels)


# ----------------------------------------------------------------- solvers

def are_residual(A, B, Q, R, X) -> np.ndarray:
    return A.T @ X + X @ A - X @ B @ np.linalg.solve(R, B.T @ X) + Q


def solve_are(A, B, Q, R, refine: bool = True) -> np.ndarray:
    """Stabilizing solution of ``A'X + XA - XBR^-1B'X + Q = 0``.

    Uses the ordered real Schur form of the Hamiltonian: the stable
    invariant subspace ``[U1; U2]`` gives ``X = U2 U1^-1``. Raises
    RiccatiError when the Hamiltonian has eigenvalues on the imaginary axis
    or the subspace basis is too ill-conditioned to invert.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    if B.shape[0] != n or Q.shape != (n, n) or R.shape != (B.shape[1], B.shape[1]):
        raise ValueError("solve_are: inconsistent dimensions")
    if not np.allclose(R, R.T) or np.min(np.linalg.eigvalsh(R)) <= 0:
        raise ValueError("R must be symmetric positive definite")
    Q = 0.5 * (Q + Q.T)
    G = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])
    # diagonal scaling keeps the Schur step well conditioned; it is a
    # similarity, so the invariant subspace is recovered with Dh below
    Hb, (scl, _) = spla.matrix_balance(H, permute=False, separate=True)
    lam = np.linalg.eigvals(Hb)
    hnorm = max(1.0, np.linalg.norm(H, 1))
    if np.any(np.abs(lam.real) <= 1e-9 * hnorm):
        raise RiccatiError("Hamiltonian has eigenvalues on the imaginary axis; "
                           "no stabilizing solution")
    T, U, sdim = spla.schur(Hb, output="real", sort="lhp")
    if sdim != n:
        raise RiccatiError(f"stable invariant subspace has dimension {sdim}, expected {n}")
    U = scl[:, None] * U[:, :n]
    U1, U2 = U[:n], U[n:]
    if np.linalg.cond(U1) > 1e12:
        raise RiccatiError("invariant subspace basis is ill-conditioned")
    X = np.linalg.solve(U1.T, U2.T).T
    X = 0.5 * (X + X.T)
    if refine:
        X = _newton_refine(A, B, Q, R, X)
    res = are_residual(A, B, Q, R, X)
    if np.linalg.norm(res) / max(1.0, np.linalg.norm(X)) > 1e-8:
        raise RiccatiError("Riccati residual above tolerance")
    Acl = A - B @ np.linalg.solve(R, B.T @ X)
    if np.max(eigenvalues(Acl).real) >= 0:
        raise RiccatiError("solution is not stabilizing")
    return X


def _newton_refine(A, B, Q, R, X, steps: int = 2):
    best, best_res = X, np.linalg.norm(are_residual(A, B, Q, R, X))
    for _ in range(steps):
        if best_res <= 1e-13 * max(1.0, np.linalg.norm(best)):
            break
        K = np.linalg.solve(R, B.T @ best)
        Ak = A - B @ K
        if np.max(np.linalg.eigvals(Ak).real) >= 0:
            break
        try:
            Xn = spla.solve_continuous_lyapunov(Ak.T, -(Q + K.T @ R @ K))
        except (np.linalg.LinAlgError, ValueError):
            break
        Xn = 0.5 * (Xn + Xn.T)
        res = np.linalg.norm(are_residual(A, B, Q, R, Xn))
        if res >= best_res:
            break
        best, best_res = Xn, res
    return best


def _hamiltonian_crossings(sys: StateSpaceModel, gamma: float) -> np.ndarray:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    R = gamma ** 2 * np.eye(sys.n_inputs) - D.T @ D
    Ri = np.linalg.inv(R)
    Ah = A + B @ Ri @ D.T @ C
    H = np.block([[Ah, B @ Ri @ B.T],
                  [-C.T @ (np.eye(sys.n_outputs) + D @ Ri @ D.T) @ C, -Ah.T]])
    lam = np.linalg.eigvals(H)
    mask = np.abs(lam.real) <= 1e-7 * np.maximum(1.0, np.abs(lam))
    return np.unique(np.abs(lam[mask].imag))


def _sigma_max(sys, w):
    return float(np.linalg.svd(sys.evaluate(1j * w), compute_uv=False)[0])


def hinf_norm(sys: StateSpaceModel, tol: float = 1e-6) -> float:
    """Peak gain of a stable system by Hamiltonian bisection.

    The lower bound always comes from actual frequency-response evaluations
    (a coarse grid, then every imaginary-axis crossing found), so it is a
    certified value; iteration stops once the bracket is within ``tol``.
    """
    if sys.n_states and not sys.is_stable():
        raise UnstableSystemError("H-infinity norm is undefined for an unstable system")
    dnorm = float(np.linalg.svd(sys.D, compute_uv=False)[0]) if sys.D.size else 0.0
    if sys.n_states == 0:
        return dnorm
    poles = sys.poles()
    mags = np.abs(poles[np.abs(poles) > 0])
    lo_w = min(1e-3, 0.1 * mags.min()) if mags.size else 1e-3
    hi_w = max(1e3, 10 * mags.max()) if mags.size else 1e3
    grid = np.concatenate([[0.0], np.logspace(np.log10(lo_w), np.log10(hi_w), 200),
                           np.abs(poles.imag), mags])
    lo = max(dnorm, max(_sigma_max(sys, w) for w in grid))
    if lo == 0.0:
        return 0.0
    hi = 10.0 * lo
    while _hamiltonian_crossings(sys, hi).size:
        lo = max(lo, max(_sigma_max(sys, w) for w in _hamiltonian_crossings(sys, hi)))
        hi *= 2.0
    while hi - lo > tol * lo:
        gamma = 0.5 * (lo + hi)
        crossings = _hamiltonian_crossings(sys, gamma)
        peak = max((_sigma_max(sys, w) for w in crossings), default=0.0)
        if peak >= gamma:
            lo = peak
        elif crossings.size:
            # near-tangent crossing: refine locally around the candidates
            lo = max(lo, peak, *(_local_peak(sys, w) for w in crossings))
            if lo >= gamma:
                continue
            hi = gamma
        else:
            hi = gamma
    return 0.5 * (lo + hi)


def _local_peak(sys, w0):
    from scipy.optimize import minimize_scalar
    span = max(1e-6, 1e-2 * w0)
    res = minimize_scalar(lambda w: -_sigma_max(sys, abs(w)), bounds=(max(0.0, w0 - span), w0 + span),
                          method="bounded", options={"xatol": 1e-10 * max(1.0, w0)})
    return -res.fun


def is_all_pass(sys: StateSpaceModel, omega_grid, tol: float = 1e-6) -> bool:
    s = singular_values(sys, omega_grid)
    return bool(np.all(np.abs(s - 1.0) <= tol))


__all__ = [
    "LTIError", "SingularSystemError", "AlgebraicLoopError", "RiccatiError", "UnstableSystemError",
    "StateSpaceModel", "TransferMatrix", "Mode", "ModeReport",
    "eigenvalues", "freq_response", "singular_values", "step_response", "modal_analysis",
    "series", "parallel", "append_diagonal", "feedback", "minimal_realization",
    "solve_are", "are_residual", "hinf_norm", "is_all_pass",
]
