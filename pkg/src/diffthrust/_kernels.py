"""Time-stepping kernels.

Each kernel is plain numpy-on-scalars code. When numba is importable and
``DIFFTHRUST_DISABLE_NUMBA`` is unset (or "0"), the kernels are compiled with
``numba.njit``; otherwise the identical source runs as ordinary Python. Both
paths produce the same numbers up to floating-point reassociation.
"""
from __future__ import annotations

import os

import numpy as np

_FLAG = "DIFFTHRUST_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "0").strip().lower() in ("", "0", "false", "no")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is optional at runtime
        NUMBA_ENABLED = False


def jit(func):
    if NUMBA_ENABLED:
        return _njit(cache=True, nogil=True)(func)
    return func


def backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def _mv_loops(M, x):
    n, m = M.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(m):
            acc += M[i, j] * x[j]
        out[i] = acc
    return out


def _mv_numpy(M, x):
    return M @ x


def _dot_loops(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


def _dot_numpy(a, b):
    return float(a @ b)


# BLAS call overhead dominates for the tiny matrices here, so the compiled
# path uses explicit loops; the interpreted path keeps the vectorized product.
_mv = jit(_mv_loops) if NUMBA_ENABLED else _mv_numpy
_dot = jit(_dot_loops) if NUMBA_ENABLED else _dot_numpy


@jit
def _clip(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@jit
def lti_step_kernel(Ad, Bd, nt):
    """States of ``x[k+1] = Ad x[k] + Bd e_j`` for every unit input ``e_j``."""
    n = Ad.shape[0]
    m = Bd.shape[1]
    X = np.zeros((nt, n, m))
    for j in range(m):
        x = np.zeros(n)
        b = Bd[:, j].copy()
        for k in range(1, nt):
            x = _mv(Ad, x) + b
            X[k, :, j] = x
    return X


@jit
def rk4_lti_kernel(A, B, U, x0, dt):
    """Classical RK4 for ``x' = A x + B u`` with ``u`` held over each step."""
    nt = U.shape[0]
    n = A.shape[0]
    X = np.zeros((nt, n))
    x = x0.copy()
    X[0] = x
    h = dt
    for k in range(nt - 1):
        bu = _mv(B, U[k])
        k1 = _mv(A, x) + bu
        k2 = _mv(A, x + 0.5 * h * k1) + bu
        k3 = _mv(A, x + 0.5 * h * k2) + bu
        k4 = _mv(A, x + h * k3) + bu
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X[k + 1] = x
    return X


@jit
def rate_limit_kernel(signal, rate, dt, y0):
    out = np.empty_like(signal)
    prev = y0
    step = rate * dt
    for k in range(signal.shape[0]):
        y = _clip(signal[k], prev - step, prev + step)
        out[k] = y
        prev = y
    return out


@jit
def engine_kernel(Ae, Be, Ce, cmd, delay, dt, x0, fill, sat, rate, y0):
    """Saturate -> pure delay -> second-order engine -> slope limit.

    ``cmd`` is sampled on the simulation grid; the delay is a FIFO of
    ``delay`` samples pre-filled with ``fill``. Returns the delivered series.
    """
    nt = cmd.shape[0]
    be = Be[:, 0].copy()
    ce = Ce[0].copy()
    buf = np.full(max(delay, 1), fill)
    head = 0
    x = x0.copy()
    out = np.empty(nt)
    prev = y0
    step = rate * dt
    h = dt
    for k in range(nt):
        c = _clip(cmd[k], -sat, sat)
        if delay > 0:
            cd = buf[head]
            buf[head] = c
            head = (head + 1) % delay
        else:
            cd = c
        y = _clip(_dot(ce, x), prev - step, prev + step)
        out[k] = y
        prev = y
        if k == nt - 1:
            break
        k1 = _mv(Ae, x) + be * cd
        k2 = _mv(Ae, x + 0.5 * h * k1) + be * cd
        k3 = _mv(Ae, x + 0.5 * h * k2) + be * cd
        k4 = _mv(Ae, x + h * k3) + be * cd
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


@jit
def _loop_eval(z, Ap, Bp, Cp, Dp, Ac, Bc, Cc, Aw, Bw, Cw, Dw, Ae, Be, Ce,
               pa, tc, tc_del, use_engine, kmap, da_lim, dT_sat,
               da_lo, da_hi, dT_lo, dT_hi, eng_lo, eng_hi, dz, sig):
    n_p = Ap.shape[0]
    n_c = Ac.shape[0]
    n_w = Aw.shape[0]
    n_e = Ae.shape[0]
    o_c = n_p
    o_w = o_c + n_c
    o_e = o_w + n_w
    x = z[:n_p]
    xc = z[o_c:o_w]
    xw = z[o_w:o_e]
    xe = z[o_e:o_e + n_e]

    if use_engine:
        ta = _clip(_dot(Ce[0], xe), eng_lo, eng_hi)
    else:
        ta = _clip(tc, eng_lo, eng_hi)
    fb = _mv(Cc, xc)
    v = np.empty(2)
    v[0] = pa + fb[0]
    v[1] = ta / kmap + fb[1]
    ucmd = _mv(Cw, xw) + _mv(Dw, v)
    da_cmd = ucmd[0]
    dT_cmd = ucmd[1] * kmap
    da = _clip(_clip(da_cmd, -da_lim, da_lim), da_lo, da_hi)
    dT = _clip(_clip(dT_cmd, -dT_sat, dT_sat), dT_lo, dT_hi)
    u = np.empty(2)
    u[0] = da
    u[1] = dT / kmap
    y = _mv(Cp, x) + _mv(Dp, u)

    dz[:n_p] = _mv(Ap, x) + _mv(Bp, u)
    dz[o_c:o_w] = _mv(Ac, xc) + _mv(Bc, y)
    dz[o_w:o_e] = _mv(Aw, xw) + _mv(Bw, v)
    dz[o_e:o_e + n_e] = _mv(Ae, xe) + Be[:, 0] * tc_del

    n_y = y.shape[0]
    sig[:n_y] = y
    sig[n_y] = da_cmd
    sig[n_y + 1] = da
    sig[n_y + 2] = dT_cmd
    sig[n_y + 3] = dT
    sig[n_y + 4] = ta


@jit
def closed_loop_kernel(Ap, Bp, Cp, Dp, Ac, Bc, Cc, Aw, Bw, Cw, Dw, Ae, Be, Ce,
                       pilot, limits, kmap, delay, dt, guard, use_engine):
    """Fixed-step RK4 of the constrained differential-thrust loop.

    Signal flow per sample::

        pilot[:, 0] -> clip(+-pilot aileron limit)          -> pa
        pilot[:, 1] * kmap -> clip(+-sat) -> delay -> engine -> slope limit -> ta
        v = [pa, ta / kmap] + Cc xc          (Cc carries the feedback sign)
        u_cmd = W1(v);  u = actuator limits(u_cmd)
        y = Cp x + Dp u;  controller state xc driven by y

    ``limits`` = [pilot_da_lim, da_lim, da_rate, dT_sat, dT_rate] in rad,
    rad, rad/s, lbf, lbf/s (``inf`` disables). Returns ``(sig, status)``
    where ``sig[k]`` = [y..., da_cmd, da, dT_cmd, dT, pilot_dT] and
    ``status`` is -1, or the first sample index at which ``|x|`` exceeded
    ``guard``.
    """
    nt = pilot.shape[0]
    n_p = Ap.shape[0]
    n_z = n_p + Ac.shape[0] + Aw.shape[0] + Ae.shape[0]
    n_y = Cp.shape[0]
    pilot_da_lim = limits[0]
    da_lim = limits[1]
    da_step = limits[2] * dt
    dT_sat = limits[3]
    dT_step = limits[4] * dt

    sig = np.zeros((nt, n_y + 5))
    z = np.zeros(n_z)
    dz = np.zeros(n_z)
    s_tmp = np.zeros(n_y + 5)
    k1 = np.zeros(n_z)
    k2 = np.zeros(n_z)
    k3 = np.zeros(n_z)
    k4 = np.zeros(n_z)
    buf = np.zeros(max(delay, 1))
    head = 0
    prev_da = 0.0
    prev_dT = 0.0
    prev_ta = 0.0
    status = -1
    h = dt
    for k in range(nt):
        pa = _clip(pilot[k, 0], -pilot_da_lim, pilot_da_lim)
        tc = _clip(pilot[k, 1] * kmap, -dT_sat, dT_sat)
        if delay > 0:
            tc_del = buf[head]
            buf[head] = tc
            head = (head + 1) % delay
        else:
            tc_del = tc
        da_lo = prev_da - da_step
        da_hi = prev_da + da_step
        dT_lo = prev_dT - dT_step
        dT_hi = prev_dT + dT_step
        e_lo = prev_ta - dT_step
        e_hi = prev_ta + dT_step
        _loop_eval(z, Ap, Bp, Cp, Dp, Ac, Bc, Cc, Aw, Bw, Cw, Dw, Ae, Be, Ce,
                   pa, tc, tc_del, use_engine, kmap, da_lim, dT_sat,
                   da_lo, da_hi, dT_lo, dT_hi, e_lo, e_hi, dz, s_tmp)
        sig[k] = s_tmp
        prev_da = s_tmp[n_y + 1]
        prev_dT = s_tmp[n_y + 3]
        prev_ta = s_tmp[n_y + 4]
        if np.max(np.abs(z[:n_p])) > guard or not np.all(np.isfinite(z)):
            status = k
            break
        if k == nt - 1:
            break
        da_lo = prev_da - da_step
        da_hi = prev_da + da_step
        dT_lo = prev_dT - dT_step
        dT_hi = prev_dT + dT_step
        e_lo = prev_ta - dT_step
        e_hi = prev_ta + dT_step
        _loop_eval(z, Ap, Bp, Cp, Dp, Ac, Bc, Cc, Aw, Bw, Cw, Dw, Ae, Be, Ce,
                   pa, tc, tc_del, use_engine, kmap, da_lim, dT_sat,
                   da_lo, da_hi, dT_lo, dT_hi, e_lo, e_hi, k1, s_tmp)
        _loop_eval(z + 0.5 * h * k1, Ap, Bp, Cp, Dp, Ac, Bc, Cc, Aw, Bw, Cw, Dw, Ae, Be, Ce,
                   pa, tc, tc_del, use_engine, kmap, da_lim, dT_sat,
                   da_lo, da_hi, dT_lo, dT_hi, e_lo, e_hi, k2, s_tmp)
        _loop_eval(z + 0.5 * h * k2, Ap, Bp, Cp, Dp, Ac, Bc, Cc, Aw, Bw, Cw, Dw, Ae, Be, Ce,
                   pa, tc, tc_del, use_engine, kmap, da_lim, dT_sat,
                   da_lo, da_hi, dT_lo, dT_hi, e_lo, e_hi, k3, s_tmp)
        _loop_eval(z + h * k3, Ap, Bp, Cp, Dp, Ac, Bc, Cc, Aw, Bw, Cw, Dw, Ae, Be, Ce,
                   pa, tc, tc_del, use_engine, kmap, da_lim, dT_sat,
                   da_lo, da_hi, dT_lo, dT_hi, e_lo, e_hi, k4, s_tmp)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if status >= 0:
        sig = sig[:status + 1].copy()
    return sig, status


@jit
def settling_kernel(y, band, window):
    """Per-column settling index against the mean of the last ``window`` samples.

    The tolerance is ``band * max(|final|, peak |y|)`` so channels that
    return to zero still get a meaningful band. Returns -1 for a column that
    is still outside the band at the start of the final window.
    """
    nt, nc = y.shape
    out = np.full(nc, -1, dtype=np.int64)
    w = max(1, min(window, nt))
    for j in range(nc):
        final = 0.0
        for k in range(nt - w, nt):
            final += y[k, j]
        final /= w
        peak = 0.0
        for k in range(nt):
            a = abs(y[k, j])
            if a > peak:
                peak = a
        tol = band * max(abs(final), peak)
        last_bad = -1
        for k in range(nt):
            if abs(y[k, j] - final) > tol:
                last_bad = k
        idx = last_bad + 1
        if idx <= nt - w:
            out[j] = idx
    return out
