"""Compiled versus interpreted kernel timings.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--runs 20]

The in-process section times each compiled kernel against its ``py_func``
(the same source with the outer loop interpreted; helpers it calls stay
compiled). The campaign section runs a short Monte-Carlo twice in
subprocesses, once per backend, selected with the ``DIFFTHRUST_DISABLE_NUMBA``
environment flag; that is the honest end-to-end comparison.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from diffthrust import _kernels
from diffthrust.airframe import golden_plant
from diffthrust.config import load_config
from diffthrust.sim import SimConfig, closed_loop_arrays
from diffthrust.synthesis import loop_shaping_design

CAMPAIGN = """
import time
from diffthrust import _kernels
from diffthrust.airframe import golden_plant
from diffthrust.config import load_config
from diffthrust.robustness import UncertaintySpec, run_campaign
from diffthrust.sim import SimConfig
from diffthrust.synthesis import loop_shaping_design
cfg = load_config(); G = golden_plant(); d = loop_shaping_design(G)
spec = UncertaintySpec(count={runs})
run_campaign(G, d, d.prefilter, cfg.mapping, UncertaintySpec(count=1), SimConfig(duration=30.0))
t0 = time.perf_counter()
rep = run_campaign(G, d, d.prefilter, cfg.mapping, spec, SimConfig(duration=30.0))
print(_kernels.backend(), time.perf_counter() - t0, rep.stats["peak_dT_lbf"].max)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def in_process(repeat):
    if not _kernels.NUMBA_ENABLED:
        print("numba backend not active; skipping in-process comparison")
        return
    cfg = load_config()
    G = golden_plant()
    d = loop_shaping_design(G)
    args = closed_loop_arrays(G, d, d.prefilter, cfg.mapping, SimConfig())
    rng = np.random.default_rng(0)
    sig = rng.standard_normal(4001) * 5e4
    y = np.cumsum(rng.standard_normal((4001, 4)), axis=0)
    A = rng.standard_normal((4, 4)) - 3 * np.eye(4)
    B = rng.standard_normal((4, 2))
    U = rng.standard_normal((4001, 2))
    cases = {
        "closed_loop_kernel (40 s, dt 0.01)": (_kernels.closed_loop_kernel, (), args),
        "rk4_lti_kernel (4 states, 4001 steps)": (_kernels.rk4_lti_kernel, (A, B, U, np.zeros(4), 0.01), {}),
        "rate_limit_kernel (4001 samples)": (_kernels.rate_limit_kernel, (sig, 12726.0, 0.01, 0.0), {}),
        "settling_kernel (4001 x 4)": (_kernels.settling_kernel, (y, 0.02, 100), {}),
    }
    print(f"{'kernel':40s} {'numba (ms)':>12s} {'py_func (ms)':>12s} {'speed-up':>9s}")
    for name, (kern, a, kw) in cases.items():
        kern(*a, **kw)  # compile outside the timed region
        t_fast, r1 = best_of(lambda: kern(*a, **kw), repeat)
        t_slow, r2 = best_of(lambda: kern.py_func(*a, **kw), max(1, repeat // 2))
        first = r1[0] if isinstance(r1, tuple) else r1
        second = r2[0] if isinstance(r2, tuple) else r2
        diff = float(np.max(np.abs(np.asarray(first, dtype=float) - np.asarray(second, dtype=float))))
        print(f"{name:40s} {1e3 * t_fast:12.3f} {1e3 * t_slow:12.1f} {t_slow / t_fast:8.0f}x  max|diff| {diff:.1e}")


def campaigns(runs):
    print(f"\nMonte-Carlo campaign, {runs} runs of 30 s")
    for flag in ("0", "1"):
        env = dict(os.environ, DIFFTHRUST_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", CAMPAIGN.format(runs=runs)], env=env,
                             capture_output=True, text=True, check=True)
        backend, seconds, peak = out.stdout.split()
        print(f"  {backend:6s} {float(seconds):8.2f} s   max peak dT {float(peak):.3f} lbf")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--runs", type=int, default=20)
    a = p.parse_args(argv)
    in_process(a.repeat)
    campaigns(a.runs)


if __name__ == "__main__":
    main()
