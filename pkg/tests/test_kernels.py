"""Compiled kernels against their interpreted source."""
from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from diffthrust import _kernels
from diffthrust.sim import SimConfig, closed_loop_arrays

pytestmark = pytest.mark.skipif(not _kernels.NUMBA_ENABLED, reason="numba backend not active")


def py(kernel):
    return kernel.py_func


def test_rk4_kernel(rng):
    A = rng.standard_normal((4, 4)) - 3 * np.eye(4)
    B = rng.standard_normal((4, 2))
    U = rng.standard_normal((300, 2))
    x0 = rng.standard_normal(4)
    np.testing.assert_allclose(_kernels.rk4_lti_kernel(A, B, U, x0, 0.01),
                               py(_kernels.rk4_lti_kernel)(A, B, U, x0, 0.01), rtol=1e-12, atol=1e-14)


def test_rate_limit_and_engine_kernels(rng):
    sig = rng.standard_normal(500) * 5e4
    np.testing.assert_allclose(_kernels.rate_limit_kernel(sig, 12726.0, 0.01, 0.0),
                               py(_kernels.rate_limit_kernel)(sig, 12726.0, 0.01, 0.0), rtol=1e-12)
    Ae = np.array([[0.0, 1.0], [-0.64, -1.6]])
    Be = np.array([[0.0], [0.64]])
    Ce = np.array([[1.0, 0.0]])
    args = (Ae, Be, Ce, sig, 40, 0.01, np.zeros(2), 0.0, 43729.0, 12726.0, 0.0)
    np.testing.assert_allclose(_kernels.engine_kernel(*args), py(_kernels.engine_kernel)(*args), rtol=1e-12,
                               atol=1e-9)


def test_settling_kernel(rng):
    y = np.cumsum(rng.standard_normal((800, 3)), axis=0) * np.exp(-np.arange(800) / 100.0)[:, None]
    np.testing.assert_array_equal(_kernels.settling_kernel(y, 0.02, 100),
                                  py(_kernels.settling_kernel)(y, 0.02, 100))


def test_closed_loop_kernel(plant, design, mapping):
    cfg = SimConfig(duration=10.0)
    args = closed_loop_arrays(plant, design, design.prefilter, mapping, cfg, perturbation=0.05 * np.ones((4, 2)))
    s1, st1 = _kernels.closed_loop_kernel(**args)
    s2, st2 = py(_kernels.closed_loop_kernel)(**args)
    assert st1 == st2
    np.testing.assert_allclose(s1, s2, rtol=1e-9, atol=1e-9)


def test_lti_step_kernel(rng):
    Ad = rng.standard_normal((3, 3)) * 0.3
    Bd = rng.standard_normal((3, 2))
    np.testing.assert_allclose(_kernels.lti_step_kernel(Ad, Bd, 50), py(_kernels.lti_step_kernel)(Ad, Bd, 50),
                               rtol=1e-12, atol=1e-14)


NUMPY_TRACE = """
import sys
import numpy as np
from diffthrust import _kernels
from diffthrust.airframe import golden_plant
from diffthrust.config import load_config
from diffthrust.sim import SimConfig, simulate_closed_loop
from diffthrust.synthesis import loop_shaping_design
assert _kernels.backend() == "numpy"
G = golden_plant(); d = loop_shaping_design(G)
tr = simulate_closed_loop(G, d, d.prefilter, load_config().mapping, SimConfig(duration=8.0),
                          perturbation=0.05 * np.ones((4, 2)))
np.save(sys.argv[1], tr.table())
"""


def test_numpy_backend_matches_compiled(tmp_path, plant, design, mapping):
    out = tmp_path / "trace.npy"
    env = dict(os.environ, DIFFTHRUST_DISABLE_NUMBA="1")
    subprocess.run([sys.executable, "-c", NUMPY_TRACE, str(out)], env=env, check=True)
    from diffthrust.sim import simulate_closed_loop

    tr = simulate_closed_loop(plant, design, design.prefilter, mapping, SimConfig(duration=8.0),
                              perturbation=0.05 * np.ones((4, 2)))
    np.testing.assert_allclose(np.load(out), tr.table(), rtol=1e-9, atol=1e-9)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, DIFFTHRUST_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from diffthrust import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
