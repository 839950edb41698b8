import os
import subprocess
import sys

import numpy as np
import pytest

from artifact import _kernels
from artifact.sampling import make_kernel

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not importable")


@needs_numba
@pytest.mark.parametrize("name", ["box", "linear", "keys", "bspline2"])
def test_interp_numba_matches_numpy(name):
    k = make_kernel(name)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(40, 30)) + 1j * rng.normal(size=(40, 30))
    u = rng.uniform(-1, 41, (500, 2))
    a, na = _kernels._interp_lattice_2d_nb(vals, u, k.code, k.radius, np.zeros(1), np.zeros(1), True)
    b, nb = _kernels.interp_lattice_2d_np(vals, u, k.code, k.radius, np.zeros(1), np.zeros(1), True)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    a, na = _kernels._interp_lattice_2d_nb(vals, u, k.code, k.radius, np.zeros(1), np.zeros(1), False)
    b, nb = _kernels.interp_lattice_2d_np(vals, u, k.code, k.radius, np.zeros(1), np.zeros(1), False)
    assert na == nb


@needs_numba
def test_sample_lines_numba_matches_numpy():
    rng = np.random.default_rng(1)
    lines = rng.normal(size=(7, 300)) + 0j
    pos = rng.uniform(-1.0, 4.0, (9, 7))
    a = _kernels._sample_lines_nb(lines, -0.5, 0.01, pos)
    b = _kernels.sample_lines_np(lines, -0.5, 0.01, pos)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_disable_switch_selects_numpy():
    env = dict(os.environ, ARTIFACT_DISABLE_NUMBA="1")
    code = "from artifact import _kernels; print(_kernels.backend())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
