"""Both kernel backends must agree; the env flag must select the numpy path."""

import os
import subprocess
import sys

import numpy as np

from nopnet import kernels


def test_backend_is_reported():
    assert kernels.BACKEND in ("numba", "numpy")


def test_forward_paths_agree(rng):
    for n, f, h, e in [(1, 3, 3, 4), (17, 10, 3, 4), (64, 100, 7, 4)]:
        x = rng.normal(size=(n, e))
        w = rng.normal(size=(f, h, e))
        a = kernels._conv1d_forward_np(x, w)
        b = kernels._conv1d_forward_nb(x, w) if kernels._HAS_NUMBA else a
        assert np.allclose(a, b, atol=1e-12)


def test_backward_paths_agree(rng):
    for n, f, h, e in [(2, 3, 3, 4), (23, 10, 5, 4), (40, 20, 7, 4)]:
        x = rng.normal(size=(n, e))
        w = rng.normal(size=(f, h, e))
        up = rng.normal(size=(n, f))
        dxa, dwa = kernels._conv1d_backward_np(x, w, up)
        if kernels._HAS_NUMBA:
            dxb, dwb = kernels._conv1d_backward_nb(x, w, up)
            assert np.allclose(dxa, dxb, atol=1e-12)
            assert np.allclose(dwa, dwb, atol=1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, NOPNET_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c",
         "from nopnet.kernels import BACKEND; print(BACKEND)"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_bad_env_flag_rejected():
    env = dict(os.environ, NOPNET_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import nopnet.kernels"],
        env=env, capture_output=True, text=True)
    assert out.returncode != 0
    assert "NOPNET_BACKEND" in out.stderr
