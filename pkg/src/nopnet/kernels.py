"""Hot numeric kernels: same-length 1D convolution (forward and backward) and
the global max pool over time.

Two interchangeable implementations live here. The numba path JIT-compiles
explicit loops; the numpy path uses padded matmuls and ufunc reductions.
Selection happens once at import time via the NOPNET_BACKEND environment
variable ("numba" or "numpy"). Default is numba when importable, numpy
otherwise. Both paths compute the same float64 quantities; summation order
differs in the convolutions, so cross-backend results agree to rounding, not
bit-for-bit.

Convolution convention (shared by every caller): input x is (N, E), filters w
are (F, h, E) with h odd, output is (N, F). The input is zero-padded by
(h-1)/2 on each side so the time extent is preserved. No bias term.
"""

import os
import warnings

import numpy as np

BACKEND = os.environ.get("NOPNET_BACKEND", "").strip().lower()
if BACKEND not in ("numba", "numpy", ""):
    raise ValueError(f"NOPNET_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

_HAS_NUMBA = False
if BACKEND != "numpy":
    try:
        from numba import njit

        _HAS_NUMBA = True
    except ImportError:
        if BACKEND == "numba":
            warnings.warn("NOPNET_BACKEND=numba but numba is not importable; "
                          "falling back to the numpy path")
if not _HAS_NUMBA:
    BACKEND = "numpy"
elif BACKEND == "":
    BACKEND = "numba"


# ---------------------------------------------------------------- numpy path

def _conv1d_forward_np(x, w):
    n, e = x.shape
    f, h, _ = w.shape
    c = (h - 1) // 2
    xp = np.zeros((n + h - 1, e))
    xp[c:c + n] = x
    out = np.zeros((n, f))
    for j in range(h):
        out += xp[j:j + n] @ w[:, j, :].T
    return out


def _conv1d_backward_np(x, w, up):
    n, e = x.shape
    f, h, _ = w.shape
    c = (h - 1) // 2
    xp = np.zeros((n + h - 1, e))
    xp[c:c + n] = x
    dxp = np.zeros_like(xp)
    dw = np.empty_like(w)
    for j in range(h):
        dxp[j:j + n] += up @ w[:, j, :]
        dw[:, j, :] = up.T @ xp[j:j + n]
    return np.ascontiguousarray(dxp[c:c + n]), dw


def _max_pool_np(x):
    arg = np.argmax(x, axis=0)
    return x[arg, np.arange(x.shape[1])], arg


# ---------------------------------------------------------------- numba path

if _HAS_NUMBA:
    # Row-major padded input makes the window at t the contiguous slice
    # xpf[t*e : t*e + h*e]; flattening filters the same way turns the inner
    # loops into contiguous dot products the compiler can vectorize.

    @njit(cache=True)
    def _conv1d_forward_nb(x, w):
        n, e = x.shape
        f, h, _ = w.shape
        he = h * e
        c = (h - 1) // 2
        w2 = w.reshape(f, he)
        xp = np.zeros((n + h - 1, e))
        xp[c:c + n] = x
        xpf = xp.reshape((n + h - 1) * e)
        out = np.empty((n, f))
        for t in range(n):
            base = t * e
            for k in range(f):
                s = 0.0
                for q in range(he):
                    s += w2[k, q] * xpf[base + q]
                out[t, k] = s
        return out

    @njit(cache=True)
    def _conv1d_backward_nb(x, w, up):
        n, e = x.shape
        f, h, _ = w.shape
        he = h * e
        c = (h - 1) // 2
        w2 = w.reshape(f, he)
        xp = np.zeros((n + h - 1, e))
        xp[c:c + n] = x
        xpf = xp.reshape((n + h - 1) * e)
        dxpf = np.zeros((n + h - 1) * e)
        dw2 = np.zeros((f, he))
        for t in range(n):
            base = t * e
            for k in range(f):
                g = up[t, k]
                if g != 0.0:  # pool-routed upstreams are mostly zero
                    for q in range(he):
                        dxpf[base + q] += g * w2[k, q]
                        dw2[k, q] += g * xpf[base + q]
        dxp = dxpf.reshape(n + h - 1, e)
        dx = np.empty((n, e))
        dx[:] = dxp[c:c + n]
        return dx, dw2.reshape(f, h, e)

    @njit(cache=True)
    def _max_pool_nb(x):
        # Single row-major pass; strict > keeps the smallest index on ties.
        n, f = x.shape
        best = np.empty(f)
        arg = np.zeros(f, dtype=np.int64)
        for m in range(f):
            best[m] = x[0, m]
        for t in range(1, n):
            for m in range(f):
                v = x[t, m]
                if v > best[m]:
                    best[m] = v
                    arg[m] = t
        return best, arg


if BACKEND == "numba":
    conv1d_forward_kernel = _conv1d_forward_nb
    conv1d_backward_kernel = _conv1d_backward_nb
    max_pool_kernel = _max_pool_nb
else:
    conv1d_forward_kernel = _conv1d_forward_np
    conv1d_backward_kernel = _conv1d_backward_np
    max_pool_kernel = _max_pool_np
