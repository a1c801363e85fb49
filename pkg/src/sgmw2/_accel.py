"""Hot kernels: batched isotropic-mixture score / log-density and the EM update.

Every kernel has a numba implementation and a pure-numpy fallback with the
same signature. The numba path is used when numba imports cleanly and the
environment variable ``SGMW2_DISABLE_NUMBA`` is unset (or ``0``). Both paths
produce per-row results that do not depend on the number of threads.
"""

from __future__ import annotations

import os

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))


def _numba_requested() -> bool:
    flag = os.environ.get("SGMW2_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


# --------------------------------------------------------------------------
# numpy reference path
# --------------------------------------------------------------------------


def _log_resp_np(x, means, var, logw):
    sq = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return logw[None, :] - 0.5 * sq / var


def score_np(x, means, var, logw):
    lr = _log_resp_np(x, means, var, logw)
    lr -= lr.max(axis=1, keepdims=True)
    w = np.exp(lr)
    tot = w.sum(axis=1)
    return ((w @ means) / tot[:, None] - x) / var


def logpdf_np(x, means, var, logw):
    lr = _log_resp_np(x, means, var, logw)
    mx = lr.max(axis=1)
    lse = mx + np.log(np.exp(lr - mx[:, None]).sum(axis=1))
    return lse - 0.5 * x.shape[1] * (_LOG_2PI + np.log(var))


def em_step_np(x, means, var, logw, h, z, offset):
    modified = score_np(x, means, var, logw) + x + offset
    return x + h * (-x + 2.0 * modified) + np.sqrt(2.0 * h) * z


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

HAVE_NUMBA = False
if _numba_requested():
    try:
        import numba
        from numba import njit, prange

        HAVE_NUMBA = True
        # skip probing the system TBB (a version mismatch only produces a warning)
        if numba.config.THREADING_LAYER == "default":
            numba.config.THREADING_LAYER = "workqueue"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _row_score(x, i, means, var, logw, lr, out_row):
        m, d = means.shape
        mx = -np.inf
        for j in range(m):
            sq = 0.0
            for c in range(d):
                diff = x[i, c] - means[j, c]
                sq += diff * diff
            lr[j] = logw[j] - 0.5 * sq / var
            if lr[j] > mx:
                mx = lr[j]
        tot = 0.0
        for j in range(m):
            lr[j] = np.exp(lr[j] - mx)
            tot += lr[j]
        for c in range(d):
            acc = 0.0
            for j in range(m):
                acc += lr[j] * means[j, c]
            out_row[c] = (acc / tot - x[i, c]) / var

    @njit(cache=True, parallel=True)
    def _score_nb(x, means, var, logw):
        n, d = x.shape
        m = means.shape[0]
        out = np.empty((n, d))
        for i in prange(n):
            lr = np.empty(m)
            _row_score(x, i, means, var, logw, lr, out[i])
        return out

    @njit(cache=True, parallel=True)
    def _logpdf_nb(x, means, var, logw):
        n, d = x.shape
        m = means.shape[0]
        out = np.empty(n)
        norm = 0.5 * d * (np.log(2.0 * np.pi) + np.log(var))
        for i in prange(n):
            lr = np.empty(m)
            mx = -np.inf
            for j in range(m):
                sq = 0.0
                for c in range(d):
                    diff = x[i, c] - means[j, c]
                    sq += diff * diff
                lr[j] = logw[j] - 0.5 * sq / var
                if lr[j] > mx:
                    mx = lr[j]
            tot = 0.0
            for j in range(m):
                tot += np.exp(lr[j] - mx)
            out[i] = mx + np.log(tot) - norm
        return out

    @njit(cache=True, parallel=True)
    def _em_step_nb(x, means, var, logw, h, z, offset):
        n, d = x.shape
        m = means.shape[0]
        out = np.empty((n, d))
        sq2h = np.sqrt(2.0 * h)
        stride = 1 if offset.shape[0] > 1 else 0
        for i in prange(n):
            lr = np.empty(m)
            s = np.empty(d)
            _row_score(x, i, means, var, logw, lr, s)
            r = i * stride
            for c in range(d):
                modified = s[c] + x[i, c] + offset[r, c]
                out[i, c] = x[i, c] + h * (-x[i, c] + 2.0 * modified) + sq2h * z[i, c]
        return out


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def _prep(x, means, logw):
    return (
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        np.ascontiguousarray(logw, dtype=np.float64),
    )


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def set_threads(k: int | None) -> None:
    """Set the numba worker count (clamped to what numba was started with)."""
    if not HAVE_NUMBA or k is None:
        return
    k = max(1, min(int(k), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(k)


def mixture_score(x, means, var, logw, use_numba: bool | None = None):
    """Score of an isotropic mixture at each row of ``x`` (shape (n, d))."""
    x, means, logw = _prep(x, means, logw)
    if HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA):
        return _score_nb(x, means, float(var), logw)
    return score_np(x, means, float(var), logw)


def mixture_logpdf(x, means, var, logw, use_numba: bool | None = None):
    x, means, logw = _prep(x, means, logw)
    if HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA):
        return _logpdf_nb(x, means, float(var), logw)
    return logpdf_np(x, means, float(var), logw)


def em_step(x, means, var, logw, h, z, offset, use_numba: bool | None = None):
    """One Euler-Maruyama step of the modified-score backward SDE.

    ``offset`` is added to the modified score; it has shape (1, d) or (n, d).
    """
    x, means, logw = _prep(x, means, logw)
    z = np.ascontiguousarray(z, dtype=np.float64)
    offset = np.ascontiguousarray(np.atleast_2d(offset), dtype=np.float64)
    if HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA):
        return _em_step_nb(x, means, float(var), logw, float(h), z, offset)
    return em_step_np(x, means, float(var), logw, float(h), z, offset)
