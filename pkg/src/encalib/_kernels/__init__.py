"""Batch kernel backend selection.

Prefers the compiled Cython core; falls back to the NumPy implementation
when the extension was not built. `BACKEND` names the active choice.
The wrappers coerce inputs to contiguous float64/int64 so both backends
see identical memory layouts.
"""
import numpy as np

try:
    from encalib._kernels import _core as _impl
    BACKEND = "cython"
except ImportError:  # extension not built; pure-Python install
    from encalib._kernels import _numpy as _impl
    BACKEND = "numpy"


def _mat(Z):
    return np.ascontiguousarray(Z, dtype=np.float64)


def _vec(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def _ivec(x):
    return np.ascontiguousarray(x, dtype=np.int64)


def logsumexp_rows(Z):
    return _impl.logsumexp_rows(_mat(Z))


def softmax_rows(Z, t):
    return _impl.softmax_rows(_mat(Z), float(t))


def softmax_rows_t(Z, T):
    return _impl.softmax_rows_t(_mat(Z), _vec(T))


def mse_loss(Z, labels, lam1, lam2, t_ts, t_min, th1, th2):
    return _impl.mse_loss(_mat(Z), _ivec(labels), _vec(lam1), _vec(lam2),
                          float(t_ts), float(t_min), float(th1), float(th2))


def mse_loss_grid(Z, labels, lam1, lam2, t_ts, t_min, th1s, th2s):
    return _impl.mse_loss_grid(_mat(Z), _ivec(labels), _vec(lam1), _vec(lam2),
                               float(t_ts), float(t_min), _vec(th1s), _vec(th2s))
