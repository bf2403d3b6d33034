"""Pure-NumPy implementations of the batch hot kernels.

Same contracts as the compiled core in `_core.pyx`; selected at import
time when the extension is unavailable. All softmax paths use row-max
subtraction.
"""
import numpy as np


def logsumexp_rows(Z):
    m = Z.max(axis=1)
    return m + np.log(np.exp(Z - m[:, None]).sum(axis=1))


def softmax_rows(Z, t):
    Zt = Z / t
    e = np.exp(Zt - Zt.max(axis=1)[:, None])
    return e / e.sum(axis=1)[:, None]


def softmax_rows_t(Z, T):
    Zt = Z / T[:, None]
    e = np.exp(Zt - Zt.max(axis=1)[:, None])
    return e / e.sum(axis=1)[:, None]


def mse_loss(Z, labels, lam1, lam2, t_ts, t_min, th1, th2):
    """Mean squared error of the instance-wise tempered softmax.

    Per-row temperature: max(t_min, t_ts - lam1*th1 + lam2*th2). The target
    is one-hot(label) for rows with label >= 0 and the uniform vector for
    rows with label -1; per-row error is the squared L2 norm against it.
    """
    n, k = Z.shape
    T = np.maximum(t_min, t_ts - lam1 * th1 + lam2 * th2)
    P = softmax_rows_t(Z, T)
    sq = (P * P).sum(axis=1)
    py = P[np.arange(n), np.maximum(labels, 0)]
    per = np.where(labels >= 0, sq - 2.0 * py + 1.0, sq - 1.0 / k)
    return float(per.mean())


def mse_loss_grid(Z, labels, lam1, lam2, t_ts, t_min, th1s, th2s):
    out = np.empty((len(th1s), len(th2s)), dtype=np.float64)
    for i, a in enumerate(th1s):
        for j, b in enumerate(th2s):
            out[i, j] = mse_loss(Z, labels, lam1, lam2, t_ts, t_min, a, b)
    return out
