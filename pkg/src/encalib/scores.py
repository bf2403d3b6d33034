"""Numerically stable score functions over a single logit vector.

All softmax-style computations subtract the row maximum before
exponentiating, so any finite logit vector is safe. The free energy of a
logit vector z is -log(sum(exp(z))): more negative means a stronger,
more in-distribution prediction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Prediction:
    predicted_label: int
    confidence: float
    probabilities: np.ndarray


def _as_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("logit vector must be 1-D and non-empty")
    if not np.isfinite(z).all():
        raise ValueError("logit vector must be finite")
    return z


def log_sum_exp(z) -> float:
    """log(sum(exp(z))) with max-subtraction; never overflows."""
    z = _as_logits(z)
    m = float(z.max())
    return m + float(np.log(np.exp(z - m).sum()))


def energy(z) -> float:
    """Free energy -log(sum(exp(z))) of a logit vector."""
    return -log_sum_exp(z)


def tempered_softmax(z, t: float) -> np.ndarray:
    """softmax(z / t) for a temperature t > 0."""
    z = _as_logits(z)
    if not (t > 0.0):
        raise ValueError(f"temperature must be > 0, got {t}")
    zt = z / t
    e = np.exp(zt - zt.max())
    return e / e.sum()


def predict(z, t: float = 1.0) -> Prediction:
    """Tempered-softmax prediction; argmax ties break to the lowest index."""
    p = tempered_softmax(z, t)
    label = int(np.argmax(p))
    return Prediction(label, float(p[label]), p)


def nll_identity_residual(z, y: int) -> float:
    """Gap between the log-loss at class y and its energy decomposition.

    Both sides are evaluated through independent code paths (one through
    the normalized softmax, one through the free energy), so the result
    measures numerical agreement rather than being identically zero.
    """
    z = _as_logits(z)
    if not (0 <= y < z.size):
        raise ValueError(f"class index {y} out of range [0, {z.size})")
    nll = -float(np.log(tempered_softmax(z, 1.0)[y]))
    decomposed = (-float(z[y])) - energy(z)
    return abs(nll - decomposed)
