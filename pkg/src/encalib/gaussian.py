"""One-dimensional Gaussian density fitting and evaluation.

Fitted densities weight the per-instance temperature adjustment: one
density models the free energies of correctly predicted samples, the
other those of incorrect/OOD samples. Densities are used raw, without
rescaling; trainable weights absorb the scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-6


@dataclass
class GaussianPdf:
    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if not (self.sigma >= SIGMA_FLOOR):
            raise ValueError(f"sigma must be >= {SIGMA_FLOOR}, got {self.sigma}")

    @classmethod
    def fit(cls, samples) -> "GaussianPdf":
        """Maximum-likelihood fit: sample mean and population (1/n) std.

        The std is floored at SIGMA_FLOOR so a degenerate sample set cannot
        produce an unbounded density spike.
        """
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("need a non-empty 1-D sample list")
        if not np.isfinite(x).all():
            raise ValueError("samples must be finite")
        mu = float(x.mean())
        sigma = max(float(x.std()), SIGMA_FLOOR)
        return cls(mu, sigma)

    def density(self, x):
        """Gaussian pdf value at x (scalar in, scalar out; array in, array out)."""
        x = np.asarray(x, dtype=np.float64)
        d = np.exp(-((x - self.mu) ** 2) / (2.0 * self.sigma * self.sigma))
        d /= self.sigma * math.sqrt(2.0 * math.pi)
        return float(d) if d.ndim == 0 else d
