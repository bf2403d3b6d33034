"""Deterministic synthetic logit generator with a severity axis.

Emulates, at desk scale, the three regimes a post-hoc calibrator meets in
the wild: overconfident in-distribution data, covariate shift of growing
severity, and semantic OOD rows that carry no valid label.

Generative model (kind id/covariate):

    y ~ uniform{0..K-1}
    z = (overconfidence / (1 + 0.5*severity)) * (margin*onehot(y) + eps)
    eps ~ Normal(0, sigma_s^2) per coordinate,  sigma_s = noise*(1 + 0.5*severity)

Severity both inflates the relative noise and attenuates the global logit
scale; argmax accuracy depends only on margin/sigma_s, while the free
energy of the rows drops as severity grows, mirroring how corrupted
inputs shrink a real network's logits. Semantic rows drop the margin term
and carry label -1.

Randomness comes from a SplitMix64 counter generator (normals via
Box-Muller), so a scenario is a pure function of its fields: same
scenario, same bits.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from encalib.dataset import LogitDataset

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = 0x9E3779B97F4A7C15
_TWO53 = float(1 << 53)

KINDS = ("id", "covariate", "semantic")


class SplitMix64:
    """Counter-based 64-bit generator; output i is mix(seed + i*gamma)."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._count = 0

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        z = self._seed + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    def next_u64(self) -> int:
        return int(self._raw(1)[0])

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles in the open interval (0, 1)."""
        return ((self._raw(n) >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53

    def normals(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller on consecutive uniform pairs."""
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        a = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(a)
        out[1::2] = r * np.sin(a)
        return out[:n]

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers in [0, bound) by modulo reduction."""
        return (self._raw(n) % np.uint64(bound)).astype(np.int64)

    def shuffle_indices(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n, dtype=np.int64)
        if n > 1:
            draws = self._raw(n - 1)
            for i in range(n - 1, 0, -1):
                j = int(draws[n - 1 - i] % np.uint64(i + 1))
                idx[i], idx[j] = idx[j], idx[i]
        return idx


@dataclass(frozen=True)
class ShiftScenario:
    k: int
    n: int
    margin: float = 4.0
    noise: float = 1.0
    overconfidence: float = 3.0
    severity: int = 0
    kind: str = "id"
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"class count must be >= 2, got {self.k}")
        if self.n < 1:
            raise ValueError(f"row count must be >= 1, got {self.n}")
        if not (self.margin > 0):
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if not (self.noise >= 0):
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if not (self.overconfidence >= 1):
            raise ValueError(f"overconfidence must be >= 1, got {self.overconfidence}")
        if not (0 <= self.severity <= 5):
            raise ValueError(f"severity must be in 0..5, got {self.severity}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


def generate(sc: ShiftScenario) -> LogitDataset:
    """Generate the dataset for a scenario.

    Draw order is fixed: for id/covariate, N label draws first, then N*K
    noise normals; semantic skips the label draws. Severity 0 covariate
    output is bit-identical to kind id.
    """
    rng = SplitMix64(sc.seed)
    sigma = sc.noise * (1.0 + 0.5 * sc.severity)
    scale = sc.overconfidence / (1.0 + 0.5 * sc.severity)
    if sc.kind == "semantic":
        labels = np.full(sc.n, -1, dtype=np.int64)
        eps = rng.normals(sc.n * sc.k).reshape(sc.n, sc.k)
        logits = scale * (sigma * eps)
    else:
        labels = rng.integers(sc.n, sc.k)
        eps = rng.normals(sc.n * sc.k).reshape(sc.n, sc.k)
        base = np.zeros((sc.n, sc.k), dtype=np.float64)
        base[np.arange(sc.n), labels] = sc.margin
        logits = scale * (base + sigma * eps)
    return LogitDataset(logits, labels, sc.k)


def severity_suite(base: ShiftScenario) -> list[LogitDataset]:
    """Covariate datasets at severities 0..5 with derived seeds (seed + s)."""
    return [
        generate(replace(base, kind="covariate", severity=s, seed=base.seed + s))
        for s in range(6)
    ]
