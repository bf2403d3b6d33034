"""Logit/label datasets and their CSV on-disk format.

A dataset is an N x K matrix of raw classifier outputs (logits) plus one
integer label per row. Label -1 marks a row with no in-distribution label
(semantic OOD). The CSV format is `label,z0,...,z{K-1}` with a mandatory
header; logits are written with 17 significant digits so binary64 values
round-trip exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class FormatError(ValueError):
    """Raised when a CSV or JSON document does not match its schema."""


@dataclass
class LogitDataset:
    logits: np.ndarray  # (N, K) float64
    labels: np.ndarray  # (N,) int64, values in {-1, 0, ..., K-1}
    k: int

    def __post_init__(self):
        self.logits = np.ascontiguousarray(self.logits, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.k < 2:
            raise ValueError(f"class count must be >= 2, got {self.k}")
        if self.logits.ndim != 2 or self.logits.shape[1] != self.k:
            raise ValueError(
                f"logits must be N x {self.k}, got shape {self.logits.shape}")
        if self.logits.shape[0] < 1:
            raise ValueError("empty dataset: need at least one row")
        if self.labels.shape != (self.logits.shape[0],):
            raise ValueError("labels length must match logit rows")
        if not np.isfinite(self.logits).all():
            raise ValueError("logits must be finite (no NaN/Inf)")
        bad = (self.labels < -1) | (self.labels >= self.k)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"label {self.labels[i]} at row {i} outside {{-1..{self.k - 1}}}")

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LogitDataset):
            return NotImplemented
        return (self.k == other.k
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.logits, other.logits))


_HEADER_RE = re.compile(r"^z(\d+)$")


def load_csv(path) -> LogitDataset:
    """Read a logit dataset from `path`.

    The header must be exactly `label,z0,z1,...,z{K-1}`; every data row
    must carry K+1 comma-separated fields. Raises FormatError with the
    offending token / row index on any malformed content.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty file: missing header")
    header = lines[0].split(",")
    if header[0] != "label":
        raise FormatError(f"bad header: first column must be 'label', got {header[0]!r}")
    if len(header) < 3:
        raise FormatError("bad header: need at least two logit columns z0,z1")
    for j, tok in enumerate(header[1:]):
        m = _HEADER_RE.match(tok)
        if not m or int(m.group(1)) != j:
            raise FormatError(f"bad header: expected 'z{j}', got {tok!r}")
    k = len(header) - 1

    n = len(lines) - 1
    if n == 0:
        raise FormatError("empty dataset: no data rows")
    logits = np.empty((n, k), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    for i, line in enumerate(lines[1:], start=1):
        fields = line.split(",")
        if len(fields) != k + 1:
            raise FormatError(
                f"row {i}: expected {k + 1} fields, got {len(fields)}")
        try:
            lab = int(fields[0])
        except ValueError:
            raise FormatError(f"row {i}: column label: invalid integer {fields[0]!r}") from None
        if lab < -1 or lab >= k:
            raise FormatError(f"row {i}: column label: {lab} outside {{-1..{k - 1}}}")
        labels[i - 1] = lab
        for j, tok in enumerate(fields[1:]):
            try:
                v = float(tok)
            except ValueError:
                raise FormatError(f"row {i}: column z{j}: invalid float {tok!r}") from None
            if not np.isfinite(v):
                raise FormatError(f"row {i}: column z{j}: non-finite value {tok!r}")
            logits[i - 1, j] = v
    return LogitDataset(logits, labels, k)


def save_csv(ds: LogitDataset, path):
    """Write `ds` to `path`. load_csv(save_csv(ds)) reproduces ds exactly."""
    if ds.n < 1:
        raise ValueError("empty dataset: refusing to write")
    lines = ["label," + ",".join(f"z{j}" for j in range(ds.k))]
    for i in range(ds.n):
        row = ",".join(format(v, ".17g") for v in ds.logits[i])
        lines.append(f"{ds.labels[i]},{row}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def split(ds: LogitDataset, fraction: float, seed: int) -> tuple[LogitDataset, LogitDataset]:
    """Deterministic shuffled split into two disjoint non-empty parts.

    Row order within each part follows the shuffled permutation; the union
    of the parts is the original dataset up to that permutation.
    """
    from encalib.synthetic import SplitMix64

    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = ds.n
    n_first = int(round(fraction * n))
    if n_first < 1 or n_first > n - 1:
        raise ValueError(
            f"fraction {fraction} yields an empty part for {n} rows")
    perm = SplitMix64(seed).shuffle_indices(n)
    a, b = perm[:n_first], perm[n_first:]
    return (LogitDataset(ds.logits[a], ds.labels[a], ds.k),
            LogitDataset(ds.logits[b], ds.labels[b], ds.k))
