"""Post-hoc calibration maps over logit datasets.

Families:

* temperature scaling (TS): one global temperature fitted by validation NLL
* energy-based instance-wise scaling: per-input temperature
  ``max(t_min, t_ts - lam1*theta1 + lam2*theta2)`` where lam1/lam2 are
  Gaussian density evaluations of the input's free energy under the
  correct / incorrect populations
* histogram binning (HB): per-bin empirical accuracy as confidence
* one-vs-all isotonic regression (IROvA): per-class PAV maps, renormalized
* ensemble temperature scaling (ETS): simplex mix of tempered softmax,
  raw softmax, and the uniform distribution

TS, ETS and the energy method never change the argmax label. All fits are
deterministic: same inputs, same parameters, bit for bit.

Every family serializes to a flat JSON document with a ``kind`` tag and
numbers written at 17 significant digits.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from encalib import _kernels as kernels
from encalib.dataset import FormatError, LogitDataset
from encalib.gaussian import GaussianPdf
from encalib.metrics import _bin_index
from encalib.scores import Prediction

T_MIN = 0.05
T_MAX = 10.0
THETA_MAX = 10.0
GRID_POINTS = 41


class FitError(RuntimeError):
    """Raised when a calibrator cannot be estimated from the given data."""


# ---------------------------------------------------------------------------
# parameter types

@dataclass
class TemperatureParams:
    t: float
    k: int

    def __post_init__(self):
        if not (T_MIN <= self.t <= T_MAX):
            raise ValueError(f"temperature {self.t} outside [{T_MIN}, {T_MAX}]")


@dataclass
class EnergyCalibratorParams:
    t_ts: float
    theta1: float
    theta2: float
    p_correct: GaussianPdf
    p_incorrect: GaussianPdf
    k: int
    t_min: float = T_MIN

    def __post_init__(self):
        if not (0.0 <= self.theta1 <= THETA_MAX and 0.0 <= self.theta2 <= THETA_MAX):
            raise ValueError(f"theta ({self.theta1}, {self.theta2}) outside "
                             f"[0, {THETA_MAX}]^2")
        if not (T_MIN <= self.t_ts <= T_MAX):
            raise ValueError(f"t_ts {self.t_ts} outside [{T_MIN}, {T_MAX}]")
        if not (self.t_min > 0):
            raise ValueError("t_min must be > 0")

    def temperature(self, free_energy: float) -> float:
        """Instance-wise temperature for a row with the given free energy."""
        t = (self.t_ts
             - self.p_correct.density(free_energy) * self.theta1
             + self.p_incorrect.density(free_energy) * self.theta2)
        return max(self.t_min, t)


@dataclass
class HistogramBinningParams:
    k: int
    edges: np.ndarray   # (M+1,) uniform over [0, 1]
    values: np.ndarray  # (M,) calibrated confidence per bin

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.edges.ndim != 1 or self.edges.size < 2:
            raise ValueError("need at least two bin edges")
        if (np.diff(self.edges) <= 0).any():
            raise ValueError("bin edges must be strictly increasing")
        if ((self.values < 0) | (self.values > 1)).any():
            raise ValueError("bin values must lie in [0, 1]")

    @property
    def m(self) -> int:
        return self.values.size


@dataclass
class IsotonicOvAParams:
    k: int
    thresholds: list[np.ndarray]  # per class: sorted unique score points
    values: list[np.ndarray]      # per class: nondecreasing fitted values


@dataclass
class EnsembleTsParams:
    t: float
    w: np.ndarray  # (3,) simplex weights: tempered softmax, raw softmax, uniform
    k: int

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.shape != (3,) or (self.w < 0).any():
            raise ValueError("w must be three non-negative weights")
        if abs(self.w.sum() - 1.0) > 1e-9:
            raise ValueError("w must sum to 1")


CalibratorParams = (TemperatureParams | EnergyCalibratorParams
                    | HistogramBinningParams | IsotonicOvAParams
                    | EnsembleTsParams)


# ---------------------------------------------------------------------------
# temperature scaling

def _require_labels(ds: LogitDataset):
    if (ds.labels < 0).any():
        raise ValueError("dataset contains unlabeled (-1) rows")


def _mean_nll(Z: np.ndarray, y: np.ndarray, t: float) -> float:
    Zt = Z / t
    lse = kernels.logsumexp_rows(Zt)
    return float((lse - Zt[np.arange(Z.shape[0]), y]).mean())


def fit_temperature(val: LogitDataset) -> TemperatureParams:
    """Fit the NLL-minimizing temperature by golden-section search.

    The search runs over log-temperature in [T_MIN, T_MAX] down to an
    absolute bracket width of 1e-4 in temperature; the exact bounds are
    also probed so a boundary optimum is returned exactly. A dataset whose
    NLL is flat (variation below 1e-10) gets the identity temperature.
    """
    _require_labels(val)
    Z, y = val.logits, val.labels

    lo, hi = math.log(T_MIN), math.log(T_MAX)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc = _mean_nll(Z, y, math.exp(c))
    fd = _mean_nll(Z, y, math.exp(d))
    while math.exp(hi) - math.exp(lo) > 1e-4:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = _mean_nll(Z, y, math.exp(c))
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = _mean_nll(Z, y, math.exp(d))
    t_star = math.exp(0.5 * (lo + hi))

    probes = [T_MIN, math.sqrt(T_MIN * T_MAX), 1.0, T_MAX, t_star]
    nlls = [_mean_nll(Z, y, t) for t in probes]
    if max(nlls) - min(nlls) < 1e-10:
        return TemperatureParams(1.0, val.k)
    # bounds first: on a numerically flat plateau the exact bound wins the tie
    candidates = [T_MIN, T_MAX, 1.0, t_star]
    best = min(candidates, key=lambda t: _mean_nll(Z, y, t))
    return TemperatureParams(float(best), val.k)


# ---------------------------------------------------------------------------
# energy-based instance-wise calibrator

@dataclass
class EnergyFitProblem:
    """Precomputed arrays for the instance-wise MSE objective.

    Rows are the ID validation set followed by the OOD set (labels -1).
    The loss target is one-hot(label) for ID rows and uniform for OOD rows.
    """
    logits: np.ndarray
    labels: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    t_ts: float
    t_min: float
    p_correct: GaussianPdf
    p_incorrect: GaussianPdf
    k: int

    def loss(self, theta1: float, theta2: float) -> float:
        return kernels.mse_loss(self.logits, self.labels, self.lam1, self.lam2,
                                self.t_ts, self.t_min, theta1, theta2)

    def loss_grid(self, th1s, th2s) -> np.ndarray:
        return kernels.mse_loss_grid(self.logits, self.labels, self.lam1,
                                     self.lam2, self.t_ts, self.t_min,
                                     np.asarray(th1s, dtype=np.float64),
                                     np.asarray(th2s, dtype=np.float64))


def energy_fit_problem(id_val: LogitDataset, ood: LogitDataset,
                       t_ts: TemperatureParams) -> EnergyFitProblem:
    """Build the fit objective: pools, densities and per-row weights.

    Correctness is judged at temperature 1 on the raw logits. The correct
    pool holds the ID rows whose argmax matches the label; the incorrect
    pool holds the remaining ID rows plus every OOD row (an OOD row has no
    in-distribution label, so its prediction cannot be correct).
    """
    _require_labels(id_val)
    if ood.k != id_val.k:
        raise ValueError(f"class count mismatch: {id_val.k} vs {ood.k}")
    f_id = -kernels.logsumexp_rows(id_val.logits)
    f_ood = -kernels.logsumexp_rows(ood.logits)
    correct = id_val.logits.argmax(axis=1) == id_val.labels
    correct_e = f_id[correct]
    incorrect_e = np.concatenate([f_id[~correct], f_ood])
    if correct_e.size == 0 or incorrect_e.size == 0:
        raise FitError("cannot estimate both densities: need at least one "
                       "correct and one incorrect sample")
    p_c = GaussianPdf.fit(correct_e)
    p_i = GaussianPdf.fit(incorrect_e)
    logits = np.vstack([id_val.logits, ood.logits])
    labels = np.concatenate([id_val.labels,
                             np.full(ood.n, -1, dtype=np.int64)])
    f_all = np.concatenate([f_id, f_ood])
    return EnergyFitProblem(logits, labels, p_c.density(f_all),
                            p_i.density(f_all), t_ts.t, T_MIN, p_c, p_i,
                            id_val.k)


def fit_energy_calibrator(id_val: LogitDataset, ood: LogitDataset,
                          t_ts: TemperatureParams) -> EnergyCalibratorParams:
    """Fit (theta1, theta2) minimizing the instance-wise MSE objective.

    Deterministic two-stage search over [0, 10]^2: an exhaustive 41 x 41
    grid, then Nelder-Mead refinement from the grid argmin (at most 200
    iterations, simplex tolerance 1e-6) with iterates projected back into
    the box. The returned point is never worse than the grid minimum.
    """
    problem = energy_fit_problem(id_val, ood, t_ts)
    grid = np.linspace(0.0, THETA_MAX, GRID_POINTS)
    losses = problem.loss_grid(grid, grid)
    i, j = divmod(int(np.argmin(losses)), GRID_POINTS)
    best = np.array([grid[i], grid[j]])
    best_loss = float(losses[i, j])

    def objective(v):
        a = min(max(v[0], 0.0), THETA_MAX)
        b = min(max(v[1], 0.0), THETA_MAX)
        return problem.loss(a, b)

    step = grid[1] - grid[0]
    simplex = np.array([
        best,
        best + [step if best[0] + step <= THETA_MAX else -step, 0.0],
        best + [0.0, step if best[1] + step <= THETA_MAX else -step],
    ])
    res = scipy.optimize.minimize(
        objective, best, method="Nelder-Mead",
        options={"maxiter": 200, "xatol": 1e-6, "fatol": 1e-6,
                 "initial_simplex": simplex})
    refined = np.clip(res.x, 0.0, THETA_MAX)
    refined_loss = problem.loss(float(refined[0]), float(refined[1]))
    if refined_loss < best_loss:
        best = refined
    return EnergyCalibratorParams(problem.t_ts, float(best[0]), float(best[1]),
                                  problem.p_correct, problem.p_incorrect,
                                  id_val.k, problem.t_min)


def apply_energy_calibrator(params: EnergyCalibratorParams, z) -> Prediction:
    """Calibrate one logit vector; the argmax label is preserved."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.k,):
        raise ValueError(f"expected {params.k} logits, got shape {z.shape}")
    from encalib.scores import energy, tempered_softmax
    p = tempered_softmax(z, params.temperature(energy(z)))
    label = int(np.argmax(z))
    return Prediction(label, float(p[label]), p)


# ---------------------------------------------------------------------------
# histogram binning

def fit_histogram_binning(val: LogitDataset, m: int) -> HistogramBinningParams:
    """Per-bin empirical accuracy over top-label confidence; empty bins
    fall back to the bin midpoint."""
    _require_labels(val)
    if m < 1:
        raise ValueError(f"bin count must be >= 1, got {m}")
    P = kernels.softmax_rows(val.logits, 1.0)
    pred = P.argmax(axis=1)
    conf = P[np.arange(val.n), pred]
    correct = (pred == val.labels).astype(np.float64)
    idx = _bin_index(conf, m)
    counts = np.bincount(idx, minlength=m)
    hits = np.bincount(idx, weights=correct, minlength=m)
    edges = np.array([j / m for j in range(m + 1)])
    values = (edges[:-1] + edges[1:]) / 2.0
    nz = counts > 0
    values[nz] = hits[nz] / counts[nz]
    return HistogramBinningParams(val.k, edges, values)


# ---------------------------------------------------------------------------
# one-vs-all isotonic regression

def _pav_fit(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pool-adjacent-violators: least-squares nondecreasing fit of y on x.

    Duplicate x values are merged (weighted) before pooling. Returns the
    sorted unique x values and the fitted value at each.
    """
    order = np.argsort(x, kind="mergesort")
    ux, inv, cnt = np.unique(x[order], return_inverse=True, return_counts=True)
    vals = np.bincount(inv, weights=y[order]) / cnt
    weights = cnt.astype(np.float64)

    bv, bw, bn = [], [], []  # block value, weight, span in ux
    for v, w in zip(vals, weights):
        bv.append(v)
        bw.append(w)
        bn.append(1)
        while len(bv) > 1 and bv[-2] > bv[-1]:
            merged = (bv[-2] * bw[-2] + bv[-1] * bw[-1]) / (bw[-2] + bw[-1])
            bv[-2:] = [merged]
            bw[-2:] = [bw[-2] + bw[-1]]
            bn[-2:] = [bn[-2] + bn[-1]]
    return ux, np.repeat(bv, bn)


def _step_lookup(thresholds: np.ndarray, values: np.ndarray,
                 q: np.ndarray) -> np.ndarray:
    """Piecewise-constant map: value of the last threshold <= q, clamped."""
    idx = np.searchsorted(thresholds, q, side="right") - 1
    return values[np.clip(idx, 0, len(values) - 1)]


def fit_isotonic_ova(val: LogitDataset) -> IsotonicOvAParams:
    """Per-class PAV fit of correctness indicators against class probability."""
    _require_labels(val)
    P = kernels.softmax_rows(val.logits, 1.0)
    thresholds, values = [], []
    for c in range(val.k):
        t, v = _pav_fit(P[:, c], (val.labels == c).astype(np.float64))
        thresholds.append(t)
        values.append(v)
    return IsotonicOvAParams(val.k, thresholds, values)


# ---------------------------------------------------------------------------
# ensemble temperature scaling

def fit_ensemble_ts(val: LogitDataset) -> EnsembleTsParams:
    """TS temperature plus simplex weights from an exhaustive 0.01-step grid.

    Grid scan runs w1 from 1 downward, then w2 downward; a point must beat
    the incumbent by more than 1e-12 to win, so float-level ties keep the
    earliest point and a fully tied objective returns (1, 0, 0).
    """
    _require_labels(val)
    ts = fit_temperature(val)
    rows = np.arange(val.n)
    a = kernels.softmax_rows(val.logits, ts.t)[rows, val.labels]
    b = kernels.softmax_rows(val.logits, 1.0)[rows, val.labels]
    u = 1.0 / val.k

    best_w, best_nll = None, math.inf
    with np.errstate(divide="ignore"):
        for i in range(100, -1, -1):
            w1 = i / 100.0
            pa = w1 * a
            for j in range(100 - i, -1, -1):
                w2 = j / 100.0
                w3 = (100 - i - j) / 100.0
                nll = float(-np.log(pa + w2 * b + w3 * u).mean())
                if nll < best_nll - 1e-12:
                    best_nll = nll
                    best_w = (w1, w2, w3)
    return EnsembleTsParams(ts.t, np.array(best_w), val.k)


# ---------------------------------------------------------------------------
# batch application

def _predictions_from_matrix(P: np.ndarray, labels=None) -> list[Prediction]:
    # accuracy-preserving families pass the raw argmax explicitly so the
    # label survives even when tempering collapses nearby probabilities
    if labels is None:
        labels = P.argmax(axis=1)
    return [Prediction(int(l), float(P[i, l]), P[i])
            for i, l in enumerate(labels)]


def _check_k(params, ds: LogitDataset):
    if ds.k != params.k:
        raise ValueError(f"class count mismatch: params expect {params.k}, "
                         f"dataset has {ds.k}")


def apply_calibrator(params: CalibratorParams, ds: LogitDataset) -> list[Prediction]:
    """Apply a fitted calibrator to every row, preserving row order."""
    _check_k(params, ds)
    Z = ds.logits

    if isinstance(params, TemperatureParams):
        return _predictions_from_matrix(kernels.softmax_rows(Z, params.t),
                                        Z.argmax(axis=1))

    if isinstance(params, EnergyCalibratorParams):
        f = -kernels.logsumexp_rows(Z)
        t = np.maximum(params.t_min,
                       params.t_ts
                       - params.p_correct.density(f) * params.theta1
                       + params.p_incorrect.density(f) * params.theta2)
        return _predictions_from_matrix(kernels.softmax_rows_t(Z, t),
                                        Z.argmax(axis=1))

    if isinstance(params, EnsembleTsParams):
        w1, w2, w3 = params.w
        P = (w1 * kernels.softmax_rows(Z, params.t)
             + w2 * kernels.softmax_rows(Z, 1.0)
             + w3 / params.k)
        return _predictions_from_matrix(P, Z.argmax(axis=1))

    if isinstance(params, HistogramBinningParams):
        return _apply_histogram(params, Z)

    if isinstance(params, IsotonicOvAParams):
        return _apply_isotonic(params, Z)

    raise TypeError(f"unknown calibrator parameters: {type(params).__name__}")


def _apply_histogram(params: HistogramBinningParams, Z: np.ndarray) -> list[Prediction]:
    # Calibrates the top-label confidence only; the rest of the mass is
    # scaled proportionally, and the predicted label is kept from the raw
    # argmax even if the rescaled vector would order differently.
    P = kernels.softmax_rows(Z, 1.0)
    n, k = P.shape
    pred = P.argmax(axis=1)
    conf = P[np.arange(n), pred]
    idx = np.minimum(np.searchsorted(params.edges, conf, side="right") - 1,
                     params.m - 1)
    q = params.values[idx]
    out = []
    for i in range(n):
        rest = 1.0 - conf[i]
        if rest > 0.0:
            p = P[i] * ((1.0 - q[i]) / rest)
        else:
            p = np.full(k, (1.0 - q[i]) / (k - 1))
        p[pred[i]] = q[i]
        out.append(Prediction(int(pred[i]), float(q[i]), p))
    return out


def _apply_isotonic(params: IsotonicOvAParams, Z: np.ndarray) -> list[Prediction]:
    P = kernels.softmax_rows(Z, 1.0)
    S = np.empty_like(P)
    for c in range(params.k):
        S[:, c] = _step_lookup(params.thresholds[c], params.values[c], P[:, c])
    total = S.sum(axis=1)
    zero = total <= 0.0
    if zero.any():
        S[zero] = 1.0 / params.k
        total[zero] = 1.0
    return _predictions_from_matrix(S / total[:, None])


# ---------------------------------------------------------------------------
# serialization

def _emit_json(obj) -> str:
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"cannot serialize non-finite number {v}")
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_emit_json(v)}"
                              for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_emit_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def params_to_json(params: CalibratorParams) -> str:
    if isinstance(params, TemperatureParams):
        doc = {"kind": "ts", "k": params.k, "t": params.t}
    elif isinstance(params, EnergyCalibratorParams):
        doc = {"kind": "energy", "k": params.k, "t_ts": params.t_ts,
               "theta1": params.theta1, "theta2": params.theta2,
               "mu_correct": params.p_correct.mu,
               "sigma_correct": params.p_correct.sigma,
               "mu_incorrect": params.p_incorrect.mu,
               "sigma_incorrect": params.p_incorrect.sigma,
               "t_min": params.t_min}
    elif isinstance(params, HistogramBinningParams):
        doc = {"kind": "hb", "k": params.k, "edges": params.edges,
               "values": params.values}
    elif isinstance(params, IsotonicOvAParams):
        doc = {"kind": "irova", "k": params.k,
               "maps": [{"x": t, "y": v}
                        for t, v in zip(params.thresholds, params.values)]}
    elif isinstance(params, EnsembleTsParams):
        doc = {"kind": "ets", "k": params.k, "t": params.t, "w": params.w}
    else:
        raise TypeError(f"unknown calibrator parameters: {type(params).__name__}")
    return _emit_json(doc)


def params_from_json(text: str) -> CalibratorParams:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "kind" not in doc:
        raise FormatError("parameter document must be an object with 'kind'")
    kind = doc["kind"]
    try:
        k = int(doc["k"])
        if kind == "ts":
            return TemperatureParams(float(doc["t"]), k)
        if kind == "energy":
            return EnergyCalibratorParams(
                float(doc["t_ts"]), float(doc["theta1"]), float(doc["theta2"]),
                GaussianPdf(float(doc["mu_correct"]), float(doc["sigma_correct"])),
                GaussianPdf(float(doc["mu_incorrect"]), float(doc["sigma_incorrect"])),
                k, float(doc["t_min"]))
        if kind == "hb":
            return HistogramBinningParams(k, np.asarray(doc["edges"], dtype=np.float64),
                                          np.asarray(doc["values"], dtype=np.float64))
        if kind == "irova":
            return IsotonicOvAParams(
                k,
                [np.asarray(m["x"], dtype=np.float64) for m in doc["maps"]],
                [np.asarray(m["y"], dtype=np.float64) for m in doc["maps"]])
        if kind == "ets":
            return EnsembleTsParams(float(doc["t"]),
                                    np.asarray(doc["w"], dtype=np.float64), k)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad {kind!r} parameter document: {exc}") from None
    raise FormatError(f"unknown calibrator kind {kind!r}")


def save_params(params: CalibratorParams, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(params_to_json(params) + "\n")


def load_params(path) -> CalibratorParams:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_json(fh.read())
