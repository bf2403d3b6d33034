import numpy as np
import pytest

from encalib.metrics import (BinStats, OodScores, aupr, auroc,
                             bin_predictions, ece, mce, reliability_table, sce)
from encalib.scores import Prediction, predict


def pred(conf, label=0, k=2):
    # build a Prediction with an explicit confidence for the chosen label
    p = np.full(k, (1.0 - conf) / (k - 1))
    p[label] = conf
    return Prediction(label, conf, p)


# ---------------------------------------------------------------------------
# independent per-bin oracles, loop-based

def in_bin(c, b, m):
    lo, hi = b / m, (b + 1) / m
    if b == m - 1:
        return lo <= c <= 1.0
    return lo <= c < hi


def ece_oracle(confs, correct, m):
    n = len(confs)
    total = 0.0
    for b in range(m):
        members = [i for i in range(n) if in_bin(confs[i], b, m)]
        if members:
            acc = sum(correct[i] for i in members) / len(members)
            conf = sum(confs[i] for i in members) / len(members)
            total += len(members) / n * abs(acc - conf)
    return total * 100.0


def sce_oracle(P, labels, m):
    n, k = P.shape
    total = 0.0
    for c in range(k):
        for b in range(m):
            members = [i for i in range(n) if in_bin(P[i, c], b, m)]
            if members:
                acc = sum(1.0 for i in members if labels[i] == c) / len(members)
                conf = sum(P[i, c] for i in members) / len(members)
                total += len(members) / n * abs(acc - conf)
    return total / k * 100.0


def auroc_oracle(ins, outs):
    total = 0.0
    for a in ins:
        for b in outs:
            total += 1.0 if a > b else (0.5 if a == b else 0.0)
    return total / (len(ins) * len(outs))


def aupr_oracle(pos, neg):
    thresholds = sorted(set(list(pos) + list(neg)), reverse=True)
    ap, r_prev = 0.0, 0.0
    for t in thresholds:
        tp = sum(1 for s in pos if s >= t)
        fp = sum(1 for s in neg if s >= t)
        r = tp / len(pos)
        ap += (r - r_prev) * (tp / (tp + fp))
        r_prev = r
    return ap


class TestBinning:
    def test_two_sample_bin(self):
        b = bin_predictions([pred(0.8, 0), pred(0.8, 0)], [0, 1], m=10)
        assert b.counts.sum() == 2
        idx = int(np.flatnonzero(b.counts)[0])
        assert b.counts[idx] == 2
        assert b.confidence[idx] == pytest.approx(0.8)
        assert b.accuracy[idx] == pytest.approx(0.5)

    def test_confidence_one_lands_in_top_bin(self):
        b = bin_predictions([pred(1.0)], [0], m=15)
        assert b.counts[14] == 1

    def test_exact_edge_goes_to_upper_bin(self):
        b = bin_predictions([pred(1 / 15, label=0, k=30)], [0], m=15)
        assert b.counts[1] == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bin_predictions([pred(0.5)], [0, 1], m=5)

    def test_negative_label_rejected(self):
        with pytest.raises(ValueError):
            bin_predictions([pred(0.5)], [-1], m=5)


class TestEce:
    def test_perfectly_calibrated(self):
        preds = [pred(0.75, 0), pred(0.75, 0), pred(0.75, 0), pred(0.75, 0)]
        b = bin_predictions(preds, [0, 0, 0, 1], m=4)
        assert ece(b, 4) == pytest.approx(0.0, abs=1e-12)

    def test_hand_case(self):
        b = bin_predictions([pred(0.8, 0), pred(0.8, 0)], [0, 1], m=10)
        assert ece(b, 2) == pytest.approx(30.0, abs=1e-12)

    def test_count_mismatch(self):
        b = bin_predictions([pred(0.8)], [0], m=10)
        with pytest.raises(ValueError):
            ece(b, 2)

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            n = int(rng.integers(1, 64))
            k = int(rng.integers(2, 6))
            m = int(rng.choice([1, 5, 15]))
            preds = [predict(rng.normal(0, 2, k)) for _ in range(n)]
            labels = rng.integers(0, k, n)
            confs = [p.confidence for p in preds]
            correct = [p.predicted_label == l for p, l in zip(preds, labels)]
            got = ece(bin_predictions(preds, labels, m), n)
            assert got == pytest.approx(ece_oracle(confs, correct, m), abs=1e-12)


class TestMce:
    def test_perfect(self):
        preds = [pred(0.75, 0), pred(0.75, 0), pred(0.75, 0), pred(0.75, 0)]
        b = bin_predictions(preds, [0, 0, 0, 1], m=4)
        assert mce(b) == pytest.approx(0.0, abs=1e-12)

    def test_max_rule(self):
        b = BinStats(2, np.array([5, 5]), np.array([0.3, 0.9]),
                     np.array([0.4, 0.6]))
        assert mce(b) == pytest.approx(30.0, abs=1e-12)

    def test_all_empty_rejected(self):
        b = BinStats(2, np.array([0, 0]), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            mce(b)

    def test_mce_at_least_ece(self):
        rng = np.random.default_rng(23)
        for _ in range(40):
            n = int(rng.integers(1, 50))
            k = int(rng.integers(2, 5))
            preds = [predict(rng.normal(0, 2, k)) for _ in range(n)]
            labels = rng.integers(0, k, n)
            b = bin_predictions(preds, labels, 15)
            assert mce(b) >= ece(b, n) - 1e-12


class TestSce:
    def test_exact_classwise_calibration(self):
        P = np.full((4, 2), 0.5)
        assert sce(P, [0, 0, 1, 1], m=5) == pytest.approx(0.0, abs=1e-12)

    def test_fully_wrong(self):
        P = np.tile([1.0, 0.0], (3, 1))
        assert sce(P, [1, 1, 1], m=15) == pytest.approx(100.0, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sce(np.full((3, 2), 0.5), [0, 1], m=5)

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(29)
        for _ in range(40):
            n = int(rng.integers(1, 40))
            k = int(rng.integers(2, 6))
            m = int(rng.choice([1, 5, 15]))
            Z = rng.normal(0, 2, (n, k))
            P = np.exp(Z) / np.exp(Z).sum(axis=1)[:, None]
            labels = rng.integers(0, k, n)
            assert sce(P, labels, m) == pytest.approx(
                sce_oracle(P, labels, m), abs=1e-12)


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc(OodScores([0.9, 0.8], [0.1, 0.2])) == 1.0

    def test_all_ties(self):
        assert auroc(OodScores([0.5] * 4, [0.5] * 3)) == 0.5

    def test_empty_side_rejected(self):
        with pytest.raises(ValueError):
            OodScores([], [0.5])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(31)
        ins, outs = rng.normal(1, 1, 30), rng.normal(0, 1, 20)
        a = auroc(OodScores(ins, outs))
        b = auroc(OodScores(np.exp(ins), np.exp(outs)))
        assert a == pytest.approx(b, abs=1e-12)

    def test_pairwise_oracle(self):
        rng = np.random.default_rng(37)
        for _ in range(30):
            n_in = int(rng.integers(1, 40))
            n_out = int(rng.integers(1, 40))
            # coarse grid forces heavy ties
            ins = rng.integers(0, 5, n_in) / 4.0
            outs = rng.integers(0, 5, n_out) / 4.0
            got = auroc(OodScores(ins, outs))
            assert got == pytest.approx(auroc_oracle(ins, outs), abs=1e-12)


class TestAupr:
    def test_perfect_separation(self):
        s = OodScores([0.9, 0.8], [0.1, 0.2])
        assert aupr(s, "in") == 1.0
        assert aupr(s, "out") == 1.0

    def test_degenerate_balanced(self):
        s = OodScores([0.5, 0.5], [0.5, 0.5])
        assert aupr(s, "in") == pytest.approx(0.5, abs=1e-12)

    def test_bad_positive(self):
        with pytest.raises(ValueError):
            aupr(OodScores([1.0], [0.0]), "neither")

    def test_threshold_sweep_oracle(self):
        rng = np.random.default_rng(41)
        for _ in range(30):
            n_in = int(rng.integers(1, 40))
            n_out = int(rng.integers(1, 40))
            ins = rng.integers(0, 6, n_in) / 5.0
            outs = rng.integers(0, 6, n_out) / 5.0
            s = OodScores(ins, outs)
            assert aupr(s, "in") == pytest.approx(
                aupr_oracle(list(ins), list(outs)), abs=1e-12)
            assert aupr(s, "out") == pytest.approx(
                aupr_oracle([-v for v in outs], [-v for v in ins]), abs=1e-12)


class TestReliabilityTable:
    def test_shape_and_partition(self):
        rng = np.random.default_rng(43)
        preds = [predict(rng.normal(0, 2, 3)) for _ in range(25)]
        b = bin_predictions(preds, rng.integers(0, 3, 25), 15)
        rows = reliability_table(b)
        assert len(rows) == 15
        assert sum(r[3] for r in rows) == 25
        assert rows[0][1] == 0.0 and rows[-1][2] == 1.0
        for prev, cur in zip(rows, rows[1:]):
            assert prev[2] == cur[1]

    def test_empty_bins_blank(self):
        b = bin_predictions([pred(0.95)], [0], 10)
        rows = reliability_table(b)
        assert rows[0][3] == 0 and rows[0][4] is None and rows[0][5] is None
        assert rows[9][3] == 1 and rows[9][4] == pytest.approx(0.95)
