import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from encalib.scores import (energy, log_sum_exp, nll_identity_residual,
                            predict, tempered_softmax)

finite_logits = st.lists(
    st.floats(min_value=-100, max_value=100, allow_nan=False),
    min_size=1, max_size=12).map(np.array)


class TestLogSumExp:
    def test_all_zero_gives_ln_k(self):
        assert log_sum_exp([0.0, 0.0, 0.0, 0.0]) == pytest.approx(
            1.3862943611198906, abs=1e-12)

    def test_large_margin_no_overflow(self):
        assert log_sum_exp([1000.0, 0.0]) == 1000.0

    def test_singleton_identity(self):
        for a in (-3.5, 0.0, 2.25, 700.0):
            assert log_sum_exp([a]) == a

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            log_sum_exp([])

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            log_sum_exp([0.0, np.nan])


class TestEnergy:
    def test_symmetric_pair(self):
        assert energy([0.0, 0.0]) == pytest.approx(-0.6931471805599453, abs=1e-12)

    def test_reference_value(self):
        # -log(e^10 + 1), high-precision reference
        assert energy([10.0, 0.0]) == pytest.approx(-10.000045398899217, abs=1e-12)

    @given(finite_logits, st.floats(min_value=-100, max_value=100))
    @settings(max_examples=200)
    def test_translation(self, z, c):
        assert energy(z + c) == pytest.approx(energy(z) - c, abs=1e-9)

    @given(finite_logits)
    @settings(max_examples=200)
    def test_bounds(self, z):
        e = energy(z)
        top = -float(np.max(z))
        assert top - math.log(len(z)) - 1e-9 <= e <= top + 1e-9


class TestTemperedSoftmax:
    def test_symmetry(self):
        for t in (0.1, 1.0, 7.5):
            np.testing.assert_allclose(tempered_softmax([2.0, 2.0, 2.0], t),
                                       np.ones(3) / 3, rtol=0, atol=1e-15)

    def test_closed_form(self):
        p = tempered_softmax([math.log(3.0), 0.0], 1.0)
        np.testing.assert_allclose(p, [0.75, 0.25], rtol=0, atol=1e-15)

    def test_scaling_identity(self):
        np.testing.assert_array_equal(tempered_softmax([4.0, 0.0], 2.0),
                                      tempered_softmax([2.0, 0.0], 1.0))

    def test_bad_temperature(self):
        for t in (0.0, -1.0, math.nan):
            with pytest.raises(ValueError):
                tempered_softmax([1.0, 2.0], t)

    @given(finite_logits, st.floats(min_value=1e-3, max_value=100))
    @settings(max_examples=200)
    def test_simplex(self, z, t):
        p = tempered_softmax(z, t)
        # extreme margin/t ratios underflow small entries to +0.0
        assert (p >= 0).all() and p.max() > 0
        assert np.isfinite(p).all()
        assert abs(p.sum() - 1.0) <= 1e-12


class TestPredict:
    def test_tie_breaks_to_lowest_index(self):
        assert predict([1.0, 3.0, 3.0], 1.0).predicted_label == 1

    def test_confidence_value(self):
        pred = predict([0.0, 5.0], 1.0)
        assert pred.predicted_label == 1
        assert pred.confidence == pytest.approx(0.9933071490757153, abs=1e-12)

    def test_confidence_is_max_probability(self):
        pred = predict([0.3, -2.0, 1.7], 1.0)
        assert pred.confidence == pred.probabilities.max()
        assert pred.predicted_label == int(np.argmax(pred.probabilities))

    @given(finite_logits, st.floats(min_value=1e-2, max_value=50),
           st.floats(min_value=1e-2, max_value=50))
    @settings(max_examples=200)
    def test_argmax_invariant_in_temperature(self, z, t1, t2):
        assert predict(z, t1).predicted_label == predict(z, t2).predicted_label

    def test_confidence_strictly_decreasing_in_temperature(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            z = rng.normal(0, 3, rng.integers(2, 8))
            if (z == z.max()).sum() > 1:
                continue
            confs = [predict(z, t).confidence
                     for t in (0.1, 0.3, 1.0, 2.0, 5.0, 10.0)]
            assert all(a > b for a, b in zip(confs, confs[1:]))


class TestNllIdentity:
    def test_symmetric(self):
        assert nll_identity_residual([0.0, 0.0], 0) <= 1e-12

    def test_small_case(self):
        assert nll_identity_residual([3.0, -1.0, 2.0], 2) <= 1e-9

    def test_large_margin_stability(self):
        assert nll_identity_residual([50.0, 0.0], 1) <= 1e-9

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            nll_identity_residual([1.0, 2.0], 2)
        with pytest.raises(ValueError):
            nll_identity_residual([1.0, 2.0], -1)

    @given(finite_logits.filter(lambda z: len(z) >= 2), st.integers(0, 11))
    @settings(max_examples=300)
    def test_residual_small_everywhere(self, z, y):
        assert nll_identity_residual(z, y % len(z)) <= 1e-9
