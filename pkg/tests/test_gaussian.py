import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from encalib.gaussian import SIGMA_FLOOR, GaussianPdf

samples = st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1,
                   max_size=40)


class TestFit:
    def test_symmetric_pair(self):
        pdf = GaussianPdf.fit([-1.0, 1.0])
        assert pdf.mu == 0.0
        assert pdf.sigma == pytest.approx(1.0, abs=1e-15)

    def test_degenerate_hits_floor(self):
        pdf = GaussianPdf.fit([5.0, 5.0, 5.0])
        assert pdf.mu == 5.0
        assert pdf.sigma == SIGMA_FLOOR

    def test_population_moments(self):
        pdf = GaussianPdf.fit([0.0, 2.0, 4.0])
        assert pdf.mu == pytest.approx(2.0, abs=1e-15)
        assert pdf.sigma == pytest.approx(1.632993161855452, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            GaussianPdf.fit([])

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            GaussianPdf.fit([1.0, math.nan])

    @given(samples)
    @settings(max_examples=150)
    def test_permutation_invariant(self, xs):
        rng = np.random.default_rng(0)
        shuffled = list(xs)
        rng.shuffle(shuffled)
        a, b = GaussianPdf.fit(xs), GaussianPdf.fit(shuffled)
        assert a.mu == pytest.approx(b.mu, rel=1e-12, abs=1e-12)
        assert a.sigma == pytest.approx(b.sigma, rel=1e-12, abs=1e-12)


class TestDensity:
    def test_standard_normal_peak(self):
        assert GaussianPdf(0.0, 1.0).density(0.0) == pytest.approx(
            0.3989422804014327, abs=1e-12)

    def test_symmetry(self):
        pdf = GaussianPdf(0.0, 1.0)
        for a in (0.5, 1.0, 3.7):
            assert pdf.density(a) == pdf.density(-a)

    def test_far_tail_clean(self):
        v = GaussianPdf(0.0, 1.0).density(100.0)
        assert 0.0 <= v <= 1e-300
        assert not math.isnan(v)

    def test_vectorized(self):
        pdf = GaussianPdf(1.0, 2.0)
        xs = np.array([0.0, 1.0, 2.0])
        np.testing.assert_array_equal(pdf.density(xs),
                                      [pdf.density(x) for x in xs])

    @given(samples)
    @settings(max_examples=150)
    def test_peak_value_matches_fit(self, xs):
        pdf = GaussianPdf.fit(xs)
        expect = 1.0 / (pdf.sigma * math.sqrt(2.0 * math.pi))
        assert pdf.density(pdf.mu) == pytest.approx(expect, rel=1e-12)

    def test_maximized_at_mu(self):
        pdf = GaussianPdf(0.7, 1.3)
        peak = pdf.density(pdf.mu)
        for x in np.linspace(-5, 5, 101):
            assert pdf.density(x) <= peak

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            GaussianPdf(0.0, 0.0)
        with pytest.raises(ValueError):
            GaussianPdf(math.inf, 1.0)
