import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanclt.errors import DomainError
from meanclt.numerics import Tolerance, gauss_cdf, gauss_quantile, integrate_interval
from meanclt.wasserstein import (EmpiricalSample, FinitePmf, ks_sample_gauss,
                                 sample_from_csv, w1_pmf_gauss, w1_sample_gauss,
                                 w1_sample_sample)

SQRT_2_OVER_PI = 0.7978845608028654


def w1_xdomain_oracle(values: np.ndarray, sigma: float) -> float:
    """Adaptive quadrature of |Fhat - Phi_sigma|, split at atoms and crossings."""
    x = np.sort(values)
    m = x.size
    pts = np.concatenate([[x[0] - 8 * sigma], x, [x[-1] + 8 * sigma]])
    total = 0.0
    for i in range(pts.size - 1):
        a, b = pts[i], pts[i + 1]
        if b <= a:
            continue
        c = i / m
        ends = [a, b]
        if 0.0 < c < 1.0:
            xc = sigma * float(gauss_quantile(c))
            if a < xc < b:
                ends = [a, xc, b]
        for lo, hi in zip(ends[:-1], ends[1:]):
            total += integrate_interval(
                lambda t, c=c: np.abs(c - np.asarray(gauss_cdf(t / sigma))),
                lo, hi, Tolerance(1e-12, 1e-12, 40))
    return total


class TestSampleGauss:
    def test_single_zero_is_mean_abs_deviation(self):
        s = EmpiricalSample(np.array([0.0]))
        assert w1_sample_gauss(s, 1.0) == pytest.approx(SQRT_2_OVER_PI, abs=1e-14)

    def test_large_gaussian_sample_is_small(self):
        gen = np.random.default_rng(2024)
        s = EmpiricalSample(gen.normal(0.0, 1.0, 100_000))
        assert w1_sample_gauss(s, 1.0) < 0.02

    def test_two_point_matches_quadrature(self):
        vals = np.array([-1.0, 1.0])
        got = w1_sample_gauss(EmpiricalSample(vals), 1.0)
        assert got == pytest.approx(w1_xdomain_oracle(vals, 1.0), abs=1e-6)

    def test_grows_with_sigma(self):
        s = EmpiricalSample(np.array([-1.0, 1.0]))
        v = [w1_sample_gauss(s, sig) for sig in (1.0, 5.0, 25.0, 125.0)]
        assert v[0] < v[1] < v[2] < v[3]
        assert v[3] > 50.0

    def test_dual_form_agreement_random_samples(self):
        gen = np.random.default_rng(7)
        for trial in range(30):
            m = int(gen.integers(1, 40))
            vals = gen.normal(0.0, 2.0, m)
            if trial % 3 == 0:
                vals = np.round(vals)  # heavy ties
            sigma = float(gen.uniform(0.4, 2.5))
            got = w1_sample_gauss(EmpiricalSample(vals), sigma)
            assert got == pytest.approx(w1_xdomain_oracle(vals, sigma), abs=1e-6)

    def test_scale_equivariance(self):
        gen = np.random.default_rng(8)
        vals = gen.normal(0.0, 1.0, 200)
        base = w1_sample_gauss(EmpiricalSample(vals), 1.3)
        for c in (0.25, 2.0, 17.5):
            scaled = w1_sample_gauss(EmpiricalSample(c * vals), c * 1.3)
            assert scaled == pytest.approx(c * base, rel=1e-12, abs=1e-10)

    def test_triangle_sanity(self):
        gen = np.random.default_rng(9)
        s1 = EmpiricalSample(gen.normal(0.0, 1.0, 150))
        s2 = EmpiricalSample(gen.normal(0.2, 1.1, 150))
        d1 = w1_sample_gauss(s1, 1.0)
        d2 = w1_sample_gauss(s2, 1.0)
        d12 = w1_sample_sample(s1, s2)
        assert d1 <= d12 + d2 + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31), st.floats(-0.5, 0.5))
    def test_crossing_continuity(self, seed, delta):
        # moving one point by delta moves the distance by at most |delta|
        gen = np.random.default_rng(seed)
        vals = gen.normal(0.0, 1.0, 25)
        moved = vals.copy()
        moved[0] += delta
        before = w1_sample_gauss(EmpiricalSample(vals), 1.0)
        after = w1_sample_gauss(EmpiricalSample(moved), 1.0)
        assert abs(after - before) <= abs(delta) + 1e-12

    def test_sigma_domain(self):
        s = EmpiricalSample(np.array([0.0]))
        for bad in (0.0, -1.0, math.inf):
            with pytest.raises(DomainError):
                w1_sample_gauss(s, bad)


class TestPmfGauss:
    def test_point_mass(self):
        p = FinitePmf(np.array([0.0]), np.array([1.0]))
        assert w1_pmf_gauss(p, 1.0) == pytest.approx(SQRT_2_OVER_PI, abs=1e-14)

    def test_two_step_rademacher_pair(self):
        r = math.sqrt(2.0)
        p = FinitePmf(np.array([-r, 0.0, r]), np.array([0.25, 0.5, 0.25]))
        got = w1_pmf_gauss(p, 1.0)
        oracle = w1_xdomain_oracle(np.repeat(p.atoms, [1, 2, 1]), 1.0)
        assert got == pytest.approx(oracle, abs=1e-8)

    def test_sign_flip_invariance(self):
        p = FinitePmf(np.array([-2.0, -0.5, 1.0]), np.array([0.2, 0.5, 0.3]))
        q = FinitePmf(np.array([-1.0, 0.5, 2.0]), np.array([0.3, 0.5, 0.2]))
        assert w1_pmf_gauss(p, 1.4) == pytest.approx(w1_pmf_gauss(q, 1.4), abs=1e-13)

    def test_matches_sample_version_on_uniform_weights(self):
        vals = np.array([-1.5, -0.25, 0.75, 2.0])
        p = FinitePmf(vals, np.full(4, 0.25))
        s = EmpiricalSample(vals)
        assert w1_pmf_gauss(p, 0.8) == pytest.approx(w1_sample_gauss(s, 0.8), abs=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            FinitePmf(np.array([0.0, 0.0]), np.array([0.5, 0.5]))
        with pytest.raises(DomainError):
            FinitePmf(np.array([0.0]), np.array([0.9]))


class TestSampleSample:
    def test_identical(self):
        s = EmpiricalSample(np.array([0.3, -1.2, 4.0]))
        assert w1_sample_sample(s, s) == 0.0

    def test_two_singletons(self):
        assert w1_sample_sample(EmpiricalSample([0.0]), EmpiricalSample([1.0])) == 1.0

    def test_equal_sizes_sorted_coupling(self):
        got = w1_sample_sample(EmpiricalSample([0.0, 0.0]), EmpiricalSample([0.0, 2.0]))
        assert got == 1.0

    def test_unequal_sizes(self):
        got = w1_sample_sample(EmpiricalSample([0.0, 1.0]),
                               EmpiricalSample([0.0, 0.5, 1.0]))
        assert got == pytest.approx(1.0 / 6.0, abs=1e-15)

    def test_unequal_matches_pmf_reasoning(self):
        gen = np.random.default_rng(4)
        x = gen.normal(size=7)
        y = gen.normal(size=11)
        # oracle: dense quantile-domain Riemann sum
        u = (np.arange(1_000_000) + 0.5) / 1_000_000
        xi = np.minimum((np.ceil(u * 7) - 1).astype(int), 6)
        yi = np.minimum((np.ceil(u * 11) - 1).astype(int), 10)
        oracle = float(np.abs(np.sort(x)[xi] - np.sort(y)[yi]).mean())
        got = w1_sample_sample(EmpiricalSample(x), EmpiricalSample(y))
        assert got == pytest.approx(oracle, abs=1e-5)


class TestKolmogorov:
    def test_single_zero(self):
        assert ks_sample_gauss(EmpiricalSample([0.0]), 1.0) == pytest.approx(0.5)

    def test_equioscillation(self):
        m = 32
        qs = gauss_quantile((np.arange(1, m + 1) - 0.5) / m)
        assert ks_sample_gauss(EmpiricalSample(qs), 1.0) == pytest.approx(1 / (2 * m), abs=1e-12)

    def test_gaussian_sample_ks_small(self):
        gen = np.random.default_rng(11)
        m = 10_000
        s = EmpiricalSample(gen.normal(0.0, 1.0, m))
        assert ks_sample_gauss(s, 1.0) < 1.63 / math.sqrt(m)


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "sample.csv"
        path.write_text("0.5\n\n-1.25\n3.0\n")
        s = sample_from_csv(path)
        assert np.array_equal(s.values, np.array([-1.25, 0.5, 3.0]))
