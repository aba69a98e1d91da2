import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanclt.errors import DomainError
from meanclt.fourier import (FourierFn, constant_fn, cosine, lebesgue_inner, product,
                             sine)


def random_fn(seed: int, k: int = 4) -> FourierFn:
    gen = np.random.default_rng(seed)
    return FourierFn(float(gen.normal()), gen.normal(size=k), gen.normal(size=k))


class TestEval:
    def test_cos_at_zero(self):
        assert cosine(1).eval(0.0) == 1.0

    def test_sin_at_quarter(self):
        assert sine(1).eval(0.25) == pytest.approx(1.0, abs=1e-15)

    def test_cos2_at_quarter(self):
        assert cosine(2).eval(0.25) == pytest.approx(-1.0, abs=1e-15)

    def test_vectorized(self):
        f = random_fn(1)
        xs = np.linspace(0, 1, 17)
        assert np.allclose(f.eval(xs), [f.eval(float(x)) for x in xs])


class TestAlgebra:
    def test_product_cos_squared(self):
        fn, dropped = product(cosine(1), cosine(1))
        assert dropped == 0.0
        assert fn.constant == pytest.approx(0.5)
        assert fn.cos_coeffs[1] == pytest.approx(0.5)
        assert abs(fn.cos_coeffs[0]) < 1e-15

    def test_product_identity(self):
        f = random_fn(2)
        fn, dropped = product(f, constant_fn(1.0))
        assert dropped == 0.0
        assert fn.allclose(f, 1e-14)

    def test_product_cos_sin(self):
        fn, _ = product(cosine(1), sine(1))
        assert fn.sin_coeffs[1] == pytest.approx(0.5)
        assert fn.constant == pytest.approx(0.0, abs=1e-16)
        assert abs(fn.cos_coeffs).max() < 1e-15

    def test_truncation_reported_not_raised(self):
        f = cosine(3)
        fn, dropped = product(f, f, cap=4)
        # the frequency-6 term is dropped; constant survives
        assert fn.max_freq <= 4
        assert dropped == pytest.approx(0.5, abs=1e-15)
        assert fn.constant == pytest.approx(0.5)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31), st.integers(0, 2 ** 31))
    def test_product_matches_pointwise(self, s1, s2):
        f, g = random_fn(s1), random_fn(s2)
        fn, dropped = product(f, g)
        assert dropped == 0.0
        xs = np.linspace(0, 1, 29, endpoint=False)
        assert np.allclose(fn.eval(xs), f.eval(xs) * g.eval(xs), atol=1e-12)

    def test_lebesgue_inner_matches_quadrature(self):
        f, g = random_fn(5), random_fn(6)
        grid = (np.arange(200_000) + 0.5) / 200_000
        riemann = float((f.eval(grid) * g.eval(grid)).mean())
        assert lebesgue_inner(f, g) == pytest.approx(riemann, abs=1e-9)


class TestStructure:
    def test_centered_flag(self):
        assert cosine(1).centered
        assert not FourierFn(0.3).centered

    def test_trailing_zero_trim(self):
        f = FourierFn(0.0, [1.0, 0.0], [0.0, 0.0])
        assert f.max_freq == 1

    def test_serialization_roundtrip(self):
        f = random_fn(9)
        g = FourierFn.from_json(f.to_json())
        assert g.allclose(f)
        d = f.to_dict()
        assert set(d) == {"constant", "cos", "sin"}

    def test_invalid_coeffs(self):
        with pytest.raises(DomainError):
            FourierFn(0.0, [np.inf], [0.0])
        with pytest.raises(DomainError):
            cosine(0)

    def test_coeff_l1_bounds_sup(self):
        f = random_fn(11)
        xs = np.linspace(0, 1, 4096, endpoint=False)
        assert np.abs(f.eval(xs)).max() <= f.coeff_l1() + 1e-12

    def test_derivative_bound(self):
        f = random_fn(12)
        xs = np.linspace(0, 1, 4096, endpoint=False)
        h = 1e-6
        deriv = (f.eval(xs + h) - f.eval(xs - h)) / (2 * h)
        assert np.abs(deriv).max() <= f.derivative_sup_bound() + 1e-3
