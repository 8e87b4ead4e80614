import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate, special

from backend.litehetnet.specfun import (
    QuadratureError,
    QuadratureSettings,
    beta_upper,
    beta_upper_tail,
    gamma_upper_tail,
    semi_infinite_integral,
    semi_infinite_integral_vec,
    truncation_radius,
)


def _beta_upper_oracle(a, b, z):
    value, _ = integrate.quad(
        lambda u: u ** (a - 1.0), z, 1.0, weight="alg", wvar=(0.0, b - 1.0), epsabs=0.0, epsrel=1e-12
    )
    return value


@pytest.mark.parametrize(
    "a, b, z",
    [
        (2.0 / 4.5, 1.0 - 2.0 / 4.5, 0.3),
        (2.0 / 4.7, 1.0 - 2.0 / 4.7, 0.95),
        (1.0 + 2.0 / 4.5, 3.0 - 2.0 / 4.5, 0.5),
        (1.0 + 2.0 / 4.0, 0.5, 0.01),
        (2.0, 3.0, 0.999),
    ],
)
def test_beta_upper_matches_direct_integral(a, b, z):
    assert beta_upper(a, b, z) == pytest.approx(_beta_upper_oracle(a, b, z), rel=1e-8)


def test_beta_upper_full_range_is_complete_beta():
    assert beta_upper(2.0, 3.0, 0.0) == pytest.approx(special.beta(2.0, 3.0), rel=1e-12)
    assert beta_upper(2.0, 3.0, 1.0) == pytest.approx(0.0, abs=1e-30)


def test_beta_upper_rejects_out_of_range():
    with pytest.raises(ValueError):
        beta_upper(0.5, 0.5, 1.5)
    with pytest.raises(ValueError):
        beta_upper(0.5, 0.5, -0.1)
    with pytest.raises(ValueError):
        beta_upper_tail(0.5, -1.0, 0.5)


def test_beta_upper_tail_vectorised():
    orders = np.arange(1, 6) - 0.4
    values = beta_upper_tail(1.4, orders, 1e-3)
    assert values.shape == (5,)
    for b, value in zip(orders, values):
        assert value == pytest.approx(_beta_upper_oracle(1.4, b, 1.0 - 1e-3), rel=1e-7)


def test_beta_upper_tail_small_w_scaling():
    # ∫_{1-w}^1 u^(a-1) (1-u)^(b-1) du ≈ w^b / b
    w, b = 1e-9, 1.3
    assert beta_upper_tail(1.5, b, w) == pytest.approx(w**b / b, rel=1e-6)


def test_gamma_upper_tail_is_erlang_sum():
    x = np.array([0.0, 0.5, 2.0, 7.0])
    expected = np.exp(-x) * (1.0 + x + x**2 / 2.0)
    np.testing.assert_allclose(gamma_upper_tail(3, x), expected, rtol=1e-13)
    with pytest.raises(ValueError):
        gamma_upper_tail(0, 1.0)
    with pytest.raises(ValueError):
        gamma_upper_tail(2, -1.0)


def test_truncation_radius_locates_drop():
    envelope = lambda y: np.log(y) - np.square(y)
    peak, upper = truncation_radius(envelope)
    true_peak = math.log(math.sqrt(0.5)) - 0.5
    assert 0.3 < peak < 1.1
    assert envelope(np.asarray(upper)) == pytest.approx(true_peak - math.log(1e16), abs=1e-6)


def test_truncation_radius_fails_without_decay():
    with pytest.raises(QuadratureError):
        truncation_radius(lambda y: np.log(y))


def test_semi_infinite_integral_gaussian_envelope():
    density = 1e-3
    value = semi_infinite_integral(
        lambda y: y * math.exp(-math.pi * density * y * y), envelope_density=density
    )
    assert value == pytest.approx(1.0 / (2.0 * math.pi * density), rel=1e-8)


def test_semi_infinite_integral_without_envelope():
    assert semi_infinite_integral(lambda y: math.exp(-y)) == pytest.approx(1.0, rel=1e-9)


def test_semi_infinite_integral_vec_shares_nodes():
    values = semi_infinite_integral_vec(
        lambda y: np.array([y, y**3]) * math.exp(-y * y),
        log_envelope=lambda y: 3.0 * np.log(y) - np.square(y),
    )
    np.testing.assert_allclose(values, [0.5, 0.5], rtol=1e-8)


def test_quadrature_settings_validation():
    with pytest.raises(ValidationError):
        QuadratureSettings(rel_tol=0.0)
    with pytest.raises(ValidationError):
        QuadratureSettings(max_subdivisions=0)
    assert QuadratureSettings() == QuadratureSettings()


def test_beta_upper_tail_falls_back_to_quadrature(monkeypatch):
    a, w = 0.8, 0.3
    orders = np.array([0.5, 2.0, 5.0])
    monkeypatch.setattr(special, "betainc", lambda b, a_, x: np.full(np.shape(b), np.nan))
    values = beta_upper_tail(a, orders, w)
    expected = [_beta_upper_oracle(a, b, 1.0 - w) for b in orders]
    np.testing.assert_allclose(values, expected, rtol=1e-8)
    assert beta_upper_tail(a, 2.0, w) == pytest.approx(expected[1], rel=1e-8)
