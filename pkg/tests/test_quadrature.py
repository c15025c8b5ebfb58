import math

import numpy as np
import pytest

from busyq.analysis.quadrature import cumulative, integrate, integrate_to_infinity
from busyq.errors import IntegrationError


def test_integrate_finite_interval():
    value, err = integrate(math.sin, 0.0, math.pi)
    assert value == pytest.approx(2.0, abs=1e-10)
    assert err < 1e-8


def test_integrate_with_oscillatory_weight():
    value, _ = integrate(lambda x: math.exp(-x), 0.0, 50.0, weight="cos", wvar=2.0)
    assert value == pytest.approx(1.0 / 5.0, abs=1e-9)


def test_integrate_to_infinity():
    value, _ = integrate_to_infinity(lambda x: math.exp(-2.0 * x), 1.0)
    assert value == pytest.approx(0.5 * math.exp(-2.0), rel=1e-9)


def test_divergent_integral_reports_its_code():
    with pytest.raises(IntegrationError) as exc:
        integrate_to_infinity(lambda x: 1.0 / (1.0 + x), label="tail", code="DIVERGENT_INTEGRAL")
    assert exc.value.code == "DIVERGENT_INTEGRAL"


def test_cumulative_matches_antiderivative():
    x = np.linspace(0.0, 2.0, 201)
    out = cumulative(np.exp(-x), x)
    assert out[0] == 0.0
    assert np.allclose(out, 1.0 - np.exp(-x), atol=1e-9)
