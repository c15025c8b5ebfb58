import math

import numpy as np
import pytest

from busyq.analysis.busy_law import (
    beta_busy_df,
    beta_general_busy_df,
    constant_busy_law,
    general_busy_density,
    series_density,
)
from busyq.analysis.busy_transform import BusyTransform, mean_busy
from busyq.analysis.distributions import QueueModel, beta_const_atom
from busyq.errors import ModelValidationError, NumericalError


def _queue(service: dict, lam: float = 1.0) -> QueueModel:
    return QueueModel.model_validate({"lambda": lam, "service": service})


BETA_CONST = {"kind": "beta-const", "lambda": 1.0, "rho": 1.0, "beta": 0.0}


def test_beta_busy_df_reference_value():
    assert beta_busy_df(1.0, 1.0, 0.0, 1.0) == pytest.approx(0.562444, abs=1e-5)
    assert beta_busy_df(1.0, 1.0, 0.0, 0.0) == pytest.approx(math.exp(-1.0))


def test_beta_busy_df_degenerate_family_is_one():
    assert np.all(beta_busy_df(1.0, 1.0, -1.0, np.linspace(0.0, 5.0, 6)) == 1.0)


def test_beta_busy_df_rejects_negative_time():
    with pytest.raises(ModelValidationError) as exc:
        beta_busy_df(1.0, 1.0, 0.0, -1.0)
    assert exc.value.code == "DOMAIN_ERROR"


def test_series_density_reproduces_closed_form():
    law = general_busy_density(_queue(BETA_CONST))
    assert float(law.df(1.0)) == pytest.approx(0.562444, abs=0.005)
    t = np.linspace(0.0, 8.0, 33)
    assert np.allclose(law.df(t), beta_busy_df(1.0, 1.0, 0.0, t), atol=5e-3)
    assert law.total_mass == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("lam", [0.5, 1.0])
def test_series_density_mean_for_exponential_service(lam):
    queue = _queue({"kind": "exponential", "rate": 1.0}, lam)
    law = general_busy_density(queue)
    assert law.atom0 == 0.0
    assert law.mean() == pytest.approx(mean_busy(queue), rel=1e-2)


def test_series_density_refuses_constant_service():
    with pytest.raises(ModelValidationError) as exc:
        general_busy_density(_queue({"kind": "constant", "alpha": 1.0}))
    assert exc.value.code == "NO_DENSITY"


def test_series_density_needs_a_contracting_kernel():
    with pytest.raises(NumericalError) as exc:
        series_density(0.0, lambda u: np.exp(-u), lambda u: 2.0 * np.exp(-u), 0.01, base=2.0)
    assert exc.value.code == "SERIES_DIVERGENCE"


@pytest.mark.parametrize("lam", [4.0, 6.0])
def test_series_density_heavy_traffic_on_default_grid(lam):
    queue = _queue({"kind": "exponential", "rate": 1.0}, lam)
    law = general_busy_density(queue)
    assert law.total_mass == pytest.approx(1.0, abs=1e-3)
    assert law.mean() == pytest.approx(mean_busy(queue), rel=1e-2)


def test_series_density_grid_cap():
    with pytest.raises(NumericalError) as exc:
        general_busy_density(_queue({"kind": "exponential", "rate": 1.0}, 10.0))
    assert exc.value.code == "GRID_TOO_LARGE"


@pytest.mark.parametrize("service", [BETA_CONST, {"kind": "exponential", "rate": 1.0}])
def test_series_density_matches_busy_transform(service):
    queue = _queue(service)
    law = general_busy_density(queue)
    bt = BusyTransform(queue)
    for s in (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
        assert law.laplace(s) == pytest.approx(bt.eval(s).real, abs=1e-3)


def test_series_density_atom_is_service_atom():
    law = general_busy_density(_queue(BETA_CONST))
    assert law.atom0 == pytest.approx(math.exp(-1.0), abs=1e-12)
    assert law.atom0 == pytest.approx(beta_const_atom(1.0, 1.0, 0.0), abs=1e-12)


def test_constant_busy_law_structure():
    cbl = constant_busy_law(1.0, 1.0)
    assert cbl.mean() == pytest.approx(math.e - 1.0, rel=1e-12)
    assert sum(cbl.count_pmf(n) for n in range(200)) == pytest.approx(1.0)
    law = cbl.law()
    assert float(law.df(0.999)) == 0.0
    assert float(law.df(1.0)) == pytest.approx(math.exp(-1.0), abs=1e-9)
    assert law.mean() == pytest.approx(math.e - 1.0, rel=1e-2)


def test_constant_busy_law_sampling():
    draws = constant_busy_law(1.0, 1.0).sample(np.random.default_rng(5), 100_000)
    assert draws.min() >= 1.0
    assert np.mean(draws == 1.0) == pytest.approx(math.exp(-1.0), abs=0.005)
    assert draws.mean() == pytest.approx(math.e - 1.0, rel=0.02)


def test_constant_busy_law_rejects_bad_parameters():
    with pytest.raises(ModelValidationError):
        constant_busy_law(1.0, 0.0)


def test_beta_function_busy_df_matches_constant_family():
    t = np.linspace(0.0, 6.0, 13)
    got = beta_general_busy_df(1.0, 1.0, "0", t)
    assert np.allclose(got, beta_busy_df(1.0, 1.0, 0.0, t), atol=1e-3)


def test_beta_function_busy_df_degenerate_case():
    t = np.linspace(0.0, 3.0, 4)
    assert np.all(beta_general_busy_df(1.0, 1.0, "-1 + 0*t", t) == 1.0)
