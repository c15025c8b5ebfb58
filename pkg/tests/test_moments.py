import math

import pytest

from busyq import config
from busyq.analysis.distributions import QueueModel, beta_upper
from busyq.analysis.moments import (
    MomentWorkspace,
    _monitored_sum,
    beta_moments,
    busy_moments,
    busy_summary,
    c_derivatives,
    c_quadrature,
    constant_c_recursion,
)
from busyq.errors import CancellationWarning, ModelValidationError

CONSTANT = {"kind": "constant", "alpha": 1.0}
BETA_CONST = {"kind": "beta-const", "lambda": 1.0, "rho": 1.0, "beta": 0.0}


def _queue(service: dict, lam: float = 1.0) -> QueueModel:
    return QueueModel.model_validate({"lambda": lam, "service": service})


def test_constant_recursion_first_step():
    values = constant_c_recursion(1.0, 1.0, 3)
    assert values[0] == pytest.approx(1.0 - math.exp(-1.0))
    assert values[1] == pytest.approx(-0.264241, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_constant_recursion_matches_quadrature(n):
    recursion = constant_c_recursion(1.0, 1.0, n)[n]
    assert c_quadrature(_queue(CONSTANT), n) == pytest.approx(recursion, abs=1e-8)


def test_beta_const_closed_moments():
    m1, m2, m3 = beta_moments(1.0, 1.0, 0.0, 3)
    assert m1 == pytest.approx(math.e - 1.0)
    assert m2 == pytest.approx(9.34156, abs=1e-5)
    assert m3 == pytest.approx(76.1755, abs=1e-4)


BETA_GRID = [
    (lam, rho, beta)
    for lam in (0.5, 1.0, 2.0)
    for rho in (0.5, 1.0, 2.0)
    for beta in (-0.5 * lam, 0.0, 0.5 * beta_upper(lam, rho))
]


@pytest.mark.parametrize("lam, rho, beta", BETA_GRID)
def test_recursion_reproduces_closed_moments(lam, rho, beta):
    queue = _queue({"kind": "beta-const", "lambda": lam, "rho": rho, "beta": beta}, lam)
    recursion = busy_moments(queue, 5, "recursion")
    closed = beta_moments(lam, rho, beta, 5)
    assert recursion == pytest.approx(closed, rel=1e-6)


def test_first_moment_is_mean_busy_for_constant_service():
    ws = MomentWorkspace(queue=_queue(CONSTANT))
    (m1,) = busy_moments(ws.queue, 1, workspace=ws)
    assert m1 == pytest.approx(math.e - 1.0, rel=1e-12)
    assert ws.moment_source == ["recursion"]


def test_workspace_records_c_sources():
    ws = MomentWorkspace(queue=_queue({"kind": "exponential", "rate": 1.0}))
    c_derivatives(ws.queue, 2, workspace=ws)
    assert ws.c_source == ["closed-form", "quadrature", "quadrature"]
    assert len(ws.cvals) == 3


def test_moment_cap(monkeypatch):
    monkeypatch.setattr(config, "MOMENT_CAP", 3)
    with pytest.raises(ModelValidationError) as exc:
        busy_moments(_queue(CONSTANT), 4)
    assert exc.value.code == "DOMAIN_ERROR"


def test_closed_moments_only_for_beta_const():
    with pytest.raises(ModelValidationError):
        busy_moments(_queue(CONSTANT), 2, "closed")


def test_busy_summary_variance():
    summary = busy_summary(_queue(BETA_CONST))
    assert summary.variance == pytest.approx(9.34156 - (math.e - 1.0) ** 2, abs=1e-5)
    assert summary.cv == pytest.approx(math.sqrt(summary.variance) / summary.mean)


def test_cancellation_is_reported():
    with pytest.warns(CancellationWarning):
        _monitored_sum([1e10, -1e10 + 1e-3], "probe")
