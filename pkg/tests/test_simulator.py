import math

import numpy as np
import pytest

from busyq.analysis.busy_law import beta_busy_df
from busyq.analysis.busy_transform import mean_busy
from busyq.analysis.distributions import QueueModel
from busyq.analysis.network import NetworkModel
from busyq.errors import ModelValidationError, NumericalError
from busyq.simulation.simulator import (
    SimConfig,
    empirical_df,
    ks_distance,
    ks_pvalue,
    simulate_network,
    simulate_queue,
)

EXP = {"kind": "exponential", "rate": 1.0}


def _queue(service: dict, lam: float = 1.0) -> QueueModel:
    return QueueModel.model_validate({"lambda": lam, "service": service})


@pytest.mark.parametrize(
    "service, lam",
    [
        ({"kind": "constant", "alpha": 1.0}, 1.0),
        (EXP, 0.5),
        ({"kind": "beta-const", "lambda": 1.0, "rho": 1.0, "beta": 0.0}, 1.0),
    ],
)
def test_mean_busy_period_within_four_standard_errors(service, lam):
    queue = _queue(service, lam)
    result = simulate_queue(queue, SimConfig(seed=1, periods=100_000))
    assert result.periods == 100_000
    assert abs(result.mean_busy - mean_busy(queue)) < 4 * result.standard_error


def test_idle_periods_are_exponential():
    result = simulate_queue(_queue(EXP, 2.0), SimConfig(seed=2, periods=50_000))
    assert abs(result.mean_idle - 0.5) < 4 * 0.5 / math.sqrt(result.idle.size)


def test_zero_length_busy_periods_follow_the_atom():
    queue = _queue({"kind": "beta-const", "lambda": 1.0, "rho": 1.0, "beta": 0.0})
    result = simulate_queue(queue, SimConfig(seed=3, periods=100_000))
    assert result.empty_fraction == pytest.approx(math.exp(-1.0), abs=0.01)
    ks = ks_distance(result.durations, lambda t: beta_busy_df(1.0, 1.0, 0.0, np.maximum(t, 0.0)) * (t >= 0))
    assert ks < 1.95 / math.sqrt(result.periods)


def test_constant_service_busy_periods_are_at_least_alpha():
    result = simulate_queue(_queue({"kind": "constant", "alpha": 1.0}), SimConfig(seed=4, periods=10_000))
    assert result.durations.min() >= 1.0 - 1e-9


def test_same_seed_same_sample():
    cfg = SimConfig(seed=9, periods=2_000)
    a = simulate_queue(_queue(EXP), cfg)
    b = simulate_queue(_queue(EXP), cfg)
    assert np.array_equal(a.durations, b.durations)


def test_replications_stack_their_periods(monkeypatch):
    monkeypatch.setenv("BUSYQ_THREADS", "2")
    result = simulate_queue(_queue(EXP), SimConfig(seed=5, periods=1_000, replications=3))
    assert result.periods == 3_000
    assert result.replications == 3


def test_horizon_and_warmup():
    result = simulate_queue(_queue(EXP), SimConfig(seed=6, horizon=2_000.0, warmup=100.0))
    assert result.periods > 0
    assert np.all(result.durations >= 0.0)


def test_horizon_too_short_for_a_period():
    with pytest.raises(NumericalError) as exc:
        simulate_queue(_queue({"kind": "constant", "alpha": 1.0}), SimConfig(seed=0, horizon=1e-6))
    assert exc.value.code == "ZERO_PERIODS"


def test_config_needs_a_target():
    with pytest.raises(ModelValidationError):
        SimConfig(seed=0)


def test_tandem_network_sojourn_mean():
    net = NetworkModel.model_validate({
        "nodes": [{"lambda": 1.0, "service": EXP}, {"lambda": 0.0, "service": EXP}],
        "routing": [[0.0, 1.0], [0.0, 0.0]],
    })
    sojourns = simulate_network(net, 50_000, SimConfig(seed=7, periods=1))
    se = sojourns.std(ddof=1) / math.sqrt(sojourns.size)
    assert abs(sojourns.mean() - 2.0) < 4 * se


def test_feedback_network_sojourn_law():
    net = NetworkModel.model_validate({"nodes": [{"lambda": 1.0, "service": EXP}], "routing": [[0.5]]})
    sojourns = simulate_network(net, 50_000, SimConfig(seed=8, periods=1))
    ks = ks_distance(sojourns, lambda t: 1.0 - np.exp(-0.5 * np.maximum(t, 0.0)))
    assert ks < 1.95 / math.sqrt(sojourns.size)


def test_network_needs_customers():
    net = NetworkModel.model_validate({"nodes": [{"lambda": 1.0, "service": EXP}], "routing": [[0.0]]})
    with pytest.raises(ModelValidationError):
        simulate_network(net, 0, SimConfig(seed=0, periods=1))


def test_empirical_df_and_ks_helpers():
    assert np.allclose(empirical_df([0.0, 1.0, 1.0, 3.0], [0.5, 1.0, 5.0]), [0.25, 0.75, 1.0])
    draws = np.random.default_rng(10).exponential(1.0, 20_000)
    exp_df = lambda t: 1.0 - np.exp(-np.maximum(t, 0.0))  # noqa: E731
    assert ks_distance(draws, exp_df) < 1.95 / math.sqrt(draws.size)
    assert ks_pvalue(draws, exp_df) > 1e-3


def test_ks_distance_counts_atoms():
    # all mass at 0 against a law without an atom: the jump is the whole distance
    assert ks_distance(np.zeros(10), lambda t: 1.0 - np.exp(-np.maximum(t, 0.0))) == pytest.approx(1.0)


def test_empty_sample():
    with pytest.raises(ModelValidationError) as exc:
        empirical_df([], [1.0])
    assert exc.value.code == "EMPTY_SAMPLE"
