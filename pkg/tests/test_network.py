import numpy as np
import pytest

from busyq.analysis.network import (
    NetworkModel,
    SojournTransform,
    enumerate_paths,
    path_mixture,
    sojourn_df,
    sojourn_moments,
    sojourn_transform,
    solve_traffic,
    spectral_radius,
    visits_mean,
)
from busyq.cli.verify import random_network
from busyq.errors import ModelValidationError

EXP = {"kind": "exponential", "rate": 1.0}


def _net(lams, routing, service=EXP) -> NetworkModel:
    return NetworkModel.model_validate(
        {"nodes": [{"lambda": lam, "service": service} for lam in lams], "routing": routing}
    )


TANDEM = _net([1.0, 0.0], [[0.0, 1.0], [0.0, 0.0]])
FEEDBACK = _net([1.0], [[0.5]])


def test_tandem_transform_and_traffic():
    assert sojourn_transform(SojournTransform(TANDEM), 1.0).real == pytest.approx(0.25, abs=1e-12)
    assert np.allclose(solve_traffic(TANDEM), [1.0, 1.0])


def test_tandem_moments():
    m = sojourn_moments(SojournTransform(TANDEM))
    assert m.mean == pytest.approx(2.0, rel=1e-6)
    assert m.second_moment == pytest.approx(6.0, rel=1e-4)
    assert m.visits_mean == pytest.approx(2.0)
    assert m.variance == pytest.approx(2.0, rel=1e-3)


def test_feedback_loop_gives_exponential_sojourn():
    st = SojournTransform(FEEDBACK)
    assert solve_traffic(FEEDBACK) == pytest.approx([2.0])
    assert st.eval(1.0).real == pytest.approx(0.5 / 1.5)
    assert sojourn_moments(st).mean == pytest.approx(2.0, rel=1e-6)


def test_traffic_for_branching_network():
    net = _net([1.0, 0.0, 0.0], [[0.0, 0.5, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert np.allclose(solve_traffic(net), [1.0, 0.5, 0.0])
    assert visits_mean(net) == pytest.approx(1.5)


@pytest.mark.parametrize("s", [0.1, 1.0, 3.0, 0.5 + 1.0j])
def test_neumann_series_agrees_with_linear_solve(s):
    net = _net([0.3, 0.7, 0.2], [[0.1, 0.4, 0.2], [0.3, 0.0, 0.3], [0.2, 0.2, 0.1]])
    direct = SojournTransform(net).eval(s)
    series = SojournTransform(net, "neumann-series").eval(s)
    assert series == pytest.approx(direct, abs=1e-10)


def test_transform_is_one_at_zero():
    net = _net([0.3, 0.7, 0.2], [[0.1, 0.4, 0.2], [0.3, 0.0, 0.3], [0.2, 0.2, 0.1]])
    assert SojournTransform(net).eval(0.0) == pytest.approx(1.0, abs=1e-12)


def test_path_mixture_for_feed_forward_network():
    net = _net([0.5, 0.5, 0.0], [[0.0, 0.3, 0.6], [0.0, 0.0, 0.8], [0.0, 0.0, 0.0]])
    paths = dict(enumerate_paths(net))
    assert sum(paths.values()) == pytest.approx(1.0)
    assert paths[(0, 1, 2)] == pytest.approx(0.5 * 0.3 * 0.8)
    for s in (0.2, 1.0, 4.0):
        assert path_mixture(net, s) == pytest.approx(SojournTransform(net).eval(s), abs=1e-12)


def test_path_enumeration_refuses_cycles():
    with pytest.raises(ModelValidationError):
        list(enumerate_paths(FEEDBACK))


def test_sojourn_df_of_tandem_is_erlang():
    t = np.linspace(0.5, 6.0, 12)
    result = sojourn_df(SojournTransform(TANDEM), t)
    assert np.allclose(result.values, 1.0 - (1.0 + t) * np.exp(-t), atol=1e-6)


def test_constant_service_nodes():
    net = _net([1.0, 0.0], [[0.0, 1.0], [0.0, 0.0]], {"kind": "constant", "alpha": 1.0})
    assert SojournTransform(net).eval(1.0).real == pytest.approx(np.exp(-2.0))


def test_routing_row_sum_is_checked():
    with pytest.raises(ModelValidationError) as exc:
        _net([1.0, 0.0], [[0.5, 0.7], [0.0, 0.0]])
    assert exc.value.code == "ROUTING_ROW_SUM"
    assert exc.value.path == "/routing/0"


def test_row_sum_is_reported_before_entry_range():
    with pytest.raises(ModelValidationError) as exc:
        _net([1.0, 0.0], [[1.5, 0.0], [0.0, 0.0]])
    assert exc.value.code == "ROUTING_ROW_SUM"
    with pytest.raises(ModelValidationError) as exc:
        _net([1.0, 0.0], [[-0.5, 1.0], [0.0, 0.0]])
    assert exc.value.code == "INVALID_MODEL"
    assert exc.value.path == "/routing/0/0"


def test_routing_shape_is_checked():
    with pytest.raises(ModelValidationError) as exc:
        _net([1.0, 0.0], [[0.0, 1.0]])
    assert exc.value.code == "ROUTING_SHAPE"


def test_trapping_routing_is_rejected():
    with pytest.raises(ModelValidationError) as exc:
        _net([1.0, 0.0], [[0.0, 1.0], [1.0, 0.0]])
    assert exc.value.code == "UNSTABLE_ROUTING"


def test_network_needs_exogenous_arrivals():
    with pytest.raises(ModelValidationError):
        _net([0.0, 0.0], [[0.0, 1.0], [0.0, 0.0]])


def test_quadrature_nodes_stay_in_right_half_plane():
    net = _net([1.0], [[0.0]], {"kind": "empirical", "df": "1 - exp(-t)"})
    st = SojournTransform(net)
    assert not st.analytic
    assert st.eval(1.0).real == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ModelValidationError) as exc:
        st.eval(-0.5)
    assert exc.value.code == "DOMAIN_ERROR"


def test_spectral_radius():
    assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(0.0, abs=1e-12)
    assert spectral_radius(np.array([[0.5]])) == pytest.approx(0.5, rel=1e-8)
    assert spectral_radius(np.array([[0.2, 0.3], [0.4, 0.1]])) == pytest.approx(0.5, rel=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_random_network_identities(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(1, 7)))
    direct, series = SojournTransform(net), SojournTransform(net, "neumann-series")
    assert abs(direct.eval(0.0) - 1.0) < 1e-12
    for s in np.linspace(0.1, 5.0, 8):
        assert series.eval(s) == pytest.approx(direct.eval(s), abs=1e-10)
    gamma = solve_traffic(net)
    assert np.allclose(gamma, net.Lambda + net.P.T @ gamma, rtol=0.0, atol=1e-10 * np.max(gamma))
    assert sojourn_moments(direct, 1).mean == pytest.approx(visits_mean(net, gamma), rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_random_acyclic_network_matches_path_mixture(seed):
    rng = np.random.default_rng(100 + seed)
    net = random_network(rng, int(rng.integers(1, 5)), acyclic=True)
    st = SojournTransform(net)
    for s in np.linspace(0.1, 5.0, 8):
        assert path_mixture(net, s) == pytest.approx(st.eval(s), abs=1e-10)
