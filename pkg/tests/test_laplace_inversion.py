import math

import numpy as np
import pytest

from busyq.analysis.busy_transform import BusyTransform
from busyq.analysis.distributions import QueueModel
from busyq.analysis.laplace_inversion import (
    InversionConfig,
    TransformFn,
    invert,
    invert_df,
    invert_many,
    stehfest_weights,
    talbot,
)
from busyq.errors import BusyqError, InversionError, ModelValidationError

EXP = TransformFn(lambda s: 1.0 / (s + 1.0), analytic=True, label="1/(s+1)")


def test_stehfest_weights_sum_to_zero():
    weights = stehfest_weights(14)
    assert len(weights) == 14
    assert abs(sum(weights)) < 1e-6 * max(abs(w) for w in weights)


@pytest.mark.parametrize("method, tol", [("talbot", 1e-9), ("gaver-stehfest", 1e-4)])
@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
def test_invert_exponential_density(method, tol, t):
    value = invert(EXP, t, InversionConfig(method=method))
    assert value == pytest.approx(math.exp(-t), abs=tol)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_talbot_error_shrinks_as_order_doubles(t):
    errors = [abs(talbot(EXP, t, order) - math.exp(-t)) for order in (4, 8, 16)]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 1e-7


def test_method_defaults_follow_analyticity():
    real_only = TransformFn(EXP.fn, analytic=False)
    assert InversionConfig().resolve(EXP) == ("talbot", 32)
    assert InversionConfig().resolve(real_only) == ("gaver-stehfest", 14)
    with pytest.raises(InversionError) as exc:
        InversionConfig(method="talbot").resolve(real_only)
    assert exc.value.code == "METHOD_UNAVAILABLE"


@pytest.mark.parametrize("order, extended", [(15, False), (22, False), (26, True)])
def test_gaver_stehfest_order_limits(order, extended):
    with pytest.raises(InversionError) as exc:
        InversionConfig(method="gaver-stehfest", order=order, extended_precision=extended)
    assert exc.value.code == "ORDER_OVERFLOW"


def test_extended_precision_allows_higher_order():
    cfg = InversionConfig(method="gaver-stehfest", order=22, extended_precision=True)
    assert invert(EXP, 1.0, cfg) == pytest.approx(math.exp(-1.0), abs=1e-5)


def test_invert_needs_positive_time():
    with pytest.raises(ModelValidationError) as exc:
        invert(EXP, 0.0)
    assert exc.value.code == "DOMAIN_ERROR"


def test_invert_many_keeps_grid_order(monkeypatch):
    monkeypatch.setenv("BUSYQ_THREADS", "4")
    ts = np.linspace(0.2, 4.0, 20)
    assert np.allclose(invert_many(EXP, ts), np.exp(-ts), atol=1e-9)


def test_busy_df_by_inversion_reference_value():
    queue = QueueModel.model_validate({"service": {"kind": "beta-const", "lambda": 1.0, "rho": 1.0, "beta": 0.0}})
    f = BusyTransform(queue).as_transform().over_s()
    for method in ("talbot", "gaver-stehfest"):
        result = invert_df(f, [1.0], InversionConfig(method=method))
        assert result.values[0] == pytest.approx(0.562444, abs=1e-4)


def test_invert_df_uses_atom_at_zero_and_is_monotone():
    f = EXP.over_s()
    result = invert_df(f, np.linspace(0.0, 6.0, 25), atom0=0.0)
    assert result.values[0] == 0.0
    assert np.all(np.diff(result.values) >= 0.0)
    assert np.all((result.values >= 0.0) & (result.values <= 1.0))


def test_invert_df_rejects_improper_law():
    half = TransformFn(lambda s: 0.5 / (s * (s + 1.0)), analytic=True)
    with pytest.raises(ModelValidationError) as exc:
        invert_df(half, [1.0])
    assert exc.value.code == "INVALID_MODEL"


def test_invert_df_flags_non_monotone_result():
    # 1 - 2e^{-t} + 2e^{-2t} dips to 1/2 at t = ln 2
    dipping = TransformFn(lambda s: 1.0 / s - 2.0 / (s + 1.0) + 2.0 / (s + 2.0), analytic=True)
    with pytest.raises(BusyqError) as exc:
        invert_df(dipping, np.linspace(0.0, 3.0, 13))
    assert exc.value.code == "ACCURACY"
