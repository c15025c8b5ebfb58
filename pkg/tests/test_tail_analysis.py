import math

import numpy as np
import pytest

from busyq.analysis.busy_transform import BusyTransform
from busyq.analysis.distributions import QueueModel, beta_const_tail
from busyq.analysis.tail_analysis import (
    FeasibilityProbe,
    TailTransform,
    check_feasibility,
    recover_service_tail,
)
from busyq.errors import ModelValidationError, NonTailError, NumericalError

# busy tail of the beta-const queue with lambda = rho = 1, beta = 0
BUSY_TAIL = 'rational:"(0.6321205588285577)/(s + 0.36787944117144233)"'


def test_recover_tail_from_rational_transform():
    tt = TailTransform.from_rational(BUSY_TAIL, 1.0, 1.0)
    assert tt.atom_kappa == pytest.approx(1.0, abs=1e-6)
    tail = recover_service_tail(tt, [1.0])
    assert tail[0] == pytest.approx(0.3873, abs=1e-3)


@pytest.mark.parametrize("lam, rho, beta", [(1.0, 1.0, 0.0), (0.5, 1.0, 0.2), (1.0, 0.5, -0.5)])
def test_recover_tail_from_busy_transform(lam, rho, beta):
    queue = QueueModel.model_validate({"service": {"kind": "beta-const", "lambda": lam, "rho": rho, "beta": beta}})
    tt = TailTransform.from_busy_transform(BusyTransform(queue))
    t = np.linspace(0.25, 6.0, 24)
    assert np.allclose(recover_service_tail(tt, t), beta_const_tail(lam, rho, beta, t), atol=1e-3)


def test_tail_transform_at_zero_is_mean_busy():
    queue = QueueModel.model_validate({"lambda": 1.0, "service": {"kind": "constant", "alpha": 1.0}})
    tt = TailTransform.from_busy_transform(BusyTransform(queue))
    assert tt.hbar(0.0).real == pytest.approx(math.e - 1.0)


def test_pure_atom_is_not_a_tail():
    tt = TailTransform.from_rational('rational:"0/(s + 1)"', 1.0, 1.0)
    with pytest.raises(NonTailError) as exc:
        recover_service_tail(tt, [1.0])
    assert exc.value.code == "NON_TAIL"


def test_growing_transform_is_not_a_tail():
    tt = TailTransform.from_rational('rational:"1/(s - 1)"', 1.0, 1.0)
    with pytest.raises(NonTailError):
        recover_service_tail(tt, [0.5, 2.0])


def test_recover_tail_needs_positive_grid():
    tt = TailTransform.from_rational(BUSY_TAIL, 1.0, 1.0)
    with pytest.raises(ModelValidationError) as exc:
        recover_service_tail(tt, [0.0, 1.0])
    assert exc.value.code == "INVALID_GRID"


def test_exponential_candidate_fails_everywhere():
    # rho = ln 2 puts the singular level 1/(e^rho - 1) at 1
    report = check_feasibility(FeasibilityProbe("0.5*exp(-t)", math.log(2.0), np.geomspace(0.1, 50.0, 40)))
    assert report.verdict == "FAIL"
    assert not report.cond1_pass
    assert np.all(report.signs < 0)


def test_rational_candidate_changes_sign_once():
    report = check_feasibility(FeasibilityProbe("10/(1+t)", math.log(2.0), np.geomspace(0.1, 50.0, 40)))
    assert report.verdict == "FAIL"
    assert len(report.sign_changes) == 1
    assert report.sign_changes[0] == pytest.approx(9.0, abs=1.0)


def test_negative_exponential_candidate_passes():
    report = check_feasibility(FeasibilityProbe("-0.5*exp(-t)", math.log(2.0), np.geomspace(0.1, 100.0, 60)))
    assert report.cond1_pass
    assert report.limit_estimate == pytest.approx(0.0, abs=1e-3)
    assert report.verdict == "PASS"


def test_zero_candidate_is_degenerate():
    report = check_feasibility(FeasibilityProbe("0*t", math.log(2.0), np.geomspace(0.1, 50.0, 40)))
    assert report.degenerate
    assert np.all(report.signs == 0.0)
    assert report.sign_changes == []
    assert not report.cond1_pass
    assert report.cond2_pass
    assert report.limit_estimate == pytest.approx(0.0, abs=1e-12)
    assert report.verdict == "FAIL"


def test_candidate_on_singular_level():
    with pytest.raises(NumericalError) as exc:
        check_feasibility(FeasibilityProbe("1 + 0*t", math.log(2.0), [0.5, 1.0]))
    assert exc.value.code == "NEAR_SINGULAR"


def test_probe_validates_grid():
    with pytest.raises(ModelValidationError):
        FeasibilityProbe("exp(-t)", 1.0, [1.0, 0.5])


def test_probe_accepts_callables():
    report = check_feasibility(FeasibilityProbe(lambda t: 0.5 * math.exp(-t), math.log(2.0), [0.5, 1.0, 2.0]))
    assert report.verdict == "FAIL"
