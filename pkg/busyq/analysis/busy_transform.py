"""Busy-period Laplace-Stieltjes transform B(s) of the M|G|oo queue.

With Phi(t) = int_0^t (1-G) and I(s) = int_0^oo exp(-st - lambda Phi(t)) dt,

    B(s) = 1 + (s - 1/I(s)) / lambda.

I(s) diverges like e^{-rho}/s at the origin, so the code works with
J(s) = int_0^oo e^{-st} (e^{-lambda Phi(t)} - e^{-rho}) dt, which is finite, and
1/I(s) = s / (e^{-rho} + s J(s)).
"""
from __future__ import annotations
import logging
import math
import warnings
from typing import Literal, Optional, Tuple

import numpy as np

from busyq.analysis.distributions import (
    BetaConstService,
    ConstantService,
    QueueModel,
)
from busyq.analysis.laplace_inversion import TransformFn
from busyq.analysis.quadrature import integrate, integrate_to_infinity
from busyq.errors import ModelValidationError, NumericalError, PoleWarning

logger = logging.getLogger(__name__)

Method = Literal["closed-form", "quadrature"]

OVERFLOW_RHO = 700.0
POLE_FLOOR = 1e-200


def mean_busy(queue: QueueModel) -> float:
    """(e^rho - 1)/lambda, for any service law."""
    rho = queue.rho
    if rho > OVERFLOW_RHO:
        raise NumericalError(f"e^rho overflows for rho={rho:.6g}", code="OVERFLOW", path="/service")
    return math.expm1(rho) / queue.lam


def beta_const_busy_transform(lam: float, rho: float, beta: float, s: complex) -> complex:
    """Atom 1-w at zero plus an exponential of rate r with weight w."""
    a = math.exp(-rho)
    k = lam + beta
    w = k * (1.0 - a) / lam
    r = a * k
    return (1.0 - w) + w * r / (complex(s) + r)


def constant_inner(lam: float, alpha: float, s: complex) -> complex:
    """J(s) for a constant service of length alpha (entire in s)."""
    s = complex(s)
    a = math.exp(-lam * alpha)
    z = s + lam
    head = alpha if z == 0 else -np.expm1(-z * alpha) / z
    tail = alpha if s == 0 else -np.expm1(-s * alpha) / s
    return complex(head - a * tail)


class BusyTransform:
    """B(s) for one queue. Immutable; `eval` is safe to call from many threads."""

    def __init__(self, queue: QueueModel, method: Optional[Method] = None) -> None:
        self.queue = queue
        service = queue.service
        has_closed_form = isinstance(service, (BetaConstService, ConstantService))
        if method == "closed-form" and not has_closed_form:
            raise ModelValidationError(f"no closed-form B(s) for {service.kind} service",
                                       code="NO_CLOSED_FORM", path="/method")
        self.method: Method = method or ("closed-form" if has_closed_form else "quadrature")
        self.truncation = float(service.truncation_point())
        self._a = math.exp(-queue.rho)
        # Phi is exact for constant/exponential/beta-const and table-backed otherwise
        self.inner_integral = service.phi

    @property
    def analytic(self) -> bool:
        return self.method == "closed-form"

    def as_transform(self) -> TransformFn:
        return TransformFn(self.eval, analytic=self.analytic, label=f"B(s) [{self.method}]")

    def __call__(self, s: complex) -> complex:
        return self.eval(s)

    def eval(self, s: complex) -> complex:
        return self.eval_with_error(s)[0]

    def eval_with_error(self, s: complex) -> Tuple[complex, float]:
        s = complex(s)
        if s == 0:
            return 1.0 + 0.0j, 0.0
        service = self.queue.service
        lam = self.queue.lam
        if self.method == "closed-form" and isinstance(service, BetaConstService):
            return beta_const_busy_transform(lam, service.rho, service.beta, s), 0.0
        if self.method == "closed-form":
            j, err = constant_inner(lam, service.alpha, s), 0.0
        else:
            if s.real < 0:
                raise ModelValidationError(
                    f"B(s) by quadrature needs Re(s) >= 0, got s={s}", code="DOMAIN_ERROR", path="/s"
                )
            j, err = self._inner(s)
        denom = self._a + s * j
        if abs(denom) < POLE_FLOOR:
            msg = f"|e^-rho + s J(s)| = {abs(denom):.3g} near underflow at s={s}"
            logger.warning(msg)
            warnings.warn(msg, PoleWarning, stacklevel=2)
        value = 1.0 + (s / lam) * (1.0 - 1.0 / denom)
        return value, float(abs(s) ** 2 / lam * err / max(abs(denom) ** 2, 1e-300))

    def _inner(self, s: complex) -> Tuple[complex, float]:
        if s.imag < 0:
            value, err = self._inner(s.conjugate())
            return value.conjugate(), err
        lam, a, T = self.queue.lam, self._a, self.truncation
        phi = self.inner_integral
        sigma, omega = s.real, s.imag

        def gap(x: float) -> float:
            return math.exp(-lam * float(phi(x))) - a

        if omega == 0.0:
            head, e1 = integrate(lambda x: math.exp(-sigma * x) * gap(x), 0.0, T, label="J(s) on [0,T]")
            rest, e2 = integrate_to_infinity(lambda x: math.exp(-sigma * x) * gap(x), T, label="J(s) on [T,oo)")
            return complex(head + rest), e1 + e2

        damped = lambda x: math.exp(-sigma * x) * gap(x)  # noqa: E731
        re, e1 = integrate(damped, 0.0, T, weight="cos", wvar=omega, label="J(s) cos part")
        im, e2 = integrate(damped, 0.0, T, weight="sin", wvar=omega, label="J(s) sin part")
        # remainder past T: the gap is at most its value at T, damped by e^{-sigma t}
        gap_T = abs(gap(T))
        remainder = gap_T / sigma if sigma > 0 else gap_T * T
        return complex(re, -im), e1 + e2 + remainder


def eval(bt: BusyTransform, s: complex) -> complex:  # noqa: A001
    return bt.eval(s)


def mean_from_transform(bt: BusyTransform, h: float = 1e-5) -> float:
    """Forward-difference estimate -(B(h) - B(0))/h of the mean busy period."""
    return float(-(bt.eval(h).real - 1.0) / h)
