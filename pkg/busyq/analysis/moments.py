"""Busy-period moments E[B^n] from the derivatives C^(n)(0) of

    C(s) = int_0^oo exp(-st - lambda Phi(t)) lambda (1 - G(t)) dt,

together with the constant-service recursion for C^(n)(0) and the beta-const closed form.
"""
from __future__ import annotations
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Literal, Optional

from busyq import config
from busyq.analysis.distributions import BetaConstService, ConstantService, QueueModel, check_beta_range
from busyq.analysis.quadrature import integrate, integrate_to_infinity
from busyq.errors import CancellationWarning, ModelValidationError, NumericalError

logger = logging.getLogger(__name__)

Source = Literal["closed-form", "recursion", "quadrature"]
MomentMethod = Literal["auto", "recursion", "closed"]

CANCELLATION_DIGITS = 8.0


@dataclass
class MomentWorkspace:
    queue: QueueModel
    cvals: List[float] = field(default_factory=list)
    c_source: List[Source] = field(default_factory=list)
    moments: List[float] = field(default_factory=list)
    moment_source: List[Source] = field(default_factory=list)


def _check_cap(n_max: int) -> None:
    cap = config.MOMENT_CAP
    if n_max < 0 or n_max > cap:
        raise ModelValidationError(f"moment order {n_max} outside [0, {cap}]", code="DOMAIN_ERROR", path="/n")


def _monitored_sum(terms: List[float], what: str) -> float:
    total = math.fsum(terms)
    biggest = max((abs(x) for x in terms), default=0.0)
    if biggest > 0:
        lost = math.log10(biggest / abs(total)) if total != 0 else float("inf")
        if lost > CANCELLATION_DIGITS:
            msg = f"{what}: alternating sum lost {lost:.1f} significant digits"
            logger.warning(msg)
            warnings.warn(msg, CancellationWarning, stacklevel=3)
    return total


# ------------------------------------------------------------------
# C^(n)(0)
# ------------------------------------------------------------------
def constant_c_recursion(lam: float, alpha: float, n_max: int) -> List[float]:
    a = math.exp(-lam * alpha)
    out = [-math.expm1(-lam * alpha)]
    for n in range(1, n_max + 1):
        terms = [-a * (-alpha) ** n, -n * out[-1] / lam]
        out.append(_monitored_sum(terms, f"C^({n})(0) recursion"))
    return out


def c_quadrature(queue: QueueModel, n: int) -> float:
    """C^(n)(0) by quadrature over [0, T] and [T, oo)."""
    service = queue.service
    lam = queue.lam
    T = service.truncation_point()
    points = [service.mean] if isinstance(service, ConstantService) else None

    def integrand(t: float) -> float:
        return (-t) ** n * math.exp(-lam * float(service.phi(t))) * lam * float(service.tail(t))

    eps = 1e-12 / (n + 1)
    head, _ = integrate(integrand, 0.0, T, epsabs=eps, epsrel=1e-10, points=points, label=f"C^({n})(0)")
    rest, _ = integrate_to_infinity(integrand, T, epsabs=eps, epsrel=1e-10, label=f"C^({n})(0) remainder")
    return head + rest


def c_derivatives(queue: QueueModel, n_max: int, *, workspace: Optional[MomentWorkspace] = None) -> List[float]:
    """C^(0)(0)..C^(n_max)(0): recursion for constant services, quadrature otherwise."""
    _check_cap(n_max)
    service = queue.service
    if isinstance(service, ConstantService):
        values = constant_c_recursion(queue.lam, service.alpha, n_max)
        source: Source = "recursion"
    else:
        values = [-math.expm1(-queue.rho)] + [c_quadrature(queue, n) for n in range(1, n_max + 1)]
        source = "quadrature"
    if workspace is not None:
        workspace.cvals = list(values)
        workspace.c_source = ["closed-form"] + [source] * n_max
    return values


# ------------------------------------------------------------------
# E[B^n]
# ------------------------------------------------------------------
def moments_from_c(lam: float, rho: float, cvals: List[float], n_max: int) -> List[float]:
    """E[B^1..B^n_max] from C^(0..n_max-1)(0) by the Leibniz-rule recursion."""
    if rho > 700.0:
        raise NumericalError(f"e^rho overflows for rho={rho:.6g}", code="OVERFLOW", path="/service")
    e_rho = math.exp(rho)
    out: List[float] = []
    for n in range(1, n_max + 1):
        terms = [e_rho / lam * n * cvals[n - 1]]
        for p in range(1, n):
            terms.append(-e_rho * (-1) ** (n - p) * math.comb(n, p) * out[n - p - 1] * cvals[p])
        value = (-1) ** (n + 1) * _monitored_sum(terms, f"E[B^{n}]")
        if not value > 0:
            raise NumericalError(
                f"E[B^{n}] = {value:.6g} is not positive; C^(n)(0) values are too inaccurate",
                code="INCONSISTENT_RESULT",
            )
        out.append(value)
    return out


def beta_moments(lam: float, rho: float, beta: float, n_max: int) -> List[float]:
    check_beta_range(lam, rho, beta)
    k = lam + beta
    if k <= 0.0:
        return [0.0] * n_max
    a = math.exp(-rho)
    weight = k / lam * -math.expm1(-rho)
    return [weight * math.factorial(n) / (a * k) ** n for n in range(1, n_max + 1)]


def busy_moments(queue: QueueModel, n_max: int, method: MomentMethod = "auto",
                 *, workspace: Optional[MomentWorkspace] = None) -> List[float]:
    _check_cap(n_max)
    service = queue.service
    ws = workspace if workspace is not None else MomentWorkspace(queue=queue)
    use_closed = method == "closed" or (method == "auto" and isinstance(service, BetaConstService))
    if use_closed:
        if not isinstance(service, BetaConstService):
            raise ModelValidationError(
                "closed-form moments exist only for beta-const services", code="INVALID_MODEL", path="/service/kind"
            )
        ws.moments = beta_moments(service.lam, service.rho, service.beta, n_max)
        ws.moment_source = ["closed-form"] * n_max
        return list(ws.moments)
    cvals = c_derivatives(queue, max(n_max - 1, 0), workspace=ws)
    ws.moments = moments_from_c(queue.lam, queue.rho, cvals, n_max)
    ws.moment_source = ["recursion"] * n_max
    return list(ws.moments)


@dataclass(frozen=True)
class BusySummary:
    mean: float
    second_moment: float
    variance: float
    cv: float


def busy_summary(queue: QueueModel, method: MomentMethod = "auto") -> BusySummary:
    m1, m2 = busy_moments(queue, 2, method)
    var = max(m2 - m1 * m1, 0.0)
    return BusySummary(mean=m1, second_moment=m2, variance=var, cv=math.sqrt(var) / m1)
