"""Adaptive quadrature wrappers shared by the analytic modules.

All integrals go through `integrate` / `integrate_to_infinity` so failures surface as
`IntegrationError` with a readable label instead of a silent IntegrationWarning.
"""
from __future__ import annotations
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson, quad

from busyq.errors import IntegrationError

ABS_TOL = 1e-10
REL_TOL = 1e-8
# quad reports ier>0 on roundoff even when the estimate is fine; accept it within this factor
_SLACK = 1e3


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: float = ABS_TOL,
    epsrel: float = REL_TOL,
    limit: int = 400,
    points: Optional[Sequence[float]] = None,
    weight: Optional[str] = None,
    wvar: Optional[float] = None,
    label: str = "integral",
    code: str = "INTEGRATION_FAILURE",
) -> Tuple[float, float]:
    """Return (value, abserr) of the integral of f on [a, b] (b may be inf)."""
    kwargs = {"epsabs": epsabs, "epsrel": epsrel, "limit": limit, "full_output": 1}
    if weight is not None:
        kwargs["weight"] = weight
        kwargs["wvar"] = wvar
    elif points is not None and np.isfinite(b):
        inner = [p for p in points if a < p < b]
        if inner:
            kwargs["points"] = inner
    res = quad(f, a, b, **kwargs)
    value, abserr = float(res[0]), float(res[1])
    if not np.isfinite(value):
        raise IntegrationError(f"{label}: non-finite result on [{a}, {b}]", code=code)
    if len(res) > 3:
        allowed = max(epsabs, epsrel * abs(value)) * _SLACK
        if abserr > allowed:
            raise IntegrationError(
                f"{label}: quadrature did not converge on [{a}, {b}] "
                f"(abserr={abserr:.3g}, allowed={allowed:.3g}): {res[3]}",
                code=code,
            )
    return value, abserr


def integrate_to_infinity(
    f: Callable[[float], float],
    a: float = 0.0,
    *,
    epsabs: float = ABS_TOL,
    epsrel: float = REL_TOL,
    label: str = "integral",
    code: str = "INTEGRATION_FAILURE",
) -> Tuple[float, float]:
    """Integral of f on [a, inf) through the substitution u = a + x/(1-x)."""

    def g(x: float) -> float:
        one_minus = 1.0 - x
        return f(a + x / one_minus) / (one_minus * one_minus)

    return integrate(g, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, label=label, code=code)


def cumulative(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Running integral from x[0], same length as x (fourth-order on smooth data)."""
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        out = np.zeros_like(values)
        if values.size == 2:
            out[1] = 0.5 * (values[0] + values[1]) * (x[1] - x[0])
        return out
    return cumulative_simpson(values, x=x, initial=0.0)
