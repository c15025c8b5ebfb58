"""Numerical inverse Laplace transform: fixed Talbot and Gaver-Stehfest."""
from __future__ import annotations
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Optional, Sequence, Tuple

import mpmath
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import isotonic_regression

from busyq import config
from busyq.errors import InversionError, ModelValidationError

logger = logging.getLogger(__name__)

Method = Literal["gaver-stehfest", "talbot"]

DEFAULT_ORDER = {"gaver-stehfest": 14, "talbot": 32}
GS_MAX_ORDER = 20
GS_MAX_ORDER_EXTENDED = 24
TALBOT_MAX_ORDER = 256
DF_VIOLATION_LIMIT = 0.01
PROPER_LAW_S = 1e-9
PROPER_LAW_TOL = 1e-6


@dataclass(frozen=True)
class TransformFn:
    """A transform F(s). `analytic` marks it safe to evaluate off the real axis."""

    fn: Callable[[complex], complex]
    analytic: bool = True
    label: str = ""

    def __call__(self, s: complex) -> complex:
        return self.fn(s)

    def over_s(self) -> "TransformFn":
        """F(s)/s, the transform of the running integral (a d.f. when F is a law's transform)."""
        fn = self.fn
        return TransformFn(lambda s: fn(s) / s, self.analytic, f"({self.label})/s")


class InversionConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    method: Optional[Method] = None
    order: Optional[int] = Field(default=None, ge=2)
    extended_precision: bool = False

    @model_validator(mode="after")
    def _order_fits(self) -> "InversionConfig":
        if self.method is not None and self.order is not None:
            _check_order(self.method, self.order, self.extended_precision)
        return self

    def resolve(self, f: TransformFn) -> Tuple[Method, int]:
        method: Method = self.method or ("talbot" if f.analytic else "gaver-stehfest")
        if method == "talbot" and not f.analytic:
            raise InversionError(
                f"talbot needs complex evaluation but {f.label or 'the transform'} is real-axis only",
                code="METHOD_UNAVAILABLE",
            )
        order = self.order or DEFAULT_ORDER[method]
        _check_order(method, order, self.extended_precision)
        return method, order


def _check_order(method: str, order: int, extended: bool) -> None:
    if method == "gaver-stehfest":
        cap = GS_MAX_ORDER_EXTENDED if extended else GS_MAX_ORDER
        if order % 2 or order > cap:
            raise InversionError(
                f"gaver-stehfest order must be even and <= {cap}, got {order}", code="ORDER_OVERFLOW"
            )
    elif order > TALBOT_MAX_ORDER:
        raise InversionError(
            f"talbot order {order} exceeds {TALBOT_MAX_ORDER} (contour exponent overflows)",
            code="ORDER_OVERFLOW",
        )


# ------------------------------------------------------------------
# Schemes
# ------------------------------------------------------------------
@lru_cache(maxsize=None)
def stehfest_weights(order: int) -> Tuple[float, ...]:
    """Salzer summation weights V_1..V_M, exact rationals rounded once to double."""
    half = order // 2
    weights = []
    with mpmath.workdps(60):
        for k in range(1, order + 1):
            terms = [
                mpmath.mpf(j) ** half * mpmath.factorial(2 * j)
                / (mpmath.factorial(half - j) * mpmath.factorial(j) * mpmath.factorial(j - 1)
                   * mpmath.factorial(k - j) * mpmath.factorial(2 * j - k))
                for j in range((k + 1) // 2, min(k, half) + 1)
            ]
            weights.append(float((-1) ** (k + half) * mpmath.fsum(terms)))
    return tuple(weights)


def gaver_stehfest(f: Callable[[complex], complex], t: float, order: int = 14,
                   *, extended_precision: bool = False) -> float:
    ln2_t = math.log(2.0) / t
    terms = [v * complex(f(k * ln2_t)).real for k, v in enumerate(stehfest_weights(order), start=1)]
    total = float(mpmath.fsum(terms)) if extended_precision else math.fsum(terms)
    return ln2_t * total


def talbot(f: Callable[[complex], complex], t: float, order: int = 32) -> float:
    """Fixed Talbot contour with r = 2M/(5t) and the midpoint rule in theta."""
    r = 2.0 * order / (5.0 * t)
    acc = [0.5 * complex(f(r)).real * math.exp(r * t)]
    for k in range(1, order):
        theta = k * math.pi / order
        cot = 1.0 / math.tan(theta)
        s = r * theta * complex(cot, 1.0)
        sigma = theta + (theta * cot - 1.0) * cot
        acc.append((np.exp(t * s) * complex(f(s)) * complex(1.0, sigma)).real)
    return r / order * math.fsum(acc)


# ------------------------------------------------------------------
# Operations
# ------------------------------------------------------------------
def invert(f: TransformFn, t: float, cfg: Optional[InversionConfig] = None) -> float:
    cfg = cfg or InversionConfig()
    if not t > 0:
        raise ModelValidationError(f"inversion needs t > 0, got {t}", code="DOMAIN_ERROR", path="/t")
    method, order = cfg.resolve(f)
    if method == "talbot":
        value = talbot(f, t, order)
    else:
        value = gaver_stehfest(f, t, order, extended_precision=cfg.extended_precision)
    if not math.isfinite(value):
        raise InversionError(f"{method} returned {value} at t={t} for {f.label or 'transform'}")
    return value


def invert_many(f: TransformFn, ts: Sequence[float], cfg: Optional[InversionConfig] = None) -> np.ndarray:
    """Per-t inversions on a thread pool; results keep grid order."""
    cfg = cfg or InversionConfig()
    ts = [float(t) for t in ts]
    t0 = time.perf_counter()
    workers = min(config.threads(), max(1, len(ts)))
    if workers == 1:
        out = [invert(f, t, cfg) for t in ts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda t: invert(f, t, cfg), ts))
    logger.debug("[timing] invert %d points (%s): %.2f ms", len(ts), f.label, (time.perf_counter() - t0) * 1000)
    return np.asarray(out, dtype=float)


@dataclass(frozen=True)
class InvertedDf:
    t: np.ndarray
    values: np.ndarray
    max_violation: float


def invert_df(f: TransformFn, ts: Sequence[float], cfg: Optional[InversionConfig] = None,
              *, atom0: Optional[float] = None) -> InvertedDf:
    """Invert F(s) = (law transform)/s on a grid into a clamped, monotone d.f.

    Points at t = 0 take `atom0` when given, else s*F(s) at a large s.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.size == 0 or np.any(ts < 0):
        raise ModelValidationError("d.f. grid must be non-empty and nonnegative", code="INVALID_GRID", path="/grid")
    mass = complex(PROPER_LAW_S * f(PROPER_LAW_S)).real
    if abs(mass - 1.0) > PROPER_LAW_TOL:
        raise ModelValidationError(
            f"s*F(s) -> {mass:.9g} as s -> 0; the transform is not that of a proper law",
            code="INVALID_MODEL",
        )
    raw = np.empty_like(ts)
    positive = ts > 0
    raw[positive] = invert_many(f, ts[positive], cfg)
    if (~positive).any():
        raw[~positive] = atom0 if atom0 is not None else complex(1e6 * f(1e6)).real

    outside = float(np.max(np.maximum(-raw, raw - 1.0), initial=0.0))
    drops = float(np.max(-np.diff(raw), initial=0.0)) if raw.size > 1 else 0.0
    violation = max(outside, drops, 0.0)
    if violation > DF_VIOLATION_LIMIT:
        raise InversionError(
            f"inverted d.f. violates [0,1]/monotonicity by {violation:.4g} (limit {DF_VIOLATION_LIMIT})",
            code="ACCURACY",
        )
    if violation > 0:
        logger.info("d.f. inversion regularised, max violation %.3g", violation)
    values = np.clip(raw, 0.0, 1.0)
    if values.size > 1:
        values = np.clip(isotonic_regression(values, increasing=True).x, 0.0, 1.0)
    return InvertedDf(t=ts, values=values, max_violation=violation)
