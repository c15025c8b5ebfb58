"""Service-tail reconstruction from a busy-period tail transform, and the feasibility
checker on a(t) that tells whether a candidate busy tail can come from an M|G|oo queue.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Literal, Optional, Sequence, Union

import numpy as np

from busyq.analysis.busy_transform import BusyTransform, mean_busy
from busyq.analysis.laplace_inversion import InversionConfig, TransformFn, invert_many
from busyq.errors import ModelValidationError, NonTailError, NumericalError
from busyq.utils.expressions import compile_expression, parse_rational

logger = logging.getLogger(__name__)

KAPPA_POINTS = (1e3, 1e4, 1e5)
TAIL_TOL = 1e-6
SINGULAR_TOL = 1e-9
LIMIT_TOL = 1e-3
REL_STEP = 1e-4


@dataclass(frozen=True)
class TailTransform:
    """H(s), the transform of the busy tail H(t) = 1 - B(t)."""

    hbar: TransformFn
    lam: float
    rho: float

    def __post_init__(self) -> None:
        if not (self.lam > 0 and self.rho > 0):
            raise ModelValidationError("lambda and rho must be positive", path="/lambda")

    @classmethod
    def from_busy_transform(cls, bt: BusyTransform) -> "TailTransform":
        mean = mean_busy(bt.queue)

        def hbar(s: complex) -> complex:
            s = complex(s)
            return complex(mean) if s == 0 else (1.0 - bt.eval(s)) / s

        return cls(TransformFn(hbar, bt.analytic, "H(s) from B(s)"), bt.queue.lam, bt.queue.rho)

    @classmethod
    def from_rational(cls, text: str, lam: float, rho: float) -> "TailTransform":
        rational = parse_rational(text, path="/hbar")
        return cls(TransformFn(lambda s: complex(rational(complex(s))), True, f"rational:{rational.text}"), lam, rho)

    def resolvent(self, s: complex) -> complex:
        """1 / (lambda H(s) + 1)."""
        return 1.0 / (self.lam * complex(self.hbar(s)) + 1.0)

    @property
    def atom_kappa(self) -> float:
        """lim_{s->oo} 1/(lambda H(s) + 1) by two rounds of Richardson extrapolation in 1/s."""
        g = [self.resolvent(s).real for s in KAPPA_POINTS]
        r1 = (10.0 * g[1] - g[0]) / 9.0
        r2 = (10.0 * g[2] - g[1]) / 9.0
        return (100.0 * r2 - r1) / 99.0


def recover_service_tail(tt: TailTransform, t_grid: Sequence[float],
                         cfg: Optional[InversionConfig] = None) -> np.ndarray:
    """1 - G(t) = lambda^{-1} |f_c(t)| / (kappa + int_0^t f_c), f_c the inverse of the
    resolvent with its constant part kappa removed.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0 or np.any(ts <= 0):
        raise ModelValidationError("t grid must be non-empty and positive", code="INVALID_GRID", path="/grid")
    kappa = tt.atom_kappa
    continuous = TransformFn(lambda s: tt.resolvent(s) - kappa, tt.hbar.analytic, "resolvent - kappa")
    f_c = invert_many(continuous, ts, cfg)
    running = invert_many(continuous.over_s(), ts, cfg)
    if np.all(np.abs(f_c) < 1e-14):
        raise NonTailError("resolvent inverts to a pure atom; no service tail corresponds to H", path="/hbar")
    denom = kappa + running
    if np.any(denom <= 0):
        raise NonTailError("kappa + int f_c is not positive on the grid", path="/hbar")
    tail = np.abs(f_c) / (tt.lam * denom)
    _check_tail(ts, tail)
    return tail


def _check_tail(ts: np.ndarray, tail: np.ndarray) -> None:
    bad = np.flatnonzero((tail < -TAIL_TOL) | (tail > 1.0 + TAIL_TOL))
    if bad.size:
        i = int(bad[0])
        raise NonTailError(f"recovered value {tail[i]:.6g} at t={ts[i]:.6g} is outside [0, 1]", path="/hbar")
    order = np.argsort(ts, kind="stable")
    rises = np.flatnonzero(np.diff(tail[order]) > TAIL_TOL)
    if rises.size:
        i = int(order[rises[0] + 1])
        raise NonTailError(f"recovered values increase at t={ts[i]:.6g}", path="/hbar")


# ------------------------------------------------------------------
# Feasibility of a(t)
# ------------------------------------------------------------------
@dataclass(frozen=True)
class FeasibilityProbe:
    a: Union[str, Callable[..., Any]]
    rho: float
    grid: Sequence[float]
    rel_step: float = REL_STEP

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ModelValidationError("probe grid must be positive and strictly increasing",
                                       code="INVALID_GRID", path="/grid")
        if not self.rho > 0:
            raise ModelValidationError("rho must be positive", path="/rho")

    def function(self) -> Callable[[np.ndarray], np.ndarray]:
        if isinstance(self.a, str):
            return compile_expression(self.a, "t", path="/a")
        fn = self.a
        return lambda x: np.asarray([float(fn(float(v))) for v in np.atleast_1d(x)]).reshape(np.shape(x))


@dataclass
class FeasibilityReport:
    t: np.ndarray
    cond1: np.ndarray
    signs: np.ndarray
    limit_estimate: float
    cond1_pass: bool
    cond2_pass: bool
    degenerate: bool
    sign_changes: List[float] = field(default_factory=list)

    @property
    def verdict(self) -> Literal["PASS", "FAIL"]:
        return "PASS" if self.cond1_pass and self.cond2_pass else "FAIL"


def _limit_estimate(t: np.ndarray, a: np.ndarray) -> float:
    last = t >= t[-1] / 10.0
    if last.sum() < 2:
        return float(a[-1])
    # a ~ L + c/t over the last decade
    slope, intercept = np.polyfit(1.0 / t[last], a[last], 1)
    return float(intercept)


def check_feasibility(probe: FeasibilityProbe) -> FeasibilityReport:
    k = 1.0 / math.expm1(probe.rho)
    fn = probe.function()
    t = np.asarray(probe.grid, dtype=float)
    h = probe.rel_step * t
    a0, a_plus, a_minus = fn(t), fn(t + h), fn(t - h)
    for label, singular in (("1/(e^rho - 1)", k), ("1/(1 - e^rho)", -k)):
        near = np.flatnonzero(np.abs(a0 - singular) < SINGULAR_TOL)
        if near.size:
            raise NumericalError(
                f"a(t) = {label} at t={t[near[0]]:.6g}; condition is singular there",
                code="NEAR_SINGULAR", path="/a",
            )
    d1 = (a_plus - a_minus) / (2.0 * h)
    d2 = (a_plus - 2.0 * a0 + a_minus) / (h * h)
    numerator = d2 * (a0 + k) - 2.0 * d1 ** 2
    cond1 = numerator / (a0 - k)
    scale = np.maximum(np.abs(a0), 1.0) * (np.abs(d2) + 1.0)
    degenerate = bool(np.all(np.abs(numerator) <= 1e-9 * scale))
    signs = np.sign(cond1)
    if degenerate:
        signs = np.zeros_like(cond1)
        logger.info("a(t) gives a vanishing condition numerator on the whole grid")
    flips = np.flatnonzero(signs[1:] * signs[:-1] < 0)
    limit = _limit_estimate(t, a0)
    return FeasibilityReport(
        t=t,
        cond1=cond1,
        signs=signs,
        limit_estimate=limit,
        cond1_pass=bool(not degenerate and np.all(cond1 > 0)),
        cond2_pass=abs(limit) <= LIMIT_TOL * max(1.0, float(np.max(np.abs(a0)))),
        degenerate=degenerate,
        sign_changes=[float(0.5 * (t[i] + t[i + 1])) for i in flips],
    )
