"""Service-time models for the M|G|oo queue.

Every model evaluates its d.f. G, tail 1-G, density (where one exists), integrated
tail Phi(t) = int_0^t (1-G), Laplace-Stieltjes transform and i.i.d. samples. Models are
frozen pydantic objects parsed from the JSON fragments used by the CLI, e.g.
``{"kind": "beta-const", "lambda": 1.0, "rho": 1.0, "beta": 0.0}``.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Annotated, Any, Callable, Literal, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PrivateAttr,
    TypeAdapter,
    model_validator,
)
from scipy.integrate import fixed_quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from busyq.analysis.quadrature import cumulative, integrate, integrate_to_infinity
from busyq.errors import ModelValidationError, NumericalError
from busyq.utils.expressions import compile_expression

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# tail level that defines the truncation point T, and its cap in units of the mean
TRUNCATION_TAIL = 1e-12
TRUNCATION_CAP = 50.0
PHI_GRID_POINTS = 1024
BETA_TABLE_POINTS = 4097
ADMISSIBILITY_POINTS = 64
ADMISSIBILITY_SPAN = 20.0
BISECTION_STEPS = 64
_RANGE_TOL = 1e-12


def _arr(t: ArrayLike) -> np.ndarray:
    return np.asarray(t, dtype=float)


# ------------------------------------------------------------------
# Constant-beta closed forms (valid on the whole admissible range, beta = -lambda included)
# ------------------------------------------------------------------
def beta_upper(lam: float, rho: float) -> float:
    """Largest admissible beta, lambda/(e^rho - 1)."""
    return lam / math.expm1(rho)


def check_beta_range(lam: float, rho: float, beta: float, *, path: str = "/beta") -> None:
    if lam <= 0 or rho <= 0:
        raise ModelValidationError("lambda and rho must be positive", path=path)
    lo, hi = -lam, beta_upper(lam, rho)
    if beta < lo - _RANGE_TOL * lam or beta > hi + _RANGE_TOL * max(1.0, hi):
        raise ModelValidationError(
            f"beta={beta} outside admissible range [{lo}, {hi:.12g}]",
            code="INADMISSIBLE_BETA", path=path,
        )


def beta_const_tail(lam: float, rho: float, beta: float, t: ArrayLike) -> np.ndarray:
    t = _arr(t)
    a = math.exp(-rho)
    k = lam + beta
    if k <= 0.0:
        return np.where(t < 0, 1.0, 0.0)
    decay = np.exp(-k * np.maximum(t, 0.0))
    tail = (1.0 - a) * k * decay / (lam * (a + (1.0 - a) * decay))
    return np.where(t < 0, 1.0, tail)


def beta_const_df(lam: float, rho: float, beta: float, t: ArrayLike) -> np.ndarray:
    """G(t) of the constant-beta family; identically 1 for beta = -lambda."""
    t = _arr(t)
    return np.where(t < 0, 0.0, 1.0 - beta_const_tail(lam, rho, beta, t))


def beta_const_atom(lam: float, rho: float, beta: float) -> float:
    return 1.0 - (lam + beta) * (-math.expm1(-rho)) / lam


# ------------------------------------------------------------------
# Shared model behaviour
# ------------------------------------------------------------------
class _Service(BaseModel):
    model_config = ConfigDict(
        frozen=True, populate_by_name=True, extra="forbid", arbitrary_types_allowed=True
    )

    # ---- interface the variants fill in ----
    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def atom0(self) -> float:
        return float(self.df(0.0))

    @property
    def has_density(self) -> bool:
        return True

    @property
    def transform_is_analytic(self) -> bool:
        """True when the transform is a closed form usable on a Talbot contour."""
        return False

    def df(self, t: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def tail(self, t: ArrayLike) -> np.ndarray:
        t = _arr(t)
        return np.where(t < 0, 1.0, 1.0 - self.df(t))

    def density(self, t: ArrayLike) -> np.ndarray:
        # central differences on the d.f., forward at the origin
        t = _arr(t)
        h = 1e-5 * self.mean
        left = np.maximum(t - h, 0.0)
        right = t + h
        return (self.df(right) - self.df(left)) / (right - left)

    def phi(self, t: ArrayLike) -> np.ndarray:
        """Integrated tail int_0^t (1 - G(v)) dv."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> Any:
        u = rng.random(size)
        return _bisect_quantile(self, u)

    def truncation_point(self) -> float:
        """Smallest t with 1-G(t) < TRUNCATION_TAIL, capped at TRUNCATION_CAP means."""
        cap = TRUNCATION_CAP * self.mean
        if float(self.tail(cap)) >= TRUNCATION_TAIL:
            return cap
        hi = self.mean
        while float(self.tail(hi)) >= TRUNCATION_TAIL:
            hi *= 2.0
        hi = min(hi, cap)
        lo = 0.0
        if float(self.tail(lo)) < TRUNCATION_TAIL:
            return 0.0
        # tail is monotone; bracket the level crossing on a log scale
        return float(brentq(lambda x: math.log(max(float(self.tail(x)), 1e-300)) - math.log(TRUNCATION_TAIL),
                            lo, hi, xtol=1e-10 * hi))

    def transform(self, s: complex) -> complex:
        """Laplace-Stieltjes transform, 1 - s * int_0^oo e^{-st} (1-G(t)) dt."""
        s = complex(s)
        if s == 0:
            return 1.0 + 0.0j
        return 1.0 - s * self._tail_laplace(s)

    def _tail_laplace(self, s: complex) -> complex:
        if s.imag < 0:
            return self._tail_laplace(s.conjugate()).conjugate()
        T = self.truncation_point()
        sigma, omega = s.real, s.imag
        points = self._breakpoints()
        if omega == 0.0:
            head, _ = integrate(lambda x: math.exp(-sigma * x) * float(self.tail(x)), 0.0, T,
                                points=points, label="tail transform")
            rest, _ = integrate_to_infinity(lambda x: math.exp(-sigma * x) * float(self.tail(x)),
                                            T, label="tail transform remainder")
            return complex(head + rest)
        damped = lambda x: math.exp(-sigma * x) * float(self.tail(x))  # noqa: E731
        re, _ = integrate(damped, 0.0, T, weight="cos", wvar=omega, label="tail transform (cos)")
        im, _ = integrate(damped, 0.0, T, weight="sin", wvar=omega, label="tail transform (sin)")
        return complex(re, -im)

    def _breakpoints(self) -> list[float]:
        return []


def _bisect_quantile(model: _Service, u: Any) -> Any:
    """Vectorised inverse d.f. by bisection; values at or below the atom map to 0."""
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo = np.zeros_like(u)
    hi = np.full_like(u, max(model.mean, 1e-12))
    for _ in range(200):
        short = model.df(hi) < u
        if not short.any():
            break
        hi[short] *= 2.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = model.df(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(u <= model.atom0, 0.0, hi)
    return float(out[0]) if scalar else out


# ------------------------------------------------------------------
# Variants
# ------------------------------------------------------------------
class ConstantService(_Service):
    kind: Literal["constant"] = "constant"
    alpha: float = Field(gt=0)

    @property
    def mean(self) -> float:
        return self.alpha

    @property
    def atom0(self) -> float:
        return 0.0

    @property
    def has_density(self) -> bool:
        return False

    @property
    def transform_is_analytic(self) -> bool:
        return True

    def df(self, t):
        return np.where(_arr(t) >= self.alpha, 1.0, 0.0)

    def density(self, t):
        raise ModelValidationError(
            "constant service has no density; use the constant busy-law representation",
            code="NO_DENSITY", path="/service/kind",
        )

    def phi(self, t):
        return np.clip(_arr(t), 0.0, self.alpha)

    def sample(self, rng, size=None):
        return self.alpha if size is None else np.full(size, self.alpha)

    def truncation_point(self) -> float:
        return self.alpha

    def transform(self, s):
        return complex(np.exp(-complex(s) * self.alpha))

    def _breakpoints(self):
        return [self.alpha]


class ExponentialService(_Service):
    kind: Literal["exponential"] = "exponential"
    rate: float = Field(gt=0)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def atom0(self) -> float:
        return 0.0

    @property
    def transform_is_analytic(self) -> bool:
        return True

    def df(self, t):
        t = _arr(t)
        return np.where(t < 0, 0.0, -np.expm1(-self.rate * np.maximum(t, 0.0)))

    def tail(self, t):
        t = _arr(t)
        return np.where(t < 0, 1.0, np.exp(-self.rate * np.maximum(t, 0.0)))

    def density(self, t):
        t = _arr(t)
        return np.where(t < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(t, 0.0)))

    def phi(self, t):
        return -np.expm1(-self.rate * np.maximum(_arr(t), 0.0)) / self.rate

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def truncation_point(self) -> float:
        return min(math.log(1.0 / TRUNCATION_TAIL) / self.rate, TRUNCATION_CAP * self.mean)

    def transform(self, s):
        return self.rate / (self.rate + complex(s))


class BetaConstService(_Service):
    """Service law of the constant-beta family; its mean is rho/lambda by construction."""

    kind: Literal["beta-const"] = "beta-const"
    lam: float = Field(alias="lambda", gt=0)
    rho: float = Field(gt=0)
    beta: float

    @model_validator(mode="after")
    def _admissible(self) -> "BetaConstService":
        check_beta_range(self.lam, self.rho, self.beta)
        if self.lam + self.beta <= _RANGE_TOL * self.lam:
            raise ModelValidationError(
                "beta = -lambda gives G = 1 (zero mean); not a usable service law",
                code="INADMISSIBLE_BETA", path="/beta",
            )
        return self

    @property
    def k(self) -> float:
        return self.lam + self.beta

    @property
    def mean(self) -> float:
        return self.rho / self.lam

    @property
    def atom0(self) -> float:
        return beta_const_atom(self.lam, self.rho, self.beta)

    def df(self, t):
        return beta_const_df(self.lam, self.rho, self.beta, t)

    def tail(self, t):
        return beta_const_tail(self.lam, self.rho, self.beta, t)

    def density(self, t):
        t = np.maximum(_arr(t), 0.0)
        a = math.exp(-self.rho)
        decay = np.exp(-self.k * t)
        return a * self.k ** 2 * (1.0 - a) * decay / (self.lam * (a + (1.0 - a) * decay) ** 2)

    def phi(self, t):
        a = math.exp(-self.rho)
        t = np.maximum(_arr(t), 0.0)
        return -np.log(a + (1.0 - a) * np.exp(-self.k * t)) / self.lam

    def sample(self, rng, size=None):
        a = math.exp(-self.rho)
        u = rng.random(size)
        scalar = size is None
        u = np.atleast_1d(u)
        tail = 1.0 - u
        out = np.zeros_like(u)
        live = u > self.atom0
        y = tail[live] * self.lam * a / ((1.0 - a) * (self.k - tail[live] * self.lam))
        out[live] = -np.log(y) / self.k
        return float(out[0]) if scalar else out

    def truncation_point(self) -> float:
        a = math.exp(-self.rho)
        bound = math.log((1.0 - a) * self.k / (self.lam * a * TRUNCATION_TAIL)) / self.k
        return min(max(bound, 0.0), TRUNCATION_CAP * self.mean)


class BetaGeneralService(_Service):
    """Service law of the beta(.)-function family.

    `beta` is a function of time (callable or expression in ``t``). Point evaluations of
    the d.f. use adaptive quadrature; vector work (sampling, busy-law kernels) uses
    tables of int_0^t beta and Psi(t) = int_0^t psi on a uniform grid.
    """

    kind: Literal["beta-general"] = "beta-general"
    lam: float = Field(alias="lambda", gt=0)
    rho: float = Field(gt=0)
    beta: Union[str, Callable[..., Any]]
    check_points: int = Field(default=ADMISSIBILITY_POINTS, ge=2)

    _beta_fn: Callable[..., Any] = PrivateAttr()
    _u: np.ndarray = PrivateAttr()
    _beta_int: PchipInterpolator = PrivateAttr()
    _psi_int: PchipInterpolator = PrivateAttr()
    _psi_inf: float = PrivateAttr()

    def model_post_init(self, __context: Any) -> None:
        self._beta_fn = _as_vector_fn(self.beta, path="/beta")
        check_beta_function(self.lam, self.rho, self._beta_fn, self.check_points)
        horizon = TRUNCATION_CAP * self.mean
        u = np.linspace(0.0, horizon, BETA_TABLE_POINTS)
        bint = cumulative(self._beta_fn(u), u)
        psi = np.exp(-self.lam * u - bint)
        self._u = u
        self._beta_int = PchipInterpolator(u, bint, extrapolate=False)
        self._psi_int = PchipInterpolator(u, cumulative(psi, u), extrapolate=False)
        self._psi_inf = psi_infinity(self.lam, self._beta_fn)
        logger.debug("beta-general table built: Psi(inf)=%.12g", self._psi_inf)

    # ---- closed pieces ----
    @property
    def mean(self) -> float:
        return self.rho / self.lam

    @property
    def atom0(self) -> float:
        return 1.0 - (-math.expm1(-self.rho)) / (self.lam * self._psi_inf)

    @property
    def beta_fn(self) -> Callable[..., Any]:
        return self._beta_fn

    def _beta_integral_at(self, t: np.ndarray) -> np.ndarray:
        """int_0^t beta from the table; past its end the remainder is integrated directly."""
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)
        end = float(self._u[-1])
        out = np.atleast_1d(self._beta_int(np.minimum(flat, end))).astype(float)
        beyond = np.flatnonzero(flat > end)
        if beyond.size:
            at_end = float(self._beta_int(end))
            for i in beyond:
                rest, _ = integrate(lambda x: float(self._beta_fn(np.asarray(x))), end, float(flat[i]),
                                    label="int beta past table")
                out[i] = at_end + rest
        return out.reshape(t.shape)

    def _psi(self, t: np.ndarray) -> np.ndarray:
        return np.exp(-self.lam * t - self._beta_integral_at(t))

    def _big_psi(self, t: np.ndarray) -> np.ndarray:
        out = self._psi_int(np.minimum(t, self._u[-1]))
        return np.where(t > self._u[-1], self._psi_inf, out)

    def tail(self, t):
        t = _arr(t)
        c = -math.expm1(-self.rho)
        tp = np.maximum(t, 0.0)
        denom = self.lam * (self._psi_inf - c * self._big_psi(tp))
        tail = np.where(denom > 0, c * self._psi(tp) / np.where(denom > 0, denom, 1.0), 0.0)
        return np.where(t < 0, 1.0, np.clip(tail, 0.0, 1.0))

    def df(self, t):
        t = _arr(t)
        return np.where(t < 0, 0.0, 1.0 - self.tail(t))

    def df_quadrature(self, t: float) -> float:
        """G(t) with every integral done by adaptive quadrature."""
        c = -math.expm1(-self.rho)
        psi = lambda x: math.exp(-self.lam * x - _beta_integral(self._beta_fn, x))  # noqa: E731
        big_psi, _ = integrate(psi, 0.0, t, label="int_0^t psi") if t > 0 else (0.0, 0.0)
        denom = self._psi_inf - c * big_psi
        return 1.0 - c * psi(t) / (self.lam * denom)

    def density(self, t):
        t = np.maximum(_arr(t), 0.0)
        c = -math.expm1(-self.rho)
        psi = self._psi(t)
        d = self._psi_inf - c * self._big_psi(t)
        return c * ((self.lam + self._beta_fn(t)) * psi * d - c * psi ** 2) / (self.lam * d ** 2)

    def phi(self, t):
        c = -math.expm1(-self.rho)
        t = np.maximum(_arr(t), 0.0)
        ratio = np.minimum(c * self._big_psi(t) / self._psi_inf, c)
        return -np.log1p(-ratio) / self.lam

    def truncation_point(self) -> float:
        tails = self.tail(self._u)
        below = np.flatnonzero(tails < TRUNCATION_TAIL)
        return float(self._u[below[0]]) if below.size else float(self._u[-1])


class EmpiricalService(_Service):
    """User-supplied d.f. (callable or expression in ``t``) with an explicit atom at 0."""

    kind: Literal["empirical"] = "empirical"
    df_spec: Union[str, Callable[..., Any]] = Field(alias="df")
    alpha: Optional[float] = Field(default=None, gt=0)
    atom: Optional[float] = Field(default=None, alias="atom0", ge=0, le=1)

    _df_fn: Callable[..., Any] = PrivateAttr()
    _mean: float = PrivateAttr()
    _atom: float = PrivateAttr()
    _phi: PchipInterpolator = PrivateAttr()
    _T: float = PrivateAttr()

    def model_post_init(self, __context: Any) -> None:
        self._df_fn = _as_vector_fn(self.df_spec, path="/df")
        g0 = float(np.clip(self._df_fn(np.asarray(0.0)), 0.0, 1.0))
        if self.atom is not None and abs(self.atom - g0) > 1e-9:
            raise ModelValidationError(
                f"atom0={self.atom} disagrees with df(0)={g0}", path="/atom0"
            )
        self._atom = g0
        mean, _ = integrate_to_infinity(
            lambda x: 1.0 - float(np.clip(self._df_fn(np.asarray(x)), 0.0, 1.0)),
            label="empirical mean", code="DIVERGENT_INTEGRAL",
        )
        if not mean > 0:
            raise ModelValidationError("empirical service has zero mean", path="/df")
        if self.alpha is not None and abs(self.alpha - mean) > 1e-6 * mean:
            raise ModelValidationError(
                f"alpha={self.alpha} disagrees with the integrated tail {mean:.12g}", path="/alpha"
            )
        self._mean = mean
        probe = np.linspace(0.0, ADMISSIBILITY_SPAN * mean, 257)
        vals = self._df_fn(probe)
        if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12) or np.any(np.diff(vals) < -1e-12):
            raise ModelValidationError("df must be nondecreasing with values in [0, 1]", path="/df")
        self._T = super().truncation_point()
        self._phi = _phi_table(self, self._T)

    @property
    def mean(self) -> float:
        return self._mean

    @property
    def atom0(self) -> float:
        return self._atom

    def df(self, t):
        t = _arr(t)
        return np.where(t < 0, 0.0, np.clip(self._df_fn(np.maximum(t, 0.0)), 0.0, 1.0))

    def phi(self, t):
        t = np.maximum(_arr(t), 0.0)
        return np.where(t >= self._T, self._mean, self._phi(np.minimum(t, self._T)))

    def truncation_point(self) -> float:
        return self._T


ServiceModel = Annotated[
    Union[ConstantService, ExponentialService, BetaConstService, BetaGeneralService, EmpiricalService],
    Field(discriminator="kind"),
]
_SERVICE_ADAPTER = TypeAdapter(ServiceModel)


def parse_service(data: Any) -> _Service:
    return _SERVICE_ADAPTER.validate_python(data)


# ------------------------------------------------------------------
# beta(.) helpers
# ------------------------------------------------------------------
def _as_vector_fn(spec: Union[str, Callable[..., Any]], *, path: str) -> Callable[..., Any]:
    if isinstance(spec, str):
        return compile_expression(spec, "t", path=path)
    fn = spec

    def evaluate(x):
        x_arr = np.asarray(x, dtype=float)
        try:
            out = np.asarray(fn(x_arr), dtype=float)
            if out.shape == x_arr.shape:
                return out
            return np.broadcast_to(out, x_arr.shape).copy()
        except (TypeError, ValueError):
            return np.vectorize(lambda v: float(fn(float(v))))(x_arr)

    return evaluate


def _beta_integral(beta_fn: Callable[..., Any], t: float) -> float:
    if t <= 0:
        return 0.0
    value, _ = integrate(lambda u: float(beta_fn(np.asarray(u))), 0.0, t, label="int_0^t beta")
    return value


def psi_infinity(lam: float, beta_fn: Callable[..., Any]) -> float:
    """int_0^oo exp(-lambda w - int_0^w beta) dw by the u = x/(1-x) substitution."""

    def psi(w: float) -> float:
        exponent = -lam * w - _beta_integral(beta_fn, w)
        return math.exp(exponent) if exponent > -745.0 else 0.0

    value, _ = integrate_to_infinity(psi, label="Psi(inf)", code="DIVERGENT_INTEGRAL")
    return value


def check_beta_function(lam: float, rho: float, beta_fn: Callable[..., Any], points: int) -> None:
    """Range condition -lambda <= int_0^t beta / t <= lambda/(e^rho-1) on a log grid."""
    alpha = rho / lam
    grid = np.geomspace(1e-3 * alpha, ADMISSIBILITY_SPAN * alpha, points)
    lo, hi = -lam, beta_upper(lam, rho)
    ratios = np.array([_beta_integral(beta_fn, float(t)) / t for t in grid])
    bad = np.flatnonzero((ratios < lo - 1e-9 * lam) | (ratios > hi + 1e-9 * max(1.0, hi)))
    if bad.size:
        i = int(bad[0])
        raise ModelValidationError(
            f"int_0^t beta / t = {ratios[i]:.6g} at t={grid[i]:.6g} outside [{lo}, {hi:.6g}]",
            code="INADMISSIBLE_BETA", path="/beta",
        )
    if np.all(np.abs(ratios - lo) <= 1e-9 * lam):
        raise ModelValidationError(
            "beta = -lambda gives G = 1 (zero mean); not a usable service law",
            code="INADMISSIBLE_BETA", path="/beta",
        )


def _phi_table(model: _Service, horizon: float) -> PchipInterpolator:
    nodes = np.linspace(0.0, horizon, PHI_GRID_POINTS)
    pieces = np.empty(PHI_GRID_POINTS - 1)
    for i in range(PHI_GRID_POINTS - 1):
        pieces[i], _ = fixed_quad(model.tail, nodes[i], nodes[i + 1], n=10)
    values = np.concatenate(([0.0], np.cumsum(pieces)))
    return PchipInterpolator(nodes, values, extrapolate=False)


# ------------------------------------------------------------------
# Queue model and grid laws
# ------------------------------------------------------------------
class QueueModel(BaseModel):
    """Poisson(lambda) arrivals into infinite servers with the given service law."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid",
                              arbitrary_types_allowed=True)

    lam: float = Field(alias="lambda", gt=0)
    service: ServiceModel

    @model_validator(mode="before")
    @classmethod
    def _lambda_from_family(cls, data: Any) -> Any:
        if isinstance(data, dict) and "lambda" not in data and "lam" not in data:
            svc = data.get("service")
            lam = getattr(svc, "lam", None) if not isinstance(svc, dict) else svc.get("lambda", svc.get("lam"))
            if lam is not None:
                data = {**data, "lambda": lam}
        return data

    @model_validator(mode="after")
    def _traffic(self) -> "QueueModel":
        family_lam = getattr(self.service, "lam", None)
        if family_lam is not None and abs(family_lam - self.lam) > 1e-12 * self.lam:
            raise ModelValidationError(
                f"service family was built for lambda={family_lam}, queue has lambda={self.lam}",
                path="/lambda",
            )
        rho = self.lam * self.service.mean
        if not (rho > 0 and math.isfinite(rho)):
            raise ModelValidationError(f"traffic intensity rho={rho} must be finite and > 0", path="/service")
        return self

    @property
    def rho(self) -> float:
        return self.lam * self.service.mean

    @property
    def alpha(self) -> float:
        return self.service.mean


@dataclass(frozen=True)
class AtomicLaw:
    """Law with an atom at `offset` plus a density sampled on a uniform grid beyond it."""

    atom0: float
    density: np.ndarray
    step: float
    horizon: float
    offset: float = 0.0

    @property
    def grid(self) -> np.ndarray:
        return self.offset + self.step * np.arange(self.density.size)

    @property
    def continuous_mass(self) -> float:
        return float(np.trapezoid(self.density, dx=self.step)) if self.density.size > 1 else 0.0

    @property
    def total_mass(self) -> float:
        return self.atom0 + self.continuous_mass

    def cumulative(self) -> np.ndarray:
        return self.atom0 + cumulative_trapezoid_initial(self.density, self.step)

    def df(self, t: ArrayLike) -> np.ndarray:
        t = _arr(t)
        cdf = self.cumulative()
        inside = np.interp(t, self.grid, cdf, left=0.0, right=cdf[-1] if cdf.size else self.atom0)
        return np.where(t < self.offset, 0.0, inside)

    def mean(self) -> float:
        g = self.grid
        return self.atom0 * self.offset + float(np.trapezoid(g * self.density, dx=self.step))

    def laplace(self, s: float) -> float:
        g = self.grid
        return self.atom0 * math.exp(-s * self.offset) + float(
            np.trapezoid(np.exp(-s * g) * self.density, dx=self.step)
        )

    def check_normalised(self, tol: float) -> None:
        if abs(self.total_mass - 1.0) > tol:
            raise NumericalError(
                f"law mass {self.total_mass:.9f} differs from 1 by more than {tol}",
                code="GRID_TOO_COARSE",
            )


def cumulative_trapezoid_initial(values: np.ndarray, step: float) -> np.ndarray:
    out = np.zeros_like(values, dtype=float)
    if values.size > 1:
        out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * step)
    return out


# ------------------------------------------------------------------
# Operations
# ------------------------------------------------------------------
def df(model: _Service, t: float) -> float:
    if t < 0:
        raise ModelValidationError(f"d.f. evaluated at negative time t={t}", code="DOMAIN_ERROR", path="/t")
    if isinstance(model, BetaGeneralService):
        return model.df_quadrature(float(t))
    return float(model.df(t))


def mean(model: _Service) -> float:
    return float(model.mean)


def sample(model: _Service, rng: np.random.Generator, size: Optional[int] = None) -> Any:
    return model.sample(rng, size)
