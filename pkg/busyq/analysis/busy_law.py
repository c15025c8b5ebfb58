"""Busy-period law: closed forms, the convolution-series density and the constant-service
compound representation.

Laws are returned as `AtomicLaw` grids (atom plus sampled density). Convolutions are
trapezoid-rule sums on the uniform grid; a whole series first + first*k + first*k*k + ...
is summed at once in the damped Fourier domain, and the h / (h/2) pair is combined by
Richardson extrapolation.
"""
from __future__ import annotations
import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.fft import next_fast_len
from scipy.optimize import brentq
from scipy.signal import fftconvolve

from busyq.analysis.distributions import (
    AtomicLaw,
    ConstantService,
    QueueModel,
    _as_vector_fn,
    _beta_integral,
    check_beta_function,
    check_beta_range,
    psi_infinity,
)
from busyq.analysis.quadrature import cumulative
from busyq.errors import ModelValidationError, NumericalError

logger = logging.getLogger(__name__)

STEP_FRACTION = 1.0 / 200.0
TAIL_MASS = 1e-6
MASS_TOL = 1e-3
MAX_GRID_POINTS = 4_000_000
# r^N on the damping circle; aliasing scales like its square
DAMPING = 1e-4
TILT_OVERFLOW = 700.0

Profile = Callable[[np.ndarray], np.ndarray]


def _convolve(f: np.ndarray, g: np.ndarray, step: float) -> np.ndarray:
    """Trapezoid rule for int_0^t f(u) g(t-u) du on the grid, truncated to len(f)."""
    n = f.size
    full = fftconvolve(f, g)[:n]
    # trapezoid end corrections: half weight on u = 0 and u = t
    full -= 0.5 * (f[0] * g[:n] + g[0] * f[:n])
    return full * step


def _mass(values: np.ndarray, step: float) -> float:
    return float(np.trapezoid(values, dx=step)) if values.size > 1 else 0.0


def _summed_series(first: np.ndarray, kernel: np.ndarray, step: float) -> np.ndarray:
    """first + first*kernel + first*kernel*kernel + ... with every * the trapezoid convolution.

    With A~(z) = h (A(z) - a_0/2), one trapezoid convolution has generating function
    A~ B~ / h - h a_0 b_0 / 4, and every term after the first vanishes at 0. The terms
    after the first therefore sum to (F~ K~ - h^2 f_0 k_0 / 4) / (h (1 - K~)), exactly
    on the first N coefficients. The quotient is sampled on |z| = r < 1 and inverted
    with one FFT.
    """
    n = first.size
    size = next_fast_len(2 * n)
    damp = DAMPING ** (np.arange(n) / max(n - 1, 1))
    F = np.fft.fft(first * damp, size)
    Ft = step * (F - 0.5 * first[0])
    Kt = step * (np.fft.fft(kernel * damp, size) - 0.5 * kernel[0])
    rest = (Ft * Kt - 0.25 * step * step * first[0] * kernel[0]) / (step * (1.0 - Kt))
    return np.fft.ifft(F + rest)[:n].real / damp


def _richardson(fine: Any, coarse: Any) -> Any:
    return (4.0 * fine - coarse) / 3.0


def _nodes(extent: float, step: float) -> np.ndarray:
    return np.arange(int(math.ceil(extent / step)) + 1) * step


def _tail_horizon(first: np.ndarray, kernel: np.ndarray, u: np.ndarray, step: float,
                  tail_mass: float) -> float:
    """Grid length beyond which the series law keeps less than `tail_mass`.

    The renewal density sum_n k^{*n} decays like e^{-theta t} / mu, with theta the root of
    int e^{theta t} k(t) dt = 1 and mu = int t e^{theta t} k(t) dt; the law's tail past H
    is then about F(theta) e^{-theta H} / (theta mu).
    """
    extent = float(u[-1])
    tilt_mass = lambda theta: _mass(np.exp(theta * u) * kernel, step) - 1.0  # noqa: E731
    hi = 1.0 / extent
    while tilt_mass(hi) <= 0.0:
        hi *= 2.0
        if hi * extent > TILT_OVERFLOW:
            logger.warning("kernel has no exponential tilt on [0, %.4g]; horizon left there", extent)
            return extent
    theta = brentq(tilt_mass, 0.0, hi, xtol=1e-12 * hi)
    tilted = np.exp(theta * u)
    mu = _mass(u * tilted * kernel, step)
    f_hat = _mass(tilted * first, step)
    if not (f_hat > 0.0 and mu > 0.0):
        return extent
    return max(extent, math.log(f_hat / (theta * mu * tail_mass)) / theta)


def _sampled(profile: Profile, n: int, step: float, base: float) -> np.ndarray:
    """`profile` on the first n nodes; zero past `base`."""
    out = np.zeros(n)
    m = min(n, int(math.ceil(base / step)) + 1)
    out[:m] = profile(np.arange(m) * step)
    return out


def _level(first: np.ndarray, kernel: np.ndarray, step: float) -> Tuple[np.ndarray, float, float]:
    """Summed series at one step, plus the expected and the lost mass of one convolution."""
    expected = _mass(first, step) * _mass(kernel, step)
    lost = expected - _mass(_convolve(first, kernel, step), step)
    return _summed_series(first, kernel, step), expected, lost


# ------------------------------------------------------------------
# Closed forms
# ------------------------------------------------------------------
def beta_busy_df(lam: float, rho: float, beta: float, t: Union[float, np.ndarray]) -> Any:
    """Atom at 0 mixed with an exponential; identically 1 when beta = -lambda."""
    check_beta_range(lam, rho, beta)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ModelValidationError("busy d.f. evaluated at negative time", code="DOMAIN_ERROR", path="/t")
    a = math.exp(-rho)
    k = lam + beta
    out = 1.0 - k / lam * (-math.expm1(-rho)) * np.exp(-a * k * t_arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TruncatedExp:
    """Exponential(lam) conditioned on being below alpha."""

    lam: float
    alpha: float

    @property
    def mass(self) -> float:
        return -math.expm1(-self.lam * self.alpha)

    def df(self, t):
        t = np.asarray(t, dtype=float)
        inside = -np.expm1(-self.lam * np.clip(t, 0.0, self.alpha)) / self.mass
        return np.where(t < 0, 0.0, np.where(t >= self.alpha, 1.0, inside))

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t < self.alpha), self.lam * np.exp(-self.lam * t) / self.mass, 0.0)

    def mean(self) -> float:
        return 1.0 / self.lam - self.alpha * math.exp(-self.lam * self.alpha) / self.mass

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        u = rng.random(size)
        return -np.log1p(-u * self.mass) / self.lam


# ------------------------------------------------------------------
# Convolution series
# ------------------------------------------------------------------
def series_density(
    atom0: float,
    first: Profile,
    kernel: Profile,
    step: float,
    *,
    base: float,
    offset: float = 0.0,
    horizon: Optional[float] = None,
    tail_mass: float = TAIL_MASS,
    mass_tol: float = MASS_TOL,
) -> AtomicLaw:
    """Atom plus first + first*kernel + first*kernel*kernel + ... on a uniform grid.

    `first` and `kernel` are evaluated on grid nodes; both are negligible past `base`.
    The kernel mass m < 1 makes the series contract. Without an explicit `horizon` the
    grid runs until the law's remaining tail is below `tail_mass`.
    """
    if not (step > 0 and base > 0) or (horizon is not None and not horizon > step):
        raise ModelValidationError(f"bad grid step={step} horizon={horizon}", code="INVALID_GRID", path="/grid")
    t0 = time.perf_counter()
    u = _nodes(max(base, step), step)
    first_u, kernel_u = first(u), kernel(u)
    m = _mass(kernel_u, step)
    if m >= 1.0:
        raise NumericalError(f"series kernel mass {m:.6g} >= 1 does not contract", code="SERIES_DIVERGENCE")
    if _mass(first_u, step) <= 0.0 or not np.any(first_u):
        return AtomicLaw(atom0=atom0, density=np.zeros(2), step=step, horizon=offset + step, offset=offset)

    if horizon is None:
        horizon = _tail_horizon(first_u, kernel_u, u, step, tail_mass)
    n = int(math.ceil(horizon / step)) + 1
    if 2 * n - 1 > MAX_GRID_POINTS:
        raise NumericalError(
            f"busy-law grid needs {2 * n - 1} points (horizon {horizon:.4g}, step {step:.3g}); "
            "pass a larger step or a shorter horizon",
            code="GRID_TOO_LARGE",
        )
    fine_step = 0.5 * step
    coarse, expected_c, lost_c = _level(_sampled(first, n, step, base), _sampled(kernel, n, step, base), step)
    fine, expected_f, lost_f = _level(_sampled(first, 2 * n - 1, fine_step, base),
                                      _sampled(kernel, 2 * n - 1, fine_step, base), fine_step)

    expected = _richardson(expected_f, expected_c)
    lost = _richardson(lost_f, lost_c)
    if lost > mass_tol * expected:
        raise NumericalError(
            f"one convolution lost {lost:.3g} of {expected:.3g} mass; refine the grid or extend the horizon",
            code="GRID_TOO_COARSE",
        )
    density = np.maximum(_richardson(fine[::2], coarse), 0.0)
    law = AtomicLaw(atom0=atom0, density=density, step=step, horizon=offset + step * (n - 1), offset=offset)
    logger.debug("[timing] series_density (%d + %d points, kernel mass %.6g): %.2f ms",
                 n, 2 * n - 1, m, (time.perf_counter() - t0) * 1000)
    law.check_normalised(mass_tol)
    return law


def general_busy_density(queue: QueueModel, step: Optional[float] = None,
                         horizon: Optional[float] = None) -> AtomicLaw:
    """Busy-period law from the service density: atom G(0) plus f1 * sum_n f2^{*n}.

    With E(t) = exp(-lambda Phi(t)):  f2 = lambda (1-G) E  and  f1 = d/dt[E (G - G(0))].
    """
    service = queue.service
    if isinstance(service, ConstantService):
        raise ModelValidationError(
            "constant service has no density; use constant_busy_law", code="NO_DENSITY", path="/service/kind"
        )
    lam = queue.lam
    g0 = service.atom0

    def kernel(t: np.ndarray) -> np.ndarray:
        return lam * (1.0 - service.df(t)) * np.exp(-lam * service.phi(t))

    def first(t: np.ndarray) -> np.ndarray:
        G = service.df(t)
        E = np.exp(-lam * service.phi(t))
        return E * service.density(t) - lam * (1.0 - G) * E * (G - g0)

    return series_density(g0, first, kernel, step or service.mean * STEP_FRACTION,
                          base=max(service.truncation_point(), service.mean), horizon=horizon)


# ------------------------------------------------------------------
# Constant service: alpha + A_1 + ... + A_N, N geometric
# ------------------------------------------------------------------
@dataclass(frozen=True)
class ConstantBusyLaw:
    lam: float
    alpha: float

    @property
    def summand(self) -> TruncatedExp:
        return TruncatedExp(self.lam, self.alpha)

    @property
    def success(self) -> float:
        """P(N = 0) = e^{-rho}; P(N = n) = e^{-rho} (1 - e^{-rho})^n."""
        return math.exp(-self.lam * self.alpha)

    def count_pmf(self, n: int) -> float:
        a = self.success
        return a * (1.0 - a) ** n

    def mean(self) -> float:
        return self.alpha + math.expm1(self.lam * self.alpha) * self.summand.mean()

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        scalar = size is None
        n = np.atleast_1d(rng.geometric(self.success, size)) - 1
        draws = self.summand.sample(rng, int(n.sum()))
        owners = np.repeat(np.arange(n.size), n)
        out = self.alpha + np.bincount(owners, weights=draws, minlength=n.size)
        return float(out[0]) if scalar else out

    def _kernel(self, u: np.ndarray) -> np.ndarray:
        # the summand density jumps at alpha; a node there takes the midpoint value
        summand = self.summand
        values = summand.density(u)
        jump = 0.5 * summand.lam * math.exp(-summand.lam * self.alpha) / summand.mass
        at_jump = np.isclose(u, self.alpha, rtol=0.0, atol=1e-9 * self.alpha)
        return (1.0 - self.success) * np.where(at_jump, jump, values)

    def law(self, step: Optional[float] = None, horizon: Optional[float] = None) -> AtomicLaw:
        """Atom e^{-rho} at alpha, then a (1-a)^n-weighted sum of truncated-exponential powers."""
        a = self.success
        return series_density(a, lambda u: a * self._kernel(u), self._kernel,
                              step or self.alpha * STEP_FRACTION, base=self.alpha,
                              offset=self.alpha, horizon=horizon)


def constant_busy_law(lam: float, alpha: float) -> ConstantBusyLaw:
    if not (lam > 0 and alpha > 0):
        raise ModelValidationError("lambda and alpha must be positive", path="/service/alpha")
    return ConstantBusyLaw(lam, alpha)


# ------------------------------------------------------------------
# beta(.) family busy d.f.
# ------------------------------------------------------------------
def beta_general_busy_df(
    lam: float,
    rho: float,
    beta: Union[str, Callable[..., Any]],
    t_grid: Sequence[float],
    *,
    step: Optional[float] = None,
) -> np.ndarray:
    """B(t) = 1 - q sum_{n>=0} (lambda q)^n psi^{*(n+1)}(t), psi = exp(-lambda t - int beta),
    q = 1 - G(0). The series contracts at rate lambda q int psi = 1 - e^{-rho}.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0 or np.any(ts < 0):
        raise ModelValidationError("t grid must be non-empty and nonnegative", code="INVALID_GRID", path="/grid")
    beta_fn = _as_vector_fn(beta, path="/beta")
    alpha = rho / lam
    probe = np.geomspace(1e-3 * alpha, 20.0 * alpha, 64)
    ratios = np.array([_beta_integral(beta_fn, float(x)) / x for x in probe])
    if np.all(np.abs(ratios + lam) <= 1e-9 * lam):
        return np.ones_like(ts)
    check_beta_function(lam, rho, beta_fn, probe.size)

    psi_inf = psi_infinity(lam, beta_fn)
    c = -math.expm1(-rho)
    q = c / (lam * psi_inf)
    ratio = lam * q * psi_inf
    if ratio >= 1.0:
        raise NumericalError(f"series bound {ratio:.6g} >= 1 does not contract", code="SERIES_DIVERGENCE")

    step = step or alpha * STEP_FRACTION
    n = int(math.ceil(max(float(ts.max()), step) / step)) + 1
    if n > MAX_GRID_POINTS:
        raise NumericalError(f"beta-family grid needs {n} points; pass a larger step", code="GRID_TOO_LARGE")
    u = np.arange(n) * step
    psi = np.exp(-lam * u - cumulative(beta_fn(u), u))
    total = _summed_series(psi, lam * q * psi, step)
    values = 1.0 - q * np.interp(ts, u, total)
    return np.clip(values, 0.0, 1.0)
