"""Open networks of infinite-server nodes.

Traffic equations Gamma^T = Lambda^T + Gamma^T P, and the transform of the sojourn time S
(the sum of services along the customer's random path):

    G(s) = lambda^{-1} Lambda(s)^T (I - P(s))^{-1} q,
    Lambda(s)_j = lambda_j G_j(s),  P(s)_{jl} = p_{jl} G_l(s),  q_j = 1 - sum_l p_{jl}.

The factor G_l attaches to the node where the service is received.
"""
from __future__ import annotations
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import lu_factor, lu_solve

from busyq.analysis.distributions import ServiceModel
from busyq.analysis.laplace_inversion import InversionConfig, InvertedDf, TransformFn, invert_df
from busyq.errors import ModelValidationError, NumericalError

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
NEUMANN_TOL = 1e-12
NEUMANN_MAX_TERMS = 1_000_000
MEAN_CHECK_TOL = 1e-3
RESIDUAL_TOL = 1e-10

EvalMethod = Literal["linear-solve", "neumann-series"]


class NetworkNode(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid",
                              arbitrary_types_allowed=True)

    lam: float = Field(alias="lambda", ge=0)
    service: ServiceModel


def spectral_radius(P: np.ndarray, *, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Perron root of a nonnegative matrix by power iteration on (I + P)/2.

    The shift makes the iteration aperiodic; its dominant eigenvalue is (1 + r)/2.
    """
    n = P.shape[0]
    if n == 0 or not np.any(np.linalg.matrix_power(P, n)):
        # nilpotent (feed-forward) routing
        return 0.0
    M = 0.5 * (np.eye(n) + P)
    x = np.ones(n)
    mu = 1.0
    for it in range(max_iter):
        y = M @ x
        mu_new = float(np.max(np.abs(y)))
        if mu_new == 0.0:
            return 0.0
        y /= mu_new
        if abs(mu_new - mu) < tol and np.max(np.abs(y - x)) < math.sqrt(tol):
            return 2.0 * mu_new - 1.0
        x, mu = y, mu_new
    logger.warning("power iteration hit %d iterations; falling back to eigvals", max_iter)
    return float(np.max(np.abs(np.linalg.eigvals(P))))


class NetworkModel(BaseModel):
    """Open network; `routing[j][l]` is the probability of moving from node j to node l."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid",
                              arbitrary_types_allowed=True)

    nodes: List[NetworkNode] = Field(min_length=1)
    routing: List[List[float]]

    @model_validator(mode="after")
    def _routing_valid(self) -> "NetworkModel":
        J = len(self.nodes)
        if len(self.routing) != J:
            raise ModelValidationError(f"routing has {len(self.routing)} rows for {J} nodes",
                                       code="ROUTING_SHAPE", path="/routing")
        for j, row in enumerate(self.routing):
            if len(row) != J:
                raise ModelValidationError(f"routing row {j} has {len(row)} entries, expected {J}",
                                           code="ROUTING_SHAPE", path=f"/routing/{j}")
            total = math.fsum(row)
            if total > 1.0 + ROW_SUM_TOL:
                raise ModelValidationError(f"routing row {j} sums to {total:.12g} > 1",
                                           code="ROUTING_ROW_SUM", path=f"/routing/{j}")
            for l, p in enumerate(row):
                if not (0.0 <= p <= 1.0):
                    raise ModelValidationError(f"routing probability {p} outside [0, 1]",
                                               path=f"/routing/{j}/{l}")
        if not self.lam > 0:
            raise ModelValidationError("total exogenous rate must be positive", path="/nodes")
        radius = spectral_radius(self.P)
        if radius >= 1.0 - 1e-12:
            raise ModelValidationError(
                f"routing spectral radius {radius:.12g} >= 1: customers can be trapped",
                code="UNSTABLE_ROUTING", path="/routing",
            )
        return self

    @property
    def J(self) -> int:
        return len(self.nodes)

    @property
    def P(self) -> np.ndarray:
        return np.asarray(self.routing, dtype=float)

    @property
    def Lambda(self) -> np.ndarray:
        return np.asarray([node.lam for node in self.nodes], dtype=float)

    @property
    def lam(self) -> float:
        return float(math.fsum(node.lam for node in self.nodes))

    @property
    def exit_probabilities(self) -> np.ndarray:
        return np.clip(1.0 - self.P.sum(axis=1), 0.0, 1.0)

    @property
    def analytic(self) -> bool:
        return all(node.service.transform_is_analytic for node in self.nodes)


def solve_traffic(net: NetworkModel) -> np.ndarray:
    """Total arrival rates Gamma from (I - P)^T Gamma = Lambda."""
    P, Lam = net.P, net.Lambda
    A = (np.eye(net.J) - P).T
    lu = lu_factor(A, check_finite=True)
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14:
        raise NumericalError("traffic equations are singular", code="SINGULAR_MATRIX", path="/routing")
    gamma = lu_solve(lu, Lam)
    residual = float(np.max(np.abs(gamma - Lam - P.T @ gamma)))
    if residual >= RESIDUAL_TOL * max(float(np.max(np.abs(gamma))), 1e-300):
        raise NumericalError(f"traffic-equation residual {residual:.3g} too large",
                             code="SINGULAR_MATRIX", path="/routing")
    return gamma


def visits_mean(net: NetworkModel, gamma: Optional[np.ndarray] = None) -> float:
    """E[S] = sum_j (gamma_j / lambda) alpha_j."""
    gamma = solve_traffic(net) if gamma is None else gamma
    alphas = np.asarray([node.service.mean for node in net.nodes])
    return float(math.fsum(gamma * alphas) / net.lam)


class SojournTransform:
    """G(s) of the sojourn time; immutable, per-s work is operation-local."""

    def __init__(self, net: NetworkModel, method: EvalMethod = "linear-solve") -> None:
        self.net = net
        self.method = method

    @property
    def analytic(self) -> bool:
        return self.net.analytic

    def as_transform(self) -> TransformFn:
        return TransformFn(self.eval, self.analytic, f"network G(s) [{self.method}]")

    def __call__(self, s: complex) -> complex:
        return self.eval(s)

    def node_transforms(self, s: complex) -> np.ndarray:
        return np.asarray([complex(node.service.transform(s)) for node in self.net.nodes])

    def eval(self, s: complex, *, allow_left: bool = False) -> complex:
        s = complex(s)
        if s.real < 0 and not (allow_left or self.analytic):
            raise ModelValidationError(f"sojourn transform needs Re(s) >= 0, got {s}",
                                       code="DOMAIN_ERROR", path="/s")
        g = self.node_transforms(s)
        lam_s = self.net.Lambda * g
        P_s = self.net.P * g[None, :]
        q = self.net.exit_probabilities.astype(complex)
        if self.method == "neumann-series":
            x = _neumann(P_s, q)
        else:
            x = _linear_solve(P_s, q)
        return complex(lam_s @ x / self.net.lam)


def _linear_solve(P_s: np.ndarray, q: np.ndarray) -> np.ndarray:
    A = np.eye(P_s.shape[0], dtype=complex) - P_s
    lu = lu_factor(A)
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14:
        raise NumericalError("I - P(s) is numerically singular", code="NEAR_SINGULAR", path="/routing")
    return lu_solve(lu, q)


def _neumann(P_s: np.ndarray, q: np.ndarray) -> np.ndarray:
    term = q.copy()
    total = q.copy()
    for _ in range(NEUMANN_MAX_TERMS):
        term = P_s @ term
        total += term
        if np.max(np.abs(term)) < NEUMANN_TOL:
            return total
    raise NumericalError("Neumann series of P(s) did not converge", code="NEAR_SINGULAR", path="/routing")


def sojourn_transform(st: SojournTransform, s: complex) -> complex:
    return st.eval(s)


# ------------------------------------------------------------------
# Moments and d.f.
# ------------------------------------------------------------------
@dataclass(frozen=True)
class SojournMoments:
    mean: float
    second_moment: float
    visits_mean: float

    @property
    def variance(self) -> float:
        return max(self.second_moment - self.mean ** 2, 0.0)


def sojourn_moments(st: SojournTransform, n: int = 2) -> SojournMoments:
    """E[S] and E[S^2] by Richardson-extrapolated central differences at s = 0."""
    if n not in (1, 2):
        raise ModelValidationError(f"sojourn moments are available for n <= 2, got {n}",
                                   code="DOMAIN_ERROR", path="/n")
    t0 = time.perf_counter()
    gamma = solve_traffic(st.net)
    expected = visits_mean(st.net, gamma)
    h = 1e-2 / expected
    if not h > 1e-300:
        raise NumericalError("difference step underflows", code="STEP_UNDERFLOW")
    F = lambda x: st.eval(x, allow_left=True).real  # noqa: E731
    f0 = F(0.0)

    def first(step: float) -> float:
        return (F(step) - F(-step)) / (2.0 * step)

    def second(step: float) -> float:
        return (F(step) - 2.0 * f0 + F(-step)) / (step * step)

    d1 = (4.0 * first(h / 2) - first(h)) / 3.0
    mean = -d1
    if not math.isfinite(mean) or mean == 0.0:
        raise NumericalError("finite differences of G(s) vanished", code="STEP_UNDERFLOW")
    if abs(mean - expected) > MEAN_CHECK_TOL * expected:
        raise NumericalError(
            f"difference mean {mean:.9g} disagrees with expected-visits mean {expected:.9g}",
            code="INCONSISTENT_RESULT",
        )
    m2 = (4.0 * second(h / 2) - second(h)) / 3.0 if n == 2 else float("nan")
    logger.debug("[timing] sojourn_moments: %.2f ms", (time.perf_counter() - t0) * 1000)
    return SojournMoments(mean=mean, second_moment=m2, visits_mean=expected)


def sojourn_df(st: SojournTransform, t_grid: Sequence[float],
               cfg: Optional[InversionConfig] = None) -> InvertedDf:
    return invert_df(st.as_transform().over_s(), t_grid, cfg)


# ------------------------------------------------------------------
# Feed-forward networks: explicit mixture over paths
# ------------------------------------------------------------------
def enumerate_paths(net: NetworkModel) -> Iterator[Tuple[Tuple[int, ...], float]]:
    """Every entry-to-exit path with its probability; routing must be acyclic."""
    P, q, Lam, lam = net.P, net.exit_probabilities, net.Lambda, net.lam

    def walk(path: Tuple[int, ...], weight: float) -> Iterator[Tuple[Tuple[int, ...], float]]:
        j = path[-1]
        if q[j] > 0:
            yield path, weight * q[j]
        for l in np.flatnonzero(P[j] > 0):
            l = int(l)
            if l in path:
                raise ModelValidationError("path enumeration needs feed-forward (acyclic) routing",
                                           code="INVALID_MODEL", path=f"/routing/{j}/{l}")
            yield from walk(path + (l,), weight * P[j, l])

    for j in np.flatnonzero(Lam > 0):
        yield from walk((int(j),), Lam[j] / lam)


def path_mixture(net: NetworkModel, s: complex) -> complex:
    g = [complex(node.service.transform(s)) for node in net.nodes]
    return complex(sum(w * np.prod([g[j] for j in path]) for path, w in enumerate_paths(net)))
