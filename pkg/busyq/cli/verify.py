"""Cross-module acceptance suite behind `busyq verify`: analytic results against each
other and against the simulator, with nominal thresholds (3 standard errors for means,
1.36/sqrt(n) for KS distances).
"""
from __future__ import annotations
import logging
import math
import time
from dataclasses import dataclass
from typing import List

import numpy as np

from busyq.analysis.busy_law import beta_busy_df, constant_busy_law, general_busy_density
from busyq.analysis.busy_transform import BusyTransform, mean_busy, mean_from_transform
from busyq.analysis.distributions import (
    BetaConstService,
    ConstantService,
    ExponentialService,
    QueueModel,
    beta_const_tail,
    beta_upper,
)
from busyq.analysis.laplace_inversion import InversionConfig, invert_df
from busyq.analysis.moments import beta_moments, busy_moments, c_quadrature, constant_c_recursion
from busyq.analysis.network import (
    NetworkModel,
    SojournTransform,
    path_mixture,
    solve_traffic,
)
from busyq.analysis.tail_analysis import FeasibilityProbe, TailTransform, check_feasibility, recover_service_tail
from busyq.schemas.run_schemas import ResultTable
from busyq.simulation.simulator import SimConfig, ks_distance, simulate_network, simulate_queue
from busyq.utils.builders import build_table

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.limit)


def _queue(lam: float, service) -> QueueModel:
    return QueueModel(**{"lambda": lam, "service": service})


def _exp_net(p11: float = 0.0, tandem: bool = False) -> NetworkModel:
    svc = {"kind": "exponential", "rate": 1.0}
    if tandem:
        return NetworkModel(nodes=[{"lambda": 1.0, "service": svc}, {"lambda": 0.0, "service": svc}],
                            routing=[[0.0, 1.0], [0.0, 0.0]])
    return NetworkModel(nodes=[{"lambda": 1.0, "service": svc}], routing=[[p11]])


def random_network(rng: np.random.Generator, J: int, *, acyclic: bool = False) -> NetworkModel:
    P = rng.random((J, J))
    if acyclic:
        P = np.triu(P, k=1)
    P *= rng.uniform(0.2, 0.95) / np.maximum(P.sum(axis=1, keepdims=True), 1e-12)
    lam = rng.random(J)
    lam[0] += 0.1
    nodes = [{"lambda": float(lam[j]), "service": {"kind": "exponential", "rate": float(rng.uniform(0.5, 3.0))}}
             for j in range(J)]
    return NetworkModel(nodes=nodes, routing=P.tolist())


# ------------------------------------------------------------------
def check_sim_means(seed: int, periods: int) -> List[Check]:
    out = []
    for lam in (0.5, 1.0):
        for svc in (ConstantService(alpha=1.0), ExponentialService(rate=1.0),
                    BetaConstService(**{"lambda": lam, "rho": 1.0, "beta": 0.0})):
            q = _queue(lam, svc)
            s = simulate_queue(q, SimConfig(seed=seed, periods=periods))
            out.append(Check(f"sim mean busy, lambda={lam}, {svc.kind} (SE units)",
                             abs(s.mean_busy - mean_busy(q)) / s.standard_error, 3.0))
    return out


def check_moments() -> List[Check]:
    worst = 0.0
    for lam in (0.5, 1.0, 2.0):
        for rho in (0.5, 1.0, 2.0):
            hi = beta_upper(lam, rho)
            for beta in (-0.5 * lam, 0.0, 0.5 * hi):
                q = _queue(lam, BetaConstService(**{"lambda": lam, "rho": rho, "beta": beta}))
                rec = busy_moments(q, 5, "recursion")
                closed = beta_moments(lam, rho, beta, 5)
                worst = max(worst, max(abs(r - c) / c for r, c in zip(rec, closed)))
    rec = constant_c_recursion(1.0, 1.0, 6)
    q = _queue(1.0, ConstantService(alpha=1.0))
    c_err = max(abs(rec[n] - c_quadrature(q, n)) for n in range(1, 7))
    return [Check("moment recursion vs closed form (rel)", worst, 1e-6),
            Check("constant C^(n)(0) recursion vs quadrature (abs)", c_err, 1e-8)]


def check_transforms() -> List[Check]:
    out = []
    for svc in (ConstantService(alpha=1.0), ExponentialService(rate=1.0),
                BetaConstService(**{"lambda": 1.0, "rho": 1.0, "beta": 0.0})):
        q = _queue(1.0, svc)
        bt = BusyTransform(q)
        out.append(Check(f"B(0) - 1, {svc.kind}", abs(bt.eval(0.0) - 1.0), 1e-8))
        out.append(Check(f"finite-difference mean, {svc.kind} (rel)",
                         abs(mean_from_transform(bt) - mean_busy(q)) / mean_busy(q), 1e-3))
    return out


def check_inversion() -> List[Check]:
    t = np.linspace(0.05, 10.0, 60)
    cfg = InversionConfig(method="talbot", order=32)
    q = _queue(1.0, BetaConstService(**{"lambda": 1.0, "rho": 1.0, "beta": 0.0}))
    got = invert_df(BusyTransform(q).as_transform().over_s(), t, cfg).values
    err = float(np.max(np.abs(got - beta_busy_df(1.0, 1.0, 0.0, t))))
    beta = beta_upper(1.0, 1.0)
    q = _queue(1.0, BetaConstService(**{"lambda": 1.0, "rho": 1.0, "beta": beta}))
    got = invert_df(BusyTransform(q).as_transform().over_s(), t, cfg).values
    err_exp = float(np.max(np.abs(got - (1.0 - np.exp(-t / math.expm1(1.0))))))
    return [Check("inverted busy d.f. vs closed form", err, 1e-4),
            Check("inverted exponential busy d.f.", err_exp, 1e-5)]


def check_series(seed: int, draws: int) -> List[Check]:
    q = _queue(1.0, BetaConstService(**{"lambda": 1.0, "rho": 1.0, "beta": 0.0}))
    law = general_busy_density(q)
    t = np.linspace(0.0, 10.0, 101)
    err = float(np.max(np.abs(law.df(t) - beta_busy_df(1.0, 1.0, 0.0, t))))
    cbl = constant_busy_law(1.0, 1.0)
    m = float(np.mean(cbl.sample(np.random.default_rng(seed), draws)))
    return [Check("series busy d.f. vs closed form", err, 5e-3),
            Check("constant busy-law sample mean (rel)", abs(m - math.e + 1) / (math.e - 1), 1e-2)]


def check_tail_recovery() -> List[Check]:
    t = np.linspace(0.05, 10.0, 40)
    worst = 0.0
    for lam in (0.5, 1.0):
        for rho in (0.5, 1.0):
            for beta in (0.0, 0.5 * beta_upper(lam, rho)):
                svc = BetaConstService(**{"lambda": lam, "rho": rho, "beta": beta})
                tt = TailTransform.from_busy_transform(BusyTransform(_queue(lam, svc)))
                got = recover_service_tail(tt, t)
                worst = max(worst, float(np.max(np.abs(got - beta_const_tail(lam, rho, beta, t)))))
    return [Check("recovered service tail vs closed form", worst, 1e-3)]


def check_feasibility_oracles() -> List[Check]:
    rho = math.log(2.0)
    fails = 0
    for n in (40, 80):
        grid = np.geomspace(0.1, 50.0, n)
        exp_report = check_feasibility(FeasibilityProbe("0.5*exp(-t)", rho, grid))
        rat_report = check_feasibility(FeasibilityProbe("10/(1+t)", rho, grid))
        fails += exp_report.verdict != "FAIL" or bool(np.any(exp_report.signs > 0))
        flips = rat_report.sign_changes
        fails += rat_report.verdict != "FAIL" or len(flips) != 1 or abs(flips[0] - 9.0) > 1.0
    return [Check("feasibility verdict mismatches", float(fails), 0.0)]


def check_networks(seed: int, customers: int) -> List[Check]:
    rng = np.random.default_rng(seed)
    norm = neumann = paths = resid = 0.0
    s_points = np.linspace(0.1, 5.0, 8)
    for _ in range(100):
        net = random_network(rng, int(rng.integers(1, 7)))
        lin, neu = SojournTransform(net), SojournTransform(net, "neumann-series")
        norm = max(norm, abs(lin.eval(0.0) - 1.0))
        neumann = max(neumann, max(abs(lin.eval(s) - neu.eval(s)) for s in s_points))
        gamma = solve_traffic(net)
        resid = max(resid, float(np.max(np.abs(gamma - net.Lambda - net.P.T @ gamma)) / np.max(gamma)))
    for _ in range(20):
        net = random_network(rng, int(rng.integers(1, 5)), acyclic=True)
        st = SojournTransform(net)
        paths = max(paths, max(abs(st.eval(s) - path_mixture(net, s)) for s in s_points))
    t = np.linspace(0.05, 10.0, 40)
    tandem = SojournTransform(_exp_net(tandem=True))
    got = invert_df(tandem.as_transform().over_s(), t).values
    erlang = float(np.max(np.abs(got - (1.0 - (1.0 + t) * np.exp(-t)))))
    checks = [
        Check("network G(0) - 1 (100 random nets)", norm, 1e-12),
        Check("Neumann vs linear solve", neumann, 1e-10),
        Check("path enumeration vs linear solve", paths, 1e-10),
        Check("traffic-equation residual (rel)", resid, 1e-10),
        Check("tandem d.f. vs Erlang-2", erlang, 1e-5),
    ]
    grid = np.linspace(0.0, 30.0, 601)
    for label, net in (("tandem", _exp_net(tandem=True)), ("feedback", _exp_net(p11=0.5))):
        sample = simulate_network(net, customers, SimConfig(seed=seed, periods=1))
        st = SojournTransform(net)
        df_vals = invert_df(st.as_transform().over_s(), grid, atom0=0.0).values
        ks = ks_distance(sample, lambda x: np.interp(x, grid, df_vals))
        checks.append(Check(f"sojourn KS, {label} (x sqrt(n))", ks * math.sqrt(sample.size), 1.36))
    return checks


def run_suite(seed: int = 0, quick: bool = False) -> ResultTable:
    n = 10_000 if quick else 100_000
    stages = [
        lambda: check_sim_means(seed, n),
        check_moments,
        check_transforms,
        check_inversion,
        lambda: check_series(seed, n),
        check_tail_recovery,
        check_feasibility_oracles,
        lambda: check_networks(seed, n),
    ]
    checks: List[Check] = []
    for stage in stages:
        t0 = time.perf_counter()
        checks.extend(stage())
        logger.debug("[timing] verify stage: %.1f ms", (time.perf_counter() - t0) * 1000)
    failed = sum(not c.passed for c in checks)
    return build_table(
        ["check", "value", "limit", "status"],
        [c.name for c in checks], [c.value for c in checks], [c.limit for c in checks],
        ["PASS" if c.passed else "FAIL" for c in checks],
        failed=failed,
    )
