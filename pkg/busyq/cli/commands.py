from __future__ import annotations
import logging
import time
from typing import Any, Callable, Dict, Tuple

import numpy as np

from busyq.analysis.busy_law import (
    beta_busy_df,
    beta_general_busy_df,
    constant_busy_law,
    general_busy_density,
)
from busyq.analysis.busy_transform import BusyTransform, mean_busy
from busyq.analysis.distributions import (
    BetaConstService,
    BetaGeneralService,
    ConstantService,
    QueueModel,
)
from busyq.analysis.laplace_inversion import invert_df
from busyq.analysis.moments import MomentWorkspace, busy_moments
from busyq.analysis.network import (
    SojournTransform,
    sojourn_df,
    sojourn_moments,
    solve_traffic,
)
from busyq.analysis.tail_analysis import (
    FeasibilityProbe,
    TailTransform,
    check_feasibility,
    recover_service_tail,
)
from busyq.errors import ModelValidationError
from busyq.schemas.run_schemas import GridSpec, ResultTable, RunSpec
from busyq.simulation.simulator import SimConfig, simulate_network, simulate_queue
from busyq.telemetry.tracing import get_current_trace, span
from busyq.utils.builders import build_table, render
from busyq.utils.json_utils import load_network, load_queue

logger = logging.getLogger(__name__)


def _require(spec: RunSpec, name: str) -> Any:
    value = getattr(spec, name, None) if name in RunSpec.model_fields else spec.options.get(name)
    if value is None:
        raise ModelValidationError(f"{spec.command} needs --{name.replace('_', '-')}",
                                   code="INVALID_ARGUMENT", path=f"/{name}")
    return value


def _grid(spec: RunSpec, name: str = "grid") -> np.ndarray:
    grid: GridSpec = _require(spec, name)
    return grid.values()


# ------------------------------------------------------------------
# Handlers: each returns a ResultTable
# ------------------------------------------------------------------
def _transform(spec: RunSpec) -> ResultTable:
    queue = load_queue(_require(spec, "model"))
    bt = BusyTransform(queue)
    s = _grid(spec, "s_grid")
    values, errors = zip(*(bt.eval_with_error(x) for x in s)) if s.size else ((), ())
    return build_table(["s", "value", "abserr"], s, [v.real for v in values], errors,
                       method=bt.method, mean_busy=mean_busy(queue))


def _moments(spec: RunSpec) -> ResultTable:
    queue = load_queue(_require(spec, "model"))
    n = int(spec.options.get("n") or 3)
    ws = MomentWorkspace(queue=queue)
    values = busy_moments(queue, n, spec.options.get("method") or "auto", workspace=ws)
    return build_table(["n", "value"], range(1, n + 1), values, source=ws.moment_source[0] if n else "")


def busy_law_values(queue: QueueModel, t: np.ndarray, method: str, spec: RunSpec) -> np.ndarray:
    service = queue.service
    if method == "inversion":
        bt = BusyTransform(queue)
        return invert_df(bt.as_transform().over_s(), t, spec.inversion, atom0=service.atom0).values
    if isinstance(service, BetaConstService) and method in ("auto", "closed"):
        return beta_busy_df(service.lam, service.rho, service.beta, t)
    if isinstance(service, BetaGeneralService) and method in ("auto", "closed"):
        return beta_general_busy_df(service.lam, service.rho, service.beta_fn, t)
    if method == "closed":
        raise ModelValidationError("closed-form busy law exists only for the beta families",
                                   code="INVALID_ARGUMENT", path="/method")
    if isinstance(service, ConstantService):
        return constant_busy_law(queue.lam, service.alpha).law().df(t)
    return general_busy_density(queue).df(t)


def _busy_law(spec: RunSpec) -> ResultTable:
    queue = load_queue(_require(spec, "model"))
    t = _grid(spec)
    method = spec.options.get("method") or "auto"
    return build_table(["t", "value"], t, busy_law_values(queue, t, method, spec), method=method)


def _tail_recover(spec: RunSpec) -> ResultTable:
    tt = TailTransform.from_rational(_require(spec, "hbar"), float(_require(spec, "lambda")),
                                     float(_require(spec, "rho")))
    t = _grid(spec)
    return build_table(["t", "value"], t, recover_service_tail(tt, t, spec.inversion), kappa=tt.atom_kappa)


def _tail_check(spec: RunSpec) -> ResultTable:
    probe = FeasibilityProbe(a=_require(spec, "a"), rho=float(_require(spec, "rho")), grid=_grid(spec))
    report = check_feasibility(probe)
    return build_table(["t", "cond1", "sign"], report.t, report.cond1, report.signs.astype(int),
                       verdict=report.verdict, limit_estimate=report.limit_estimate,
                       cond1_pass=report.cond1_pass, cond2_pass=report.cond2_pass)


def _network_solve(spec: RunSpec) -> ResultTable:
    net = load_network(_require(spec, "net"))
    st = SojournTransform(net)
    if spec.options.get("moments"):
        m = sojourn_moments(st, 2)
        return build_table(["statistic", "value"], ["mean", "second_moment", "visits_mean"],
                           [m.mean, m.second_moment, m.visits_mean])
    if spec.grid is not None:
        t = spec.grid.values()
        return build_table(["t", "value"], t, sojourn_df(st, t, spec.inversion).values)
    if spec.s_grid is not None:
        s = spec.s_grid.values()
        return build_table(["s", "value"], s, [st.eval(x).real for x in s])
    gamma = solve_traffic(net)
    return build_table(["node", "gamma"], range(net.J), gamma)


def _sim_config(spec: RunSpec) -> SimConfig:
    return SimConfig(
        seed=spec.seed,
        periods=spec.options.get("periods"),
        horizon=spec.options.get("horizon"),
        warmup=spec.options.get("warmup") or 0.0,
        replications=spec.options.get("replications") or 1,
    )


def _sim_queue(spec: RunSpec) -> ResultTable:
    queue = load_queue(_require(spec, "model"))
    options = dict(spec.options)
    if options.get("periods") is None and options.get("horizon") is None:
        options["periods"] = 100_000
    sample = simulate_queue(queue, _sim_config(spec.model_copy(update={"options": options})))
    if spec.options.get("samples"):
        return build_table(["index", "duration"], range(sample.periods), sample.durations)
    stats = {
        "periods": sample.periods,
        "mean_busy": sample.mean_busy,
        "standard_error": sample.standard_error,
        "analytic_mean": mean_busy(queue),
        "mean_idle": sample.mean_idle,
        "empty_fraction": sample.empty_fraction,
    }
    return build_table(["statistic", "value"], stats.keys(), stats.values())


def _sim_network(spec: RunSpec) -> ResultTable:
    net = load_network(_require(spec, "net"))
    customers = int(spec.options.get("customers") or 100_000)
    cfg = SimConfig(seed=spec.seed, periods=1, replications=spec.options.get("replications") or 1)
    sojourns = simulate_network(net, customers, cfg)
    if spec.options.get("samples"):
        return build_table(["index", "sojourn"], range(sojourns.size), sojourns)
    stats = {
        "customers": int(sojourns.size),
        "mean": float(sojourns.mean()),
        "standard_error": float(sojourns.std(ddof=1) / np.sqrt(sojourns.size)) if sojourns.size > 1 else float("inf"),
        "second_moment": float(np.mean(sojourns ** 2)),
    }
    return build_table(["statistic", "value"], stats.keys(), stats.values())


def _verify(spec: RunSpec) -> ResultTable:
    from busyq.cli.verify import run_suite

    return run_suite(seed=spec.seed, quick=bool(spec.options.get("quick")))


HANDLERS: Dict[str, Callable[[RunSpec], ResultTable]] = {
    "transform": _transform,
    "moments": _moments,
    "busy-law": _busy_law,
    "tail recover": _tail_recover,
    "tail check": _tail_check,
    "network solve": _network_solve,
    "sim queue": _sim_queue,
    "sim network": _sim_network,
    "verify": _verify,
}


def run(spec: RunSpec) -> Tuple[int, str]:
    """Dispatch one command; returns (exit status, rendered output).

    BusyqError propagates so the caller can map it to the exit-code contract.
    """
    client = get_current_trace()  # langfuse client or None
    span_outer = client.start_span(name=f"busyq {spec.command}", input=spec.model_dump(mode="json")) if client else None

    t0 = time.perf_counter()
    status = 0
    try:
        with span("compute", {"command": spec.command}):
            table = HANDLERS[spec.command](spec)
        t_compute = time.perf_counter()
        with span("render", {"format": spec.out}):
            text = render(table, spec.out)
        if spec.command == "verify" and table.meta.get("failed"):
            status = 2
    except Exception as e:
        if span_outer:
            try:
                span_outer.end(output={"status": "error", "message": str(e)[:500]})
            except Exception:
                pass
        raise
    t_end = time.perf_counter()

    logger.debug(
        "[timing] run[%s]: compute=%.1f ms, render=%.1f ms, total=%.1f ms",
        spec.command, (t_compute - t0) * 1000, (t_end - t_compute) * 1000, (t_end - t0) * 1000,
    )
    if span_outer:
        try:
            span_outer.end(output={"status": "ok", "total_ms": round((t_end - t0) * 1000, 1)})
        except Exception:
            pass
    return status, text
