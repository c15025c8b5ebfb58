"""Discrete-event oracle for the M|G|oo queue and for open infinite-server networks.

Busy periods are extracted in vectorised chunks: with departures d_i = a_i + S_i, a
customer opens a new period iff its arrival is not before the running maximum of all
earlier departures (a departure at the same instant is processed first).
"""
from __future__ import annotations
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from busyq import config
from busyq.analysis.distributions import QueueModel, sample
from busyq.analysis.network import NetworkModel
from busyq.errors import ModelValidationError, NumericalError

logger = logging.getLogger(__name__)

MAX_HOPS = 1_000_000
MIN_CHUNK = 1024
MAX_CHUNK = 1_000_000


class SimConfig(BaseModel):
    """`periods` and `customers` are per replication; replication r draws from child r of
    SeedSequence(seed), so any replication can be rerun alone.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    periods: Optional[int] = Field(default=None, ge=1)
    horizon: Optional[float] = Field(default=None, gt=0)
    warmup: float = Field(default=0.0, ge=0)
    replications: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _has_target(self) -> "SimConfig":
        if self.periods is None and self.horizon is None:
            raise ModelValidationError("simulation needs a period count or a horizon",
                                       code="INVALID_MODEL", path="/periods")
        return self

    def streams(self) -> List[np.random.Generator]:
        children = np.random.SeedSequence(self.seed).spawn(self.replications)
        return [np.random.default_rng(child) for child in children]


@dataclass(frozen=True)
class BusyPeriodSample:
    durations: np.ndarray
    idle: np.ndarray
    replications: int = 1

    @property
    def periods(self) -> int:
        return int(self.durations.size)

    @property
    def mean_busy(self) -> float:
        return float(self.durations.mean())

    @property
    def standard_error(self) -> float:
        n = self.durations.size
        return float(self.durations.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")

    @property
    def mean_idle(self) -> float:
        return float(self.idle.mean()) if self.idle.size else float("nan")

    @property
    def empty_fraction(self) -> float:
        """Share of zero-length busy periods (possible only when G(0) > 0)."""
        return float(np.mean(self.durations == 0.0))


def _one_queue_run(queue: QueueModel, cfg: SimConfig, rng: np.random.Generator) -> BusyPeriodSample:
    lam = queue.lam
    per_period = math.exp(min(queue.rho, 20.0))
    want = cfg.periods
    chunk = int(min(MAX_CHUNK, max(MIN_CHUNK, (want or 1000) * per_period * 1.1)))
    durations: List[np.ndarray] = []
    idles: List[np.ndarray] = []
    collected = 0
    clock = 0.0
    carry_max = -np.inf
    open_start: Optional[float] = None
    while True:
        arrivals = clock + np.cumsum(rng.exponential(1.0 / lam, chunk))
        departures = arrivals + np.asarray(sample(queue.service, rng, chunk), dtype=float)
        clock = float(arrivals[-1])
        running = np.maximum.accumulate(np.concatenate(([carry_max], departures)))
        prev_max = running[:-1]
        idx = np.flatnonzero(arrivals >= prev_max)
        starts = arrivals[idx]
        ends = prev_max[idx]
        previous = starts[:-1] if open_start is None else np.concatenate(([open_start], starts[:-1]))
        if open_start is None:
            ends, gaps = ends[1:], starts[1:] - ends[1:]
        else:
            gaps = starts - ends
        previous = previous[: ends.size]
        dur = ends - previous
        keep = previous >= cfg.warmup
        if cfg.horizon is not None:
            keep &= ends <= cfg.horizon
        durations.append(dur[keep])
        idles.append(gaps[keep])
        collected += int(keep.sum())
        if starts.size:
            open_start = float(starts[-1])
        carry_max = float(running[-1])
        if want is not None and collected >= want:
            break
        if cfg.horizon is not None and clock > cfg.horizon:
            break
    out_d = np.concatenate(durations)
    out_i = np.concatenate(idles)
    if want is not None:
        out_d, out_i = out_d[:want], out_i[:want]
    return BusyPeriodSample(durations=out_d, idle=out_i)


def _replicate(run: Callable[[np.random.Generator], object], cfg: SimConfig) -> list:
    streams = cfg.streams()
    workers = min(config.threads(), len(streams))
    if workers <= 1:
        return [run(rng) for rng in streams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, streams))


def simulate_queue(queue: QueueModel, cfg: SimConfig) -> BusyPeriodSample:
    t0 = time.perf_counter()
    parts = _replicate(lambda rng: _one_queue_run(queue, cfg, rng), cfg)
    result = BusyPeriodSample(
        durations=np.concatenate([p.durations for p in parts]),
        idle=np.concatenate([p.idle for p in parts]),
        replications=cfg.replications,
    )
    if result.periods == 0:
        raise NumericalError("no complete busy period inside the horizon", code="ZERO_PERIODS", path="/horizon")
    logger.debug("[timing] simulate_queue %d periods: %.2f ms", result.periods, (time.perf_counter() - t0) * 1000)
    return result


def _one_network_run(net: NetworkModel, customers: int, rng: np.random.Generator) -> np.ndarray:
    J = net.J
    entry_p = net.Lambda / net.lam
    # row j: cumulative [p_j1 .. p_jJ, exit]; index J means "leave"
    cum_rows = np.cumsum(np.column_stack([net.P, net.exit_probabilities]), axis=1)
    cum_rows[:, -1] = 1.0
    where = rng.choice(J, size=customers, p=entry_p)
    total = np.zeros(customers)
    active = np.arange(customers)
    hops = 0
    while active.size:
        hops += 1
        if hops > MAX_HOPS:
            raise NumericalError(f"a customer exceeded {MAX_HOPS} hops", code="ROUTING_TRAP", path="/routing")
        nodes = where[active]
        for j in range(J):
            here = active[nodes == j]
            if here.size:
                total[here] += np.asarray(sample(net.nodes[j].service, rng, here.size), dtype=float)
                where[here] = np.searchsorted(cum_rows[j], rng.random(here.size), side="right")
        active = active[where[active] < J]
    return total


def simulate_network(net: NetworkModel, customers: int, cfg: SimConfig) -> np.ndarray:
    """Sojourn of each customer: the sum of its service draws along the routed path."""
    if customers < 1:
        raise ModelValidationError("customers must be >= 1", code="INVALID_MODEL", path="/customers")
    t0 = time.perf_counter()
    parts = _replicate(lambda rng: _one_network_run(net, customers, rng), cfg)
    out = np.concatenate(parts)
    logger.debug("[timing] simulate_network %d customers: %.2f ms", out.size, (time.perf_counter() - t0) * 1000)
    return out


# ------------------------------------------------------------------
# Empirical d.f. and Kolmogorov-Smirnov distance
# ------------------------------------------------------------------
def _sorted_sample(samples: Sequence[float]) -> np.ndarray:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ModelValidationError("sample is empty", code="EMPTY_SAMPLE", path="/samples")
    return x


def empirical_df(samples: Sequence[float], t_grid: Sequence[float]) -> np.ndarray:
    x = _sorted_sample(samples)
    return np.searchsorted(x, np.asarray(t_grid, dtype=float), side="right") / x.size


def ks_distance(samples: Sequence[float], df: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup |F_n - F|, checked on both sides of every sample value so atoms and ties count."""
    x = _sorted_sample(samples)
    n = x.size
    values, first = np.unique(x, return_index=True)
    counts_le = np.searchsorted(x, values, side="right") / n
    counts_lt = first / n
    at = np.asarray(df(values), dtype=float)
    before = np.asarray(df(np.nextafter(values, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(counts_le - at)), np.max(np.abs(counts_lt - before))))


def ks_pvalue(samples: Sequence[float], df: Callable[[np.ndarray], np.ndarray]) -> float:
    """scipy's one-sample KS p-value; meaningful for continuous laws."""
    return float(stats.kstest(_sorted_sample(samples), df).pvalue)
