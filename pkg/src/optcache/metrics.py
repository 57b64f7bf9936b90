"""Cost accounting: hindsight-optimal static benchmark, regret, miss ratio,
and amortized update time."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CacheState, Catalog, ContractError, RequestBatch, top_k_state


@dataclass(frozen=True)
class ExperimentRecord:
    """One per-timeslot metrics row."""

    t: int
    cost: float
    cum_cost: float
    miss_ratio: float
    regret: float
    avg_regret: float
    update_nanos: int

    FIELDS = ("t", "cost", "cum_cost", "miss_ratio", "regret", "avg_regret", "update_nanos")


def best_static(catalog: Catalog, capacity: int, batches: list[RequestBatch]) -> tuple[CacheState, float]:
    """The best fixed cache state in hindsight over the whole horizon.

    The total cost is linear in x, so the optimum is the vertex storing the k
    files with the largest aggregate weighted demand w_i * r_{1:T,i}
    (ties: smallest index). Returns the state and its total cost.
    """
    if not batches:
        raise ContractError("need at least one batch")
    totals = np.sum([b.counts for b in batches], axis=0)
    scores = catalog.weights * totals
    x = top_k_state(scores, capacity)
    cost = float(np.sum(scores * (1.0 - x)))
    return CacheState(x, capacity), cost


def static_cost_series(catalog: Catalog, batches: list[RequestBatch], state: CacheState) -> np.ndarray:
    """Cumulative cost of holding ``state`` fixed: sum_{s<=t} f_{r_s}(state)."""
    per_t = np.array([float(np.sum(catalog.weights * b.counts * (1.0 - state.x))) for b in batches])
    return np.cumsum(per_t)


def regret_series(costs, catalog: Catalog, capacity: int, batches: list[RequestBatch],
                  benchmark: str = "horizon") -> tuple[np.ndarray, np.ndarray]:
    """Running regret against the static optimum.

    benchmark="horizon" (default) fixes one optimal state over the full T and
    reports regret_t = cum_cost_t - sum_{s<=t} f_s(x*). benchmark="prefix"
    re-optimizes the comparator for every prefix (diagnostic only). Optimistic
    policies can beat the static optimum, so the series may go negative.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.size != len(batches):
        raise ContractError("one cost per batch required")
    cum_cost = np.cumsum(costs)
    if benchmark == "horizon":
        star, _ = best_static(catalog, capacity, batches)
        baseline = static_cost_series(catalog, batches, star)
    elif benchmark == "prefix":
        baseline = np.empty(len(batches))
        running = np.zeros(catalog.n_files)
        for t, b in enumerate(batches):
            running = running + catalog.weights * b.counts
            x = top_k_state(running, capacity)
            baseline[t] = float(np.sum(running * (1.0 - x)))
    else:
        raise ContractError(f"unknown regret benchmark {benchmark!r}")
    regret = cum_cost - baseline
    avg = regret / np.arange(1, costs.size + 1)
    return regret, avg


def amortized_cost(update_nanos, batch_size: int) -> float:
    """Mean policy-update wall time per served request, in nanoseconds."""
    nanos = np.asarray(update_nanos, dtype=float)
    if nanos.size == 0 or batch_size < 1:
        raise ContractError("need a nonempty timing series and batch size >= 1")
    return float(nanos.sum() / (batch_size * nanos.size))


def compile_records(costs, cum_requests, regret, avg_regret, update_nanos) -> list[ExperimentRecord]:
    """Assemble per-timeslot rows; miss_ratio = cum_cost / cumulative requests."""
    costs = np.asarray(costs, dtype=float)
    cum_cost = np.cumsum(costs)
    cum_requests = np.asarray(cum_requests, dtype=float)
    records = []
    for i in range(costs.size):
        records.append(ExperimentRecord(
            t=i + 1,
            cost=float(costs[i]),
            cum_cost=float(cum_cost[i]),
            miss_ratio=float(cum_cost[i] / cum_requests[i]) if cum_requests[i] > 0 else 0.0,
            regret=float(regret[i]),
            avg_regret=float(avg_regret[i]),
            update_nanos=int(update_nanos[i]),
        ))
    return records
