"""Trace replay: drive one policy through the optimistic caching loop.

Per timeslot t: the batch r_t is revealed and served at the cost of the state
chosen beforehand, the prediction for t+1 arrives, and the policy emits the
next state. The runner also records the realized prediction errors so the
analytical bounds can be evaluated on the same run.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import CacheConfig, Catalog, ContractError, GradientVector, RequestBatch, top_k_state
from .metrics import best_static, compile_records, regret_series
from .policies import Policy
from .predictors import PredictionStream

INITIAL_STATE_MODES = ("auto", "uniform", "predicted_topk")


@dataclass
class RunResult:
    """Everything measured during one (policy, trace, prediction-seed) replay."""

    policy: str
    costs: np.ndarray
    cum_costs: np.ndarray
    miss_ratio: np.ndarray
    regret: np.ndarray
    avg_regret: np.ndarray
    update_nanos: np.ndarray
    err_sq: np.ndarray        # per-slot ||g_t - g~_t||^2
    coord_err_sq: np.ndarray  # per-coordinate sum_t (g_{t,i} - g~_{t,i})^2
    static_cost: float
    total_requests: int
    final_state: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return float(self.cum_costs[-1])

    def records(self):
        cum_requests = self.extras["cum_requests"]
        return compile_records(self.costs, cum_requests, self.regret, self.avg_regret, self.update_nanos)


def resolve_initial_state(mode: str, policy: Policy, capacity: int,
                          initial_pred: GradientVector | None, weights: np.ndarray):
    """Pick x_1 per the configured mode.

    "uniform" is the k/N fractional state (integral policies start empty and
    fill on demand). "predicted_topk" fully stores the k files with the
    highest predicted weighted demand of the first batch, which also makes x_1
    a minimizer of g~_1' x as the regret analysis assumes. "auto" applies
    predicted_topk to prediction-consuming policies whenever a first-slot
    prediction exists and falls back to uniform otherwise.
    """
    if mode not in INITIAL_STATE_MODES:
        raise ContractError(f"unknown initial-state mode {mode!r}")
    use_pred = mode == "predicted_topk" or (
        mode == "auto" and policy.optimistic and initial_pred is not None
    )
    if use_pred:
        if initial_pred is None:
            raise ContractError("predicted_topk initial state needs a first-slot prediction")
        return top_k_state(-initial_pred.g, capacity)  # -g~ = predicted weighted demand
    return None  # policy default: uniform fractional / empty integral


def replay(policy: Policy, catalog: Catalog, config: CacheConfig,
           batches: list[RequestBatch], windows=None,
           predictions: PredictionStream | None = None, *,
           initial_state="auto", record_timing: bool = False,
           regret_benchmark: str = "horizon") -> RunResult:
    """Run the full loop over ``batches`` and compile the metrics series.

    ``windows`` holds the ordered per-batch request ids; required to replay
    per-request policies faithfully. ``initial_state`` may also be an explicit
    vector instead of a mode name.
    """
    n_slots = len(batches)
    if n_slots == 0:
        raise ContractError("need at least one batch")
    if windows is not None and len(windows) != n_slots:
        raise ContractError("one request window per batch required")

    initial_pred = predictions.initial() if predictions is not None else None
    if isinstance(initial_state, str):
        x1 = resolve_initial_state(initial_state, policy, config.capacity,
                                   initial_pred, catalog.weights)
    else:
        x1 = initial_state
    policy.start(x1, initial_pred)

    w = catalog.weights
    zero_pred = GradientVector.zeros(catalog.n_files)
    pending = initial_pred.g if initial_pred is not None else zero_pred.g

    costs = np.empty(n_slots)
    nanos = np.zeros(n_slots, dtype=np.int64)
    err_sq = np.empty(n_slots)
    coord_err_sq = np.zeros(catalog.n_files)

    for t in range(n_slots):
        batch = batches[t]
        err = (-w * batch.counts) - pending
        err_sq[t] = float(err @ err)
        coord_err_sq += err * err

        reqs = windows[t] if windows is not None else None
        t0 = time.perf_counter_ns()
        costs[t] = policy.on_batch(batch, requests=reqs)
        t1 = time.perf_counter_ns()

        pred = predictions.for_slot(t + 1) if predictions is not None else zero_pred
        t2 = time.perf_counter_ns()
        policy.on_prediction(pred)
        t3 = time.perf_counter_ns()

        if record_timing:
            nanos[t] = (t1 - t0) + (t3 - t2)
        pending = pred.g

    regret, avg_regret = regret_series(costs, catalog, config.capacity, batches,
                                       benchmark=regret_benchmark)
    _, static_cost = best_static(catalog, config.capacity, batches)
    totals = np.array([b.total for b in batches], dtype=np.int64)
    cum_requests = np.cumsum(totals)

    extras = {"cum_requests": cum_requests}
    if hasattr(policy, "eta_history") and policy.eta_history:
        extras["ogd_eta_last"] = policy.eta_history[-1]
        extras["ogd_hbar"] = policy.hbar
    if hasattr(policy, "skipped_decrements"):
        extras["olfu_skipped_decrements"] = policy.skipped_decrements

    cum_costs = np.cumsum(costs)
    miss_ratio = cum_costs / cum_requests

    return RunResult(
        policy=policy.name,
        costs=costs,
        cum_costs=cum_costs,
        miss_ratio=miss_ratio,
        regret=regret,
        avg_regret=avg_regret,
        update_nanos=nanos,
        err_sq=err_sq,
        coord_err_sq=coord_err_sq,
        static_cost=static_cost,
        total_requests=int(totals.sum()),
        final_state=np.array(policy.state),
        extras=extras,
    )
