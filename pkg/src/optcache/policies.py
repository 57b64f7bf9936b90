"""Online caching policies behind one interface.

Every policy follows the same per-timeslot protocol:

    cost = policy.on_batch(batch, requests)   # serve, incur cost
    x    = policy.on_prediction(next_grad)    # ingest prediction, emit next state

Costs are always incurred against the state that was in place before the batch
was revealed. The FTRL family (obc, pcoc) and ogd hold a fractional state and
update once per batch; lfu/lru and their optimistic variants are integral and
re-decide the cached set at every single request, so their per-batch cost is
accumulated request by request against the instantaneous cache content. The
integral policies start from an empty cache (or a seeded set) and fill up on
demand; their emitted vectors sum to k once warm.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from .core import (
    CacheConfig,
    CacheState,
    Catalog,
    ContractError,
    GradientVector,
    RequestBatch,
)
from .simplex import DiagonalQP, project_capped_simplex, solve_diag_qp

logger = logging.getLogger(__name__)

POLICY_NAMES = ("obc", "pcoc", "ogd", "lfu", "olfu", "lru", "olru")


def counts_from_gradient(g: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Recover predicted request counts from a predicted gradient: r~ = -g / w.

    Files with zero retrieval cost carry no gradient signal; their predicted
    count is taken as 0.
    """
    return np.divide(-g, weights, out=np.zeros_like(g, dtype=float), where=weights > 0)


class Policy:
    """Behavioral contract shared by all policies."""

    name = "base"
    optimistic = False   # consumes predictions
    integral = False     # stores whole files only, updates per request

    def __init__(self, catalog: Catalog, config: CacheConfig):
        if catalog.n_files != config.n_files:
            raise ContractError("catalog and cache config disagree on N")
        self.catalog = catalog
        self.config = config
        self.n = catalog.n_files
        self.k = config.capacity

    def start(self, initial_state=None, initial_prediction: GradientVector | None = None):
        raise NotImplementedError

    def on_batch(self, batch: RequestBatch, requests=None) -> float:
        raise NotImplementedError

    def on_prediction(self, pred: GradientVector) -> np.ndarray:
        raise NotImplementedError

    @property
    def state(self) -> np.ndarray:
        raise NotImplementedError

    def _initial_fractional(self, initial_state) -> np.ndarray:
        if initial_state is None:
            return np.full(self.n, self.k / self.n)
        if isinstance(initial_state, CacheState):
            return np.asarray(initial_state.x, dtype=float)
        x = CacheState(np.asarray(initial_state, dtype=float), self.k)  # validates
        return np.asarray(x.x)


class _QuadraticFtrl(Policy):
    """Shared machinery for the FTRL updates: each slot solves

        min over X of  sum_i A_i/2 x_i^2 - (pull_i - (g_aggregate + g~_next)_i) x_i

    where A is the accumulated regularizer curvature and pull the
    curvature-weighted history of visited states (proximal centering).
    """

    optimistic = True

    def __init__(self, catalog, config, sigma: float | None = None):
        super().__init__(catalog, config)
        self.sigma_scale = self._default_sigma() if sigma is None else float(sigma)
        if self.sigma_scale < 0:
            raise ContractError("sigma must be nonnegative")
        self.start()

    def _default_sigma(self) -> float:
        raise NotImplementedError

    def start(self, initial_state=None, initial_prediction=None):
        self._x = self._initial_fractional(initial_state)
        self.agg_grad = np.zeros(self.n)
        self.pull = np.zeros(self.n)
        self.last_pred = initial_prediction.g if initial_prediction is not None else np.zeros(self.n)
        self._reset_curvature()

    def on_batch(self, batch, requests=None) -> float:
        w = self.catalog.weights
        cost = float(np.sum(w * batch.counts * (1.0 - self._x)))
        g = -w * batch.counts
        self._ingest(g - self.last_pred)
        self.agg_grad += g
        return cost

    def on_prediction(self, pred: GradientVector) -> np.ndarray:
        b = self.pull - (self.agg_grad + pred.g)
        state = solve_diag_qp(DiagonalQP(self._curvature(), b, self.k))
        self._x = np.asarray(state.x)
        self.last_pred = pred.g
        return self._x

    @property
    def state(self) -> np.ndarray:
        return self._x

    def _reset_curvature(self):
        raise NotImplementedError

    def _ingest(self, err: np.ndarray):
        raise NotImplementedError

    def _curvature(self) -> np.ndarray:
        raise NotImplementedError


class ObcPolicy(_QuadraticFtrl):
    """FTRL with one adaptive Euclidean regularizer scaled by the aggregate
    squared prediction error: sigma_t = sigma (sqrt(h_{1:t}) - sqrt(h_{1:t-1})),
    h_t = ||g_t - g~_t||^2, default sigma = 2/Delta with
    Delta^2 = min(2k, 2(N-k)) the squared diameter of the feasible set."""

    name = "obc"

    def _default_sigma(self) -> float:
        diam_sq = min(2 * self.k, 2 * (self.n - self.k))
        return 2.0 / math.sqrt(diam_sq) if diam_sq > 0 else 0.0

    def _reset_curvature(self):
        self.err_sum = 0.0      # h_{1:t}
        self.sigma_sum = 0.0    # sigma_{1:t} = sigma * sqrt(h_{1:t})

    def _ingest(self, err):
        h_t = float(err @ err)
        prev_root = math.sqrt(self.err_sum)
        self.err_sum += h_t
        root = math.sqrt(self.err_sum)
        self.pull += (self.sigma_scale * (root - prev_root)) * self._x
        self.sigma_sum = self.sigma_scale * root

    def _curvature(self):
        return np.full(self.n, self.sigma_sum)


class PcocPolicy(_QuadraticFtrl):
    """FTRL with per-coordinate adaptive curvature: coordinates whose
    predictions are accurate keep zero curvature and converge greedily, noisy
    coordinates accumulate sigma_{1:t,i} = sigma * Delta_{t,i} with
    Delta_{t,i} = sqrt(sum_s (g_{s,i} - g~_{s,i})^2). Default sigma = 2."""

    name = "pcoc"

    def _default_sigma(self) -> float:
        return 2.0

    def _reset_curvature(self):
        self._sq_sums = np.zeros(self.n)
        self.err_sums = np.zeros(self.n)    # Delta_{t,i}
        self.sigma_sums = np.zeros(self.n)  # sigma_{1:t,i}

    def _ingest(self, err):
        prev_delta = self.err_sums
        self._sq_sums = self._sq_sums + err * err
        delta = np.sqrt(self._sq_sums)
        self.pull += self.sigma_scale * (delta - prev_delta) * self._x
        self.err_sums = delta
        self.sigma_sums = self.sigma_scale * delta

    def _curvature(self):
        return self.sigma_sums


class OgdPolicy(Policy):
    """Online gradient descent with projection: x_{t+1} = P_X(x_t - eta g_t).

    The default step size follows the diameter-over-gradient-bound recipe,
    eta = sqrt(2k/T) / (||w||_inf * R_t * hbar_t) with hbar_t the largest
    per-file count observed in any batch so far; pass eta explicitly to
    override. Predictions are ignored (classic baseline).
    """

    name = "ogd"

    def __init__(self, catalog, config, horizon: int | None = None, eta: float | None = None):
        super().__init__(catalog, config)
        if eta is None and horizon is None:
            raise ContractError("ogd needs the run horizon for its default step size, or an explicit eta")
        self.horizon = horizon
        self.eta_fixed = eta
        self.start()

    def start(self, initial_state=None, initial_prediction=None):
        self._x = self._initial_fractional(initial_state)
        self._last_grad = None
        self._last_total = 0
        self.hbar = 0.0
        self.eta_history: list[float] = []

    def on_batch(self, batch, requests=None) -> float:
        w = self.catalog.weights
        cost = float(np.sum(w * batch.counts * (1.0 - self._x)))
        if batch.total:
            self.hbar = max(self.hbar, float(batch.counts.max()))
        self._last_total = batch.total
        self._last_grad = -w * batch.counts
        return cost

    def on_prediction(self, pred: GradientVector) -> np.ndarray:
        g = self._last_grad
        if g is None or not np.any(g):
            return self._x
        if self.eta_fixed is not None:
            eta = self.eta_fixed
        else:
            denom = float(self.catalog.weights.max()) * self._last_total * self.hbar
            if denom <= 0:
                return self._x
            eta = math.sqrt(2.0 * self.k / self.horizon) / denom
        self.eta_history.append(eta)
        state = project_capped_simplex(self._x - eta * g, self.k)
        self._x = np.asarray(state.x)
        return self._x

    @property
    def state(self) -> np.ndarray:
        return self._x


class _PerRequestPolicy(Policy):
    """Common scaffolding for the integral, per-request policies."""

    integral = True

    def __init__(self, catalog, config):
        super().__init__(catalog, config)
        self.start()

    def _reset_cache(self, initial_state):
        self.cached = np.zeros(self.n, dtype=bool)
        if initial_state is not None:
            seed = initial_state.x if isinstance(initial_state, CacheState) else np.asarray(initial_state)
            self.cached[:] = seed > 0.5
            if int(self.cached.sum()) > self.k:
                raise ContractError("seeded cache set exceeds capacity")
        self.n_cached = int(self.cached.sum())

    def serve(self, file: int) -> bool:
        raise NotImplementedError

    def on_batch(self, batch, requests=None) -> float:
        if requests is None:
            # Order-sensitive policies get a deterministic ascending expansion;
            # pass the real request window to replay a trace faithfully.
            requests = np.repeat(np.arange(self.n), batch.counts)
        w = self.catalog.weights
        cost = 0.0
        for f in np.asarray(requests, dtype=np.int64).tolist():
            if not self.serve(f):
                cost += w[f]
        return float(cost)

    @property
    def state(self) -> np.ndarray:
        return self.cached.astype(float)

    def _insert(self, file: int):
        self.cached[file] = True
        self.n_cached += 1


class LfuPolicy(_PerRequestPolicy):
    """Least-frequently-used over running request counters.

    A missed file enters only once its frequency strictly exceeds the smallest
    frequency held in the cache, evicting that file (ties among cached files:
    smallest index), so one-off requests cannot displace popular residents.
    """

    name = "lfu"

    def start(self, initial_state=None, initial_prediction=None):
        self.freq = np.zeros(self.n)
        self._reset_cache(initial_state)

    def serve(self, file: int) -> bool:
        self.freq[file] += 1.0
        return self._admit(file)

    def _admit(self, file: int) -> bool:
        if self.cached[file]:
            return True
        if self.n_cached < self.k:
            self._insert(file)
            return False
        victim = int(np.where(self.cached, self.freq, np.inf).argmin())
        if self.freq[file] > self.freq[victim]:
            self.cached[victim] = False
            self.cached[file] = True
        return False

    def on_prediction(self, pred: GradientVector) -> np.ndarray:
        return self.state  # classic policy: predictions ignored


class OlfuPolicy(LfuPolicy):
    """LFU fed optimistic frequency credit for the predicted next batch.

    At each batch boundary the predicted per-file counts are added to the
    frequency table and remembered as residual credit. A request that was
    predicted consumes its own credit (its count is already in the table);
    an unpredicted request adds 1 and takes 1 back from the file holding the
    largest remaining credit (ties: smallest index), so that by the end of a
    batch with matched total mass the table equals a classic LFU's exactly.
    When no credit remains the take-back is skipped and counted.

    literal_random_decrement=True switches to decrementing a uniformly random
    file different from the requested one, which does not preserve the
    end-of-batch equality; it exists for comparison only.
    """

    name = "olfu"
    optimistic = True

    def __init__(self, catalog, config, literal_random_decrement: bool = False,
                 rng: np.random.Generator | None = None):
        self.literal_random_decrement = literal_random_decrement
        self._rng = rng if rng is not None else np.random.default_rng(0)
        super().__init__(catalog, config)

    def start(self, initial_state=None, initial_prediction=None):
        super().start(initial_state)
        self.credit = np.zeros(self.n)
        self.skipped_decrements = 0
        self.abandoned_credit = 0.0
        if initial_prediction is not None:
            self.begin_batch(counts_from_gradient(initial_prediction.g, self.catalog.weights))

    def begin_batch(self, predicted_counts):
        counts = np.maximum(np.asarray(predicted_counts, dtype=float), 0.0)
        leftover = float(self.credit.sum())
        if leftover > 1e-9:
            self.abandoned_credit += leftover
            logger.debug("abandoning %.3g units of unconsumed prediction credit", leftover)
        self.freq += counts
        self.credit = counts.copy()

    def serve(self, file: int) -> bool:
        if self.credit[file] >= 1.0 - 1e-9:
            self.credit[file] -= 1.0
        else:
            self.freq[file] += 1.0
            self._take_back(file)
        return self._admit(file)

    def _take_back(self, file: int):
        if self.literal_random_decrement:
            if self.n > 1:
                j = int(self._rng.integers(0, self.n - 1))
                if j >= file:
                    j += 1
                self.freq[j] -= 1.0
            return
        j = int(np.argmax(self.credit))
        c = float(self.credit[j])
        if c > 1e-12:
            take = min(1.0, c)
            self.credit[j] -= take
            self.freq[j] -= take
        else:
            self.skipped_decrements += 1
            logger.debug("request for file %d found no residual credit to reconcile", file)

    def on_prediction(self, pred: GradientVector) -> np.ndarray:
        self.begin_batch(counts_from_gradient(pred.g, self.catalog.weights))
        return self.state


class LruPolicy(_PerRequestPolicy):
    """Least-recently-used: evicts the cached file with the oldest
    last-time-requested stamp (ties: smallest index). Always admits misses."""

    name = "lru"

    _NEVER = 0  # stamp for files never requested; clock starts at 1

    def start(self, initial_state=None, initial_prediction=None):
        self.last_time_requested = np.zeros(self.n, dtype=np.int64)
        self.clock = 0
        self._reset_cache(initial_state)

    def serve(self, file: int) -> bool:
        self.clock += 1
        self.last_time_requested[file] = self.clock
        if self.cached[file]:
            return True
        if self.n_cached < self.k:
            self._insert(file)
            return False
        stamps = np.where(self.cached, self.last_time_requested, np.iinfo(np.int64).max)
        victim = int(stamps.argmin())
        self.cached[victim] = False
        self.cached[file] = True
        return False

    def on_prediction(self, pred: GradientVector) -> np.ndarray:
        return self.state


class OlruPolicy(LruPolicy):
    """LRU that stamps every file predicted for the next batch as just-used,
    so predicted content outlives unpredicted content under eviction."""

    name = "olru"
    optimistic = True

    def start(self, initial_state=None, initial_prediction=None):
        super().start(initial_state)
        if initial_prediction is not None:
            self.begin_batch(counts_from_gradient(initial_prediction.g, self.catalog.weights))

    def begin_batch(self, predicted_counts):
        predicted = np.asarray(predicted_counts, dtype=float) > 0
        self.last_time_requested[predicted] = self.clock

    def on_prediction(self, pred: GradientVector) -> np.ndarray:
        self.begin_batch(counts_from_gradient(pred.g, self.catalog.weights))
        return self.state


def make_policy(name: str, catalog: Catalog, config: CacheConfig, **kwargs) -> Policy:
    """Build a policy by name; kwargs are forwarded to the constructor."""
    table = {
        "obc": ObcPolicy,
        "pcoc": PcocPolicy,
        "ogd": OgdPolicy,
        "lfu": LfuPolicy,
        "olfu": OlfuPolicy,
        "lru": LruPolicy,
        "olru": OlruPolicy,
    }
    if name not in table:
        raise ContractError(f"unknown policy {name!r}, expected one of {POLICY_NAMES}")
    return table[name](catalog, config, **kwargs)
