"""Closed-form evaluators for the regret guarantees and their consequences:
worst-case bounds on realized prediction errors, the sqrt(T) corollaries, the
expected-bound comparison under Poisson demand with its cache-size threshold,
and the batch-timescale analysis."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ContractError
from .traces import zipf_pmf


@dataclass(frozen=True)
class PoissonModel:
    """Poisson request arrivals: aggregate rate, per-file popularity split,
    horizon theta, decision timescale tau, and warm-up length tau0."""

    lambda_total: float
    popularity: np.ndarray
    theta: float
    tau: float
    tau0: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.popularity, dtype=float)
        object.__setattr__(self, "popularity", p)
        if self.lambda_total < 0 or np.any(p < 0):
            raise ContractError("rates must be nonnegative")
        if not 0 < self.tau <= self.theta:
            raise ContractError("need 0 < tau <= theta")
        if self.tau0 <= 0:
            raise ContractError("tau0 must be positive")

    @property
    def rates(self) -> np.ndarray:
        """Per-file arrival rates lambda_i = lambda * p_i."""
        return self.lambda_total * self.popularity


def obc_bound(k: int, n_files: int, err_sq_series) -> float:
    """Worst-case regret of the aggregate-regularizer policy on a realized
    error sequence: 2 sqrt(2 min(k, N-k) sum_t ||g_t - g~_t||^2)."""
    total = float(np.sum(err_sq_series))
    return 2.0 * math.sqrt(2.0 * min(k, n_files - k) * total)


def obc_corollary(k: int, n_files: int, horizon: int, batch_size: int, h: float, w_inf: float) -> float:
    """O(sqrt(T)) form under bounded batches: 2 ||w||_inf sqrt(2 min(k,N-k) T R h)."""
    return 2.0 * w_inf * math.sqrt(2.0 * min(k, n_files - k) * horizon * batch_size * h)


def pcoc_bound(coord_err_sq) -> float:
    """Worst-case regret of the per-coordinate policy:
    2 sum_i sqrt(sum_t (g_{t,i} - g~_{t,i})^2).

    Accepts either a (T, N) per-slot array or the length-N vector of
    per-coordinate sums."""
    arr = np.asarray(coord_err_sq, dtype=float)
    sums = arr.sum(axis=0) if arr.ndim == 2 else arr
    return 2.0 * float(np.sqrt(sums).sum())


def pcoc_corollary(n_files: int, horizon: int, h: float, w_norm: float) -> float:
    """O(sqrt(T)) form under bounded batches: 2 N h ||w|| sqrt(T)."""
    return 2.0 * n_files * h * w_norm * math.sqrt(horizon)


def alpha_threshold(beta: float, n_files: int) -> float:
    """Smallest relative cache size at which the per-coordinate expected bound
    beats the aggregate one under Zipf(beta) popularity:

        (sum_i sqrt(p_i))^2 / (2 N sum_i p_i)

    evaluated on unnormalized Zipf weights (the ratio is scale-invariant),
    which keeps beta = 0 at exactly 0.5."""
    if beta < 0:
        raise ContractError("beta must be >= 0")
    if n_files < 1:
        raise ContractError("n_files must be >= 1")
    q = np.arange(1, n_files + 1, dtype=float) ** (-beta)
    root_sum = float(np.sqrt(q).sum())
    return root_sum * root_sum / (2.0 * n_files * float(q.sum()))


def expected_bounds_poisson(model: PoissonModel, alpha: float, horizon: int) -> tuple[float, float]:
    """Expected regret bounds with a perfect mean predictor g~_i = lambda p_i:
    aggregate 2 sqrt(2 alpha lambda N T) vs per-coordinate 2 sum_i sqrt(T lambda p_i).
    ``horizon`` counts batches (decision slots), not time units."""
    n = model.popularity.size
    obc = 2.0 * math.sqrt(2.0 * alpha * model.lambda_total * n * horizon)
    pcoc = 2.0 * float(np.sqrt(horizon * model.lambda_total * model.popularity).sum())
    return obc, pcoc


@dataclass(frozen=True)
class BatchAnalysis:
    """Result of the batching analysis: the mode's expected value and, for the
    previous-batch predictor, the regret-optimal decision timescale."""

    mode: str
    value: float
    tau_star: float | None


def batch_error_analysis(model: PoissonModel, mode: str, k: int | None = None) -> BatchAnalysis:
    """Effect of the batch timescale tau on the expected regret bound.

    mode="mean-predictor": predictions equal the arrival means; the expected
    bound C sqrt(theta sum_i lambda_i) with C = 2 sqrt(2 min(k, N-k)) does not
    depend on tau at all (batching is free); requires k.

    mode="previous-batch": predictions repeat the previous window; returns the
    expected squared-error sum
        sum_i [ (theta - tau)/tau * 2 lambda_i tau + lambda_i tau + m_i^2 tau^2 ],
    with per-file m_i^2 = lambda_i / tau0, minimized at tau* = min(tau0/2, theta).
    """
    if model.tau > model.theta:
        raise ContractError("tau must not exceed theta")
    rates = model.rates
    if mode == "mean-predictor":
        if k is None:
            raise ContractError("mean-predictor mode needs the cache capacity k")
        n = rates.size
        c = 2.0 * math.sqrt(2.0 * min(k, n - k))
        value = c * math.sqrt(model.theta * float(rates.sum()))
        return BatchAnalysis(mode, value, None)
    if mode == "previous-batch":
        tau, tau0, theta = model.tau, model.tau0, model.theta
        m_sq = rates / tau0
        per_file = (theta - tau) / tau * 2.0 * rates * tau + rates * tau + m_sq * tau * tau
        value = float(per_file.sum())
        return BatchAnalysis(mode, value, min(tau0 / 2.0, theta))
    raise ContractError(f"unknown analysis mode {mode!r}")


def threshold_curve(betas, n_files: int) -> list[tuple[float, float]]:
    """(beta, alpha_threshold) pairs for plotting the policy-preference regimes."""
    return [(float(b), alpha_threshold(float(b), n_files)) for b in betas]


__all__ = [
    "PoissonModel",
    "BatchAnalysis",
    "obc_bound",
    "obc_corollary",
    "pcoc_bound",
    "pcoc_corollary",
    "alpha_threshold",
    "expected_bounds_poisson",
    "batch_error_analysis",
    "threshold_curve",
    "zipf_pmf",
]
