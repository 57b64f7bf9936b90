"""Shared domain types for the caching simulator.

A catalog of N equal-size files with per-file retrieval costs, a cache of
capacity k that may store arbitrary fractions of files, batches of requests,
and cost gradients. All types are immutable values after construction and can
be shared freely across concurrent runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# |sum(x) - k| tolerance, scaled by N: absorbs float drift from repeated
# solver calls without hiding real constraint violations.
FEASIBILITY_RTOL = 1e-9


class ContractError(ValueError):
    """An argument violates a documented precondition (e.g. dimension mismatch)."""


def _as_1d(values, dtype=float) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        raise ContractError(f"expected a 1-d vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Catalog:
    """The file catalog: N files, file i costs ``weights[i]`` to fetch remotely."""

    weights: np.ndarray

    def __post_init__(self):
        w = _as_1d(self.weights)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if w.size < 1:
            raise ContractError("catalog must contain at least one file")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ContractError("retrieval costs must be finite and nonnegative")

    @property
    def n_files(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, n_files: int, weight: float = 1.0) -> "Catalog":
        """Catalog with identical per-file cost (the experimental default)."""
        return cls(np.full(int(n_files), float(weight)))


@dataclass(frozen=True)
class CacheConfig:
    """Cache capacity k, with 1 <= k <= N."""

    capacity: int
    n_files: int

    def __post_init__(self):
        if not 1 <= self.capacity <= self.n_files:
            raise ContractError(
                f"capacity must satisfy 1 <= k <= N, got k={self.capacity}, N={self.n_files}"
            )

    @property
    def alpha(self) -> float:
        """Cache size as a fraction of the catalog."""
        return self.capacity / self.n_files


@dataclass(frozen=True)
class CacheState:
    """A fractional cache allocation: x in [0,1]^N with sum(x) = k.

    The feasible set is the capped simplex; entry i is the fraction of
    file i currently stored.
    """

    x: np.ndarray
    capacity: int

    def __post_init__(self):
        x = _as_1d(self.x)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ContractError("cache fractions must lie in [0, 1]")
        tol = FEASIBILITY_RTOL * x.size
        if abs(float(x.sum()) - self.capacity) > tol:
            raise ContractError(
                f"allocation sums to {x.sum():.12g}, expected {self.capacity} (tol {tol:.3g})"
            )

    @property
    def n_files(self) -> int:
        return self.x.size

    @classmethod
    def uniform(cls, n_files: int, capacity: int) -> "CacheState":
        return cls(np.full(n_files, capacity / n_files), capacity)


@dataclass(frozen=True)
class RequestBatch:
    """Per-file request counts for one timeslot."""

    counts: np.ndarray
    total: int = field(init=False)

    def __post_init__(self):
        c = _as_1d(self.counts, dtype=np.int64)
        if np.any(c < 0):
            raise ContractError("request counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "total", int(c.sum()))

    @property
    def n_files(self) -> int:
        return self.counts.size


@dataclass(frozen=True)
class GradientVector:
    """A cost gradient g (or a prediction of one); g_i = -w_i * r_i for real batches."""

    g: np.ndarray

    def __post_init__(self):
        g = _as_1d(self.g)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def n_files(self) -> int:
        return self.g.size

    @classmethod
    def zeros(cls, n_files: int) -> "GradientVector":
        return cls(np.zeros(n_files))


def _check_dims(catalog: Catalog, *vecs: int):
    for n in vecs:
        if n != catalog.n_files:
            raise ContractError(f"dimension mismatch: catalog has {catalog.n_files} files, got {n}")


def gradient_from_batch(catalog: Catalog, batch: RequestBatch) -> GradientVector:
    """Gradient of the batch cost: g_i = -w_i * r_i (nonpositive)."""
    _check_dims(catalog, batch.n_files)
    return GradientVector(-catalog.weights * batch.counts)


def batch_cost(catalog: Catalog, batch: RequestBatch, state: CacheState) -> float:
    """Retrieval cost of serving ``batch`` from ``state``: sum_i w_i r_i (1 - x_i)."""
    _check_dims(catalog, batch.n_files, state.n_files)
    return float(np.sum(catalog.weights * batch.counts * (1.0 - state.x)))


def top_k_state(scores: np.ndarray, capacity: int) -> np.ndarray:
    """0/1 vector caching the k files with the largest score (ties: smallest index)."""
    scores = _as_1d(scores)
    order = np.argsort(-scores, kind="stable")
    x = np.zeros(scores.size)
    x[order[:capacity]] = 1.0
    return x
