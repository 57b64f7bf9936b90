"""Gradient-prediction generators.

The oracle-corruption models (type1/type2/type3) take the true next batch and
degrade it; the history models (previous_batch, poisson_mean) never look ahead.
All predictions are deterministic functions of (inputs, seed).

type1 mixes in count space: r~_i = (1-xi) r_i + xi R/N, then g~ = -w * r~.
The mix is applied to counts rather than to the signed gradient so that xi=0
gives a perfect prediction and xi=1 makes every file look equally popular,
while keeping the prediction inside the gradient image of valid batches.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Catalog, ContractError, GradientVector, RequestBatch, gradient_from_batch

KINDS = ("none", "perfect", "type1", "type2", "type3", "previous_batch", "poisson_mean")


@dataclass(frozen=True)
class PredictorSpec:
    """Which prediction model to run and its parameters."""

    kind: str
    xi: float | None = None            # type1 noise level in [0, 1]
    pi: float | None = None            # type3 per-request accuracy in [0, 1]
    seed: int | None = None
    warmup_counts: np.ndarray | None = None  # previous_batch: n_i(tau0)
    tau_ratio: float = 1.0                   # previous_batch: tau / tau0
    mean_counts: np.ndarray | None = None    # poisson_mean: lambda_i * tau

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown predictor kind {self.kind!r}, expected one of {KINDS}")
        if self.kind == "type1":
            if self.xi is None or not 0.0 <= self.xi <= 1.0:
                raise ContractError("type1 requires xi in [0, 1]")
        if self.kind == "type3":
            if self.pi is None or not 0.0 <= self.pi <= 1.0:
                raise ContractError("type3 requires pi in [0, 1]")
        if self.kind == "poisson_mean" and self.mean_counts is None:
            raise ContractError("poisson_mean requires mean_counts")


def predict_type1(catalog: Catalog, next_batch: RequestBatch, xi: float) -> GradientVector:
    """Interpolate between the true batch (xi=0) and uniform popularity (xi=1)."""
    if not 0.0 <= xi <= 1.0:
        raise ContractError("xi must lie in [0, 1]")
    mixed = (1.0 - xi) * next_batch.counts + xi * next_batch.total / catalog.n_files
    return GradientVector(-catalog.weights * mixed)


def predict_type2(catalog: Catalog, next_batch: RequestBatch, rng: np.random.Generator) -> GradientVector:
    """Uniformly random permutation of the true gradient's components."""
    g = gradient_from_batch(catalog, next_batch).g
    return GradientVector(g[rng.permutation(catalog.n_files)])


def corrupt_counts_type3(counts: np.ndarray, pi: float, rng: np.random.Generator, n_files: int) -> np.ndarray:
    """Keep each individual request with probability pi, otherwise move it to a
    uniformly random different file. Total request mass is preserved exactly."""
    counts = np.asarray(counts, dtype=np.int64)
    if n_files == 1:
        return counts.copy()
    kept = rng.binomial(counts, pi)
    out = kept.astype(np.int64)
    replaced = counts - kept
    for i in np.flatnonzero(replaced):
        draws = rng.integers(0, n_files - 1, size=int(replaced[i]))
        draws[draws >= i] += 1
        np.add.at(out, draws, 1)
    return out


def predict_type3(catalog: Catalog, next_batch: RequestBatch, pi: float, rng: np.random.Generator) -> GradientVector:
    if not 0.0 <= pi <= 1.0:
        raise ContractError("pi must lie in [0, 1]")
    predicted = corrupt_counts_type3(next_batch.counts, pi, rng, catalog.n_files)
    return GradientVector(-catalog.weights * predicted)


def predict_previous_batch(catalog: Catalog, previous: RequestBatch) -> GradientVector:
    """Predict the next gradient as the one just observed."""
    return gradient_from_batch(catalog, previous)


def warmup_prediction(catalog: Catalog, warmup_counts, tau_ratio: float) -> GradientVector:
    """First-slot prediction from a warm-up count: rate n_i(tau0)/tau0 scaled to
    one batch interval, i.e. predicted counts n_i * (tau/tau0)."""
    counts = np.asarray(warmup_counts, dtype=float)
    if counts.size != catalog.n_files:
        raise ContractError("warmup counts must cover the whole catalog")
    return GradientVector(-catalog.weights * counts * tau_ratio)


@dataclass
class PredictionStream:
    """Per-run prediction source for a fixed trace replay.

    initial() returns g~ for slot 0; for_slot(t) returns g~ for slot t >= 1.
    Oracle kinds corrupt the true batch of the requested slot and fall back to
    a zero gradient past the end of the horizon (no future to corrupt).
    """

    spec: PredictorSpec
    catalog: Catalog
    batches: list[RequestBatch]
    seed: int | None = None
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        seed = self.seed if self.seed is not None else self.spec.seed
        self._rng = np.random.default_rng(seed)

    def _zero(self) -> GradientVector:
        return GradientVector.zeros(self.catalog.n_files)

    def initial(self) -> GradientVector:
        if self.spec.kind == "previous_batch":
            if self.spec.warmup_counts is None:
                raise ContractError("previous_batch predictor needs warmup_counts for the first slot")
            return warmup_prediction(self.catalog, self.spec.warmup_counts, self.spec.tau_ratio)
        return self.for_slot(0)

    def for_slot(self, t: int) -> GradientVector:
        kind = self.spec.kind
        if kind == "none":
            return self._zero()
        if kind == "poisson_mean":
            return GradientVector(-self.catalog.weights * np.asarray(self.spec.mean_counts, dtype=float))
        if kind == "previous_batch":
            if t < 1:
                return self.initial()
            return predict_previous_batch(self.catalog, self.batches[t - 1])
        # Oracle-corruption kinds.
        if t >= len(self.batches):
            return self._zero()
        batch = self.batches[t]
        if kind == "perfect":
            return gradient_from_batch(self.catalog, batch)
        if kind == "type1":
            return predict_type1(self.catalog, batch, self.spec.xi)
        if kind == "type2":
            return predict_type2(self.catalog, batch, self._rng)
        if kind == "type3":
            return predict_type3(self.catalog, batch, self.spec.pi, self._rng)
        raise ContractError(f"unhandled predictor kind {kind!r}")

    @property
    def deterministic(self) -> bool:
        """True when the stream never consumes randomness (seed is irrelevant)."""
        return self.spec.kind in ("none", "perfect", "type1", "previous_batch", "poisson_mean")
