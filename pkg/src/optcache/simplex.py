"""Exact minimization over the capped simplex {x in [0,1]^N : sum(x) = k}.

Every cache-state update in this package reduces to one of two problems:

    project_capped_simplex(y, k):  argmin ||x - y||^2
    solve_diag_qp(A, b, k):        argmin sum_i A_i/2 * x_i^2 - b_i * x_i

Both are solved through the same dual mechanism. The KKT conditions give
x_i(mu) = clip((b_i - mu)/A_i, 0, 1) for A_i > 0 and a step function for
A_i = 0; the total mass sum_i x_i(mu) is nonincreasing in mu, so the dual
variable is located by bisection, refined by a closed-form solve on the
identified active set, with deterministic tie-breaking for degenerate
zero-curvature plateaus.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CacheState, ContractError, _as_1d

# |sum(x) - k| stopping tolerance, scaled by N.
MASS_RTOL = 1e-10
MAX_BISECT = 200


class SolverFailure(RuntimeError):
    """Dual search failed to reach the mass tolerance; carries the residual."""

    def __init__(self, residual: float):
        super().__init__(f"dual bisection did not converge, |sum(x) - k| = {residual:.3e}")
        self.residual = residual


@dataclass(frozen=True)
class DiagonalQP:
    """Separable quadratic: minimize sum_i quad_i/2 x_i^2 - lin_i x_i over the capped simplex."""

    quad: np.ndarray
    lin: np.ndarray
    capacity: int

    def __post_init__(self):
        A = _as_1d(self.quad)
        b = _as_1d(self.lin)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "quad", A)
        object.__setattr__(self, "lin", b)
        if A.shape != b.shape:
            raise ContractError(f"quad and lin differ in length: {A.size} vs {b.size}")
        if np.any(A < 0) or not np.all(np.isfinite(A)):
            raise ContractError("curvatures must be finite and nonnegative")
        if not np.all(np.isfinite(b)):
            raise ContractError("linear terms must be finite")
        if not 1 <= self.capacity <= A.size:
            raise ContractError(f"capacity must satisfy 1 <= k <= N, got {self.capacity}")

    @property
    def n(self) -> int:
        return self.quad.size

    def objective(self, x: np.ndarray) -> float:
        return float(np.sum(0.5 * self.quad * x * x - self.lin * x))


def solve_diag_qp(qp: DiagonalQP) -> CacheState:
    """Minimize the separable quadratic over the capped simplex.

    Raises SolverFailure if the dual search cannot meet the mass tolerance
    even after active-set refinement and plateau tie-breaking.
    """
    A, b, k = qp.quad, qp.lin, qp.capacity
    n = qp.n
    if k == n:
        return CacheState(np.ones(n), k)

    tol = MASS_RTOL * n
    pos = A > 0
    Ap, bp = A[pos], b[pos]
    bz = b[~pos]
    any_pos = Ap.size > 0
    any_zero = bz.size > 0

    def mass(mu: float) -> float:
        m = 0.0
        if any_pos:
            m += float(np.clip((bp - mu) / Ap, 0.0, 1.0).sum())
        if any_zero:
            m += float(np.count_nonzero(bz > mu))
        return m

    def build(mu: float) -> np.ndarray:
        x = np.zeros(n)
        if any_pos:
            x[pos] = np.clip((b[pos] - mu) / A[pos], 0.0, 1.0)
        if any_zero:
            x[~pos] = (b[~pos] > mu).astype(float)
        return x

    # Bracket guaranteeing mass(lo) >= k >= mass(hi): at lo = min(b - A) every
    # positive-curvature coordinate saturates at 1, at hi = max(b) all drop to 0.
    lo = float(np.min(b - A)) - 1.0
    hi = float(np.max(b))
    span = max(hi - lo, 1.0)
    for _ in range(64):
        if mass(lo) >= k - tol:
            break
        lo -= span
        span *= 2.0
    for _ in range(64):
        if mass(hi) <= k + tol:
            break
        hi += span
        span *= 2.0

    mu = 0.5 * (lo + hi)
    converged = False
    for _ in range(MAX_BISECT):
        mu = 0.5 * (lo + hi)
        if mu <= lo or mu >= hi:
            break  # bracket exhausted at float resolution: jump or hard slope
        m = mass(mu)
        if abs(m - k) <= tol:
            converged = True
            break
        if m > k:
            lo = mu
        else:
            hi = mu

    if converged:
        return CacheState(build(mu), k)

    # Active-set refinement: with the clip pattern frozen at the final mu the
    # mass is affine in mu, so the dual solves in closed form. Handles slopes
    # too steep for bisection to meet the tolerance.
    if any_pos:
        ratio = (bp - mu) / Ap
        free = (ratio > 0.0) & (ratio < 1.0)
        fixed_ones = float(np.count_nonzero(ratio >= 1.0))
        if any_zero:
            fixed_ones += float(np.count_nonzero(bz > mu))
        inv = 1.0 / Ap[free]
        slope = float(inv.sum())
        if slope > 0.0:
            mu_star = (float((bp[free] * inv).sum()) + fixed_ones - k) / slope
            if abs(mass(mu_star) - k) <= tol:
                return CacheState(build(mu_star), k)

    # Plateau tie-break: the remaining mass jump sits on zero-curvature
    # coordinates sharing b_i = mu*. Locate the crossing value among their b's
    # and hand the deficit to the tied coordinates in ascending index order,
    # fractional on the last.
    if any_zero:
        values = np.unique(bz)
        idx_lo, idx_hi = 0, values.size - 1
        crossing = None
        while idx_lo <= idx_hi:
            mid = (idx_lo + idx_hi) // 2
            if mass(float(values[mid])) <= k + tol:
                crossing = float(values[mid])
                idx_hi = mid - 1
            else:
                idx_lo = mid + 1
        if crossing is not None:
            x = build(crossing)
            deficit = k - float(x.sum())
            tied = np.flatnonzero((~pos) & (b == crossing))
            if -tol <= deficit <= tied.size + tol:
                deficit = min(max(deficit, 0.0), float(tied.size))
                for i in tied:
                    if deficit <= 0.0:
                        break
                    take = min(1.0, deficit)
                    x[i] = take
                    deficit -= take
                if abs(x.sum() - k) <= tol:
                    return CacheState(x, k)

    raise SolverFailure(abs(mass(mu) - k))


def project_capped_simplex(y, k: int) -> CacheState:
    """Euclidean projection of y onto {x in [0,1]^N : sum(x) = k}.

    Runs through the same dual mechanism as solve_diag_qp (A_i = 1, b_i = y_i)
    so there is a single verified code path.
    """
    y = _as_1d(y)
    return solve_diag_qp(DiagonalQP(np.ones(y.size), y, k))
