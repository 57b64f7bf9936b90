"""Independent brute-force oracles shared across the test suite.

These deliberately avoid the library's dual-bisection code path: the QP oracle
enumerates every clip pattern in closed form, and the vertex oracle enumerates
subsets directly.
"""
import itertools

import numpy as np

_PATTERNS: dict[int, np.ndarray] = {}


def _patterns(n: int) -> np.ndarray:
    if n not in _PATTERNS:
        _PATTERNS[n] = np.array(list(itertools.product((0, 1, 2), repeat=n)), dtype=np.int8)
    return _PATTERNS[n]


def oracle_diag_qp(A, b, k, eps=1e-9):
    """Exact minimizer of sum_i A_i/2 x_i^2 - b_i x_i over the capped simplex,
    by exhaustive active-set enumeration over the 3^N patterns (0 / free / 1),
    each solved in closed form. Returns (x, objective)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.size
    pats = _patterns(n)
    is_one = pats == 1
    is_free = pats == 2
    # Patterns freeing a zero-curvature coordinate have no closed form; the
    # optimum they could represent is covered by vertex assignments instead.
    ok = ~np.any(is_free & (A <= 0.0)[None, :], axis=1)
    inv = np.divide(1.0, A, out=np.zeros_like(A), where=A > 0)
    denom = (is_free * inv[None, :]).sum(axis=1)
    n_ones = is_one.sum(axis=1)

    x_vertex = is_one.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = ((is_free * (b * inv)[None, :]).sum(axis=1) + n_ones - k) / denom
        xf = (b[None, :] - mu[:, None]) * inv[None, :]

    best_x, best_obj = None, np.inf

    vertex_rows = ok & (denom == 0) & (n_ones == k)
    if vertex_rows.any():
        X = x_vertex[vertex_rows]
        obj = (0.5 * A * X * X - b * X).sum(axis=1)
        i = int(obj.argmin())
        best_x, best_obj = X[i], float(obj[i])

    free_rows = ok & (denom > 0)
    if free_rows.any():
        infeas = is_free & ((xf < -eps) | (xf > 1 + eps))
        free_rows &= ~np.any(infeas, axis=1)
    if free_rows.any():
        X = np.where(is_free, np.clip(xf, 0.0, 1.0), x_vertex)[free_rows]
        obj = (0.5 * A * X * X - b * X).sum(axis=1)
        i = int(obj.argmin())
        if float(obj[i]) < best_obj:
            best_x, best_obj = X[i], float(obj[i])

    assert best_x is not None, "oracle found no feasible pattern"
    return best_x, best_obj


def oracle_best_vertex(scores, k):
    """Best 0/1 cache vertex by exhaustive subset enumeration: maximizes the
    stored score sum. Returns (x, stored_score)."""
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    best_x, best_val = None, -np.inf
    for subset in itertools.combinations(range(n), k):
        val = float(scores[list(subset)].sum())
        if val > best_val:
            best_val = val
            best_x = np.zeros(n)
            best_x[list(subset)] = 1.0
    return best_x, best_val


def kkt_mass(mu, A, b):
    """Primal mass sum_i x_i(mu) from the KKT map (open rule at A_i = 0)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    pos = A > 0
    m = float(np.clip((b[pos] - mu) / A[pos], 0.0, 1.0).sum())
    m += float(np.count_nonzero(b[~pos] > mu))
    return m
