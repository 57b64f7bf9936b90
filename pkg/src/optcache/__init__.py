"""Optimistic online caching for batched requests.

Fractional FTRL policies driven by gradient predictions, classic and
optimistic LFU/LRU baselines, projected gradient descent, Zipf/file traces,
a regret and bounds engine, and a config-driven experiment runner.
"""
from .core import (
    CacheConfig,
    CacheState,
    Catalog,
    ContractError,
    GradientVector,
    RequestBatch,
    batch_cost,
    gradient_from_batch,
    top_k_state,
)
from .simplex import DiagonalQP, SolverFailure, project_capped_simplex, solve_diag_qp
from .policies import (
    LfuPolicy,
    LruPolicy,
    ObcPolicy,
    OgdPolicy,
    OlfuPolicy,
    OlruPolicy,
    PcocPolicy,
    Policy,
    make_policy,
)
from .predictors import (
    PredictionStream,
    PredictorSpec,
    predict_previous_batch,
    predict_type1,
    predict_type2,
    predict_type3,
)
from .traces import ZipfSpec, batch_requests, generate_zipf, load_trace, request_windows, save_trace, zipf_pmf
from .metrics import ExperimentRecord, amortized_cost, best_static, regret_series
from .bounds import (
    BatchAnalysis,
    PoissonModel,
    alpha_threshold,
    batch_error_analysis,
    expected_bounds_poisson,
    obc_bound,
    obc_corollary,
    pcoc_bound,
    pcoc_corollary,
)
from .runner import RunResult, replay

__version__ = "0.1.0"
