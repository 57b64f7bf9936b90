import numpy as np
import pytest

from optcache.core import Catalog, ContractError, GradientVector, RequestBatch
from optcache.predictors import (
    PredictionStream,
    PredictorSpec,
    corrupt_counts_type3,
    predict_previous_batch,
    predict_type1,
    predict_type2,
    predict_type3,
    warmup_prediction,
)


@pytest.fixture
def cat2():
    return Catalog.uniform(2)


# --- type 1 -------------------------------------------------------------------

def test_type1_xi_zero_is_perfect(cat2):
    batch = RequestBatch(np.array([4, 0]))
    g = predict_type1(cat2, batch, 0.0)
    assert np.array_equal(g.g, [-4.0, 0.0])


def test_type1_xi_one_is_uniform(cat2):
    batch = RequestBatch(np.array([4, 0]))
    g = predict_type1(cat2, batch, 1.0)
    assert np.allclose(g.g, [-2.0, -2.0])  # every file equally popular: R/N


def test_type1_half_mix(cat2):
    batch = RequestBatch(np.array([4, 0]))
    g = predict_type1(cat2, batch, 0.5)
    assert np.allclose(g.g, [-3.0, -1.0])


def test_type1_preserves_mass():
    cat = Catalog.uniform(5)
    batch = RequestBatch(np.array([7, 0, 2, 1, 0]))
    for xi in (0.0, 0.3, 0.8, 1.0):
        g = predict_type1(cat, batch, xi)
        assert float((-g.g).sum()) == pytest.approx(batch.total, abs=1e-9)


# --- type 2 -------------------------------------------------------------------

def test_type2_constant_gradient_unchanged():
    cat = Catalog.uniform(3)
    batch = RequestBatch(np.array([2, 2, 2]))
    g = predict_type2(cat, batch, np.random.default_rng(0))
    assert np.array_equal(g.g, [-2.0, -2.0, -2.0])


def test_type2_preserves_multiset():
    cat = Catalog.uniform(4)
    batch = RequestBatch(np.array([5, 3, 1, 0]))
    g = predict_type2(cat, batch, np.random.default_rng(7))
    assert sorted(g.g.tolist()) == [-5.0, -3.0, -1.0, 0.0]


def test_type2_seeded_reproducible():
    cat = Catalog.uniform(3)
    batch = RequestBatch(np.array([5, 3, 1]))
    a = predict_type2(cat, batch, np.random.default_rng(123)).g
    b = predict_type2(cat, batch, np.random.default_rng(123)).g
    assert np.array_equal(a, b)


# --- type 3 -------------------------------------------------------------------

def test_type3_pi_one_is_exact():
    cat = Catalog.uniform(4)
    batch = RequestBatch(np.array([3, 0, 2, 1]))
    g = predict_type3(cat, batch, 1.0, np.random.default_rng(0))
    assert np.array_equal(g.g, [-3.0, 0.0, -2.0, -1.0])


def test_type3_pi_zero_moves_every_request():
    cat = Catalog.uniform(6)
    batch = RequestBatch(np.array([10, 0, 0, 0, 0, 0]))
    g = predict_type3(cat, batch, 0.0, np.random.default_rng(5))
    assert g.g[0] == 0.0                      # no original request survives
    assert float((-g.g).sum()) == batch.total  # mass conserved exactly


def test_type3_mass_conserved_integer():
    cat = Catalog.uniform(8)
    rng = np.random.default_rng(11)
    batch = RequestBatch(rng.integers(0, 9, size=8))
    for pi in (0.0, 0.4, 0.9):
        out = corrupt_counts_type3(batch.counts, pi, np.random.default_rng(3), 8)
        assert out.sum() == batch.total
        assert np.issubdtype(out.dtype, np.integer)


def test_type3_preserved_count_within_binomial_interval():
    # All mass on one file makes the surviving count directly observable:
    # it is Binomial(100, 0.7) per seed. The mean over 30 seeds must sit
    # inside the 99% normal interval around 70.
    cat = Catalog.uniform(50)
    counts = np.zeros(50, dtype=np.int64)
    counts[0] = 100
    batch = RequestBatch(counts)
    preserved = []
    for seed in range(30):
        g = predict_type3(cat, batch, 0.7, np.random.default_rng(seed))
        preserved.append(-g.g[0])
    mean = float(np.mean(preserved))
    sigma_mean = np.sqrt(100 * 0.7 * 0.3 / 30)
    assert abs(mean - 70.0) <= 2.576 * sigma_mean


def test_type3_single_file_catalog_keeps_everything():
    cat = Catalog.uniform(1)
    batch = RequestBatch(np.array([5]))
    g = predict_type3(cat, batch, 0.0, np.random.default_rng(0))
    assert np.array_equal(g.g, [-5.0])


# --- previous batch / warmup ----------------------------------------------------

def test_previous_batch_returns_last_gradient():
    cat = Catalog.uniform(3)
    prev = RequestBatch(np.array([2, 0, 1]))
    assert np.array_equal(predict_previous_batch(cat, prev).g, [-2.0, 0.0, -1.0])


def test_warmup_unit_scaling():
    cat = Catalog.uniform(2)
    g = warmup_prediction(cat, np.array([4, 0]), tau_ratio=1.0)
    assert np.array_equal(g.g, [-4.0, 0.0])


def test_warmup_rate_scaling():
    cat = Catalog.uniform(2)
    g = warmup_prediction(cat, np.array([4, 0]), tau_ratio=0.5)  # tau0 = 2 tau
    assert np.array_equal(g.g, [-2.0, 0.0])


def test_previous_batch_stream_exact_when_stationary():
    cat = Catalog.uniform(2)
    batches = [RequestBatch(np.array([3, 1])) for _ in range(4)]
    spec = PredictorSpec("previous_batch", warmup_counts=np.array([6, 2]), tau_ratio=0.5)
    stream = PredictionStream(spec, cat, batches)
    assert np.array_equal(stream.initial().g, [-3.0, -1.0])
    for t in range(1, 4):
        assert np.array_equal(stream.for_slot(t).g, [-3.0, -1.0])


def test_previous_batch_stream_requires_warmup():
    cat = Catalog.uniform(2)
    batches = [RequestBatch(np.array([1, 0]))]
    stream = PredictionStream(PredictorSpec("previous_batch"), cat, batches)
    with pytest.raises(ContractError):
        stream.initial()


# --- stream mechanics -----------------------------------------------------------

def test_stream_determinism_per_seed():
    cat = Catalog.uniform(6)
    rng = np.random.default_rng(0)
    batches = [RequestBatch(rng.integers(0, 5, size=6)) for _ in range(5)]
    spec = PredictorSpec("type3", pi=0.5)
    a = PredictionStream(spec, cat, batches, seed=9)
    b = PredictionStream(spec, cat, batches, seed=9)
    for t in range(5):
        assert np.array_equal(a.for_slot(t).g, b.for_slot(t).g)


def test_stream_zero_gradient_past_horizon():
    cat = Catalog.uniform(3)
    batches = [RequestBatch(np.array([1, 0, 0]))]
    stream = PredictionStream(PredictorSpec("perfect"), cat, batches)
    assert np.array_equal(stream.for_slot(5).g, np.zeros(3))


def test_poisson_mean_stream_is_constant():
    cat = Catalog.uniform(3)
    spec = PredictorSpec("poisson_mean", mean_counts=np.array([2.0, 1.0, 0.5]))
    stream = PredictionStream(spec, cat, [])
    assert np.array_equal(stream.initial().g, [-2.0, -1.0, -0.5])
    assert np.array_equal(stream.for_slot(10).g, [-2.0, -1.0, -0.5])


def test_spec_validation():
    with pytest.raises(ContractError):
        PredictorSpec("type1")             # missing xi
    with pytest.raises(ContractError):
        PredictorSpec("type3", pi=1.5)
    with pytest.raises(ContractError):
        PredictorSpec("poisson_mean")
    with pytest.raises(ContractError):
        PredictorSpec("nope")
