import numpy as np
import pytest

from optcache.core import ContractError
from optcache.traces import (
    TraceParseError,
    TraceValidationError,
    ZipfSpec,
    batch_requests,
    generate_zipf,
    load_trace,
    request_windows,
    save_trace,
    zipf_pmf,
)


def test_pmf_is_a_distribution_for_tested_exponents():
    for beta in (0.0, 0.8, 0.9, 1.2, 1.5):
        p = zipf_pmf(1000, beta)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p >= 0)
        assert np.all(np.diff(p) <= 0)  # popularity nonincreasing in rank


def test_pmf_two_file_closed_form():
    p = zipf_pmf(2, 1.5)
    z = 1.0 + 2.0 ** (-1.5)
    assert p[0] == pytest.approx(1.0 / z)
    assert p[1] == pytest.approx(2.0 ** (-1.5) / z)
    assert p[0] == pytest.approx(0.7388, abs=1e-4)


def test_uniform_limit_frequencies():
    spec = ZipfSpec(n_files=1000, beta=0.0, n_requests=100_000, seed=1)
    seq = generate_zipf(spec)
    counts = np.bincount(seq, minlength=1000)
    mean = spec.n_requests / spec.n_files
    sigma = np.sqrt(mean * (1 - 1 / spec.n_files))
    assert np.all(np.abs(counts - mean) <= 5 * sigma)


def test_generation_deterministic_per_seed():
    spec = ZipfSpec(50, 1.2, 5000, seed=77)
    assert np.array_equal(generate_zipf(spec), generate_zipf(spec))


def test_zipf_spec_validation():
    with pytest.raises(ContractError):
        ZipfSpec(0, 1.0, 10)
    with pytest.raises(ContractError):
        ZipfSpec(5, -0.1, 10)


def test_batching_exact_window():
    batches, dropped = batch_requests(np.arange(10) % 3, 10, 3)
    assert len(batches) == 1 and dropped == 0
    assert batches[0].total == 10


def test_batching_counts():
    batches, _ = batch_requests(np.array([0, 0, 1]), 3, 2)
    assert np.array_equal(batches[0].counts, [2, 1])


def test_batching_drops_partial_tail():
    seq = np.zeros(25, dtype=int)
    batches, dropped = batch_requests(seq, 10, 1)
    assert len(batches) == 2 and dropped == 5


def test_batching_conserves_counts():
    rng = np.random.default_rng(4)
    seq = rng.integers(0, 7, size=104)
    batches, dropped = batch_requests(seq, 10, 7)
    consumed = seq[: len(seq) - dropped]
    total = np.sum([b.counts for b in batches], axis=0)
    assert np.array_equal(total, np.bincount(consumed, minlength=7))


def test_request_windows_align_with_batches():
    seq = np.array([0, 1, 1, 2, 0, 2, 1])
    windows = request_windows(seq, 3)
    batches, _ = batch_requests(seq, 3, 3)
    assert len(windows) == len(batches) == 2
    for w, b in zip(windows, batches):
        assert np.array_equal(np.bincount(w, minlength=3), b.counts)


def test_load_trace_plain(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("0\n1\n0\n")
    assert np.array_equal(load_trace(path, 2), [0, 1, 0])


def test_load_trace_empty(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("")
    assert load_trace(path, 2).size == 0


def test_load_trace_malformed_line(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("abc\n")
    with pytest.raises(TraceParseError) as err:
        load_trace(path, 2)
    assert err.value.line_no == 1


def test_load_trace_out_of_range(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("0\n7\n")
    with pytest.raises(TraceValidationError) as err:
        load_trace(path, 3)
    assert err.value.line_no == 2 and err.value.file_id == 7


def test_load_trace_csv_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("12:00,3,GET\n12:01,0,GET\n")
    assert np.array_equal(load_trace(path, 5, id_column=1), [3, 0])


def test_save_then_load_roundtrip(tmp_path):
    seq = generate_zipf(ZipfSpec(20, 1.0, 200, seed=3))
    path = tmp_path / "zipf.trace"
    save_trace(seq, path)
    assert np.array_equal(load_trace(path, 20), seq)
