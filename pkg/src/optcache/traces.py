"""Request-stream provenance: synthetic Zipf traces, log-file ingestion, batching.

A trace is a 1-d int array of file ids in {0..N-1}. Batching folds consecutive
windows of R requests into per-file count vectors; a trailing partial window is
dropped so that every batch has exactly R requests.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ContractError, RequestBatch

logger = logging.getLogger(__name__)


class TraceParseError(ValueError):
    """A trace line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TraceValidationError(ValueError):
    """A parsed file id falls outside the catalog."""

    def __init__(self, line_no: int, file_id: int, n_files: int):
        super().__init__(f"line {line_no}: file id {file_id} out of range [0, {n_files})")
        self.line_no = line_no
        self.file_id = file_id


@dataclass(frozen=True)
class ZipfSpec:
    """I i.i.d. requests over N files with popularity p_i proportional to (i+1)^-beta."""

    n_files: int
    beta: float
    n_requests: int
    seed: int = 0

    def __post_init__(self):
        if self.n_files < 1:
            raise ContractError("n_files must be >= 1")
        if self.beta < 0:
            raise ContractError("beta must be >= 0")
        if self.n_requests < 0:
            raise ContractError("n_requests must be >= 0")


def zipf_pmf(n_files: int, beta: float) -> np.ndarray:
    """Normalized Zipf popularity law over file ids 0..N-1 (rank = id + 1)."""
    q = np.arange(1, n_files + 1, dtype=float) ** (-beta)
    return q / q.sum()


def generate_zipf(spec: ZipfSpec) -> np.ndarray:
    """Sample the request sequence; identical seeds give identical sequences."""
    rng = np.random.default_rng(spec.seed)
    p = zipf_pmf(spec.n_files, spec.beta)
    return rng.choice(spec.n_files, size=spec.n_requests, p=p).astype(np.int64)


def batch_requests(seq, size: int, n_files: int) -> tuple[list[RequestBatch], int]:
    """Fold the sequence into batches of exactly ``size`` requests.

    Returns the batches and the number of trailing requests dropped to keep
    the batch size constant.
    """
    if size < 1:
        raise ContractError("batch size must be >= 1")
    seq = np.asarray(seq, dtype=np.int64)
    n_batches = seq.size // size
    dropped = int(seq.size - n_batches * size)
    if dropped:
        logger.info("dropping %d trailing requests (partial batch of size < %d)", dropped, size)
    batches = [
        RequestBatch(np.bincount(seq[t * size:(t + 1) * size], minlength=n_files))
        for t in range(n_batches)
    ]
    return batches, dropped


def request_windows(seq, size: int) -> list[np.ndarray]:
    """Ordered per-batch request slices matching batch_requests' windows."""
    seq = np.asarray(seq, dtype=np.int64)
    n_batches = seq.size // size
    return [seq[t * size:(t + 1) * size] for t in range(n_batches)]


def load_trace(path, n_files: int, id_column: int | None = None, delimiter: str = ",") -> np.ndarray:
    """Read a trace file: one file id per line, or a CSV column when id_column is set.

    Blank lines are skipped. Malformed tokens raise TraceParseError with the
    line number; ids outside [0, n_files) raise TraceValidationError.
    """
    ids: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        if id_column is None:
            rows = ((line_no, line.strip()) for line_no, line in enumerate(fh, start=1))
        else:
            reader = csv.reader(fh, delimiter=delimiter)
            def cells():
                for line_no, row in enumerate(reader, start=1):
                    if not row:
                        yield line_no, ""
                    elif id_column >= len(row):
                        raise TraceParseError(line_no, f"no column {id_column} in row of {len(row)} cells")
                    else:
                        yield line_no, row[id_column].strip()
            rows = cells()
        for line_no, token in rows:
            if not token:
                continue
            try:
                file_id = int(token)
            except ValueError:
                raise TraceParseError(line_no, f"not an integer file id: {token!r}") from None
            if not 0 <= file_id < n_files:
                raise TraceValidationError(line_no, file_id, n_files)
            ids.append(file_id)
    return np.asarray(ids, dtype=np.int64)


def save_trace(seq, path) -> None:
    """Write a trace in the same newline-delimited-id format load_trace reads."""
    seq = np.asarray(seq, dtype=np.int64)
    Path(path).write_text("".join(f"{i}\n" for i in seq.tolist()), encoding="utf-8")
