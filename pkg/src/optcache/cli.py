"""Config-driven experiment runner and command-line entry point.

A single INI-style config describes the catalog, cache, trace, batching,
policies, and prediction model; the runner replays every (policy, seed) pair
through the caching loop and writes one CSV per run, an aggregate CSV per
policy (mean and 0.95 confidence interval across seeds), and a JSON manifest
holding the fully resolved configuration. Re-running the same config (or the
manifest) reproduces the per-run CSVs byte for byte.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import datetime
import json
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bounds import threshold_curve
from .core import CacheConfig, Catalog, ContractError
from .policies import POLICY_NAMES, make_policy
from .predictors import KINDS as PREDICTOR_KINDS
from .predictors import PredictionStream, PredictorSpec
from .runner import INITIAL_STATE_MODES, replay
from .simplex import SolverFailure
from .traces import ZipfSpec, batch_requests, generate_zipf, load_trace, request_windows

RUN_CSV_HEADER = ["t", "cost", "cum_cost", "miss_ratio", "regret", "avg_regret", "update_nanos"]
AGG_CSV_HEADER = ["t", "mean_miss", "ci95_miss", "mean_regret", "ci95_regret"]


class ConfigError(ValueError):
    """A config field is missing or out of range; message carries the field path."""


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description (all defaults materialized)."""

    n_files: int = 1000
    weight: float = 1.0
    capacity: int = 100
    trace_kind: str = "zipf"        # zipf | file
    beta: float = 0.8
    n_requests: int = 100_000
    trace_seed: int = 42
    trace_path: str | None = None
    batch_sizes: list[int] = field(default_factory=lambda: [1000])
    policies: list[str] = field(default_factory=lambda: ["obc", "pcoc"])
    predictor_kind: str = "type3"
    xi: float | None = None
    pi: float | None = None
    base_seed: int = 1000
    runs: int = 30
    warmup_batches: int = 1         # previous_batch predictor only
    initial_state: str = "auto"
    record_timing: bool = False
    regret_benchmark: str = "horizon"
    olfu_literal_decrement: bool = False
    output_dir: str = "results"

    def validate(self):
        def need(cond, path, msg):
            if not cond:
                raise ConfigError(f"[{path}] {msg}")
        need(self.n_files >= 1, "catalog] n_files", "must be >= 1")
        need(self.weight >= 0, "catalog] weight", "must be >= 0")
        need(1 <= self.capacity <= self.n_files, "cache] capacity", "must satisfy 1 <= k <= N")
        need(self.trace_kind in ("zipf", "file"), "trace] kind", "must be zipf or file")
        if self.trace_kind == "zipf":
            need(self.beta >= 0, "trace] beta", "must be >= 0")
            need(self.n_requests >= 1, "trace] n_requests", "must be >= 1")
        else:
            need(bool(self.trace_path), "trace] path", "required for kind=file")
        need(len(self.batch_sizes) >= 1, "batch] sizes", "need at least one batch size")
        need(all(r >= 1 for r in self.batch_sizes), "batch] sizes", "batch sizes must be >= 1")
        need(len(self.policies) >= 1, "policies] names", "need at least one policy")
        for p in self.policies:
            need(p in POLICY_NAMES, "policies] names", f"unknown policy {p!r}")
        need(self.predictor_kind in PREDICTOR_KINDS, "predictor] kind",
             f"must be one of {PREDICTOR_KINDS}")
        if self.predictor_kind == "type1":
            need(self.xi is not None and 0 <= self.xi <= 1, "predictor] xi", "required in [0, 1] for type1")
        if self.predictor_kind == "type3":
            need(self.pi is not None and 0 <= self.pi <= 1, "predictor] pi", "required in [0, 1] for type3")
        if self.predictor_kind == "previous_batch":
            need(self.warmup_batches >= 1, "predictor] warmup_batches", "must be >= 1")
        need(self.runs >= 1, "predictor] runs", "must be >= 1")
        need(self.initial_state in INITIAL_STATE_MODES, "run] initial_state",
             f"must be one of {INITIAL_STATE_MODES}")
        need(self.regret_benchmark in ("horizon", "prefix"), "run] regret_benchmark",
             "must be horizon or prefix")
        return self


def _get(parser, section, key, cast, default=None, required=False):
    if not parser.has_option(section, key) or parser.get(section, key).strip() == "":
        if required:
            raise ConfigError(f"[{section}] {key}: required")
        return default
    raw = parser.get(section, key).strip()
    try:
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {cast.__name__}") from None


def _csv_list(raw, cast):
    return [cast(tok.strip()) for tok in raw.split(",") if tok.strip()]


def parse_config(path) -> ExperimentConfig:
    """Load an experiment config from an INI file or a previous run's manifest."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        cfg_dict = data.get("config", data)
        return ExperimentConfig(**cfg_dict).validate()
    parser = configparser.ConfigParser()
    parser.read(path)
    cfg = ExperimentConfig()
    cfg.n_files = _get(parser, "catalog", "n_files", int, cfg.n_files)
    cfg.weight = _get(parser, "catalog", "weight", float, cfg.weight)
    cfg.capacity = _get(parser, "cache", "capacity", int, cfg.capacity)
    cfg.trace_kind = _get(parser, "trace", "kind", str, cfg.trace_kind)
    cfg.beta = _get(parser, "trace", "beta", float, cfg.beta)
    cfg.n_requests = _get(parser, "trace", "n_requests", int, cfg.n_requests)
    cfg.trace_seed = _get(parser, "trace", "seed", int, cfg.trace_seed)
    cfg.trace_path = _get(parser, "trace", "path", str, cfg.trace_path)
    sizes = _get(parser, "batch", "sizes", str, None)
    if sizes is not None:
        cfg.batch_sizes = _csv_list(sizes, int)
    names = _get(parser, "policies", "names", str, None)
    if names is not None:
        cfg.policies = _csv_list(names, str)
    cfg.predictor_kind = _get(parser, "predictor", "kind", str, cfg.predictor_kind)
    cfg.xi = _get(parser, "predictor", "xi", float, cfg.xi)
    cfg.pi = _get(parser, "predictor", "pi", float, cfg.pi)
    cfg.base_seed = _get(parser, "predictor", "base_seed", int, cfg.base_seed)
    cfg.runs = _get(parser, "predictor", "runs", int, cfg.runs)
    cfg.warmup_batches = _get(parser, "predictor", "warmup_batches", int, cfg.warmup_batches)
    cfg.initial_state = _get(parser, "run", "initial_state", str, cfg.initial_state)
    cfg.record_timing = _get(parser, "run", "record_timing", bool, cfg.record_timing)
    cfg.regret_benchmark = _get(parser, "run", "regret_benchmark", str, cfg.regret_benchmark)
    cfg.olfu_literal_decrement = _get(parser, "run", "olfu_literal_decrement", bool,
                                      cfg.olfu_literal_decrement)
    cfg.output_dir = _get(parser, "output", "dir", str, cfg.output_dir)
    return cfg.validate()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_run_csv(path: Path, records):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(RUN_CSV_HEADER)
        for r in records:
            out.writerow([r.t, _fmt(r.cost), _fmt(r.cum_cost), _fmt(r.miss_ratio),
                          _fmt(r.regret), _fmt(r.avg_regret), r.update_nanos])


def _write_aggregate_csv(path: Path, miss: np.ndarray, regret: np.ndarray):
    """miss/regret: (runs, T) arrays."""
    runs = miss.shape[0]
    mean_miss = miss.mean(axis=0)
    mean_reg = regret.mean(axis=0)
    if runs > 1:
        ci_miss = 1.96 * miss.std(axis=0, ddof=1) / np.sqrt(runs)
        ci_reg = 1.96 * regret.std(axis=0, ddof=1) / np.sqrt(runs)
    else:
        ci_miss = np.zeros_like(mean_miss)
        ci_reg = np.zeros_like(mean_reg)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(AGG_CSV_HEADER)
        for t in range(mean_miss.size):
            out.writerow([t + 1, _fmt(mean_miss[t]), _fmt(ci_miss[t]),
                          _fmt(mean_reg[t]), _fmt(ci_reg[t])])


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             cwd=Path(__file__).resolve().parent,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _build_policy(name: str, catalog, cache_cfg, cfg: ExperimentConfig, horizon: int, seed: int):
    kwargs = {}
    if name == "ogd":
        kwargs["horizon"] = horizon
    if name == "olfu" and cfg.olfu_literal_decrement:
        kwargs["literal_random_decrement"] = True
        kwargs["rng"] = np.random.default_rng((seed, 31))
    return make_policy(name, catalog, cache_cfg, **kwargs)


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    """Execute the full experiment grid and write CSVs plus a JSON manifest.

    Returns a summary dict mapping each policy label to its output files and
    the in-memory aggregate arrays.
    """
    config.validate()
    started = time.time()
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    catalog = Catalog.uniform(config.n_files, config.weight)
    cache_cfg = CacheConfig(config.capacity, config.n_files)

    if config.trace_kind == "zipf":
        seq = generate_zipf(ZipfSpec(config.n_files, config.beta, config.n_requests,
                                     config.trace_seed))
    else:
        seq = load_trace(config.trace_path, config.n_files)

    summary = {"labels": {}, "dropped": {}}
    multi_r = len(config.batch_sizes) > 1
    for r_size in config.batch_sizes:
        batches, dropped = batch_requests(seq, r_size, config.n_files)
        windows = request_windows(seq, r_size)
        summary["dropped"][str(r_size)] = dropped
        if not batches:
            raise ConfigError(f"[batch] sizes: trace too short for batch size {r_size}")

        warmup = None
        replay_batches, replay_windows = batches, windows
        if config.predictor_kind == "previous_batch":
            nw = config.warmup_batches
            if nw >= len(batches):
                raise ConfigError("[predictor] warmup_batches: consumes the whole trace")
            warmup = np.sum([b.counts for b in batches[:nw]], axis=0)
            replay_batches, replay_windows = batches[nw:], windows[nw:]

        for name in config.policies:
            label = f"{name}_R{r_size}" if multi_r else name
            per_run_files = []
            miss_rows, regret_rows = [], []
            extras_log = []
            for run_idx in range(config.runs):
                seed = config.base_seed + run_idx
                spec = PredictorSpec(
                    kind=config.predictor_kind, xi=config.xi, pi=config.pi,
                    warmup_counts=warmup,
                    tau_ratio=(1.0 / config.warmup_batches) if warmup is not None else 1.0,
                )
                stream = (None if config.predictor_kind == "none"
                          else PredictionStream(spec, catalog, replay_batches, seed=seed))
                policy = _build_policy(name, catalog, cache_cfg, config, len(replay_batches), seed)
                result = replay(policy, catalog, cache_cfg, replay_batches, replay_windows,
                                stream, initial_state=config.initial_state,
                                record_timing=config.record_timing,
                                regret_benchmark=config.regret_benchmark)
                run_path = out / f"{label}_seed{seed}.csv"
                _write_run_csv(run_path, result.records())
                per_run_files.append(str(run_path))
                miss_rows.append(result.miss_ratio)
                regret_rows.append(result.regret)
                extras_log.append({k: v for k, v in result.extras.items() if k != "cum_requests"})
            miss = np.vstack(miss_rows)
            regret = np.vstack(regret_rows)
            agg_path = out / f"aggregate_{label}.csv"
            _write_aggregate_csv(agg_path, miss, regret)
            summary["labels"][label] = {
                "per_run": per_run_files,
                "aggregate": str(agg_path),
                "final_mean_miss": float(miss[:, -1].mean()),
                "final_mean_regret": float(regret[:, -1].mean()),
                "extras": extras_log,
            }

    manifest = {
        "config": asdict(config),
        "git": _git_describe(),
        "started": datetime.datetime.fromtimestamp(started).isoformat(),
        "wall_seconds": time.time() - started,
        "outputs": {label: {"per_run": info["per_run"], "aggregate": info["aggregate"]}
                    for label, info in summary["labels"].items()},
        "dropped_requests": summary["dropped"],
        "extras": {label: info["extras"] for label, info in summary["labels"].items()},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    summary["manifest"] = str(manifest_path)
    return summary


def emit_threshold_curve(betas, n_files: int, out_path) -> Path:
    """Write (beta, alpha_threshold) rows; values above the threshold favor the
    per-coordinate policy's expected bound."""
    out_path = Path(out_path)
    with open(out_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["beta", "alpha_threshold"])
        for beta, thr in threshold_curve(betas, n_files):
            out.writerow([_fmt(beta), _fmt(thr)])
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="optcache",
                                     description="Optimistic batched caching simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="replay an experiment config")
    run_p.add_argument("--config", required=True, help="INI config or manifest.json")
    run_p.add_argument("--trace", default=None, help="override: replay this trace file")
    run_p.add_argument("--out", default=None, help="override the output directory")

    thr_p = sub.add_parser("threshold", help="emit the policy-preference threshold curve")
    thr_p.add_argument("--betas", default="0,0.5,1.0,1.5,2.0",
                       help="comma-separated Zipf exponents")
    thr_p.add_argument("--n-files", type=int, default=1000)
    thr_p.add_argument("--out", default="threshold.csv")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = parse_config(args.config)
            if args.trace is not None:
                config.trace_kind = "file"
                config.trace_path = args.trace
                config.validate()
            summary = run_experiment(config, out_dir=args.out)
            for label, info in summary["labels"].items():
                print(f"{label}: final mean miss ratio {info['final_mean_miss']:.4f}, "
                      f"final mean regret {info['final_mean_regret']:.2f}")
            print(f"manifest: {summary['manifest']}")
        else:
            betas = _csv_list(args.betas, float)
            path = emit_threshold_curve(betas, args.n_files, args.out)
            print(f"threshold curve written to {path}")
        return 0
    except (ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
