"""Experiment driver: sweep execution, JSON specs, CSV results, summaries.

The result schema is a stability contract consumed by the figure frontend:

    preset,method,bound,param_name,param_value,drop,user,se_bits_per_hz,seed,n_blocks

one row per (grid point, drop, method, bound, user), written in deterministic
order regardless of worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing
from dataclasses import dataclass, fields

import numpy as np

from .config import ConfigError, SystemConfig
from .engine import run_drop
from .presets import ExperimentSpec, get_preset

log = logging.getLogger("cfmimo")

CSV_COLUMNS = ("preset", "method", "bound", "param_name", "param_value",
               "drop", "user", "se_bits_per_hz", "seed", "n_blocks")
COST_COLUMNS = ("L", "N", "M", "K", "tau_p", "tau_c", "ul_estimation_mults",
                "precoder_mults", "fronthaul_pilot_scalars",
                "fronthaul_data_scalars")


@dataclass(frozen=True)
class ResultTable:
    """Long-format rows plus the spec that produced them."""

    rows: tuple            # tuples matching CSV_COLUMNS
    spec: ExperimentSpec


def spec_from_json(doc: dict) -> ExperimentSpec:
    """Parse a JSON experiment description; unknown keys are rejected."""
    doc = dict(doc)
    config_doc = doc.pop("config", {})
    known_cfg = {f.name for f in fields(SystemConfig)}
    unknown = set(config_doc) - known_cfg
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = SystemConfig(**config_doc)

    known = {f.name for f in fields(ExperimentSpec)} - {"base"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    doc.setdefault("preset", "custom")
    doc.setdefault("param_name", "none")
    doc.setdefault("param_grid", (0,))
    for key in ("param_grid", "methods", "bounds"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return ExperimentSpec(base=base, **doc)


def load_spec(path: str) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(json.load(fh))


def _run_task(args):
    """One (grid point, drop) unit of work; returns rows or an error marker."""
    spec, grid_index, value, drop = args
    try:
        cfg = spec.config_at(value)
        out = run_drop(cfg, spec.methods, spec.seed, drop,
                       n_blocks=spec.n_blocks, n_eval_blocks=spec.n_eval_blocks,
                       schedule_same=spec.schedule_same,
                       n_sched_blocks=spec.n_sched_blocks)
    except Exception as exc:   # noqa: BLE001 - error isolation per grid point
        return grid_index, None, f"{type(exc).__name__}: {exc}"
    rows = []
    for method in spec.methods:
        res = out.results[method]
        for bound in spec.bounds:
            for user, se in enumerate(res.report.se[bound]):
                rows.append((spec.preset, method, bound, spec.param_name,
                             _fmt(value), drop, user, float(se), spec.seed,
                             spec.n_blocks))
    return grid_index, rows, None


def _fmt(value):
    return int(value) if isinstance(value, (int, np.integer)) else float(value)


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Deterministic sweep over (grid point, drop) tasks.

    Tasks are independent; rows are assembled in (grid, drop) order so the
    output is byte-identical for any worker count.  A failing task voids its
    whole grid point (logged), and the sweep continues.
    """
    tasks = [(spec, gi, value, drop)
             for gi, value in enumerate(spec.param_grid)
             for drop in range(spec.n_drops)]
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            outcomes = list(pool.imap(_run_task, tasks, chunksize=1))
    else:
        outcomes = [_run_task(t) for t in tasks]

    failed_points = set()
    for (_, gi, value, drop), (gi2, rows, err) in zip(tasks, outcomes):
        if err is not None:
            failed_points.add(gi2)
            log.warning("grid point %s=%r drop %d failed: %s",
                        spec.param_name, value, drop, err)
    all_rows = []
    for (_, gi, _, _), (_, rows, err) in zip(tasks, outcomes):
        if gi in failed_points or rows is None:
            continue
        all_rows.extend(rows)
    return ResultTable(rows=tuple(all_rows), spec=spec)


def write_csv(table: ResultTable, path_or_file) -> None:
    if isinstance(path_or_file, (str, bytes)):
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            _write_rows(table.rows, fh, CSV_COLUMNS)
    else:
        _write_rows(table.rows, path_or_file, CSV_COLUMNS)


def _write_rows(rows, fh, columns) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)


def csv_bytes(table: ResultTable) -> bytes:
    buf = io.StringIO()
    _write_rows(table.rows, buf, CSV_COLUMNS)
    return buf.getvalue().encode("utf-8")


def write_cost_csv(config: SystemConfig, path_or_file) -> None:
    from .costs import cost_report
    rep = cost_report(config)
    row = (config.L, config.N, config.M, config.K, config.tau_p, config.tau_c,
           rep.ul_estimation_mults, rep.precoder_mults,
           rep.fronthaul_pilot_scalars, rep.fronthaul_data_scalars)
    if isinstance(path_or_file, (str, bytes)):
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            _write_rows([row], fh, COST_COLUMNS)
    else:
        _write_rows([row], path_or_file, COST_COLUMNS)


def summarize(table: ResultTable) -> dict:
    """Mean/median per-user SE, mean sum SE, and the empirical CDF per group.

    Groups are (method, bound, param_value); empty groups never arise from
    run_experiment, and an empty table yields an empty summary with a warning.
    """
    if not table.rows:
        log.warning("summarize called on an empty result table")
        return {}
    groups: dict = {}
    sums: dict = {}
    for row in table.rows:
        _, method, bound, _, value, drop, user, se, _, _ = row
        groups.setdefault((method, bound, value), []).append(se)
        sums.setdefault((method, bound, value, drop), 0.0)
        sums[(method, bound, value, drop)] += se
    out = {}
    for key, values in groups.items():
        arr = np.sort(np.asarray(values))
        sum_per_drop = [v for (m, b, val, _), v in sums.items()
                        if (m, b, val) == key]
        out[key] = {
            "mean": float(arr.mean()),
            "median": float(np.median(arr)),
            "sum_mean": float(np.mean(sum_per_drop)),
            "n": int(arr.size),
            "cdf_values": arr.tolist(),
            "cdf_probs": ((np.arange(arr.size) + 1) / arr.size).tolist(),
        }
    return out


def load_or_preset(preset: str | None, config_path: str | None) -> ExperimentSpec:
    if (preset is None) == (config_path is None):
        raise ConfigError("specify exactly one of --preset or --config")
    if preset is not None:
        return get_preset(preset)
    return load_spec(config_path)
