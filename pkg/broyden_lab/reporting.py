"""CSV and JSON exporters for traces, envelope reports and run summaries."""

import csv
import json
import logging
from pathlib import Path

from .bounds import EnvelopeReport
from .shared_libraries.types import CheckEvaluation, ExperimentConfig, SweepRow
from .solver import IterationTrace

logger = logging.getLogger(__name__)

TRACE_FILE = "trace.csv"
TRACE_JSON_FILE = "trace.json"
ENVELOPES_FILE = "envelopes.csv"
SUMMARY_FILE = "summary.json"

TRACE_COLUMNS = ["k", "lambda", "g", "r", "xi", "nu", "v", "psi", "eig_min", "eig_max", "tau"]


def fmt(value) -> str:
    """Shortest round-trip text for a float; empty for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def trace_rows(trace: IterationTrace) -> list[dict[str, str]]:
    rows = []
    for rec in trace.records:
        rows.append({
            "k": fmt(rec.k),
            "lambda": fmt(rec.lam),
            "g": fmt(rec.g_norm),
            "r": fmt(rec.r),
            "xi": fmt(rec.xi),
            "nu": fmt(rec.nu),
            "v": fmt(rec.v),
            "psi": fmt(rec.psi),
            "eig_min": fmt(rec.eig_range.min_rel),
            "eig_max": fmt(rec.eig_range.max_rel),
            "tau": fmt(rec.tau),
        })
    return rows


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict[str, str]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def write_trace_csv(trace: IterationTrace, path: Path) -> Path:
    return _write_csv(path, TRACE_COLUMNS, trace_rows(trace))


def write_trace_json(
    trace: IterationTrace, path: Path, config: ExperimentConfig | None, instance_hash: str
) -> Path:
    payload = {
        "config": config.model_dump(mode="json") if config is not None else None,
        "instance_hash": instance_hash,
        "kind": trace.kind.value,
        "n": trace.n,
        "mu": trace.mu,
        "L": trace.ell,
        "M": trace.m_const,
        "schedule": trace.schedule.label,
        "stop_reason": trace.stop_reason,
        "records": [
            {**row, "x": [fmt(c) for c in rec.x.coords]}
            for row, rec in zip(trace_rows(trace), trace.records)
        ],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def envelope_rows(trace: IterationTrace, reports: list[EnvelopeReport]) -> tuple[list[str], list[dict[str, str]]]:
    """One row per k: measured lambda_k, then bound and satisfied flag per report."""
    fieldnames = ["k", "measured"]
    for report in reports:
        fieldnames += [f"bound_{report.name}", f"satisfied_{report.name}"]
    by_report = [{row.k: row for row in report.rows} for report in reports]
    rows = []
    for rec in trace.records:
        row = {"k": fmt(rec.k), "measured": fmt(rec.lam)}
        for report, lookup in zip(reports, by_report):
            hit = lookup.get(rec.k)
            row[f"bound_{report.name}"] = fmt(hit.bound) if hit else ""
            row[f"satisfied_{report.name}"] = fmt(hit.satisfied) if hit else ""
        rows.append(row)
    return fieldnames, rows


def write_envelopes_csv(trace: IterationTrace, reports: list[EnvelopeReport], path: Path) -> Path:
    fieldnames, rows = envelope_rows(trace, reports)
    return _write_csv(path, fieldnames, rows)


def summary_payload(
    name: str,
    trace: IterationTrace,
    reports: list[EnvelopeReport],
    checks: list[CheckEvaluation],
    instance_hash: str,
    passed: bool,
) -> dict:
    enforced = [r for r in reports if r.enforced]
    violations = [r.first_violation for r in enforced if r.first_violation is not None]
    slacks = [r.min_slack for r in enforced if r.min_slack is not None]
    k0 = next((r.k0 for r in reports if r.k0 is not None), None)
    radius = next((r.region_radius for r in reports if r.region_radius is not None), None)
    return {
        "name": name,
        "instance_hash": instance_hash,
        "passed": passed,
        "iterations": trace.iterations,
        "stop_reason": trace.stop_reason,
        "K0": k0,
        "region_radius": radius,
        "first_violation": min(violations) if violations else None,
        "min_slack": min(slacks) if slacks else None,
        "envelopes": [r.to_summary().model_dump(mode="json") for r in reports],
        "checks": [c.model_dump(mode="json") for c in checks],
    }


def write_summary_json(payload: dict, path: Path) -> Path:
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")
    return path


SWEEP_FILE = "sweep.csv"
SWEEP_COLUMNS = [
    "n", "L_over_mu", "method", "iters_to_tol", "K0_new", "K0_prev",
    "first_k_superlinear_env_below_linear_env", "passed",
]


def write_sweep_csv(rows: list[SweepRow], path: Path) -> Path:
    return _write_csv(path, SWEEP_COLUMNS, [
        {col: fmt(getattr(row, col)) if col != "method" else row.method for col in SWEEP_COLUMNS}
        for row in rows
    ])
