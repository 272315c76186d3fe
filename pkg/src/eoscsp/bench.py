"""Benchmark sweeps over generated instances, written as one CSV file.

Detail rows hold one (algorithm, seed, scale) run each; summary rows hold
the mean and the 5th/95th percentiles per (algorithm, scale).  Rows are
told apart by ``row_kind``.  Re-running a sweep on an existing file reuses
its detail rows and only runs the missing cells.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .generate import PRESETS, generate
from .model import Instance
from .estimators import make_scheduler

METRICS = ("reward", "wall_time", "msg_count", "msg_bytes")
COLUMNS = (
    "row_kind", "preset", "algorithm", "scale", "seed", "n_observations",
    *METRICS, "valid", "error",
    *(f"{m}_{q}" for m in METRICS for q in ("p05", "p95")),
)


@dataclass
class RunReport:
    algorithm: str
    seed: int
    scale: int
    n_observations: int
    reward: float = 0.0
    wall_time: float = 0.0
    msg_count: int = 0
    msg_bytes: int = 0
    valid: bool = False
    error: str = ""


def run_once(P: Instance, algorithm: str, *, seed: int = 0, scale: int = 0,
             budget: float = 60.0) -> tuple[RunReport, object | None]:
    """Solve ``P`` and report; solver errors become an invalid report."""
    params = {"budget": budget} if algorithm == "exact" else {}
    est = make_scheduler(algorithm, **params)
    report = RunReport(algorithm, seed, scale, len(P.observations))
    try:
        est.fit(P)
    except Exception as exc:  # noqa: BLE001 - recorded in the row
        report.error = f"{type(exc).__name__}: {exc}"
        return report, None
    m = est.metrics_
    report.reward = m.reward
    report.wall_time = m.wall_time
    report.msg_count = m.message_count
    report.msg_bytes = m.message_bytes
    report.valid = est.verdict_.ok
    if not report.valid:
        report.error = str(est.verdict_.violations[0])
    return report, est


def _detail_row(preset: str, r: RunReport) -> dict:
    row = {c: "" for c in COLUMNS}
    row.update({k: v for k, v in asdict(r).items()})
    row["row_kind"] = "detail"
    row["preset"] = preset
    row["valid"] = "true" if r.valid else "false"
    return row


def _summary_rows(preset: str, details: list[dict], algos: Sequence[str],
                  scales: Sequence[int]) -> list[dict]:
    out = []
    for algo in algos:
        for scale in scales:
            cell = [d for d in details if d["algorithm"] == algo and int(d["scale"]) == scale]
            if not cell:
                continue
            row = {c: "" for c in COLUMNS}
            row.update(row_kind="summary", preset=preset, algorithm=algo, scale=scale)
            row["n_observations"] = _fmt(np.mean([float(d["n_observations"]) for d in cell]))
            row["valid"] = "true" if all(d["valid"] == "true" for d in cell) else "false"
            for m in METRICS:
                values = np.array([float(d[m]) for d in cell])
                row[m] = _fmt(values.mean())
                row[f"{m}_p05"] = _fmt(np.percentile(values, 5))
                row[f"{m}_p95"] = _fmt(np.percentile(values, 95))
            out.append(row)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def workers() -> int:
    try:
        return max(1, int(os.environ.get("EOSCSP_THREADS", "1")))
    except ValueError:
        return 1


def bench(
    preset: str,
    scales: Iterable[int],
    seeds: Iterable[int],
    algos: Iterable[str],
    out: str | Path,
    *,
    budget: float = 60.0,
) -> list[dict]:
    """Run the sweep and (re)write ``out``; returns the summary rows."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}")
    scales, seeds, algos = list(scales), list(seeds), list(algos)
    for a in algos:
        make_scheduler(a)  # fail early on unknown names
    out = Path(out)
    done: dict[tuple[str, int, int], dict] = {}
    others: list[dict] = []
    if out.exists():
        for row in read_rows(out):
            if row["preset"] != preset:
                others.append(row)
            elif row["row_kind"] == "detail":
                done[(row["algorithm"], int(row["seed"]), int(row["scale"]))] = row

    cells = [(a, s, k) for a in algos for s in seeds for k in scales if (a, s, k) not in done]
    instances: dict[tuple[int, int], Instance] = {}
    for _, seed, scale in cells:
        if (scale, seed) not in instances:
            instances[(scale, seed)] = generate(PRESETS[preset](scale, seed))

    def run(cell):
        algo, seed, scale = cell
        report, _ = run_once(instances[(scale, seed)], algo, seed=seed, scale=scale, budget=budget)
        return cell, _detail_row(preset, report)

    with ThreadPoolExecutor(max_workers=workers()) as pool:
        for cell, row in pool.map(run, cells):
            done[cell] = row

    details = [done[(a, s, k)] for a in algos for s in seeds for k in scales]
    # rows of other sweeps kept in the file are preserved after ours
    extra = [r for key, r in done.items()
             if key[0] not in algos or key[1] not in seeds or key[2] not in scales]
    summaries = _summary_rows(preset, details, algos, scales)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(details + extra + summaries + others)
    return summaries
