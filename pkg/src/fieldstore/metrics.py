"""Bandwidth metrics over per-worker timing records.

Synchronous bandwidth is for barrier-released phases:
``sum(bytes) / (max(end) - release)``. Global timing bandwidth is for
workers that are not synchronised: ``sum(bytes) / (max(end) - min(start))``.
All bandwidths are bytes per second.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

SYNCHRONOUS = "synchronous"
GLOBAL_TIMING = "global_timing"
METRICS = (SYNCHRONOUS, GLOBAL_TIMING)


class MetricsError(ValueError):
    pass


class EmptyInput(MetricsError):
    pass


class DegenerateWindow(MetricsError):
    pass


@dataclass(frozen=True)
class BandwidthResult:
    metric: str
    phase: str
    bytes_total: int
    wall_seconds: float
    bandwidth: float


@dataclass(frozen=True)
class AggregateResult:
    values: tuple[float, ...]
    mean: float
    min: float
    max: float


def _one_phase(records) -> str:
    if not records:
        raise EmptyInput("no timing records")
    phases = {r.phase for r in records}
    if len(phases) != 1:
        raise MetricsError(f"records span several phases: {sorted(phases)}")
    return phases.pop()


def _result(metric: str, phase: str, total: int, wall: float) -> BandwidthResult:
    if wall < 0:
        raise MetricsError(f"negative window {wall}")
    if wall == 0:
        if total > 0:
            raise DegenerateWindow(f"{total} bytes in a zero-length window")
        return BandwidthResult(metric, phase, total, wall, 0.0)
    return BandwidthResult(metric, phase, total, wall, total / wall)


def synchronous_bandwidth(records: Sequence, release: float) -> BandwidthResult:
    phase = _one_phase(records)
    if any(r.start < release for r in records):
        raise MetricsError("a record starts before the barrier release")
    total = sum(r.bytes for r in records)
    return _result(SYNCHRONOUS, phase, total, max(r.end for r in records) - release)


def global_timing_bandwidth(records: Sequence) -> BandwidthResult:
    phase = _one_phase(records)
    total = sum(r.bytes for r in records)
    return _result(GLOBAL_TIMING, phase, total, max(r.end for r in records) - min(r.start for r in records))


def aggregate(values: Iterable[float]) -> AggregateResult:
    values = tuple(float(v) for v in values)
    if not values:
        raise EmptyInput("nothing to aggregate")
    # fsum is correctly rounded, so the mean does not depend on order
    mean = math.fsum(values) / len(values)
    lo, hi = min(values), max(values)
    return AggregateResult(values, min(max(mean, lo), hi), lo, hi)


def best_of(candidates: Mapping) -> dict:
    """Pick, per sweep point, the worker count with the highest mean.

    ``candidates`` maps sweep point -> {worker count -> AggregateResult or
    mean}. Returns sweep point -> (worker count, candidate). Ties go to the
    smaller worker count.
    """
    if not candidates:
        raise EmptyInput("no sweep points")
    picked = {}
    for point, by_workers in candidates.items():
        if not by_workers:
            raise EmptyInput(f"no candidates for sweep point {point!r}")

        def score(item):
            workers, cand = item
            mean = cand.mean if isinstance(cand, AggregateResult) else float(cand)
            return (-mean, workers)

        picked[point] = min(by_workers.items(), key=score)
    return picked


def report_bandwidths(report) -> list[BandwidthResult]:
    """Both metrics for every phase of a RunReport, in phase order."""
    out = []
    for phase in report.phases():
        records = report.phase_records(phase)
        out.append(synchronous_bandwidth(records, report.releases[phase]))
        out.append(global_timing_bandwidth(records))
    return out


def to_mib(bandwidth: float) -> float:
    return bandwidth / (1024 * 1024)


def to_gib(bandwidth: float) -> float:
    return bandwidth / (1024 ** 3)
