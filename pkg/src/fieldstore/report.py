"""CSV, JSON and plot-data output for benchmark runs, plus readers."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

from .api import ErrorKind, StoreError
from .metrics import METRICS, AggregateResult, aggregate, report_bandwidths

CSV_COLUMNS = (
    "pattern", "mode", "backend", "object_size_bytes", "nodes", "workers_per_node",
    "iterations", "repetition", "phase", "metric", "bytes_total", "wall_seconds",
    "bandwidth_bytes_per_sec",
)
_INT_COLUMNS = {"object_size_bytes", "nodes", "workers_per_node", "iterations", "repetition", "bytes_total"}
_FLOAT_COLUMNS = {"wall_seconds", "bandwidth_bytes_per_sec"}
PHASE_ORDER = {"populate": 0, "write": 1, "read": 2}


@dataclass(frozen=True)
class SeriesPoint:
    pattern: str
    mode: str
    metric: str
    phase: str
    x: float
    agg: AggregateResult

    @property
    def series(self) -> tuple[str, str, str, str]:
        return self.pattern, self.mode, self.metric, self.phase


def run_labels(config: dict) -> dict:
    """CSV identity columns for a config echo (Field I/O or segments)."""
    if "segment_count" in config:
        return {
            "pattern": "segments", "mode": "segments", "backend": config["backend"],
            "object_size_bytes": config["object_size"], "nodes": 1,
            "workers_per_node": config["workers"], "iterations": 1,
        }
    return {
        "pattern": config["pattern"], "mode": config["mode"], "backend": config["backend"],
        "object_size_bytes": config["object_size"], "nodes": config["nodes"],
        "workers_per_node": config["workers_per_node"], "iterations": config["iterations"],
    }


def ensure_bandwidths(reports) -> None:
    for r in reports:
        if not r.bandwidths:
            r.bandwidths = report_bandwidths(r)


def csv_rows(reports) -> list[dict]:
    ensure_bandwidths(reports)
    rows = []
    for r in reports:
        labels = run_labels(r.config)
        for bw in r.bandwidths:
            rows.append({
                **labels, "repetition": r.repetition, "phase": bw.phase, "metric": bw.metric,
                "bytes_total": bw.bytes_total, "wall_seconds": bw.wall_seconds,
                "bandwidth_bytes_per_sec": bw.bandwidth,
            })
    return rows


def summarize(reports, x: float) -> list[SeriesPoint]:
    """Aggregate repetitions into one point per (metric, phase) at ``x``."""
    ensure_bandwidths(reports)
    groups: dict[tuple, list[float]] = defaultdict(list)
    for r in reports:
        labels = run_labels(r.config)
        for bw in r.bandwidths:
            groups[(labels["pattern"], labels["mode"], bw.metric, bw.phase)].append(bw.bandwidth)
    return [SeriesPoint(*key, x, aggregate(vals)) for key, vals in groups.items()]


def _series_sort_key(key):
    pattern, mode, metric, phase = key
    return pattern, mode, METRICS.index(metric) if metric in METRICS else 99, PHASE_ORDER.get(phase, 99), phase


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise StoreError(ErrorKind.IO_FAILURE, f"{path}: {exc.strerror}") from None
    return path


def write_csv(reports, path: Path) -> Path:
    rows = csv_rows(reports)
    if not rows:
        raise ValueError("no results to emit")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return _write(Path(path), buf.getvalue())


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}")
        rows = []
        for row in reader:
            for k in _INT_COLUMNS:
                row[k] = int(row[k])
            for k in _FLOAT_COLUMNS:
                row[k] = float(row[k])
            rows.append(row)
    return rows


def format_plotdata(points: list[SeriesPoint]) -> str:
    """Whitespace-separated ``x mean min max`` blocks, one per series."""
    if not points:
        raise ValueError("no results to emit")
    by_series: dict[tuple, list[SeriesPoint]] = defaultdict(list)
    for p in points:
        by_series[p.series].append(p)
    blocks = []
    for key in sorted(by_series, key=_series_sort_key):
        pattern, mode, metric, phase = key
        lines = [f"# pattern={pattern} mode={mode} metric={metric} phase={phase}"]
        for p in sorted(by_series[key], key=lambda p: p.x):
            lines.append(f"{p.x!r} {p.agg.mean!r} {p.agg.min!r} {p.agg.max!r}")
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def write_plotdata(points: list[SeriesPoint], path: Path) -> Path:
    return _write(Path(path), format_plotdata(points))


def read_plotdata(path: Path) -> dict[tuple[str, str, str, str], list[tuple[float, float, float, float]]]:
    series: dict = {}
    current = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            current = None
        elif line.startswith("#"):
            fields = dict(part.split("=", 1) for part in line[1:].split())
            current = (fields["pattern"], fields["mode"], fields["metric"], fields["phase"])
            series[current] = []
        else:
            if current is None:
                raise ValueError(f"data line outside a block: {line!r}")
            x, mean, lo, hi = (float(v) for v in line.split())
            series[current].append((x, mean, lo, hi))
    return series


def write_json(reports, points: list[SeriesPoint], path: Path, extra: dict | None = None) -> Path:
    ensure_bandwidths(reports)
    doc = {
        "config": reports[0].config if reports else None,
        "repetitions": [
            {
                "repetition": r.repetition,
                "config": r.config,
                "releases": r.releases,
                "records": [asdict(rec) for rec in r.records],
                "bandwidths": [asdict(bw) for bw in r.bandwidths],
            }
            for r in reports
        ],
        "summary": [
            {"pattern": p.pattern, "mode": p.mode, "metric": p.metric, "phase": p.phase, "x": p.x,
             "mean": p.agg.mean, "min": p.agg.min, "max": p.agg.max, "values": list(p.agg.values)}
            for p in sorted(points, key=lambda p: (_series_sort_key(p.series), p.x))
        ],
    }
    if extra:
        doc.update(extra)
    return _write(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_records(reports, path: Path) -> Path:
    """Raw worker records, replayable through the metrics."""
    lines = []
    for r in reports:
        lines.append("# config=" + json.dumps(r.config, sort_keys=True))
        lines += r.to_lines()
    return _write(Path(path), "\n".join(lines) + "\n")


def read_records(path: Path):
    from .harness import RunReport, parse_report_lines

    reports, config, rep, lines = [], None, None, []

    def flush():
        if rep is not None:
            records, releases = parse_report_lines(lines)
            reports.append(RunReport(config, rep, records, releases))

    for line in Path(path).read_text().splitlines():
        if line.startswith("# config="):
            flush()
            config, rep, lines = json.loads(line[len("# config="):]), None, []
        elif line.startswith("# repetition="):
            rep = int(line.split("=", 1)[1])
        elif line.strip():
            lines.append(line)
    flush()
    return reports
