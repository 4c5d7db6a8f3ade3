"""Command line entry point: ``fieldstore {fieldio,segments,sweep,verify,replay}``.

Settings come from built-in defaults, then an optional ``--config`` file
of flat ``key=value`` lines (keys are the long flag names), then flags.
Exit status: 0 success, 1 run failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from .api import StoreError
from .harness import BenchmarkConfig, ConfigError, HarnessError, run_fieldio
from .metrics import EmptyInput, best_of, to_mib
from .report import (
    SeriesPoint,
    summarize,
    write_csv,
    write_json,
    write_plotdata,
    write_records,
)
from .segments import SegmentsConfig, run_segments

log = logging.getLogger("fieldstore")

ROOT_ENV = "FIELDSTORE_ROOT"
_UNITS = {"": 1, "B": 1, "KIB": 1024, "MIB": 1024 ** 2, "GIB": 1024 ** 3}
_SIZE_RE = re.compile(r"\s*(\d+)\s*([KMG]iB|B)?\s*", re.IGNORECASE)

DEFAULTS = {
    "pattern": "a",
    "mode": "full",
    "backend": "posix",
    "root": None,
    "nodes": "1",
    "workers-per-node": "1",
    "iterations": "2000",
    "object-size": "1MiB",
    "reps": "5",
    "seed": "0",
    "out": "results",
    "segment-count": "100",
    "segment-size": "1MiB",
    "executor": None,
    "barrier-timeout": "60",
}


def parse_size(text: str | int) -> int:
    """``"5MiB"`` -> 5242880; suffixes B, KiB, MiB, GiB are 1024-based."""
    if isinstance(text, int):
        return text
    m = _SIZE_RE.fullmatch(str(text))
    if not m:
        raise ConfigError(f"bad size {text!r} (expected N[B|KiB|MiB|GiB])")
    return int(m.group(1)) * _UNITS[(m.group(2) or "").upper()]


def read_config_file(path: str | Path) -> dict[str, str]:
    settings = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep or key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown setting {line!r}")
        settings[key] = value.strip()
    return settings


def effective_settings(args: argparse.Namespace) -> dict[str, str | None]:
    """Defaults, overridden by the config file, overridden by flags."""
    settings = dict(DEFAULTS)
    settings["root"] = os.environ.get(ROOT_ENV) or None
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            settings[key] = str(value)
    return settings


def format_settings(settings: dict) -> str:
    return "".join(f"{k}={'' if v is None else v}\n" for k, v in settings.items())


def _int(settings, key) -> int:
    try:
        return int(settings[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {settings[key]!r}") from None


def _root(settings) -> Path | None:
    return Path(settings["root"]) if settings.get("root") else None


def benchmark_config(settings: dict) -> BenchmarkConfig:
    mode = settings["mode"].replace("-", "_")
    if mode not in ("full", "no_containers"):
        raise ConfigError(f"mode must be full or no-containers, got {settings['mode']!r}")
    if settings["pattern"].lower() not in ("a", "b"):
        raise ConfigError(f"pattern must be a or b, got {settings['pattern']!r}")
    return BenchmarkConfig(
        pattern=settings["pattern"],
        mode=mode,
        backend=settings["backend"],
        root=_root(settings),
        nodes=_int(settings, "nodes"),
        workers_per_node=_int(settings, "workers-per-node"),
        iterations=_int(settings, "iterations"),
        object_size=parse_size(settings["object-size"]),
        repetitions=_int(settings, "reps"),
        seed=_int(settings, "seed"),
        executor=settings.get("executor") or None,
        barrier_timeout=float(settings["barrier-timeout"]),
    ).validate()


def segments_config(settings: dict) -> SegmentsConfig:
    return SegmentsConfig(
        segment_count=_int(settings, "segment-count"),
        segment_size=parse_size(settings["segment-size"]),
        workers=_int(settings, "nodes") * _int(settings, "workers-per-node"),
        repetitions=_int(settings, "reps"),
        backend=settings["backend"],
        root=_root(settings),
        seed=_int(settings, "seed"),
        executor=settings.get("executor") or None,
        barrier_timeout=float(settings["barrier-timeout"]),
    ).validate()


def emit_all(reports, points: list[SeriesPoint], out: Path, stem: str, settings: dict,
             xlabel: str, plot: bool = True) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = [
        write_csv(reports, out / f"{stem}.csv"),
        write_json(reports, points, out / f"{stem}.json", extra={"effective_settings": settings}),
        write_plotdata(points, out / f"{stem}.plotdata"),
        write_records(reports, out / f"{stem}.records"),
    ]
    (out / f"{stem}.config").write_text(format_settings(settings))
    written.append(out / f"{stem}.config")
    if plot:
        from .plotting import plot_series

        written.append(plot_series(points, out / f"{stem}.png", xlabel=xlabel, title=stem))
    return written


def _print_points(points: list[SeriesPoint]) -> None:
    for p in sorted(points, key=lambda p: (p.pattern, p.mode, p.x, p.phase, p.metric)):
        print(f"{p.pattern:>8} {p.mode:<13} x={p.x:<12g} {p.phase:<8} {p.metric:<13} "
              f"mean={to_mib(p.agg.mean):10.2f} MiB/s  min={to_mib(p.agg.min):10.2f}  "
              f"max={to_mib(p.agg.max):10.2f}")


def cmd_fieldio(args) -> int:
    settings = effective_settings(args)
    config = benchmark_config(settings)
    reports = run_fieldio(config)
    points = summarize(reports, x=config.nodes)
    emit_all(reports, points, Path(settings["out"]), "fieldio", settings, "client nodes", not args.no_plot)
    _print_points(points)
    return 0


def cmd_segments(args) -> int:
    settings = effective_settings(args)
    config = segments_config(settings)
    reports = run_segments(config)
    points = summarize(reports, x=config.workers)
    emit_all(reports, points, Path(settings["out"]), "segments", settings, "workers", not args.no_plot)
    _print_points(points)
    return 0


SWEEP_AXES = {"object-size": "object_size", "workers": "workers_per_node", "nodes": "nodes"}


def _sweep_values(axis: str, text: str) -> list[int]:
    items = [v for v in (s.strip() for s in (text or "").split(",")) if v]
    if not items:
        raise ConfigError("sweep needs a non-empty --values list")
    if axis == "object-size":
        return [parse_size(v) for v in items]
    try:
        return [int(v) for v in items]
    except ValueError:
        raise ConfigError(f"bad --values for {axis}: {text!r}") from None


def run_sweep(base: BenchmarkConfig, axis: str, values: list[int], best: bool = False,
              candidates: list[int] | None = None):
    """Run one config per axis value; optionally keep the best worker count.

    With ``best`` and axis ``workers`` the values themselves are the
    candidates for a single point at ``x = nodes``. Otherwise
    ``candidates`` (worker counts per node) are tried at every axis value.
    Returns (all reports, series points).
    """
    field_name = SWEEP_AXES[axis]
    runs = []  # (x, workers_per_node, reports)
    if best and axis == "workers":
        for wpn in values:
            cfg = replace(base, workers_per_node=wpn).validate()
            runs.append((base.nodes, wpn, run_fieldio(cfg)))
    else:
        for value in values:
            for wpn in candidates or [None]:
                changes = {field_name: value}
                if wpn is not None:
                    changes["workers_per_node"] = wpn
                cfg = replace(base, **changes).validate()
                x = value / (1024 * 1024) if axis == "object-size" else value
                runs.append((x, cfg.workers_per_node, run_fieldio(cfg)))

    all_reports = [r for _, _, reps in runs for r in reps]
    if not best and not candidates:
        points = [p for x, _, reps in runs for p in summarize(reps, x)]
        return all_reports, points

    # best-of per (x, series): candidates keyed by worker count
    by_anchor: dict = {}
    for x, wpn, reps in runs:
        for p in summarize(reps, x):
            by_anchor.setdefault((x, p.series), {})[wpn] = p.agg
    chosen = best_of(by_anchor)
    points = [
        SeriesPoint(*series, x, agg) for (x, series), (_, agg) in chosen.items()
    ]
    return all_reports, points


def cmd_sweep(args) -> int:
    settings = effective_settings(args)
    base = benchmark_config(settings)
    values = _sweep_values(args.axis, args.values)
    candidates = _sweep_values("workers", args.workers_candidates) if args.workers_candidates else None
    reports, points = run_sweep(base, args.axis, values, args.best_of, candidates)
    settings = {**settings, "axis": args.axis, "values": args.values, "best-of": str(bool(args.best_of))}
    xlabel = {"object-size": "object size (MiB)", "workers": "client nodes", "nodes": "client nodes"}[args.axis]
    if args.axis == "workers" and not args.best_of:
        xlabel = "workers per node"
    emit_all(reports, points, Path(settings["out"]), "sweep", settings, xlabel, not args.no_plot)
    _print_points(points)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_verify

    root = args.root or os.environ.get(ROOT_ENV)
    if root is not None and not Path(root).is_dir():
        raise ConfigError(f"root directory does not exist: {root}")
    checks = run_verify(root, ops=args.ops, seed=args.seed)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_replay(args) -> int:
    from .report import read_records

    reports = read_records(args.records)
    if not reports:
        raise ConfigError(f"no records in {args.records}")
    points = summarize(reports, x=args.x)
    settings = {"records": str(args.records), "x": str(args.x)}
    emit_all(reports, points, Path(args.out), "replay", settings, "x", not args.no_plot)
    _print_points(points)
    return 0


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value settings file")
    p.add_argument("--pattern", type=str.lower, choices=["a", "b"])
    p.add_argument("--mode", choices=["full", "no-containers", "no_containers"])
    p.add_argument("--backend", choices=["posix", "memory"])
    p.add_argument("--root", help=f"store directory (default ${ROOT_ENV})")
    p.add_argument("--nodes", type=int)
    p.add_argument("--workers-per-node", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--object-size")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--segment-count", type=int)
    p.add_argument("--segment-size")
    p.add_argument("--executor", choices=["process", "thread"])
    p.add_argument("--barrier-timeout", type=float)
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldstore", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fieldio", help="Field I/O benchmark, pattern A or B")
    _add_run_flags(p)
    p.set_defaults(func=cmd_fieldio)

    p = sub.add_parser("segments", help="one large array write/read per worker")
    _add_run_flags(p)
    p.set_defaults(func=cmd_segments)

    p = sub.add_parser("sweep", help="repeat fieldio over an axis of values")
    _add_run_flags(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--best-of", action="store_true", help="keep the best worker count per point")
    p.add_argument("--workers-candidates", help="worker counts per node to try at each point")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="differential fuzz, layout and op-count self-checks")
    p.add_argument("--root")
    p.add_argument("--ops", type=int, default=10000)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replay", help="recompute reports from a .records file")
    p.add_argument("records", type=Path)
    p.add_argument("--out", default="results")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, EmptyInput) as exc:
        print(f"fieldstore: configuration error: {exc}", file=sys.stderr)
        return 2
    except (HarnessError, StoreError) as exc:
        print(f"fieldstore: run failed: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial", None)
        if partial:
            print(f"partial reports ({len(partial)} lines):", file=sys.stderr)
            for line in partial:
                print(f"  {line}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
