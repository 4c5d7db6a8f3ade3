"""Multi-worker benchmark orchestration.

Workers run either as OS processes (posix backend) or threads. Within a
phase all workers are released together by a barrier and each worker
timestamps its own start after release. All timestamps are seconds since
a run epoch taken from ``time.monotonic()`` by the orchestrator, which
is a single clock domain for every process on the host.
"""

from __future__ import annotations

import logging
import multiprocessing
import os
import queue as queue_mod
import threading
import time
import traceback
import uuid
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from .api import Backend
from .fieldio import FieldioMode, session_open
from .posix import open_backend
from .workload import PayloadFactory, field_keys

log = logging.getLogger(__name__)

MiB = 1024 * 1024
PHASE_CODES = {"write": "w", "read": "r", "populate": "p"}
PHASE_NAMES = {v: k for k, v in PHASE_CODES.items()}


class HarnessError(RuntimeError):
    """A benchmark run failed; ``partial`` holds any reports collected."""

    def __init__(self, message: str, partial: list[str] | None = None):
        super().__init__(message)
        self.partial = partial or []


class ConfigError(ValueError):
    pass


class BarrierTimeout(HarnessError):
    pass


@dataclass
class BenchmarkConfig:
    pattern: str = "A"
    mode: FieldioMode = FieldioMode.FULL
    backend: str = "posix"
    root: Path | None = None
    nodes: int = 1
    workers_per_node: int = 1
    iterations: int = 2000
    object_size: int = MiB
    repetitions: int = 5
    seed: int = 0
    executor: str | None = None
    barrier_timeout: float = 60.0
    keep_data: bool = False

    def __post_init__(self):
        self.pattern = str(self.pattern).upper()
        if isinstance(self.mode, str):
            self.mode = FieldioMode.parse(self.mode)
        if self.root is not None:
            self.root = Path(self.root)

    @property
    def workers(self) -> int:
        return self.nodes * self.workers_per_node

    @property
    def effective_executor(self) -> str:
        if self.executor:
            return self.executor
        return "thread" if self.backend == "memory" else "process"

    def validate(self) -> "BenchmarkConfig":
        if self.pattern not in ("A", "B"):
            raise ConfigError(f"pattern must be A or B, got {self.pattern!r}")
        if self.backend not in ("posix", "memory"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        for name in ("nodes", "workers_per_node", "iterations", "repetitions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.object_size < 0:
            raise ConfigError("object_size must be >= 0")
        if self.pattern == "B" and self.nodes % 2:
            raise ConfigError(f"pattern B needs an even node count, got {self.nodes}")
        if self.effective_executor not in ("process", "thread"):
            raise ConfigError(f"unknown executor {self.executor!r}")
        if self.backend == "memory" and self.effective_executor == "process":
            raise ConfigError("memory backend cannot be shared by worker processes")
        if self.backend == "posix":
            if self.root is None:
                raise ConfigError("posix backend needs a root directory")
            if not self.root.is_dir():
                raise ConfigError(f"root directory does not exist: {self.root}")
        if self.barrier_timeout <= 0:
            raise ConfigError("barrier_timeout must be positive")
        return self

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["root"] = str(self.root) if self.root is not None else None
        d["executor"] = self.effective_executor
        return d


@dataclass(frozen=True)
class TimingRecord:
    worker_id: int
    phase: str
    start: float
    end: float
    bytes: int
    ops: int

    def to_line(self) -> str:
        return (
            f"REC worker={self.worker_id} phase={PHASE_CODES[self.phase]} "
            f"start={self.start!r} end={self.end!r} bytes={self.bytes} ops={self.ops}"
        )


def _fields(line: str) -> tuple[str, dict[str, str]]:
    tag, *parts = line.split()
    return tag, dict(p.split("=", 1) for p in parts)


def parse_record(line: str) -> TimingRecord:
    tag, f = _fields(line)
    if tag != "REC":
        raise ValueError(f"not a REC line: {line!r}")
    return TimingRecord(
        worker_id=int(f["worker"]),
        phase=PHASE_NAMES[f["phase"]],
        start=float(f["start"]),
        end=float(f["end"]),
        bytes=int(f["bytes"]),
        ops=int(f["ops"]),
    )


def arrival_line(worker_id: int, phase: str, arrive: float) -> str:
    return f"BAR worker={worker_id} phase={PHASE_CODES[phase]} arrive={arrive!r}"


def parse_report_lines(lines: list[str]) -> tuple[list[TimingRecord], dict[str, float]]:
    """Split worker output into timing records and per-phase release times.

    The release time of a phase is the latest barrier arrival among its
    workers: the barrier cannot open before the last worker arrives, and
    every worker stamps its start after the barrier opens.
    """
    records, releases = [], {}
    for line in lines:
        if not line.strip():
            continue
        tag, f = _fields(line)
        if tag == "REC":
            records.append(parse_record(line))
        elif tag == "BAR":
            phase = PHASE_NAMES[f["phase"]]
            releases[phase] = max(releases.get(phase, float("-inf")), float(f["arrive"]))
        else:
            raise ValueError(f"unknown report line {line!r}")
    return records, releases


@dataclass
class RunReport:
    config: dict[str, Any]
    repetition: int
    records: list[TimingRecord]
    releases: dict[str, float]
    bandwidths: list = field(default_factory=list)

    def phase_records(self, phase: str) -> list[TimingRecord]:
        return [r for r in self.records if r.phase == phase]

    def phases(self) -> list[str]:
        order = ["populate", "write", "read"]
        present = {r.phase for r in self.records}
        return [p for p in order if p in present]

    def to_lines(self) -> list[str]:
        lines = [f"# repetition={self.repetition}"]
        lines += [r.to_line() for r in self.records]
        # one synthetic arrival per phase reproduces the release times
        lines += [arrival_line(-1, p, t) for p, t in sorted(self.releases.items())]
        return lines


class PhaseBarrier:
    """Release barrier for one phase.

    ``wait`` returns ``(arrive, start)`` in run-epoch seconds. Raises
    :class:`BarrierTimeout` when not every party arrives within ``timeout``
    seconds or the barrier was aborted.
    """

    def __init__(self, parties: int, timeout: float = 60.0, ctx=None):
        factory = ctx.Barrier if ctx is not None else threading.Barrier
        self._barrier = factory(parties, timeout=timeout)
        self.parties = parties

    def wait(self, epoch: float) -> tuple[float, float]:
        arrive = time.monotonic() - epoch
        try:
            self._barrier.wait()
        except threading.BrokenBarrierError:
            raise BarrierTimeout(f"barrier of {self.parties} broken or timed out") from None
        return arrive, time.monotonic() - epoch

    def abort(self) -> None:
        self._barrier.abort()


@dataclass(frozen=True)
class FieldTask:
    """One worker's share of a Field I/O phase."""

    worker_id: int
    node_id: int
    phase: str
    dataset: str
    iterations: int
    object_size: int
    seed: int
    pool: str
    mode: str
    crash_after: int | None = None

    def run(self, backend: Backend, barrier: PhaseBarrier, epoch: float) -> list[str]:
        pool = backend.pool_connect(self.pool)
        session = session_open(pool, self.mode, self.worker_id, self.node_id)
        keys = field_keys(self.seed, self.dataset, self.worker_id, self.iterations)
        writing = self.phase in ("write", "populate")
        payloads = PayloadFactory(self.seed, self.dataset, self.worker_id, self.object_size)

        arrive, start = barrier.wait(epoch)
        done = 0
        for key in keys:
            if self.crash_after is not None and done == self.crash_after:
                _crash(f"worker {self.worker_id} crashing after {done} ops")
            if writing:
                session.field_write(key, payloads.payload(key))
            else:
                payloads.check(session.field_read(key), key)
            done += 1
        end = time.monotonic() - epoch
        rec = TimingRecord(self.worker_id, self.phase, start, end, done * self.object_size, done)
        return [arrival_line(self.worker_id, self.phase, arrive), rec.to_line()]


class WorkerCrash(RuntimeError):
    pass


def _crash(message: str) -> None:
    if multiprocessing.parent_process() is not None:
        os._exit(3)
    raise WorkerCrash(message)


def _process_entry(task, backend_args, barrier, epoch, results) -> None:
    try:
        backend = open_backend(*backend_args, create=False)
        lines = task.run(backend, barrier, epoch)
    except BaseException as exc:  # noqa: BLE001 - reported to the orchestrator
        barrier.abort()
        results.put((task.worker_id, "error", f"{exc!r}\n{traceback.format_exc()}"))
        return
    results.put((task.worker_id, "ok", lines))


def _describe_failures(failures: dict[int, str], partial: list[str], total: int) -> str:
    head = "; ".join(f"worker {w}: {msg.splitlines()[0]}" for w, msg in sorted(failures.items()))
    return f"{len(failures)} of {total} workers failed ({head}); {len(partial)} report lines collected"


def run_phase(
    tasks: list,
    backend: Backend,
    executor: str,
    epoch: float,
    barrier_timeout: float = 60.0,
) -> list[str]:
    """Run ``tasks`` concurrently behind one barrier; return their report lines."""
    if executor == "thread":
        return _run_threads(tasks, backend, epoch, barrier_timeout)
    if executor == "process":
        return _run_processes(tasks, backend, epoch, barrier_timeout)
    raise ConfigError(f"unknown executor {executor!r}")


def _run_threads(tasks, backend, epoch, barrier_timeout) -> list[str]:
    barrier = PhaseBarrier(len(tasks), barrier_timeout)
    results: dict[int, list[str]] = {}
    failures: dict[int, str] = {}

    def body(task):
        try:
            results[task.worker_id] = task.run(backend, barrier, epoch)
        except BaseException as exc:  # noqa: BLE001
            failures[task.worker_id] = repr(exc)
            barrier.abort()

    threads = [threading.Thread(target=body, args=(t,), name=f"worker-{t.worker_id}") for t in tasks]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    partial = [line for wid in sorted(results) for line in results[wid]]
    if failures:
        raise HarnessError(_describe_failures(failures, partial, len(tasks)), partial)
    return partial


def _mp_context():
    methods = multiprocessing.get_all_start_methods()
    return multiprocessing.get_context("forkserver" if "forkserver" in methods else "spawn")


def _run_processes(tasks, backend, epoch, barrier_timeout) -> list[str]:
    if not hasattr(backend, "root"):
        raise ConfigError(f"{backend.name} backend cannot be shared by worker processes")
    ctx = _mp_context()
    barrier = PhaseBarrier(len(tasks), barrier_timeout, ctx=ctx)
    results = ctx.Queue()
    backend_args = (backend.name, str(backend.root))
    procs = {
        t.worker_id: ctx.Process(
            target=_process_entry, args=(t, backend_args, barrier, epoch, results), name=f"worker-{t.worker_id}"
        )
        for t in tasks
    }
    for p in procs.values():
        p.start()

    collected: dict[int, list[str]] = {}
    failures: dict[int, str] = {}
    pending = set(procs)
    try:
        while pending:
            try:
                wid, status, payload = results.get(timeout=0.2)
            except queue_mod.Empty:
                for wid in list(pending):
                    p = procs[wid]
                    if not p.is_alive() and p.exitcode not in (0, None):
                        # died without reporting
                        failures[wid] = f"exited with code {p.exitcode}"
                        pending.discard(wid)
                        barrier.abort()
                continue
            pending.discard(wid)
            if status == "ok":
                collected[wid] = payload
            else:
                failures[wid] = payload
    finally:
        for p in procs.values():
            p.join(timeout=barrier_timeout)
            if p.is_alive():
                p.terminate()
                p.join()
        results.close()

    partial = [line for wid in sorted(collected) for line in collected[wid]]
    if failures:
        raise HarnessError(_describe_failures(failures, partial, len(tasks)), partial)
    return partial


def spawn_workers(config: BenchmarkConfig, tasks: list, backend: Backend, epoch: float) -> list[str]:
    """Execute one phase's tasks with the executor the config selects."""
    config.validate()
    return run_phase(tasks, backend, config.effective_executor, epoch, config.barrier_timeout)


def make_backend(config: BenchmarkConfig) -> Backend:
    return open_backend(config.backend, config.root, create=True)


def _pool_name(prefix: str, repetition: int) -> str:
    return f"{prefix}-r{repetition}-{uuid.uuid4().hex[:8]}"


def _field_tasks(config, ids, phase, dataset, pool) -> list[FieldTask]:
    return [
        FieldTask(
            worker_id=w,
            node_id=w // config.workers_per_node,
            phase=phase,
            dataset=dataset,
            iterations=config.iterations,
            object_size=config.object_size,
            seed=config.seed,
            pool=pool,
            mode=config.mode.value,
        )
        for w in ids
    ]


def _repetitions(config: BenchmarkConfig, backend: Backend | None, body,
                 shared_barrier: tuple[str, ...] = ()) -> list[RunReport]:
    config.validate()
    backend = backend if backend is not None else make_backend(config)
    reports = []
    for rep in range(config.repetitions):
        pool = _pool_name(f"{config.pattern.lower()}-{config.mode.value}", rep)
        backend.pool_create(pool)
        epoch = time.monotonic()
        try:
            lines = body(backend, pool, epoch)
        finally:
            if not config.keep_data:
                backend.pool_destroy(pool)
        records, releases = parse_report_lines(lines)
        if shared_barrier:
            release = max(releases[p] for p in shared_barrier)
            releases.update({p: release for p in shared_barrier})
        report = RunReport(config.echo(), rep, records, releases)
        log.info("repetition %d: %d records", rep, len(records))
        reports.append(report)
    return reports


def run_pattern_a(config: BenchmarkConfig, backend: Backend | None = None) -> list[RunReport]:
    """Writers on every node, hard barrier, then one reader per writer."""
    ids = range(config.workers)
    executor = config.effective_executor

    def body(backend, pool, epoch):
        lines = run_phase(_field_tasks(config, ids, "write", "a", pool), backend, executor, epoch,
                          config.barrier_timeout)
        # all writers have exited: the hard barrier between phases
        lines += run_phase(_field_tasks(config, ids, "read", "a", pool), backend, executor, epoch,
                           config.barrier_timeout)
        return lines

    return _repetitions(config, backend, body)


def run_pattern_b(config: BenchmarkConfig, backend: Backend | None = None) -> list[RunReport]:
    """Pre-populate, then half the nodes write while the other half read."""
    config.validate()
    half = config.nodes // 2 * config.workers_per_node
    writers = range(half)
    readers = range(half, 2 * half)
    executor = config.effective_executor

    def body(backend, pool, epoch):
        lines = run_phase(_field_tasks(config, readers, "populate", "pre", pool), backend, executor,
                          epoch, config.barrier_timeout)
        tasks = _field_tasks(config, writers, "write", "new", pool)
        tasks += _field_tasks(config, readers, "read", "pre", pool)
        lines += run_phase(tasks, backend, executor, epoch, config.barrier_timeout)
        return lines

    return _repetitions(config, backend, body, shared_barrier=("write", "read"))


def run_fieldio(config: BenchmarkConfig, backend: Backend | None = None) -> list[RunReport]:
    runner = run_pattern_a if config.pattern == "A" else run_pattern_b
    return runner(config, backend)


def with_overrides(config: BenchmarkConfig, **changes) -> BenchmarkConfig:
    return replace(config, **changes)
