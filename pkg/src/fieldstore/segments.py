"""Bulk "segments mode" benchmark.

Each worker stages ``segment_count`` parts of ``segment_size`` bytes into
one buffer and commits it with a single ``array_write``; after a barrier
every worker reads its object back with a single ``array_read``.
"""

from __future__ import annotations

import random
import time
import uuid
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

from .api import Backend, ErrorKind, ObjectId, StoreError
from .harness import (
    ConfigError,
    MiB,
    PhaseBarrier,
    RunReport,
    TimingRecord,
    arrival_line,
    open_backend,
    parse_report_lines,
    run_phase,
)

CONTAINER = "segments"


@dataclass
class SegmentsConfig:
    segment_count: int = 100
    segment_size: int = MiB
    workers: int = 1
    repetitions: int = 5
    backend: str = "posix"
    root: Path | None = None
    seed: int = 0
    executor: str | None = None
    barrier_timeout: float = 60.0
    keep_data: bool = False

    def __post_init__(self):
        if self.root is not None:
            self.root = Path(self.root)

    @property
    def object_size(self) -> int:
        return self.segment_count * self.segment_size

    @property
    def effective_executor(self) -> str:
        if self.executor:
            return self.executor
        return "thread" if self.backend == "memory" else "process"

    def validate(self) -> "SegmentsConfig":
        for name in ("segment_count", "workers", "repetitions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.segment_size < 0:
            raise ConfigError("segment_size must be >= 0")
        if self.backend not in ("posix", "memory"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "memory" and self.effective_executor == "process":
            raise ConfigError("memory backend cannot be shared by worker processes")
        if self.backend == "posix" and (self.root is None or not self.root.is_dir()):
            raise ConfigError(f"root directory does not exist: {self.root}")
        return self

    def echo(self) -> dict:
        d = asdict(self)
        d["root"] = str(self.root) if self.root is not None else None
        d["executor"] = self.effective_executor
        d["object_size"] = self.object_size
        return d


def staged_object(seed: int, worker_id: int, segment_count: int, segment_size: int) -> bytearray:
    """Assemble a worker's object from distinct segment-sized parts."""
    part = random.Random(f"{seed}/segments/{worker_id}").randbytes(segment_size)
    buf = bytearray(segment_count * segment_size)
    for i in range(segment_count):
        lo = i * segment_size
        stamp = i.to_bytes(8, "little")[:segment_size]
        buf[lo:lo + segment_size] = part
        buf[lo:lo + len(stamp)] = stamp
    return buf


def segment_oid(worker_id: int) -> ObjectId:
    return ObjectId(lo=worker_id + 1)


@dataclass(frozen=True)
class SegmentTask:
    worker_id: int
    phase: str
    pool: str
    segment_count: int
    segment_size: int
    seed: int

    def run(self, backend: Backend, barrier: PhaseBarrier, epoch: float) -> list[str]:
        cont = backend.pool_connect(self.pool).container_open(CONTAINER)
        oid = segment_oid(self.worker_id)
        staged = staged_object(self.seed, self.worker_id, self.segment_count, self.segment_size)
        size = len(staged)
        if self.phase == "write":
            payload = bytes(staged)
            del staged
            arrive, start = barrier.wait(epoch)
            cont.array_write(oid, payload)
            end = time.monotonic() - epoch
        else:
            expected = zlib.crc32(staged)
            del staged
            arrive, start = barrier.wait(epoch)
            data = cont.array_read(oid)
            end = time.monotonic() - epoch
            if len(data) != size or zlib.crc32(data) != expected:
                raise StoreError(ErrorKind.CORRUPT, f"segments object of worker {self.worker_id} differs")
        rec = TimingRecord(self.worker_id, self.phase, start, end, size, 1)
        return [arrival_line(self.worker_id, self.phase, arrive), rec.to_line()]


def run_segments(config: SegmentsConfig, backend: Backend | None = None) -> list[RunReport]:
    """Write phase, barrier, read phase; one RunReport per repetition."""
    config.validate()
    if backend is None:
        backend = open_backend(config.backend, config.root, create=True)
    executor = config.effective_executor
    reports = []
    for rep in range(config.repetitions):
        pool = f"segments-r{rep}-{uuid.uuid4().hex[:8]}"
        backend.pool_create(pool).container_create(CONTAINER)
        epoch = time.monotonic()
        try:
            lines = []
            for phase in ("write", "read"):
                tasks = [
                    SegmentTask(w, phase, pool, config.segment_count, config.segment_size, config.seed)
                    for w in range(config.workers)
                ]
                lines += run_phase(tasks, backend, executor, epoch, config.barrier_timeout)
        finally:
            if not config.keep_data:
                backend.pool_destroy(pool)
        records, releases = parse_report_lines(lines)
        reports.append(RunReport(config.echo(), rep, records, releases))
    return reports
