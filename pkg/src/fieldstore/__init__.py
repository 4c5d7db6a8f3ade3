"""Object-store field I/O benchmark suite.

Pools, containers, key-value and array objects behind one API
(:mod:`fieldstore.api`), implemented on a directory tree
(:mod:`fieldstore.posix`) and in memory (:mod:`fieldstore.memory`), with
Field I/O access patterns, an IOR-style segments mode and bandwidth
reporting on top.
"""

from .api import (
    Backend,
    ContainerHandle,
    ErrorKind,
    KvHandle,
    ObjectId,
    PoolHandle,
    StoreError,
)
from .fieldio import ArrayLocator, FieldioMode, FieldKey, session_open
from .harness import BenchmarkConfig, RunReport, TimingRecord, run_pattern_a, run_pattern_b
from .memory import MemoryBackend
from .posix import PosixBackend
from .segments import SegmentsConfig, run_segments

__version__ = "0.1.0"

__all__ = [
    "ArrayLocator", "Backend", "BenchmarkConfig", "ContainerHandle", "ErrorKind", "FieldKey",
    "FieldioMode", "KvHandle", "MemoryBackend", "ObjectId", "PoolHandle", "PosixBackend",
    "RunReport", "SegmentsConfig", "StoreError", "TimingRecord", "run_pattern_a",
    "run_pattern_b", "run_segments", "session_open",
]
