"""Self-checks: differential fuzzing, layout conformance, op-count audits.

``run_verify`` backs the ``verify`` CLI subcommand; the pieces are also
used directly by the test suite.
"""

from __future__ import annotations

import random
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .api import Backend, ObjectId, StoreError
from .fieldio import FieldioMode, FieldKey, audit_index, session_open
from .memory import MemoryBackend
from .posix import PosixBackend, is_store_root
from .tracing import TracingBackend

POOLS = ["p0", "p1", "p2", "a/b", "", ".hidden", "x" * 129]
CONTAINERS = ["c0", "c1", "c2", "c d", ".."]
OIDS = [ObjectId(lo=0), ObjectId(lo=1), ObjectId(lo=0x2A), ObjectId(lo=(1 << 96) - 1), ObjectId(hi=1, lo=1)]
KEYS = ["k", "k2", "a/b c", "step.0012", "%", ".", "..", "é", "s1:f0", "x" * 300, ""]

OP_WEIGHTS = {
    "pool_create": 3,
    "pool_connect": 3,
    "container_create": 5,
    "container_open": 4,
    "container_exists": 4,
    "kv_object_exists": 8,
    "kv_put": 20,
    "kv_get": 15,
    "kv_key_exists": 8,
    "array_write": 12,
    "array_read": 10,
    "array_exists": 8,
}


def _pick(rng: random.Random, items: list, p_valid: float = 0.9, n_valid: int = 3):
    if rng.random() < p_valid:
        return items[rng.randrange(n_valid)]
    return rng.choice(items)


def generate_ops(seed: int, count: int) -> list[tuple]:
    """Seeded random object-API operations, a few of them deliberately invalid."""
    rng = random.Random(seed)
    kinds, weights = zip(*OP_WEIGHTS.items())
    ops = []
    for _ in range(count):
        kind = rng.choices(kinds, weights)[0]
        pool = _pick(rng, POOLS, 0.95)
        cont = _pick(rng, CONTAINERS, 0.95)
        oid = _pick(rng, OIDS, 0.95, 4)
        key = _pick(rng, KEYS, 0.9, 9)
        value = rng.randbytes(rng.choice([0, 1, 7, 64, 300]))
        ops.append((kind, pool, cont, oid, key, value))
    return ops


def apply_op(backend: Backend, op: tuple) -> tuple:
    """Run one op; returns ``("ok", result)`` or ``("err", error kind)``."""
    kind, pool, cont, oid, key, value = op
    try:
        if kind == "pool_create":
            backend.pool_create(pool)
            return ("ok", None)
        p = backend.pool_connect(pool)
        if kind == "pool_connect":
            return ("ok", None)
        if kind == "container_create":
            p.container_create(cont)
            return ("ok", None)
        if kind == "container_exists":
            return ("ok", p.container_exists(cont))
        c = p.container_open(cont)
        if kind == "container_open":
            return ("ok", None)
        if kind == "kv_object_exists":
            return ("ok", c.kv_object_exists(oid))
        if kind == "array_write":
            c.array_write(oid, value)
            return ("ok", None)
        if kind == "array_read":
            return ("ok", c.array_read(oid))
        if kind == "array_exists":
            return ("ok", c.array_exists(oid))
        kv = c.kv_open(oid)
        if kind == "kv_put":
            kv.put(key, value)
            return ("ok", None)
        if kind == "kv_get":
            return ("ok", kv.get(key))
        if kind == "kv_key_exists":
            return ("ok", kv.key_exists(key))
    except StoreError as exc:
        return ("err", exc.kind.value)
    raise ValueError(f"unknown op {kind!r}")


@dataclass
class FuzzResult:
    ops: int
    divergences: list[tuple] = field(default_factory=list)
    posix_dump: str = ""
    memory_dump: str = ""

    @property
    def layout_conforms(self) -> bool:
        return self.posix_dump == self.memory_dump

    @property
    def ok(self) -> bool:
        return not self.divergences and self.layout_conforms


def differential_fuzz(seed: int, count: int, scratch: Path | str) -> FuzzResult:
    """Replay the same op sequence on a fresh posix store and a memory store."""
    posix = PosixBackend(scratch, create=True)
    memory = MemoryBackend()
    result = FuzzResult(count)
    for i, op in enumerate(generate_ops(seed, count)):
        got, want = apply_op(posix, op), apply_op(memory, op)
        if got != want:
            result.divergences.append((i, op[:5], got, want))
    result.posix_dump = posix.dump()
    result.memory_dump = memory.dump()
    return result


# op sequences at the backend boundary, as (primitive, container) pairs
def expected_write_trace(mode: FieldioMode, worker_id: int, node_id: int, first_of_group: bool) -> list[tuple]:
    full = mode is FieldioMode.FULL
    arr = f"arr.n{node_id}.w{worker_id}" if full else "shared"
    node = f"idx.n{node_id}" if full else "shared"
    glob = "idx.global" if full else "shared"
    steps = [("array_write", arr), ("kv_exists", node), ("kv_put", node)]
    if first_of_group:
        steps += [("kv_exists", glob), ("kv_put", glob)]
    return steps


def expected_read_trace(mode: FieldioMode, worker_id: int, node_id: int) -> list[tuple]:
    full = mode is FieldioMode.FULL
    arr = f"arr.n{node_id}.w{worker_id}" if full else "shared"
    node = f"idx.n{node_id}" if full else "shared"
    glob = "idx.global" if full else "shared"
    return [("kv_exists", glob), ("kv_get", glob), ("kv_exists", node), ("kv_get", node), ("array_read", arr)]


def _store_ops(trace) -> list[tuple]:
    return [(e.op, e.cont) for e in trace]


def audit_fieldio(fields: int = 4, object_size: int = 64) -> list[str]:
    """Trace field writes/reads in both modes and compare against the step lists."""
    failures = []
    metadata_per_write = {}
    for mode in FieldioMode:
        backend = TracingBackend(MemoryBackend())
        pool = backend.pool_create("audit")
        writer = session_open(pool, mode, worker_id=3, node_id=1)
        keys = [FieldKey("g0", f"f{i}") for i in range(fields)]
        for i, key in enumerate(keys):
            backend.clear()
            writer.field_write(key, bytes([i]) * object_size)
            got = _store_ops(backend.trace)
            want = expected_write_trace(mode, 3, 1, first_of_group=(i == 0))
            if got != want:
                failures.append(f"{mode.value} write {i}: trace {got} != {want}")
        metadata_per_write[mode] = writer.metadata_ops() / fields

        reader = session_open(pool, mode, worker_id=3, node_id=1)
        before = reader.op_count_audit()
        for i, key in enumerate(keys):
            backend.clear()
            data = reader.field_read(key)
            if data != bytes([i]) * object_size:
                failures.append(f"{mode.value} read {i}: payload mismatch")
            got = _store_ops(backend.trace)
            if got != expected_read_trace(mode, 3, 1):
                failures.append(f"{mode.value} read {i}: trace {got}")
        after = reader.op_count_audit()
        delta = {k: after[k] - before[k] for k in after}
        want = {"array": fields, "put": 0, "get": 2 * fields, "exist": 2 * fields,
                "container_create": 0, "container_open": 0}
        if delta != want:
            failures.append(f"{mode.value} read audit {delta} != {want}")
    if not metadata_per_write[FieldioMode.NO_CONTAINERS] < metadata_per_write[FieldioMode.FULL]:
        failures.append(f"metadata ops per write not lower without containers: {metadata_per_write}")
    return failures


def scan_store(root: Path | str) -> list[str]:
    """Index consistency and stray entries for every pool under ``root``."""
    if not is_store_root(root):
        return []
    backend = PosixBackend(root)
    problems = []
    for line in backend.dump().splitlines():
        if line.startswith("UNK "):
            problems.append(f"Corrupt unexpected entry {line.split()[1]}")
    for name in backend.pools():
        problems += audit_index(backend.pool_connect(name))
    return problems


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def run_verify(root: Path | str | None = None, ops: int = 10000, seed: int = 42) -> list[Check]:
    checks = []
    if root is not None:
        problems = scan_store(root)
        checks.append(Check("store-scan", not problems, "; ".join(problems[:20]) or "no problems"))

    scratch = Path(tempfile.mkdtemp(prefix=".verify-", dir=root))
    try:
        fuzz = differential_fuzz(seed, ops, scratch)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    detail = f"{fuzz.ops} ops, seed {seed}, {len(fuzz.divergences)} divergences"
    if fuzz.divergences:
        detail += f"; first: {fuzz.divergences[0]}"
    checks.append(Check("differential-fuzz", not fuzz.divergences, detail))
    checks.append(Check("layout-conformance", fuzz.layout_conforms,
                        f"{len(fuzz.posix_dump.splitlines())} entries"))

    failures = audit_fieldio()
    checks.append(Check("fieldio-op-audit", not failures, "; ".join(failures) or "step sequences match"))
    return checks
