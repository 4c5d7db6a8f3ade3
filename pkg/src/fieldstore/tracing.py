"""Backend wrapper that records every primitive store call."""

from __future__ import annotations

import threading
from typing import NamedTuple

from .api import Backend, ObjectId


class TraceEntry(NamedTuple):
    op: str
    pool: str
    cont: str | None = None
    oid: ObjectId | None = None
    key: str | None = None
    thread: int = 0


def _traced(op: str):
    def method(self, *args):
        self._record(op, args)
        return getattr(self.inner, "_" + op)(*args)

    method.__name__ = "_" + op
    return method


class TracingBackend(Backend):
    """Delegate to ``inner`` while appending a :class:`TraceEntry` per call.

    Array payloads and KV values are not stored in the trace.
    """

    def __init__(self, inner: Backend):
        self.inner = inner
        self.name = inner.name
        self.trace: list[TraceEntry] = []
        self._lock = threading.Lock()

    def _record(self, op: str, args: tuple) -> None:
        pool = args[0]
        cont = args[1] if len(args) > 1 else None
        oid = args[2] if len(args) > 2 else None
        key = args[3] if len(args) > 3 and isinstance(args[3], str) else None
        with self._lock:
            self.trace.append(TraceEntry(op, pool, cont, oid, key, threading.get_ident()))

    def clear(self) -> list[TraceEntry]:
        with self._lock:
            out, self.trace = self.trace, []
        return out

    def ops(self) -> list[str]:
        return [e.op for e in self.trace]

    def dump(self) -> str:
        return self.inner.dump()

    _create_pool = _traced("create_pool")
    _pool_exists = _traced("pool_exists")
    _destroy_pool = _traced("destroy_pool")
    _create_container = _traced("create_container")
    _container_exists = _traced("container_exists")
    _kv_exists = _traced("kv_exists")
    _kv_put = _traced("kv_put")
    _kv_get = _traced("kv_get")
    _kv_key_exists = _traced("kv_key_exists")
    _kv_keys = _traced("kv_keys")
    _array_write = _traced("array_write")
    _array_read = _traced("array_read")
    _array_exists = _traced("array_exists")
    _objects = _traced("objects")
    _containers = _traced("containers")

    def _pools(self):
        return self.inner._pools()
