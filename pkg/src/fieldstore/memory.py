"""In-memory backend: the reference oracle for the POSIX backend."""

from __future__ import annotations

import threading

from .api import Backend, ErrorKind, ObjectId, StoreError, dump_line
from .encoding import map_key_filename


class _Container:
    __slots__ = ("kvs", "arrays")

    def __init__(self):
        self.kvs: dict[ObjectId, dict[str, bytes]] = {}
        self.arrays: dict[ObjectId, bytes] = {}


class MemoryBackend(Backend):
    """Thread-safe dict-of-dicts store. Not shareable across processes."""

    name = "memory"

    def __init__(self):
        self._lock = threading.RLock()
        self._state: dict[str, dict[str, _Container]] = {}

    def __getstate__(self):
        raise TypeError("MemoryBackend cannot be shared across processes")

    def _pool(self, pool: str) -> dict[str, _Container]:
        try:
            return self._state[pool]
        except KeyError:
            raise StoreError(ErrorKind.POOL_NOT_FOUND, pool) from None

    def _cont(self, pool: str, cont: str) -> _Container:
        try:
            return self._pool(pool)[cont]
        except KeyError:
            raise StoreError(ErrorKind.CONTAINER_NOT_FOUND, f"{pool}/{cont}") from None

    def _create_pool(self, pool):
        with self._lock:
            if pool in self._state:
                raise StoreError(ErrorKind.ALREADY_EXISTS, pool)
            self._state[pool] = {}

    def _pool_exists(self, pool):
        with self._lock:
            return pool in self._state

    def _destroy_pool(self, pool):
        with self._lock:
            self._state.pop(pool, None)

    def _pools(self):
        with self._lock:
            return list(self._state)

    def _create_container(self, pool, cont):
        with self._lock:
            conts = self._pool(pool)
            if cont in conts:
                raise StoreError(ErrorKind.ALREADY_EXISTS, f"{pool}/{cont}")
            conts[cont] = _Container()

    def _container_exists(self, pool, cont):
        with self._lock:
            return cont in self._pool(pool)

    def _containers(self, pool):
        with self._lock:
            return list(self._pool(pool))

    def _kv_exists(self, pool, cont, oid):
        with self._lock:
            return oid in self._cont(pool, cont).kvs

    def _kv_put(self, pool, cont, oid, key, value):
        with self._lock:
            self._cont(pool, cont).kvs.setdefault(oid, {})[key] = value

    def _kv_get(self, pool, cont, oid, key):
        with self._lock:
            try:
                return self._cont(pool, cont).kvs[oid][key]
            except KeyError:
                raise StoreError(ErrorKind.KEY_NOT_FOUND, f"{oid}/{key}") from None

    def _kv_key_exists(self, pool, cont, oid, key):
        with self._lock:
            return key in self._cont(pool, cont).kvs.get(oid, {})

    def _kv_keys(self, pool, cont, oid):
        with self._lock:
            return list(self._cont(pool, cont).kvs.get(oid, {}))

    def _array_write(self, pool, cont, oid, data):
        with self._lock:
            self._cont(pool, cont).arrays[oid] = data

    def _array_read(self, pool, cont, oid):
        with self._lock:
            try:
                return self._cont(pool, cont).arrays[oid]
            except KeyError:
                raise StoreError(ErrorKind.OBJECT_NOT_FOUND, str(oid)) from None

    def _array_exists(self, pool, cont, oid):
        with self._lock:
            return oid in self._cont(pool, cont).arrays

    def _objects(self, pool, cont):
        with self._lock:
            c = self._cont(pool, cont)
            return list(c.kvs), list(c.arrays)

    def dump(self) -> str:
        """Sorted listing, one ``<kind> <path> <length> <crc32>`` line per entry.

        Pools and containers appear as ``POOL``/``CONT`` lines so empty ones
        are visible; arrays are ``ARR`` and key-value pairs ``KEY`` lines
        whose last path component is the filename-encoded key.
        """
        lines = []
        with self._lock:
            for pool, conts in self._state.items():
                lines.append(dump_line("POOL", pool))
                for cname, c in conts.items():
                    base = f"{pool}/{cname}"
                    lines.append(dump_line("CONT", base))
                    for oid, data in c.arrays.items():
                        lines.append(dump_line("ARR", f"{base}/{oid}", data))
                    for oid, kv in c.kvs.items():
                        for key, value in kv.items():
                            path = f"{base}/{oid}/{map_key_filename(key)}"
                            lines.append(dump_line("KEY", path, value))
        return "".join(line + "\n" for line in sorted(lines))
