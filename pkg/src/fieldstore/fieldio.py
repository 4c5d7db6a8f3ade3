"""Weather-field write and read procedures on top of the object store API.

Every field is stored as one array object plus index entries:

* a per-node index KV maps the serialized :class:`FieldKey` to an
  :class:`ArrayLocator` pointing at the field's array;
* a global index KV maps each key group to a locator of the node index
  that holds that group.

A write is ``array_write``, ``kv_object_exists(node index)``,
``kv_put(node index)``, followed on the first write of a group by
``kv_object_exists(global index)`` and ``kv_put(global index)``. A read is
``kv_object_exists(global)``, ``kv_get(global)``,
``kv_object_exists(node)``, ``kv_get(node)``, ``array_read``.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field

from .api import (
    ContainerHandle,
    ErrorKind,
    KvHandle,
    ObjectId,
    PoolHandle,
    StoreError,
    key_bytes,
    validate_name,
)
from .encoding import decode_name_bytes, encode_name_bytes

INDEX_TAG = (1 << 32) - 1
GLOBAL_INDEX_OID = ObjectId(lo=(INDEX_TAG << 64) | ((1 << 64) - 1))
MAX_WORKER_ID = INDEX_TAG - 1

_LOCATOR_RE = re.compile(r"cont=([A-Za-z0-9._-]+);oid=([0-9a-f]{32});len=(0|[1-9][0-9]*)")


class FieldioMode(str, enum.Enum):
    FULL = "full"
    NO_CONTAINERS = "no_containers"

    @classmethod
    def parse(cls, text: str) -> "FieldioMode":
        return cls(text.replace("-", "_"))


def node_index_oid(node_id: int) -> ObjectId:
    return ObjectId(lo=(INDEX_TAG << 64) | node_id)


def field_oid(worker_id: int, seq: int) -> ObjectId:
    """Array OID: worker id in the upper 32 user bits, sequence number below."""
    if not 0 <= worker_id <= MAX_WORKER_ID:
        raise ValueError(f"worker id out of range: {worker_id}")
    return ObjectId(lo=(worker_id << 64) | seq)


def is_node_index_oid(oid: ObjectId) -> bool:
    return oid.lo >> 64 == INDEX_TAG and oid != GLOBAL_INDEX_OID


@dataclass(frozen=True, order=True)
class FieldKey:
    group: str
    name: str

    def serialize(self) -> str:
        return encode_name_bytes(key_bytes(self.group)) + ":" + encode_name_bytes(key_bytes(self.name))

    @classmethod
    def parse(cls, text: str) -> "FieldKey":
        group, sep, name = text.partition(":")
        if not sep:
            raise ValueError(f"not a field key: {text!r}")
        return cls(decode_name_bytes(group).decode(), decode_name_bytes(name).decode())

    def __str__(self) -> str:
        return self.serialize()


@dataclass(frozen=True)
class ArrayLocator:
    """Pointer stored as a KV value. KV locators carry ``length=0``."""

    container: str
    oid: ObjectId
    length: int

    def serialize(self) -> bytes:
        return f"cont={self.container};oid={self.oid.render()};len={self.length}".encode("ascii")

    @classmethod
    def parse(cls, raw: bytes) -> "ArrayLocator":
        try:
            m = _LOCATOR_RE.fullmatch(raw.decode("ascii"))
        except UnicodeDecodeError:
            m = None
        if m is None:
            raise StoreError(ErrorKind.CORRUPT, f"malformed locator {raw[:80]!r}")
        return cls(validate_name(m.group(1)), ObjectId.parse(m.group(2)), int(m.group(3)))


@dataclass(frozen=True)
class IndexTopology:
    """Container naming for a given mode."""

    mode: FieldioMode

    SHARED = "shared"

    @property
    def global_container(self) -> str:
        return self.SHARED if self.mode is FieldioMode.NO_CONTAINERS else "idx.global"

    def node_container(self, node_id: int) -> str:
        return self.SHARED if self.mode is FieldioMode.NO_CONTAINERS else f"idx.n{node_id}"

    def array_container(self, worker_id: int, node_id: int) -> str:
        if self.mode is FieldioMode.NO_CONTAINERS:
            return self.SHARED
        return f"arr.n{node_id}.w{worker_id}"

    def session_containers(self, worker_id: int, node_id: int) -> list[str]:
        names = [
            self.array_container(worker_id, node_id),
            self.node_container(node_id),
            self.global_container,
        ]
        return list(dict.fromkeys(names))


OP_CATEGORIES = ("array", "put", "get", "exist", "container_create", "container_open")


@dataclass
class FieldioSession:
    """One worker's view of the field store. Not shared between workers."""

    pool: PoolHandle
    mode: FieldioMode
    worker_id: int
    node_id: int
    topology: IndexTopology
    counts: Counter = field(default_factory=Counter)
    trace: list[tuple[str, str]] = field(default_factory=list)
    _containers: dict[str, ContainerHandle] = field(default_factory=dict, repr=False)
    _registered: set[str] = field(default_factory=set, repr=False)
    _written: set[FieldKey] = field(default_factory=set, repr=False)
    _seq: int = 0

    def _count(self, category: str, what: str) -> None:
        self.counts[category] += 1
        self.trace.append((category, what))

    def _container(self, name: str, create: bool = False) -> ContainerHandle:
        handle = self._containers.get(name)
        if handle is not None:
            return handle
        if create:
            self._count("container_create", name)
            try:
                handle = self.pool.container_create(name)
            except StoreError as exc:
                if exc.kind is not ErrorKind.ALREADY_EXISTS:
                    raise
                handle = None
        if handle is None:
            self._count("container_open", name)
            handle = self.pool.container_open(name)
        self._containers[name] = handle
        return handle

    @property
    def array_container(self) -> ContainerHandle:
        return self._container(self.topology.array_container(self.worker_id, self.node_id))

    def _node_locator(self) -> ArrayLocator:
        return ArrayLocator(self.topology.node_container(self.node_id), node_index_oid(self.node_id), 0)

    def _global_kv(self) -> tuple[ContainerHandle, KvHandle]:
        cont = self._container(self.topology.global_container)
        return cont, cont.kv_open(GLOBAL_INDEX_OID)

    def field_write(self, key: FieldKey, data: bytes) -> ArrayLocator:
        if key in self._written:
            raise StoreError(ErrorKind.ALREADY_EXISTS, f"field {key} already written in this session")
        serialized = key.serialize()
        oid = field_oid(self.worker_id, self._seq)
        self._seq += 1

        arrays = self.array_container
        self._count("array", "write")
        arrays.array_write(oid, data)
        locator = ArrayLocator(arrays.name, oid, len(data))

        node = self._node_locator()
        node_cont = self._container(node.container)
        self._count("exist", "node")
        node_cont.kv_object_exists(node.oid)
        self._count("put", "node")
        node_cont.kv_open(node.oid).put(serialized, locator.serialize())

        if key.group not in self._registered:
            global_cont, global_kv = self._global_kv()
            self._count("exist", "global")
            global_cont.kv_object_exists(GLOBAL_INDEX_OID)
            self._count("put", "global")
            global_kv.put(key.group, node.serialize())
            self._registered.add(key.group)

        self._written.add(key)
        return locator

    def field_read(self, key: FieldKey) -> bytes:
        global_cont, global_kv = self._global_kv()
        self._count("exist", "global")
        if not global_cont.kv_object_exists(GLOBAL_INDEX_OID):
            raise StoreError(ErrorKind.KEY_NOT_FOUND, f"global index missing for {key}")
        self._count("get", "global")
        node = ArrayLocator.parse(global_kv.get(key.group))

        node_cont = self._container(node.container)
        self._count("exist", "node")
        if not node_cont.kv_object_exists(node.oid):
            raise StoreError(ErrorKind.KEY_NOT_FOUND, f"node index {node.container} missing for {key}")
        self._count("get", "node")
        locator = ArrayLocator.parse(node_cont.kv_open(node.oid).get(key.serialize()))

        arrays = self._container(locator.container)
        self._count("array", "read")
        data = arrays.array_read(locator.oid)
        if len(data) != locator.length:
            raise StoreError(
                ErrorKind.CORRUPT,
                f"{key}: array has {len(data)} bytes, index says {locator.length}",
            )
        return data

    def op_count_audit(self) -> dict[str, int]:
        return {c: self.counts.get(c, 0) for c in OP_CATEGORIES}

    def metadata_ops(self) -> int:
        """Every issued operation except array payload transfers."""
        return sum(n for c, n in self.counts.items() if c != "array")


def session_open(
    pool: PoolHandle,
    mode: FieldioMode | str,
    worker_id: int,
    node_id: int,
    topology: IndexTopology | None = None,
) -> FieldioSession:
    """Open a session, creating this worker's containers if missing."""
    mode = FieldioMode.parse(mode) if isinstance(mode, str) else mode
    if topology is None:
        topology = IndexTopology(mode)
    if not 0 <= worker_id <= MAX_WORKER_ID or node_id < 0:
        raise ValueError(f"bad worker/node id: {worker_id}/{node_id}")
    session = FieldioSession(pool, mode, worker_id, node_id, topology)
    for name in topology.session_containers(worker_id, node_id):
        session._container(name, create=True)
    return session


def audit_index(pool: PoolHandle) -> list[str]:
    """Check every index entry in ``pool`` against the arrays it points to.

    Returns a list of problem descriptions, each starting with the error
    kind; empty when the index is consistent.
    """
    problems = []

    def check(cont: ContainerHandle, oid: ObjectId, key: str, is_global: bool) -> None:
        where = f"{pool.name}/{cont.name}/{oid}/{key}"
        try:
            loc = ArrayLocator.parse(cont.kv_open(oid).get(key))
            target = pool.container_open(loc.container)
            if is_global:
                if not target.kv_object_exists(loc.oid):
                    raise StoreError(ErrorKind.KEY_NOT_FOUND, f"node index {loc.oid} missing")
                return
            data = target.array_read(loc.oid)
            if len(data) != loc.length:
                raise StoreError(ErrorKind.CORRUPT, f"length {len(data)} != {loc.length}")
        except StoreError as exc:
            problems.append(f"{exc.kind} {where}: {exc.detail}")

    for cname in pool.containers():
        cont = pool.container_open(cname)
        try:
            kvs, _ = cont.objects()
        except StoreError as exc:
            problems.append(f"{exc.kind} {pool.name}/{cname}: {exc.detail}")
            continue
        for oid in kvs:
            if oid == GLOBAL_INDEX_OID or is_node_index_oid(oid):
                try:
                    keys = cont.kv_open(oid).keys()
                except StoreError as exc:
                    problems.append(f"{exc.kind} {pool.name}/{cname}/{oid}: {exc.detail}")
                    continue
                for key in keys:
                    check(cont, oid, key, oid == GLOBAL_INDEX_OID)
    return problems
