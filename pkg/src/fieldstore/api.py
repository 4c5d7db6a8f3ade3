"""Backend-neutral object store contract.

A store holds pools; a pool holds containers; a container holds key-value
objects and array objects, both addressed by a 128-bit :class:`ObjectId`.
Backends implement the underscore primitives of :class:`Backend`; all
argument validation lives in the handle layer so every backend rejects
exactly the same inputs.
"""

from __future__ import annotations

import abc
import enum
import re
import zlib
from dataclasses import dataclass

MAX_NAME_BYTES = 128
# Encoded key filenames must fit in one path component (NAME_MAX).
MAX_KEY_BYTES = 255
MAX_VALUE_BYTES = 64 * 1024 * 1024
MAX_ARRAY_BYTES = 1024 * 1024 * 1024

USER_BITS = 96
_NAME_RE = re.compile(r"[A-Za-z0-9._-]+")
_HEX32_RE = re.compile(r"[0-9a-f]{32}")


class ErrorKind(enum.Enum):
    POOL_NOT_FOUND = "PoolNotFound"
    CONTAINER_NOT_FOUND = "ContainerNotFound"
    OBJECT_NOT_FOUND = "ObjectNotFound"
    KEY_NOT_FOUND = "KeyNotFound"
    ALREADY_EXISTS = "AlreadyExists"
    INVALID_NAME = "InvalidName"
    INVALID_OBJECT_ID = "InvalidObjectId"
    IO_FAILURE = "IoFailure"
    CORRUPT = "Corrupt"

    def __str__(self) -> str:
        return self.value


class StoreError(Exception):
    """Any failure raised by a store operation; ``kind`` classifies it."""

    def __init__(self, kind: ErrorKind, detail: str = ""):
        super().__init__(f"{kind}: {detail}" if detail else str(kind))
        self.kind = kind
        self.detail = detail

    def __reduce__(self):
        return (StoreError, (self.kind, self.detail))


@dataclass(frozen=True, order=True)
class ObjectId:
    """128-bit object identifier: 32 reserved high bits, 96 user bits."""

    hi: int = 0
    lo: int = 0

    def __post_init__(self):
        if not 0 <= self.hi < 1 << 32:
            raise StoreError(ErrorKind.INVALID_OBJECT_ID, f"hi out of range: {self.hi}")
        if not 0 <= self.lo < 1 << USER_BITS:
            raise StoreError(ErrorKind.INVALID_OBJECT_ID, f"lo out of range: {self.lo}")

    @property
    def value(self) -> int:
        return (self.hi << USER_BITS) | self.lo

    def render(self) -> str:
        return f"{self.value:032x}"

    @classmethod
    def parse(cls, text: str) -> "ObjectId":
        if not _HEX32_RE.fullmatch(text):
            raise StoreError(ErrorKind.INVALID_OBJECT_ID, f"not 32 lowercase hex digits: {text!r}")
        value = int(text, 16)
        return cls(hi=value >> USER_BITS, lo=value & ((1 << USER_BITS) - 1))

    def __str__(self) -> str:
        return self.render()


def validate_name(name: str) -> str:
    """Check a pool or container name; it becomes a path component on disk."""
    if not isinstance(name, str) or not _NAME_RE.fullmatch(name):
        raise StoreError(ErrorKind.INVALID_NAME, f"bad name {name!r}")
    if len(name.encode()) > MAX_NAME_BYTES:
        raise StoreError(ErrorKind.INVALID_NAME, f"name longer than {MAX_NAME_BYTES} bytes")
    # leading dots are reserved for the root sentinel and temp files
    if name.startswith("."):
        raise StoreError(ErrorKind.INVALID_NAME, f"name may not start with '.': {name!r}")
    return name


def key_bytes(key: str) -> bytes:
    if not isinstance(key, str) or not key:
        raise StoreError(ErrorKind.INVALID_NAME, "empty key")
    try:
        raw = key.encode("utf-8")
    except UnicodeEncodeError:
        raise StoreError(ErrorKind.INVALID_NAME, f"key is not encodable: {key!r}") from None
    return raw


def validate_key(key: str) -> str:
    from .encoding import encode_name_bytes

    if len(encode_name_bytes(key_bytes(key))) > MAX_KEY_BYTES:
        raise StoreError(ErrorKind.INVALID_NAME, f"encoded key longer than {MAX_KEY_BYTES} bytes")
    return key


def validate_user_oid(oid: ObjectId) -> ObjectId:
    if not isinstance(oid, ObjectId):
        raise StoreError(ErrorKind.INVALID_OBJECT_ID, f"not an ObjectId: {oid!r}")
    if oid.hi != 0:
        raise StoreError(ErrorKind.INVALID_OBJECT_ID, f"reserved bits set in {oid}")
    return oid


def _check_size(data: bytes, limit: int, what: str) -> bytes:
    data = bytes(data)
    if len(data) > limit:
        raise StoreError(ErrorKind.IO_FAILURE, f"{what} of {len(data)} bytes exceeds {limit}")
    return data


class Backend(abc.ABC):
    """Storage backend.

    Subclasses implement the underscore primitives, which receive
    pre-validated names. Applications go through :meth:`pool_create` and
    :meth:`pool_connect` and the handles they return.
    """

    name = "abstract"

    def pool_create(self, name: str) -> "PoolHandle":
        self._create_pool(validate_name(name))
        return PoolHandle(self, name)

    def pool_connect(self, name: str) -> "PoolHandle":
        validate_name(name)
        if not self._pool_exists(name):
            raise StoreError(ErrorKind.POOL_NOT_FOUND, name)
        return PoolHandle(self, name)

    def pool_exists(self, name: str) -> bool:
        return self._pool_exists(validate_name(name))

    def pool_destroy(self, name: str) -> None:
        """Remove a pool and everything in it."""
        validate_name(name)
        if not self._pool_exists(name):
            raise StoreError(ErrorKind.POOL_NOT_FOUND, name)
        self._destroy_pool(name)

    def pools(self) -> list[str]:
        return sorted(self._pools())

    @abc.abstractmethod
    def dump(self) -> str:
        """Canonical sorted listing of the whole store."""

    @abc.abstractmethod
    def _create_pool(self, pool: str) -> None: ...

    @abc.abstractmethod
    def _pool_exists(self, pool: str) -> bool: ...

    @abc.abstractmethod
    def _destroy_pool(self, pool: str) -> None: ...

    @abc.abstractmethod
    def _pools(self) -> list[str]: ...

    @abc.abstractmethod
    def _create_container(self, pool: str, cont: str) -> None: ...

    @abc.abstractmethod
    def _container_exists(self, pool: str, cont: str) -> bool: ...

    @abc.abstractmethod
    def _containers(self, pool: str) -> list[str]: ...

    @abc.abstractmethod
    def _kv_exists(self, pool: str, cont: str, oid: ObjectId) -> bool: ...

    @abc.abstractmethod
    def _kv_put(self, pool: str, cont: str, oid: ObjectId, key: str, value: bytes) -> None: ...

    @abc.abstractmethod
    def _kv_get(self, pool: str, cont: str, oid: ObjectId, key: str) -> bytes: ...

    @abc.abstractmethod
    def _kv_key_exists(self, pool: str, cont: str, oid: ObjectId, key: str) -> bool: ...

    @abc.abstractmethod
    def _kv_keys(self, pool: str, cont: str, oid: ObjectId) -> list[str]: ...

    @abc.abstractmethod
    def _array_write(self, pool: str, cont: str, oid: ObjectId, data: bytes) -> None: ...

    @abc.abstractmethod
    def _array_read(self, pool: str, cont: str, oid: ObjectId) -> bytes: ...

    @abc.abstractmethod
    def _array_exists(self, pool: str, cont: str, oid: ObjectId) -> bool: ...

    @abc.abstractmethod
    def _objects(self, pool: str, cont: str) -> tuple[list[ObjectId], list[ObjectId]]:
        """Return (kv oids, array oids) present in a container."""


@dataclass(frozen=True)
class PoolHandle:
    backend: Backend
    name: str

    def container_create(self, name: str) -> "ContainerHandle":
        self.backend._create_container(self.name, validate_name(name))
        return ContainerHandle(self, name)

    def container_open(self, name: str) -> "ContainerHandle":
        if not self.container_exists(name):
            raise StoreError(ErrorKind.CONTAINER_NOT_FOUND, f"{self.name}/{name}")
        return ContainerHandle(self, name)

    def container_exists(self, name: str) -> bool:
        return self.backend._container_exists(self.name, validate_name(name))

    def containers(self) -> list[str]:
        return sorted(self.backend._containers(self.name))


@dataclass(frozen=True)
class ContainerHandle:
    pool: PoolHandle
    name: str

    @property
    def _where(self) -> tuple[Backend, str, str]:
        return self.pool.backend, self.pool.name, self.name

    def kv_open(self, oid: ObjectId) -> "KvHandle":
        return KvHandle(self, validate_user_oid(oid))

    def kv_object_exists(self, oid: ObjectId) -> bool:
        backend, pool, cont = self._where
        return backend._kv_exists(pool, cont, validate_user_oid(oid))

    def array_write(self, oid: ObjectId, data: bytes) -> None:
        backend, pool, cont = self._where
        oid = validate_user_oid(oid)
        backend._array_write(pool, cont, oid, _check_size(data, MAX_ARRAY_BYTES, "array"))

    def array_read(self, oid: ObjectId) -> bytes:
        backend, pool, cont = self._where
        return backend._array_read(pool, cont, validate_user_oid(oid))

    def array_exists(self, oid: ObjectId) -> bool:
        backend, pool, cont = self._where
        return backend._array_exists(pool, cont, validate_user_oid(oid))

    def objects(self) -> tuple[list[ObjectId], list[ObjectId]]:
        backend, pool, cont = self._where
        kvs, arrays = backend._objects(pool, cont)
        return sorted(kvs), sorted(arrays)


@dataclass(frozen=True)
class KvHandle:
    container: ContainerHandle
    oid: ObjectId

    def put(self, key: str, value: bytes) -> None:
        backend, pool, cont = self.container._where
        value = _check_size(value, MAX_VALUE_BYTES, "value")
        backend._kv_put(pool, cont, self.oid, validate_key(key), value)

    def get(self, key: str) -> bytes:
        backend, pool, cont = self.container._where
        return backend._kv_get(pool, cont, self.oid, validate_key(key))

    def key_exists(self, key: str) -> bool:
        backend, pool, cont = self.container._where
        return backend._kv_key_exists(pool, cont, self.oid, validate_key(key))

    def keys(self) -> list[str]:
        backend, pool, cont = self.container._where
        return sorted(backend._kv_keys(pool, cont, self.oid))


def dump_line(kind: str, path: str, payload: bytes = b"") -> str:
    """One entry of the canonical store listing (CRC-32 of the payload)."""
    return f"{kind} {path} {len(payload)} {zlib.crc32(payload):08x}"
