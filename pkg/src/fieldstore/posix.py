"""Object store on a plain directory tree.

Layout relative to the store root::

    .fieldstore                          sentinel, "fieldstore-v1\\n"
    <pool>/
    <pool>/<container>/
    <pool>/<container>/<oid32hex>.kv/<encoded-key>
    <pool>/<container>/<oid32hex>.arr

Key files and arrays are written to a temporary file in the target
directory and renamed into place, so a reader never sees a partial value.
Temporary names contain ``~``, which never occurs in an encoded key or an
object filename.
"""

from __future__ import annotations

import os
import shutil
import tempfile
from pathlib import Path

from .api import Backend, ErrorKind, ObjectId, StoreError, dump_line
from .encoding import map_key_filename, unmap_key_filename

SENTINEL = ".fieldstore"
SENTINEL_TEXT = "fieldstore-v1\n"
KV_SUFFIX = ".kv"
ARRAY_SUFFIX = ".arr"
TEMP_PREFIX = ".~"


def atomic_put_file(path: Path | str, value: bytes) -> None:
    """Write ``value`` to ``path`` through a temp file plus ``os.replace``."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=TEMP_PREFIX, suffix="~")
    except OSError as exc:
        raise StoreError(ErrorKind.IO_FAILURE, f"{path}: {exc.strerror}") from None
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(value)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise StoreError(ErrorKind.IO_FAILURE, f"{path}: {exc.strerror}") from None


def _read_file(path: Path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def is_store_root(root: Path | str) -> bool:
    try:
        return (Path(root) / SENTINEL).read_text() == SENTINEL_TEXT
    except OSError:
        return False


class PosixBackend(Backend):
    """Directory-tree store; safe for concurrent use by many processes."""

    name = "posix"

    def __init__(self, root: Path | str, create: bool = False):
        self.root = Path(root).absolute()
        if create and not is_store_root(self.root):
            if not self.root.is_dir():
                raise StoreError(ErrorKind.IO_FAILURE, f"no such directory: {self.root}")
            atomic_put_file(self.root / SENTINEL, SENTINEL_TEXT.encode())
        if not is_store_root(self.root):
            raise StoreError(ErrorKind.IO_FAILURE, f"not a store root (missing {SENTINEL}): {self.root}")

    def __repr__(self) -> str:
        return f"PosixBackend({str(self.root)!r})"

    # path mapping

    def pool_path(self, pool: str) -> Path:
        return self.root / pool

    def container_path(self, pool: str, cont: str) -> Path:
        return self.root / pool / cont

    def kv_path(self, pool: str, cont: str, oid: ObjectId) -> Path:
        return self.container_path(pool, cont) / (oid.render() + KV_SUFFIX)

    def key_path(self, pool: str, cont: str, oid: ObjectId, key: str) -> Path:
        return self.kv_path(pool, cont, oid) / map_key_filename(key)

    def array_path(self, pool: str, cont: str, oid: ObjectId) -> Path:
        return self.container_path(pool, cont) / (oid.render() + ARRAY_SUFFIX)

    def _missing(self, pool: str, cont: str | None = None) -> StoreError:
        """Classify an ENOENT by probing which ancestor is absent."""
        if not self.pool_path(pool).is_dir():
            return StoreError(ErrorKind.POOL_NOT_FOUND, pool)
        if cont is not None and not self.container_path(pool, cont).is_dir():
            return StoreError(ErrorKind.CONTAINER_NOT_FOUND, f"{pool}/{cont}")
        return StoreError(ErrorKind.IO_FAILURE, f"{pool}/{cont}: unexpected missing path")

    def _require(self, pool: str, cont: str) -> Path:
        path = self.container_path(pool, cont)
        if not path.is_dir():
            raise self._missing(pool, cont)
        return path

    # pools and containers

    def _create_pool(self, pool):
        try:
            os.mkdir(self.pool_path(pool))
        except FileExistsError:
            raise StoreError(ErrorKind.ALREADY_EXISTS, pool) from None
        except OSError as exc:
            raise StoreError(ErrorKind.IO_FAILURE, f"{pool}: {exc.strerror}") from None

    def _pool_exists(self, pool):
        return self.pool_path(pool).is_dir()

    def _destroy_pool(self, pool):
        try:
            shutil.rmtree(self.pool_path(pool))
        except OSError as exc:
            raise StoreError(ErrorKind.IO_FAILURE, f"{pool}: {exc}") from None

    def _pools(self):
        return [e.name for e in os.scandir(self.root) if e.is_dir() and not e.name.startswith(".")]

    def _create_container(self, pool, cont):
        try:
            os.mkdir(self.container_path(pool, cont))
        except FileExistsError:
            raise StoreError(ErrorKind.ALREADY_EXISTS, f"{pool}/{cont}") from None
        except FileNotFoundError:
            raise self._missing(pool) from None
        except OSError as exc:
            raise StoreError(ErrorKind.IO_FAILURE, f"{pool}/{cont}: {exc.strerror}") from None

    def _container_exists(self, pool, cont):
        if not self.pool_path(pool).is_dir():
            raise StoreError(ErrorKind.POOL_NOT_FOUND, pool)
        return self.container_path(pool, cont).is_dir()

    def _containers(self, pool):
        try:
            return [e.name for e in os.scandir(self.pool_path(pool)) if e.is_dir()]
        except FileNotFoundError:
            raise StoreError(ErrorKind.POOL_NOT_FOUND, pool) from None

    # key-value objects

    def _kv_exists(self, pool, cont, oid):
        if self.kv_path(pool, cont, oid).is_dir():
            return True
        self._require(pool, cont)
        return False

    def _kv_put(self, pool, cont, oid, key, value):
        kv_dir = self.kv_path(pool, cont, oid)
        try:
            os.mkdir(kv_dir)
        except FileExistsError:
            pass  # shared by every worker of a node
        except FileNotFoundError:
            raise self._missing(pool, cont) from None
        except OSError as exc:
            raise StoreError(ErrorKind.IO_FAILURE, f"{kv_dir}: {exc.strerror}") from None
        atomic_put_file(kv_dir / map_key_filename(key), value)

    def _kv_get(self, pool, cont, oid, key):
        try:
            return _read_file(self.key_path(pool, cont, oid, key))
        except FileNotFoundError:
            self._require(pool, cont)
            raise StoreError(ErrorKind.KEY_NOT_FOUND, f"{oid}/{key}") from None
        except OSError as exc:
            raise StoreError(ErrorKind.IO_FAILURE, f"{oid}/{key}: {exc.strerror}") from None

    def _kv_key_exists(self, pool, cont, oid, key):
        if self.key_path(pool, cont, oid, key).is_file():
            return True
        self._require(pool, cont)
        return False

    def _kv_keys(self, pool, cont, oid):
        self._require(pool, cont)
        try:
            entries = os.listdir(self.kv_path(pool, cont, oid))
        except FileNotFoundError:
            return []
        return [unmap_key_filename(name) for name in entries if "~" not in name]

    # arrays

    def _array_write(self, pool, cont, oid, data):
        try:
            atomic_put_file(self.array_path(pool, cont, oid), data)
        except StoreError:
            self._require(pool, cont)
            raise

    def _array_read(self, pool, cont, oid):
        try:
            return _read_file(self.array_path(pool, cont, oid))
        except FileNotFoundError:
            self._require(pool, cont)
            raise StoreError(ErrorKind.OBJECT_NOT_FOUND, str(oid)) from None
        except OSError as exc:
            raise StoreError(ErrorKind.IO_FAILURE, f"{oid}: {exc.strerror}") from None

    def _array_exists(self, pool, cont, oid):
        if self.array_path(pool, cont, oid).is_file():
            return True
        self._require(pool, cont)
        return False

    def _objects(self, pool, cont):
        kvs, arrays = [], []
        for name in os.listdir(self._require(pool, cont)):
            stem, _, suffix = name.rpartition(".")
            if "." + suffix == KV_SUFFIX:
                kvs.append(ObjectId.parse(stem))
            elif "." + suffix == ARRAY_SUFFIX:
                arrays.append(ObjectId.parse(stem))
        return kvs, arrays

    def dump(self) -> str:
        """Walk the tree and emit the same listing as ``MemoryBackend.dump``.

        Anything that does not belong to the layout (stray files, leftover
        temp files, malformed names) is reported as an ``UNK`` line.
        """
        lines = []
        for pool_entry in sorted(os.scandir(self.root), key=lambda e: e.name):
            if pool_entry.name == SENTINEL:
                continue
            if not pool_entry.is_dir():
                lines.append(dump_line("UNK", pool_entry.name))
                continue
            lines.append(dump_line("POOL", pool_entry.name))
            for cont_entry in os.scandir(pool_entry.path):
                base = f"{pool_entry.name}/{cont_entry.name}"
                if not cont_entry.is_dir():
                    lines.append(dump_line("UNK", base))
                    continue
                lines.append(dump_line("CONT", base))
                lines.extend(self._dump_container(base, cont_entry.path))
        return "".join(line + "\n" for line in sorted(lines))

    def _dump_container(self, base: str, path: str) -> list[str]:
        lines = []
        for entry in os.scandir(path):
            stem, _, suffix = entry.name.rpartition(".")
            try:
                oid = ObjectId.parse(stem)
            except StoreError:
                oid = None
            if oid is not None and "." + suffix == ARRAY_SUFFIX and entry.is_file():
                lines.append(dump_line("ARR", f"{base}/{oid}", _read_file(Path(entry.path))))
            elif oid is not None and "." + suffix == KV_SUFFIX and entry.is_dir():
                for key_entry in os.scandir(entry.path):
                    where = f"{base}/{oid}/{key_entry.name}"
                    try:
                        unmap_key_filename(key_entry.name)
                        ok = key_entry.is_file()
                    except StoreError:
                        ok = False
                    if ok:
                        lines.append(dump_line("KEY", where, _read_file(Path(key_entry.path))))
                    else:
                        lines.append(dump_line("UNK", where))
            else:
                lines.append(dump_line("UNK", f"{base}/{entry.name}"))
        return lines


def open_backend(kind: str, root: Path | str | None = None, create: bool = True) -> Backend:
    """Construct a backend by name (``posix`` needs a root directory)."""
    if kind == "posix":
        if root is None:
            raise ValueError("posix backend needs a root directory")
        return PosixBackend(root, create=create)
    if kind == "memory":
        from .memory import MemoryBackend

        return MemoryBackend()
    raise ValueError(f"unknown backend {kind!r}")

