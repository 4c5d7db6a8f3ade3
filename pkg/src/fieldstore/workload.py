"""Deterministic benchmark keys and self-validating payloads."""

from __future__ import annotations

import hashlib
import random
import struct
import zlib

from .api import ErrorKind, StoreError
from .fieldio import FieldKey

MAGIC = b"FLD1"
HEADER = struct.Struct("<4sQQI")  # magic, key hash, total length, crc32(body)
HEADER_SIZE = HEADER.size


def field_keys(seed: int, dataset: str, worker_id: int, iterations: int) -> list[FieldKey]:
    group = f"s{seed}.{dataset}.w{worker_id}"
    return [FieldKey(group, f"f{i:06d}") for i in range(iterations)]


def key_hash(key: FieldKey) -> int:
    return int.from_bytes(hashlib.blake2b(key.serialize().encode(), digest_size=8).digest(), "little")


def base_buffer(seed: int, dataset: str, worker_id: int, size: int) -> bytes:
    """Per-worker pseudorandom bytes every payload of that worker is cut from."""
    rng = random.Random(f"{seed}/{dataset}/{worker_id}")
    return rng.randbytes(size)


def make_payload(base: bytes, key: FieldKey, size: int) -> bytes:
    """Build a ``size``-byte payload for ``key``.

    Payloads large enough carry a header with the key hash, total length
    and CRC-32 of the body; the body is ``base`` with its last eight bytes
    replaced by the key hash so no two fields share a body. Smaller
    payloads are a keyed digest and are validated by recomputation.
    """
    if size < HEADER_SIZE:
        return _small_payload(key, size)
    return PayloadFactory.from_base(base, size).payload(key)


class PayloadFactory:
    """Per-worker payload source that avoids re-hashing the shared body.

    The key stamp sits at the end of the body, so its CRC-32 continues
    from a checksum of the common prefix computed once.
    """

    def __init__(self, seed: int, dataset: str, worker_id: int, size: int):
        self._init(base_buffer(seed, dataset, worker_id, size), size)

    @classmethod
    def from_base(cls, base: bytes, size: int) -> "PayloadFactory":
        self = cls.__new__(cls)
        self._init(base, size)
        return self

    def _init(self, base: bytes, size: int) -> None:
        self.size = size
        body_len = max(size - HEADER_SIZE, 0)
        self._stamp_len = min(8, body_len)
        self._prefix = bytes(base[:body_len - self._stamp_len])
        self._prefix_crc = zlib.crc32(self._prefix)

    def _parts(self, key: FieldKey) -> tuple[bytes, bytes]:
        h = key_hash(key)
        stamp = h.to_bytes(8, "little")[:self._stamp_len]
        return HEADER.pack(MAGIC, h, self.size, zlib.crc32(stamp, self._prefix_crc)), stamp

    def payload(self, key: FieldKey) -> bytes:
        if self.size < HEADER_SIZE:
            return _small_payload(key, self.size)
        header, stamp = self._parts(key)
        return b"".join((header, self._prefix, stamp))

    def check(self, data: bytes, key: FieldKey) -> None:
        """Raise ``StoreError(Corrupt)`` unless ``data`` is exactly the payload for ``key``.

        Compares piecewise in place so no expected copy is built.
        """
        if self.size < HEADER_SIZE:
            same = data == _small_payload(key, self.size)
        else:
            header, stamp = self._parts(key)
            same = (
                len(data) == self.size
                and data.startswith(header)
                and data.startswith(self._prefix, HEADER_SIZE)
                and data.endswith(stamp)
            )
        if not same:
            validate_payload(data, key, self.size)
            raise StoreError(ErrorKind.CORRUPT, f"{key}: payload differs from what was written")


def _small_payload(key: FieldKey, size: int) -> bytes:
    if size == 0:
        return b""
    return hashlib.blake2b(key.serialize().encode(), digest_size=size).digest()


def validate_payload(data: bytes, key: FieldKey, size: int) -> None:
    """Raise ``StoreError(Corrupt)`` unless ``data`` is the payload for ``key``."""
    if len(data) != size:
        raise StoreError(ErrorKind.CORRUPT, f"{key}: got {len(data)} bytes, expected {size}")
    if size < HEADER_SIZE:
        if data != _small_payload(key, size):
            raise StoreError(ErrorKind.CORRUPT, f"{key}: payload mismatch")
        return
    magic, h, length, crc = HEADER.unpack_from(data)
    if magic != MAGIC or h != key_hash(key) or length != size:
        raise StoreError(ErrorKind.CORRUPT, f"{key}: bad payload header")
    if zlib.crc32(memoryview(data)[HEADER_SIZE:]) != crc:
        raise StoreError(ErrorKind.CORRUPT, f"{key}: CRC mismatch")


def payload_checksum(data: bytes) -> int:
    return zlib.crc32(data)
