"""Reversible mapping from arbitrary key strings to safe filenames.

Bytes in ``[A-Za-z0-9._-]`` pass through unchanged; every other byte of
the UTF-8 encoding becomes ``%XX`` with uppercase hex digits. The keys
``"."`` and ``".."`` would name directory entries that already exist, so
their dots are escaped too.
"""

from __future__ import annotations

import string

from .api import ErrorKind, StoreError, key_bytes

SAFE_BYTES = frozenset((string.ascii_letters + string.digits + "._-").encode())
_HEX = frozenset(b"0123456789ABCDEF")


def encode_name_bytes(raw: bytes) -> str:
    if raw in (b".", b".."):
        return "%2E" * len(raw)
    return "".join(chr(b) if b in SAFE_BYTES else f"%{b:02X}" for b in raw)


def decode_name_bytes(name: str) -> bytes:
    """Invert :func:`encode_name_bytes`; rejects anything it cannot produce."""
    out = bytearray()
    if not name.isascii():
        raise ValueError(f"non-ascii filename {name!r}")
    data = name.encode("ascii")
    i = 0
    while i < len(data):
        b = data[i]
        if b == 0x25:  # '%'
            pair = data[i + 1:i + 3]
            if len(pair) != 2 or not set(pair) <= _HEX:
                raise ValueError(f"bad escape in {name!r}")
            out.append(int(pair, 16))
            i += 3
        elif b in SAFE_BYTES:
            out.append(b)
            i += 1
        else:
            raise ValueError(f"unexpected byte {chr(b)!r} in {name!r}")
    raw = bytes(out)
    if encode_name_bytes(raw) != name:
        raise ValueError(f"non-canonical encoding {name!r}")
    return raw


def map_key_filename(key: str) -> str:
    return encode_name_bytes(key_bytes(key))


def unmap_key_filename(name: str) -> str:
    try:
        return decode_name_bytes(name).decode("utf-8")
    except (ValueError, UnicodeDecodeError) as exc:
        raise StoreError(ErrorKind.CORRUPT, f"undecodable key file {name!r}: {exc}") from None
