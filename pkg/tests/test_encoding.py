from urllib.parse import quote, unquote_to_bytes

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldstore.api import ErrorKind, StoreError
from fieldstore.encoding import decode_name_bytes, encode_name_bytes, map_key_filename, unmap_key_filename


def oracle(raw: bytes) -> str:
    # urllib leaves '~' alone; the filename alphabet does not
    if raw in (b".", b".."):
        return "%2E" * len(raw)
    return quote(raw, safe="").replace("~", "%7E")


@pytest.mark.parametrize("b", range(256))
def test_every_byte_matches_urllib(b):
    raw = bytes([b])
    assert encode_name_bytes(raw) == oracle(raw)
    assert decode_name_bytes(encode_name_bytes(raw)) == raw


def test_known_examples():
    assert map_key_filename("a/b c") == "a%2Fb%20c"
    assert map_key_filename("step.0012") == "step.0012"
    assert map_key_filename("é") == "%C3%A9"
    assert map_key_filename("%") == "%25"
    assert map_key_filename(".") == "%2E"
    assert map_key_filename("..") == "%2E%2E"
    assert map_key_filename("...") == "..."


@given(st.binary(max_size=64))
def test_encode_matches_oracle_and_inverts(raw):
    name = encode_name_bytes(raw)
    assert name == oracle(raw)
    assert unquote_to_bytes(name) == raw
    assert decode_name_bytes(name) == raw


@given(st.binary(max_size=64), st.binary(max_size=64))
def test_injective(a, b):
    if a != b:
        assert encode_name_bytes(a) != encode_name_bytes(b)


@given(st.binary(min_size=1, max_size=64))
def test_output_is_a_safe_filename(raw):
    name = encode_name_bytes(raw)
    assert "/" not in name and "\x00" not in name
    assert name not in (".", "..")
    assert set(name) <= set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789._-%")


@given(st.text(min_size=1, max_size=40))
def test_key_roundtrip(key):
    try:
        name = map_key_filename(key)
    except StoreError as exc:
        # lone surrogates have no UTF-8 form
        assert exc.kind is ErrorKind.INVALID_NAME
        return
    assert unmap_key_filename(name) == key


@pytest.mark.parametrize("name", ["%2e", "%2", "%GG", "a b", "%41", ".", "..", "~", "é"])
def test_decode_rejects_non_canonical(name):
    with pytest.raises(ValueError):
        decode_name_bytes(name)


def test_unmap_reports_corrupt():
    with pytest.raises(StoreError) as info:
        unmap_key_filename("%ZZ")
    assert info.value.kind is ErrorKind.CORRUPT
    with pytest.raises(StoreError) as info:
        unmap_key_filename("%FF")
    assert info.value.kind is ErrorKind.CORRUPT
