import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldstore.api import ErrorKind, StoreError
from fieldstore.fieldio import FieldKey
from fieldstore.workload import HEADER_SIZE, PayloadFactory, base_buffer, field_keys, make_payload, validate_payload


def test_keys_are_deterministic_and_distinct():
    keys = field_keys(0, "a", 3, 100)
    assert keys == field_keys(0, "a", 3, 100)
    assert len(set(keys)) == 100
    assert keys[0] == FieldKey("s0.a.w3", "f000000")
    assert not set(keys) & set(field_keys(0, "a", 4, 100))


def test_base_buffer_seeded():
    assert base_buffer(1, "a", 0, 64) == base_buffer(1, "a", 0, 64)
    assert base_buffer(1, "a", 0, 64) != base_buffer(2, "a", 0, 64)


@given(st.integers(0, 4096))
def test_payload_validates(size):
    key = FieldKey("g", "f")
    data = make_payload(base_buffer(0, "x", 0, size), key, size)
    assert len(data) == size
    validate_payload(data, key, size)


@pytest.mark.parametrize("size", [8, HEADER_SIZE, HEADER_SIZE + 1, 1 << 20])
def test_payload_rejects_other_key_or_flip(size):
    key, other = FieldKey("g", "f0"), FieldKey("g", "f1")
    base = base_buffer(0, "x", 0, size)
    data = make_payload(base, key, size)
    assert data != make_payload(base, other, size)
    for bad, k, n in [(data, other, size), (data[:-1], key, size),
                      (data[:-1] + bytes([data[-1] ^ 1]), key, size)]:
        with pytest.raises(StoreError) as info:
            validate_payload(bad, k, n)
        assert info.value.kind is ErrorKind.CORRUPT


@pytest.mark.parametrize("size", [0, 5, HEADER_SIZE, HEADER_SIZE + 3, HEADER_SIZE + 8, 1 << 20])
def test_factory_payloads_carry_valid_crc(size):
    factory = PayloadFactory(0, "x", 2, size)
    key = FieldKey("g", "f7")
    data = factory.payload(key)
    assert data == make_payload(base_buffer(0, "x", 2, size), key, size)
    validate_payload(data, key, size)
    factory.check(data, key)


def test_factory_check_rejects():
    factory = PayloadFactory(0, "x", 2, 4096)
    key = FieldKey("g", "f7")
    data = bytearray(factory.payload(key))
    data[100] ^= 0xFF
    with pytest.raises(StoreError) as info:
        factory.check(bytes(data), key)
    assert info.value.kind is ErrorKind.CORRUPT
    with pytest.raises(StoreError):
        factory.check(factory.payload(FieldKey("g", "f8")), key)


@given(st.integers(0, 200), st.integers(0, 199), st.integers(1, 255))
def test_factory_check_catches_any_single_byte_flip(size, pos, delta):
    factory = PayloadFactory(1, "y", 0, size)
    key = FieldKey("g", "f")
    data = bytearray(factory.payload(key))
    if pos >= size:
        return
    data[pos] = (data[pos] + delta) % 256
    with pytest.raises(StoreError):
        factory.check(bytes(data), key)
