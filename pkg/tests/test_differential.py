import time
from collections import Counter

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fieldstore.memory import MemoryBackend
from fieldstore.posix import PosixBackend
from fieldstore.verify import CONTAINERS, KEYS, OIDS, OP_WEIGHTS, POOLS, apply_op, differential_fuzz, generate_ops


def test_generated_ops_are_seeded():
    assert generate_ops(42, 500) == generate_ops(42, 500)
    assert generate_ops(42, 500) != generate_ops(43, 500)


def test_fuzz_10000_ops_no_divergence(tmp_path):
    t0 = time.monotonic()
    result = differential_fuzz(42, 10_000, tmp_path)
    assert time.monotonic() - t0 < 60
    assert result.divergences == []
    assert result.layout_conforms
    assert "UNK" not in result.posix_dump


def test_fuzz_exercises_every_error_kind():
    ops = generate_ops(42, 10_000)
    b = MemoryBackend()
    outcomes = Counter()
    for op in ops:
        status, val = apply_op(b, op)
        outcomes[val if status == "err" else "ok"] += 1
    assert {"ok", "PoolNotFound", "ContainerNotFound", "ObjectNotFound", "KeyNotFound",
            "AlreadyExists", "InvalidName", "InvalidObjectId"} <= set(outcomes)


op_strategy = st.tuples(
    st.sampled_from(sorted(OP_WEIGHTS)),
    st.sampled_from(POOLS[:3] + POOLS[3:4]),
    st.sampled_from(CONTAINERS),
    st.sampled_from(OIDS),
    st.sampled_from(KEYS),
    st.binary(max_size=32),
)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(op_strategy, max_size=60))
def test_random_sequences_agree(tmp_path_factory, ops):
    posix = PosixBackend(tmp_path_factory.mktemp("fz"), create=True)
    memory = MemoryBackend()
    for op in ops:
        assert apply_op(posix, op) == apply_op(memory, op), op
    assert posix.dump() == memory.dump()
