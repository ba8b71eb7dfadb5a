"""Key packing and stream independence of the counter-based generators."""

import numpy as np
import pytest

from polymix import rng


def test_pack_key_bit_layout():
    assert rng.pack_key(0) == 0
    assert rng.pack_key(5) == 5
    assert rng.pack_key(0, sub=1) == 1 << 36
    assert rng.pack_key(0, phase=1) == 1 << 56
    assert (
        rng.pack_key(3, phase=rng.PHASE_PASSAGE, sub=7)
        == (1 << 56) | (7 << 36) | 3
    )


def test_pack_key_fields_never_collide():
    gen = np.random.default_rng(711)
    seen = set()
    for _ in range(2000):
        sid = int(gen.integers(rng.MAX_STREAMS))
        sub = int(gen.integers(rng.MAX_SUB))
        phase = int(gen.integers(256))
        key = rng.pack_key(sid, phase, sub)
        assert key >> 56 == phase
        assert (key >> 36) & (rng.MAX_SUB - 1) == sub
        assert key & (rng.MAX_STREAMS - 1) == sid
        seen.add((sid, sub, phase, key))
    keys = {k for _, _, _, k in seen}
    assert len(keys) == len(seen)


def test_pack_key_range_errors():
    with pytest.raises(ValueError):
        rng.pack_key(-1)
    with pytest.raises(ValueError):
        rng.pack_key(rng.MAX_STREAMS)
    with pytest.raises(ValueError):
        rng.pack_key(0, sub=rng.MAX_SUB)
    with pytest.raises(ValueError):
        rng.pack_key(0, phase=256)


def test_stream_reproducible():
    a = rng.stream(1234, 7, rng.PHASE_BURN, sub=2).random(64)
    b = rng.stream(1234, 7, rng.PHASE_BURN, sub=2).random(64)
    assert np.array_equal(a, b)


def test_stream_distinct_identities_differ():
    base = rng.stream(1234, 7).random(32)
    for other in (
        rng.stream(1235, 7),
        rng.stream(1234, 8),
        rng.stream(1234, 7, phase=rng.PHASE_PASSAGE),
        rng.stream(1234, 7, sub=1),
    ):
        assert not np.array_equal(base, other.random(32))


def test_streams_pass_pairwise_correlation_screen():
    # crude independence check: consecutive stream ids stay uncorrelated
    n = 4096
    xs = [rng.stream(99, i).random(n) - 0.5 for i in range(8)]
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            r = float(np.dot(xs[i], xs[j]) / n)
            assert abs(r) < 5.0 / np.sqrt(12.0 * n)


def test_rng_stream_dataclass_replays():
    spec = rng.RngStream(42, 11, rng.PHASE_SERIES, 3)
    a = spec.generator().standard_normal(16)
    b = rng.stream(42, 11, rng.PHASE_SERIES, 3).standard_normal(16)
    assert np.array_equal(a, b)
