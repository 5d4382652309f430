from __future__ import annotations

import numpy as np
import pytest

from core.n2_1_streams import STREAM_BLOCK, batch_slices, blocked, default_batch_size, default_workers, stream


def test_same_key_same_stream():
    a = stream(7, "solver", 3, 4).standard_normal(16)
    b = stream(7, "solver", 3, 4).standard_normal(16)
    assert np.array_equal(a, b)


@pytest.mark.parametrize(
    "other",
    [(8, "solver", 3, 4), (7, "klub", 3, 4), (7, "solver", 4, 3), (7, "solver", 3, 4, 0), (7, "solver", 3)],
)
def test_different_keys_differ(other):
    base = stream(7, "solver", 3, 4).standard_normal(16)
    assert not np.array_equal(base, stream(*other).standard_normal(16))


@pytest.mark.parametrize("seed, tag, counters", [(-1, "data", ()), (1.5, "data", ()), (0, "nope", ()), (0, "data", (-2,))])
def test_bad_keys_rejected(seed, tag, counters):
    with pytest.raises(ValueError):
        stream(seed, tag, *counters)


def test_batch_slices_cover_range():
    slices = batch_slices(10, 4)
    assert slices == [(0, 4), (4, 8), (8, 10)]
    assert batch_slices(3, 100) == [(0, 3)]
    with pytest.raises(ValueError):
        batch_slices(0, 4)


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("AYS_WORKERS", "-1")
    monkeypatch.setenv("AYS_BATCH_SIZE", "512")
    assert default_workers() == -1
    assert default_batch_size() == 512

    monkeypatch.setenv("AYS_WORKERS", "0")
    with pytest.raises(ValueError):
        default_workers()
    monkeypatch.setenv("AYS_BATCH_SIZE", "0")
    with pytest.raises(ValueError):
        default_batch_size()


def test_blocked_rows_ignore_the_split():
    draw = lambda rng, size: rng.standard_normal((size, 2))
    whole = blocked(4, "solver", 0, 3000, draw, 7)
    assert whole.shape == (3000, 2)
    for cut in (1, 500, STREAM_BLOCK, 2049):
        parts = np.concatenate([blocked(4, "solver", 0, cut, draw, 7), blocked(4, "solver", cut, 3000, draw, 7)])
        assert np.array_equal(parts, whole)
    assert np.array_equal(whole[:STREAM_BLOCK], draw(stream(4, "solver", 7, 0), STREAM_BLOCK))


def test_blocked_keeps_tuple_draws_aligned():
    draw = lambda rng, size: (rng.random(size), np.arange(size))
    values, index = blocked(0, "data", 1000, 1100, draw)
    assert values.shape == index.shape == (100,)
    assert np.array_equal(index, np.r_[np.arange(1000, 1024), np.arange(0, 76)])
    with pytest.raises(ValueError):
        blocked(0, "data", 5, 5, draw)
