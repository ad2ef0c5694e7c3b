from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import bridgesim
import streams


def test_stream_is_keyed() -> None:
    a = streams.stream(7, "lattice", 3).standard_normal(5)
    b = streams.stream(7, "lattice", 3).standard_normal(5)
    c = streams.stream(7, "lattice", 4).standard_normal(5)
    d = streams.stream(7, "polymer", 3).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_blocks() -> None:
    assert streams.blocks(2500, 1000) == [(0, 1000), (1, 1000), (2, 500)]
    assert streams.blocks(0) == []
    with pytest.raises(ValueError):
        streams.blocks(-1)


def test_run_blocks_is_independent_of_the_pool() -> None:
    func = lambda index, size: streams.stream(5, "block", index).random(size).sum()
    serial = streams.run_blocks(func, 3500, block_size=1000)
    with ThreadPoolExecutor(max_workers=3) as pool:
        pooled = streams.run_blocks(func, 3500, executor=pool, block_size=1000)
    assert serial == pooled
    assert len(serial) == 4


def test_estimates_are_bit_identical_across_thread_counts() -> None:
    serial = bridgesim.acceptance_probability(1.0, (0.5, -0.5), (0.5, -0.5), 20, 3000, seed=9)
    with ThreadPoolExecutor(max_workers=4) as pool:
        pooled = bridgesim.acceptance_probability(1.0, (0.5, -0.5), (0.5, -0.5), 20, 3000, seed=9, executor=pool)
    assert serial == pooled


def test_run_ordered_keeps_order() -> None:
    with ThreadPoolExecutor(max_workers=2) as pool:
        assert streams.run_ordered(lambda v: v * v, [3, 1, 2], pool) == [9, 1, 4]
    assert streams.run_ordered(lambda v: -v, [1, 2]) == [-1, -2]
