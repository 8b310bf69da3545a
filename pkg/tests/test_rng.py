import numpy as np

from mmtlab.rng import (
    BLOCK,
    block_sizes,
    check_seed,
    mean_and_stderr,
    substream,
    tree_sum,
)


def test_substream_deterministic():
    a = substream(42, 2, 0).standard_normal(16)
    b = substream(42, 2, 0).standard_normal(16)
    assert np.array_equal(a, b)


def test_substream_blocks_differ():
    a = substream(42, 2, 0).standard_normal(16)
    b = substream(42, 2, 1).standard_normal(16)
    c = substream(42, 3, 0).standard_normal(16)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_block_sizes_partition():
    assert sum(block_sizes(10)) == 10
    assert sum(block_sizes(BLOCK * 3 + 17)) == BLOCK * 3 + 17
    assert all(s <= BLOCK for s in block_sizes(BLOCK * 3 + 17))


def test_tree_sum_deterministic_and_close_to_naive():
    rng = np.random.default_rng(0)
    parts = [rng.standard_normal(4) for _ in range(13)]
    t1 = tree_sum([p.copy() for p in parts])
    t2 = tree_sum([p.copy() for p in parts])
    assert np.array_equal(t1, t2)
    assert np.allclose(t1, np.sum(parts, axis=0), atol=1e-12)


def test_check_seed_distinct():
    seen = {check_seed(7, f"A{i}") for i in range(1, 15)}
    assert len(seen) == 14
    assert check_seed(7, "A1") != check_seed(8, "A1")
    assert check_seed(7, "A1") == check_seed(7, "A1")


def test_mean_and_stderr():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    m, se = mean_and_stderr(x.sum(), (x * x).sum(), 4)
    assert m == 2.5
    assert se == np.std(x, ddof=1) / 2.0
