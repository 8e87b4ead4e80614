import itertools
import math

import numpy as np
import pytest

from backend.litehetnet.combinatorics import (
    composition_table,
    compositions3,
    log_bell_table,
    multinomial,
    partition_table,
    weighted_partitions,
)

PARTITION_COUNTS = [1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]


def _brute_partitions(n):
    ranges = [range(n // a + 1) for a in range(1, n + 1)]
    return {
        m for m in itertools.product(*ranges) if sum((a + 1) * c for a, c in enumerate(m)) == n
    }


def test_compositions_lexicographic():
    assert compositions3(0) == [(0, 0, 0)]
    assert compositions3(1) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


@pytest.mark.parametrize("n", range(0, 9))
def test_composition_count_and_sums(n):
    items = compositions3(n)
    assert len(items) == (n + 1) * (n + 2) // 2
    assert all(sum(c) == n and min(c) >= 0 for c in items)
    assert len(set(items)) == len(items)


@pytest.mark.parametrize("n", range(0, 11))
def test_weighted_partition_counts(n):
    items = weighted_partitions(n)
    assert len(items) == PARTITION_COUNTS[n]
    assert all(p.order == n for p in items)


def test_weighted_partitions_of_zero():
    assert [p.m for p in weighted_partitions(0)] == [()]


@pytest.mark.parametrize("n", range(1, 8))
def test_weighted_partitions_match_brute_force(n):
    assert {p.m for p in weighted_partitions(n)} == _brute_partitions(n)


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        compositions3(-1)
    with pytest.raises(ValueError):
        weighted_partitions(-2)


def test_multinomial():
    assert multinomial(4, 2, 1, 1) == 12
    assert multinomial(0, 0, 0, 0) == 1
    with pytest.raises(ValueError):
        multinomial(4, 2, 1, 0)
    for n in range(7):
        assert sum(multinomial(n, *c) for c in compositions3(n)) == 3**n


def test_composition_table_weights():
    rows, log_weight = composition_table(4)
    for row, value in zip(rows, log_weight):
        expected = multinomial(4, *row) / math.factorial(4)
        assert math.exp(value) == pytest.approx(expected, rel=1e-13)
    assert not rows.flags.writeable


def test_partition_table_coefficients():
    counts, sizes, log_coef = partition_table(5)
    for m, size, value in zip(counts, sizes, log_coef):
        expected = math.factorial(5) / math.prod(math.factorial(c) for c in m)
        assert math.exp(value) == pytest.approx(expected, rel=1e-13)
        assert size == sum(m)


def test_log_bell_table_matches_brute_force():
    weights = np.array([0.5, 2.0, 1.5, 0.0, 3.0, 0.7])
    with np.errstate(divide="ignore"):
        table = log_bell_table(np.log(weights), 6)
    for n in range(7):
        expected = np.zeros(7)
        for p in weighted_partitions(n):
            coef = math.factorial(n) / math.prod(math.factorial(c) for c in p.m)
            expected[p.size] += coef * math.prod(w**c for w, c in zip(weights, p.m))
        np.testing.assert_allclose(np.exp(table[n]), expected, rtol=1e-12, atol=0)


def test_log_bell_table_needs_enough_weights():
    with pytest.raises(ValueError):
        log_bell_table(np.zeros(2), 3)
