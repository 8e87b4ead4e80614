"""
组合枚举

三元组合 𝒩_n = {(n1,n2,n3): n1+n2+n3 = n}、加权划分
ℳ_n = {(m_a): Σ_{a=1}^{n} a·m_a = n} 以及多项式系数。
枚举结果按 n 缓存，缓存内容为不可变元组/只读数组，可被多线程并发读取。
"""

import math
from functools import lru_cache
from typing import Iterator, List, NamedTuple, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp


class Composition3(NamedTuple):
    """(n1, n2, n3)，三个干扰分量各自的求导阶数"""

    n1: int
    n2: int
    n3: int


class WeightedPartition(NamedTuple):
    """m = (m_1, ..., m_n)，满足 Σ a·m_a = n"""

    m: Tuple[int, ...]

    @property
    def size(self) -> int:
        """Σ m_a"""
        return sum(self.m)

    @property
    def order(self) -> int:
        """Σ a·m_a"""
        return sum((a + 1) * count for a, count in enumerate(self.m))


def _check_order(n: int) -> None:
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")


@lru_cache(maxsize=None)
def _compositions3(n: int) -> Tuple[Composition3, ...]:
    return tuple(
        Composition3(first, second, n - first - second)
        for first in range(n + 1)
        for second in range(n - first + 1)
    )


def compositions3(n: int) -> List[Composition3]:
    """
    按字典序枚举 n 的全部三元组合

    :param n: n ≥ 0
    :return: C(n+2, 2) 个组合
    """
    _check_order(n)
    return list(_compositions3(n))


def _int_partitions(n: int, smallest: int = 1) -> Iterator[Tuple[int, ...]]:
    yield (n,)
    for part in range(smallest, n // 2 + 1):
        for rest in _int_partitions(n - part, part):
            yield (part,) + rest


@lru_cache(maxsize=None)
def _weighted_partitions(n: int) -> Tuple[WeightedPartition, ...]:
    if n == 0:
        return (WeightedPartition(()),)
    result = []
    for parts in _int_partitions(n):
        counts = [0] * n
        for part in parts:
            counts[part - 1] += 1
        result.append(WeightedPartition(tuple(counts)))
    return tuple(result)


def weighted_partitions(n: int) -> List[WeightedPartition]:
    """
    枚举 Σ_{a=1}^{n} a·m_a = n 的全部非负整数解

    每个解对应 n 的一个整数划分（m_a 为部件 a 的重数），总数为 p(n)。

    :param n: n ≥ 0
    :return: 解的列表；n = 0 时为 [()]
    """
    _check_order(n)
    return list(_weighted_partitions(n))


def multinomial(n: int, n1: int, n2: int, n3: int) -> int:
    """
    多项式系数 n! / (n1! n2! n3!)，精确整数运算

    :raises ValueError: n1 + n2 + n3 != n 或存在负数
    """
    if min(n1, n2, n3) < 0 or n1 + n2 + n3 != n:
        raise ValueError(f"composition mismatch: {n1}+{n2}+{n3} != {n}")
    return math.comb(n, n1) * math.comb(n - n1, n2)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=None)
def composition_table(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    𝒩_n 的数组形式

    :return: (组合矩阵 C×3, log(multinomial / n!))
    """
    _check_order(n)
    rows = np.array(_compositions3(n), dtype=int).reshape(-1, 3)
    log_weight = -gammaln(rows + 1).sum(axis=1)
    return _readonly(rows), _readonly(log_weight)


@lru_cache(maxsize=None)
def partition_table(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ℳ_n 的数组形式

    :return: (重数矩阵 P×n, 每行的 Σ m_a, log(n! / Π m_a!))
    """
    _check_order(n)
    if n == 0:
        counts = np.zeros((1, 0), dtype=int)
    else:
        counts = np.array([p.m for p in _weighted_partitions(n)], dtype=int)
    sizes = counts.sum(axis=1)
    log_coef = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)
    return _readonly(counts), _readonly(sizes), _readonly(log_coef)


def log_bell_table(log_weights: np.ndarray, n_max: int) -> np.ndarray:
    """
    按划分大小分组的对数部分 Bell 和

    table[n, l] = log Σ_{m∈ℳ_n, Σm_a = l} n!/Π m_a! · Π w_a^{m_a}，
    其中 log_weights[a-1] = log w_a（可以为 -inf）。空和记为 -inf。

    :param log_weights: 长度至少为 n_max 的对数权重
    :param n_max: 最高阶数
    :return: (n_max+1) × (n_max+1) 数组
    """
    log_weights = np.asarray(log_weights, dtype=float)
    if log_weights.size < n_max:
        raise ValueError(f"need {n_max} weights, got {log_weights.size}")

    table = np.full((n_max + 1, n_max + 1), -np.inf)
    table[0, 0] = 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        for n in range(1, n_max + 1):
            counts, sizes, log_coef = partition_table(n)
            weighted = np.where(counts > 0, counts * log_weights[:n], 0.0)
            terms = log_coef + weighted.sum(axis=1)
            for size in np.unique(sizes):
                table[n, size] = logsumexp(terms[sizes == size])
    return table
