"""
随机数流工具

每次蒙特卡洛试验使用由 (master_seed, trial_index) 确定的独立随机流，
结果与进程数和调度顺序无关。
"""

from typing import List, Tuple

import numpy as np


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """
    为第 trial_index 次试验构造计数器型随机数生成器

    :param master_seed: 主种子（64 位无符号整数）
    :param trial_index: 试验序号
    :return: Philox 生成器
    """
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))
    return np.random.Generator(np.random.Philox(seq))


def chunk_ranges(total: int, chunk_size: int) -> List[Tuple[int, int]]:
    """
    把 [0, total) 切成连续的区块

    :param total: 总数
    :param chunk_size: 区块大小
    :return: (start, stop) 列表，按顺序排列
    """
    if chunk_size < 1:
        raise ValueError("chunk_size 必须为正")
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]
