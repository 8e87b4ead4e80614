# backend/litehetnet/hetnet_enums.py

from enum import Enum


class SimulationMode(Enum):
    """蒙特卡洛调度用户的生成方式"""

    Approximate = "approx"  # 各层调度用户近似为独立 PPP
    Full = "full"  # 用户 PPP + 每个基站均匀调度一个关联用户


class SweepAxis(Enum):
    """参数扫描的坐标轴"""

    BetaDb = "beta_db"
    T1 = "t1"
    T2 = "t2"
    TJoint = "t_joint"
    U = "u"


class EngineKind(Enum):
    """计算引擎"""

    Analytical = "analytical"
    MonteCarlo = "montecarlo"
    Asymptotic = "asymptotic"


class FigureKind(Enum):
    """可生成的图数据"""

    Fig2a = "fig2a"  # 覆盖概率 vs IN 阈值
    Fig2b = "fig2b"  # 小 β 下的中断概率（对数坐标）
