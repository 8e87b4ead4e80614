"""
Lite HetNet - 两层异构网络中用户中心干扰置零的实验台

解析引擎按随机几何推导的覆盖概率公式计算，蒙特卡洛引擎做端到端网络仿真，
两者互相校验；另有小 β 下的渐近分析和最优 IN 自由度选择。
"""

__version__ = "1.0.0"

# 导入主要类
from backend.litehetnet.nulling_lab import NullingLab, SweepSpec
from backend.litehetnet.netconfig import InParams, NetworkConfig, ParameterBundle, load_config
from backend.litehetnet.hetnet_enums import EngineKind, FigureKind, SimulationMode, SweepAxis

__all__ = [
    'NullingLab',
    'SweepSpec',
    'NetworkConfig',
    'InParams',
    'ParameterBundle',
    'load_config',
    'EngineKind',
    'FigureKind',
    'SimulationMode',
    'SweepAxis',
]
