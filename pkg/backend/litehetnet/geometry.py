# backend/litehetnet/geometry.py

import logging
import math
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import integrate
from scipy.spatial import cKDTree

from backend.litehetnet.constants import (
    DEFAULT_WINDOW_CONSTANT,
    MAX_WINDOW_FACTOR,
    WINDOW_TRUNCATION_RATIO,
)
from backend.litehetnet.netconfig import NetworkConfig
from backend.litehetnet.specfun import (
    DEFAULT_SETTINGS,
    QuadratureSettings,
    semi_infinite_integral,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class EmptyTierError(Exception):
    """仿真窗口内某一层没有基站"""

    pass


class PointSet(BaseModel):
    """以原点为圆心、半径为 window_radius 的圆盘内的点集"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray
    window_radius: float

    @field_validator("points", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=float).reshape(-1, 2)

    @model_validator(mode="after")
    def _check_window(self) -> "PointSet":
        if self.window_radius <= 0:
            raise ValueError("window_radius must be positive")
        if self.points.size and np.max(np.hypot(self.points[:, 0], self.points[:, 1])) > self.window_radius * (1 + 1e-12):
            raise ValueError("all points must lie inside the window")
        return self

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def distances(self, location: Sequence[float] = (0.0, 0.0)) -> np.ndarray:
        """各点到 location 的距离"""
        delta = self.points - np.asarray(location, dtype=float)
        return np.hypot(delta[:, 0], delta[:, 1])


class Association(BaseModel):
    """一个用户的关联结果"""

    model_config = ConfigDict(frozen=True)

    tier: int
    serving_index: int
    serving_distance: float

    @field_validator("tier")
    @classmethod
    def _check_tier(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError("tier must be 1 or 2")
        return value


class AssociationTable(NamedTuple):
    """一批用户的关联结果（逐元素对应）"""

    tier: np.ndarray
    serving_index: np.ndarray
    serving_distance: np.ndarray


class ScheduledUsers(BaseModel):
    """本时隙被调度的用户及其关联；第 0 个为位于原点的典型用户"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    locations: np.ndarray
    tier: np.ndarray
    serving_index: np.ndarray
    serving_distance: np.ndarray

    @model_validator(mode="after")
    def _check_lengths(self) -> "ScheduledUsers":
        sizes = {len(self.locations), len(self.tier), len(self.serving_index), len(self.serving_distance)}
        if len(sizes) != 1:
            raise ValueError("scheduled-user arrays must have equal length")
        return self

    @property
    def count(self) -> int:
        return int(len(self.tier))


def sample_ppp(density: float, window_radius: float, rng: np.random.Generator) -> PointSet:
    """
    在圆盘内采样齐次泊松点过程

    :param density: 密度 [nodes/m²]
    :param window_radius: 圆盘半径 [m]
    :param rng: 随机数生成器
    :return: 点集，点数 ~ Poisson(density·π·R²)，位置在圆盘内均匀分布
    """
    if density <= 0 or window_radius <= 0:
        raise ValueError("density and window_radius must be positive")
    count = rng.poisson(density * math.pi * window_radius**2)
    radius = window_radius * np.sqrt(rng.random(count))
    angle = 2.0 * math.pi * rng.random(count)
    points = np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))
    return PointSet(points=points, window_radius=window_radius)


def _log_received_power(j: int, distance: ArrayLike, cfg: NetworkConfig) -> ArrayLike:
    with np.errstate(divide="ignore"):
        return math.log(cfg.power(j)) - cfg.alpha(j) * np.log(distance)


def associate(
    user_location: Sequence[float], macro: PointSet, pico: PointSet, cfg: NetworkConfig
) -> Association:
    """
    按最大长期平均接收功率 P_j·Z_j^(-α_j) 关联用户；相等时选宏基站

    :raises EmptyTierError: 某一层没有基站
    """
    if macro.count == 0 or pico.count == 0:
        raise EmptyTierError("宏基站或微基站点集为空")
    d1 = macro.distances(user_location)
    d2 = pico.distances(user_location)
    i1, i2 = int(np.argmin(d1)), int(np.argmin(d2))
    if _log_received_power(1, d1[i1], cfg) >= _log_received_power(2, d2[i2], cfg):
        return Association(tier=1, serving_index=i1, serving_distance=float(d1[i1]))
    return Association(tier=2, serving_index=i2, serving_distance=float(d2[i2]))


def associate_many(
    locations: np.ndarray, macro: PointSet, pico: PointSet, cfg: NetworkConfig
) -> AssociationTable:
    """associate 的批量版本，用 k-d 树查找各层最近基站"""
    if macro.count == 0 or pico.count == 0:
        raise EmptyTierError("宏基站或微基站点集为空")
    locations = np.asarray(locations, dtype=float).reshape(-1, 2)
    z1, i1 = cKDTree(macro.points).query(locations)
    z2, i2 = cKDTree(pico.points).query(locations)
    macro_wins = _log_received_power(1, z1, cfg) >= _log_received_power(2, z2, cfg)
    return AssociationTable(
        tier=np.where(macro_wins, 1, 2).astype(np.int8),
        serving_index=np.where(macro_wins, i1, i2).astype(np.int64),
        serving_distance=np.where(macro_wins, z1, z2).astype(float),
    )


def _association_rate(j: int, y: ArrayLike, cfg: NetworkConfig) -> ArrayLike:
    # π Σ_k λ_k (P_k/P_j)^(2/α_k) y^(2α_j/α_k)
    total = 0.0
    for k in (1, 2):
        scale = (cfg.power(k) / cfg.power(j)) ** (2.0 / cfg.alpha(k))
        total = total + cfg.density(k) * scale * np.power(y, 2.0 * cfg.alpha(j) / cfg.alpha(k))
    return math.pi * total


def serving_log_envelope(
    j: int, cfg: NetworkConfig, extra_power: float = 0.0
) -> Callable[[np.ndarray], np.ndarray]:
    """y^(1+extra_power)·exp(-π Σ ...) 的对数，用作积分截断包络"""

    def log_envelope(y: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", over="ignore"):
            return (1.0 + extra_power) * np.log(y) - _association_rate(j, y, cfg)

    return log_envelope


@lru_cache(maxsize=512)
def _tier_probability(j: int, cfg: NetworkConfig, settings: QuadratureSettings) -> float:
    integral = semi_infinite_integral(
        lambda y: y * math.exp(-_association_rate(j, y, cfg)),
        settings,
        log_envelope=serving_log_envelope(j, cfg),
    )
    return 2.0 * math.pi * cfg.density(j) * integral


def tier_probability(
    j: int, cfg: NetworkConfig, settings: Optional[QuadratureSettings] = None
) -> float:
    """
    第 j 层的关联概率 𝒜_j

    𝒜_j = 2πλ_j ∫ y·exp(-π Σ_k λ_k (P_k/P_j)^(2/α_k) y^(2α_j/α_k)) dy
    """
    if j not in (1, 2):
        raise ValueError(f"tier must be 1 or 2, got {j}")
    return _tier_probability(j, cfg, settings or DEFAULT_SETTINGS)


def serving_distance_pdf(
    j: int, y: ArrayLike, cfg: NetworkConfig, settings: Optional[QuadratureSettings] = None
) -> ArrayLike:
    """
    第 j 层用户到服务基站距离 Y_j 的概率密度

    :param j: 层编号
    :param y: 距离（可为数组），y ≤ 0 处密度为 0
    :return: f_{Y_j}(y)
    """
    a_j = tier_probability(j, cfg, settings)
    y_arr = np.asarray(y, dtype=float)
    safe = np.maximum(y_arr, 0.0)
    values = np.where(
        y_arr > 0,
        2.0 * math.pi * cfg.density(j) / a_j * safe * np.exp(-_association_rate(j, safe, cfg)),
        0.0,
    )
    if values.ndim == 0:
        return float(values)
    return values


def serving_distance_cdf(
    j: int, y: float, cfg: NetworkConfig, settings: Optional[QuadratureSettings] = None
) -> float:
    """Pr(Y_j ≤ y)"""
    if y <= 0:
        return 0.0
    settings = settings or DEFAULT_SETTINGS
    value, _ = integrate.quad(
        lambda t: serving_distance_pdf(j, t, cfg, settings),
        0.0,
        y,
        epsabs=settings.abs_tol,
        epsrel=settings.rel_tol,
        limit=settings.max_subdivisions,
    )
    return min(max(value, 0.0), 1.0)


@lru_cache(maxsize=4096)
def _serving_distance_moment(
    j: int, exponent: float, cfg: NetworkConfig, settings: QuadratureSettings
) -> float:
    return semi_infinite_integral(
        lambda y: y**exponent * serving_distance_pdf(j, y, cfg, settings),
        settings,
        log_envelope=serving_log_envelope(j, cfg, extra_power=exponent),
        epsabs=0.0,
    )


def serving_distance_moment(
    j: int, exponent: float, cfg: NetworkConfig, settings: Optional[QuadratureSettings] = None
) -> float:
    """E[Y_j^exponent]，按 (层, 指数) 缓存"""
    if exponent <= -2:
        raise ValueError("moment diverges at the origin for exponent <= -2")
    return _serving_distance_moment(j, float(exponent), cfg, settings or DEFAULT_SETTINGS)


def simulation_window_radius(
    cfg: NetworkConfig, window_constant: float = DEFAULT_WINDOW_CONSTANT
) -> float:
    """
    蒙特卡洛仿真窗口半径

    取 C/√(πλ1) 与各层截断条件中的较大者。以 r_ref = 1/√(πλ_j) 为近场尺度，
    窗口外的期望干扰与窗口内之比为 (R/r_ref)^(2-α_j)，要求其不超过 1e-3。
    α_j 接近 2 时所需半径会爆炸，此时截断到 200·r_ref 并给出警告。
    """
    radius = window_constant / math.sqrt(math.pi * cfg.lambda1)
    for j in (1, 2):
        reference = 1.0 / math.sqrt(math.pi * cfg.density(j))
        needed = reference * (1.0 / WINDOW_TRUNCATION_RATIO) ** (1.0 / (cfg.alpha(j) - 2.0))
        cap = MAX_WINDOW_FACTOR * reference
        if needed > cap:
            logger.warning(f"⚠️ 第 {j} 层路径损耗指数接近 2，仿真窗口截断为 {cap:.1f} m，边缘效应可能偏大")
            needed = cap
        radius = max(radius, needed)
    return radius
