"""
特殊函数与半无穷区间数值积分

解析引擎的所有核函数都落在这里：上不完全贝塔函数 B'(a,b,z)、
Erlang 尾概率，以及按包络截断的 [0, ∞) 自适应积分。
"""

import logging
import math
from typing import Callable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationInfo, field_validator
from pydantic_core import PydanticCustomError
from scipy import integrate, optimize, special

from backend.litehetnet.constants import (
    DEFAULT_ABS_TOL,
    DEFAULT_MAX_SUBDIVISIONS,
    DEFAULT_REL_TOL,
    ENVELOPE_DROP,
    ENVELOPE_GRID_GROWTH,
    ENVELOPE_GRID_SIZE,
    ENVELOPE_GRID_START,
    QUAD_ERROR_SLACK,
    Z_CEIL,
    Z_FLOOR,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class QuadratureError(Exception):
    """数值积分不收敛或积分发散"""

    pass


class QuadratureSettings(BaseModel):
    """数值积分容差"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    max_subdivisions: int = DEFAULT_MAX_SUBDIVISIONS

    @field_validator("rel_tol", "abs_tol")
    @classmethod
    def _check_tol(cls, value: float, info: ValidationInfo) -> float:
        if not (math.isfinite(value) and value > 0):
            raise PydanticCustomError(
                "positive", "{field} must be positive", {"field": info.field_name}
            )
        return value

    @field_validator("max_subdivisions")
    @classmethod
    def _check_limit(cls, value: int) -> int:
        if value < 1:
            raise PydanticCustomError("count_ge_1", "max_subdivisions must be >= 1")
        return value


DEFAULT_SETTINGS = QuadratureSettings()


def _beta_tail_quad(a: float, b: float, w: float, settings: QuadratureSettings) -> float:
    # ∫_0^w t^(b-1) (1-t)^(a-1) dt，端点奇异性交给 QUADPACK 的代数权
    value, error = integrate.quad(
        lambda t: (1.0 - t) ** (a - 1.0),
        0.0,
        w,
        weight="alg",
        wvar=(b - 1.0, 0.0),
        epsabs=0.0,
        epsrel=settings.rel_tol,
        limit=settings.max_subdivisions,
    )
    if not math.isfinite(value):
        raise QuadratureError(f"B'({a}, {b}) 尾部积分失败 (w={w})")
    return value


def beta_upper_tail(
    a: float, b: ArrayLike, w: float, settings: Optional[QuadratureSettings] = None
) -> ArrayLike:
    """
    以 w = 1 - z 为自变量的上不完全贝塔函数

    B'(a, b, 1-w) = ∫_{1-w}^1 u^(a-1) (1-u)^(b-1) du = B(a,b) · I_w(b, a)。
    直接给出 w 可以避免 z → 1 时 1-z 的舍入误差。

    :param a: 第一个参数，a > 0
    :param b: 第二个参数（可为数组），b > 0
    :param w: 区间长度 1-z，0 ≤ w ≤ 1
    :param settings: 回退积分的容差
    :return: 积分值（与 b 同形）
    """
    settings = settings or DEFAULT_SETTINGS
    b_arr = np.asarray(b, dtype=float)
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if np.any(b_arr <= 0):
        raise ValueError("b must be positive, the integral diverges at u=1 otherwise")
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"w must lie in [0, 1], got {w}")

    if w == 0.0:
        values = np.zeros_like(b_arr)
    else:
        values = special.beta(a, b_arr) * special.betainc(b_arr, a, w)
        bad = ~np.isfinite(values)
        if np.any(bad):
            logger.debug(f"betainc 返回非有限值，回退到数值积分 (a={a}, w={w})")
            flat = np.atleast_1d(values).copy()
            b_flat = np.atleast_1d(b_arr)
            for idx in np.flatnonzero(np.atleast_1d(bad)):
                flat[idx] = _beta_tail_quad(a, float(b_flat[idx]), w, settings)
            values = flat.reshape(values.shape)

    if values.ndim == 0:
        return float(values)
    return values


def beta_upper(
    a: float, b: ArrayLike, z: float, settings: Optional[QuadratureSettings] = None
) -> ArrayLike:
    """
    上不完全贝塔函数 B'(a, b, z) = ∫_z^1 u^(a-1) (1-u)^(b-1) du

    :param a: a > 0
    :param b: b > 0（0 < b < 1 时 u=1 处的可积奇点由正则化不完全贝塔函数处理）
    :param z: 下限，0 < z < 1；端点附近的输入被截断到 [1e-300, 1-1e-16]
    :param settings: 回退积分的容差
    :return: 积分值
    :raises ValueError: z 在 [0, 1] 之外
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z must lie in (0, 1), got {z}")
    z = min(max(z, Z_FLOOR), Z_CEIL)
    return beta_upper_tail(a, b, 1.0 - z, settings)


def gamma_upper_tail(shape: int, x: ArrayLike) -> ArrayLike:
    """
    Gamma(shape, 1) 的互补分布函数 Pr(G > x)

    shape 为整数时即 Erlang 和 Σ_{n<shape} e^(-x) x^n / n!。

    :param shape: 正整数形状参数
    :param x: x ≥ 0
    :return: 尾概率
    """
    if int(shape) != shape or shape < 1:
        raise ValueError(f"shape must be a positive integer, got {shape}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("x must be nonnegative")
    values = special.gammaincc(int(shape), x_arr)
    if values.ndim == 0:
        return float(values)
    return values


def truncation_radius(
    log_envelope: Callable[[np.ndarray], np.ndarray], drop: float = ENVELOPE_DROP
) -> Tuple[float, float]:
    """
    找到包络的峰值位置和截断半径

    截断半径是峰值之后包络首次低于峰值 e^(-drop) 倍的位置（默认 1e-16）。

    :param log_envelope: 向量化的对数包络
    :param drop: 允许的对数下降量
    :return: (峰值位置, 截断半径)
    :raises QuadratureError: 包络在网格内没有衰减
    """
    grid = ENVELOPE_GRID_START * ENVELOPE_GRID_GROWTH ** np.arange(ENVELOPE_GRID_SIZE)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        values = np.asarray(log_envelope(grid), dtype=float)
    values = np.where(np.isnan(values), -np.inf, values)

    peak_idx = int(np.argmax(values))
    peak = values[peak_idx]
    if not math.isfinite(peak):
        raise QuadratureError("包络在整个网格上为零")
    target = peak - drop

    below = np.flatnonzero(values[peak_idx:] < target)
    if below.size == 0:
        raise QuadratureError("包络不衰减，无法截断积分区间")
    hi_idx = peak_idx + int(below[0])
    lo, hi = grid[hi_idx - 1], grid[hi_idx]

    def gap(y: float) -> float:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            value = float(log_envelope(np.asarray(y)))
        if math.isnan(value) or value == -math.inf:
            return -1e300
        return value - target

    y_max = optimize.brentq(gap, lo, hi, xtol=1e-12 * hi)
    return float(grid[peak_idx]), float(y_max)


def _resolve_envelope(
    log_envelope: Optional[Callable[[np.ndarray], np.ndarray]],
    envelope_density: Optional[float],
) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    if log_envelope is None and envelope_density is not None:
        return lambda y: -math.pi * envelope_density * np.square(y)
    return log_envelope


def semi_infinite_integral(
    f: Callable[[float], float],
    settings: Optional[QuadratureSettings] = None,
    *,
    log_envelope: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    envelope_density: Optional[float] = None,
    epsabs: Optional[float] = None,
) -> float:
    """
    计算 ∫_0^∞ f(y) dy

    给出包络时（对数包络，或高斯包络 exp(-πλy²) 的密度 λ），积分在包络
    降到峰值 1e-16 倍处截断，并把峰值位置作为断点提示给自适应积分。

    :param f: 被积函数
    :param settings: 积分容差
    :param log_envelope: 对数包络（向量化）
    :param envelope_density: 高斯包络的密度
    :param epsabs: 覆盖绝对容差（求极小量时传 0）
    :return: 积分值
    :raises QuadratureError: 在 max_subdivisions 内不收敛
    """
    settings = settings or DEFAULT_SETTINGS
    epsabs = settings.abs_tol if epsabs is None else epsabs
    envelope = _resolve_envelope(log_envelope, envelope_density)

    if envelope is None:
        upper, points = np.inf, None
    else:
        peak, upper = truncation_radius(envelope)
        points = [peak] if 0.0 < peak < upper else None

    out = integrate.quad(
        f,
        0.0,
        upper,
        epsabs=epsabs,
        epsrel=settings.rel_tol,
        limit=settings.max_subdivisions,
        points=points,
        full_output=1,
    )
    value, error = out[0], out[1]
    if len(out) > 3:
        tolerance = max(epsabs, settings.rel_tol * abs(value))
        if not math.isfinite(value) or error > QUAD_ERROR_SLACK * tolerance:
            raise QuadratureError(f"积分不收敛: {out[3]} (误差估计 {error:.3g})")
        logger.debug(f"积分提示: {out[3]}")
    return float(value)


def semi_infinite_integral_vec(
    f: Callable[[float], np.ndarray],
    settings: Optional[QuadratureSettings] = None,
    *,
    log_envelope: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    envelope_density: Optional[float] = None,
    epsabs: Optional[float] = None,
) -> np.ndarray:
    """
    向量值被积函数的 ∫_0^∞ f(y) dy，所有分量共享积分节点

    :return: 与 f(y) 同形的数组
    """
    settings = settings or DEFAULT_SETTINGS
    epsabs = settings.abs_tol if epsabs is None else epsabs
    envelope = _resolve_envelope(log_envelope, envelope_density)

    if envelope is None:
        upper, points = np.inf, None
    else:
        peak, upper = truncation_radius(envelope)
        points = [peak] if 0.0 < peak < upper else None

    value, error, info = integrate.quad_vec(
        f,
        0.0,
        upper,
        epsabs=epsabs,
        epsrel=settings.rel_tol,
        norm="max",
        limit=settings.max_subdivisions,
        points=points,
        full_output=True,
    )
    value = np.asarray(value, dtype=float)
    if not info.success:
        tolerance = max(epsabs, settings.rel_tol * float(np.max(np.abs(value))))
        if not np.all(np.isfinite(value)) or error > QUAD_ERROR_SLACK * tolerance:
            raise QuadratureError(f"向量积分不收敛: {info.message} (误差估计 {error:.3g})")
        logger.debug(f"向量积分提示: {info.message}")
    return value
