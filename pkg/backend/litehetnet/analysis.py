# backend/litehetnet/analysis.py

"""
解析覆盖概率引擎

典型用户的干扰分为三部分：潜在 IN 宏基站中未置零的部分（环带 1C，
稀疏化密度 p̄·λ1）、环带之外的宏基站（1O）以及微基站（2）。
期望信号增益服从 Gamma(M_j, 1)，于是覆盖概率是 Erlang 和

    Pr(G > x) = Σ_{n<M} E[x^n e^(-x)] / n!,

每一项按三个分量展开后由各分量拉普拉斯变换的符号吸收导数
𝓛̃^(n)(s) = s^n |d^n 𝓛 / ds^n| 组成，导数用 Faà di Bruno 公式在对数域求和。
"""

import logging
import math
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import logsumexp

from backend.litehetnet.combinatorics import composition_table, log_bell_table
from backend.litehetnet.constants import (
    MODE_IN,
    OUTAGE_DIRECT_THRESHOLD,
    OUTAGE_TAIL_REL_TOL,
    OUTAGE_TAIL_TERMS,
    PROBABILITY_SLACK,
)
from backend.litehetnet.geometry import (
    _association_rate,
    serving_log_envelope,
    tier_probability,
)
from backend.litehetnet.in_scheme import in_load, in_probability, u_in0_pmf_from_load
from backend.litehetnet.netconfig import InParams, NetworkConfig
from backend.litehetnet.specfun import (
    DEFAULT_SETTINGS,
    QuadratureSettings,
    beta_upper_tail,
    semi_infinite_integral_vec,
)

logger = logging.getLogger(__name__)


class CoverageInvariantError(Exception):
    """覆盖/中断概率超出 [0, 1] 或分解不一致"""

    pass


class ExclusionRadii(BaseModel):
    """干扰分量的边界半径：环带 [r_1c, r_1o]、宏基站尾部 r_1o 之外、微基站 r_2 之外"""

    model_config = ConfigDict(frozen=True)

    r_1c: float
    r_1o: float
    r_2: float

    @model_validator(mode="after")
    def _check_order(self) -> "ExclusionRadii":
        if min(self.r_1c, self.r_1o, self.r_2) <= 0:
            raise ValueError("exclusion radii must be positive")
        if self.r_1c > self.r_1o * (1 + 1e-12):
            raise ValueError("r_1c must not exceed r_1o")
        return self


class CoverageResult(BaseModel):
    """给定 SIR 阈值 β（线性）下的关联概率与覆盖概率"""

    model_config = ConfigDict(frozen=True)

    beta: float
    a1: float
    a2: float
    s1: float
    s2: float
    s: float
    mode: str = MODE_IN

    @model_validator(mode="after")
    def _check_probabilities(self) -> "CoverageResult":
        for name in ("a1", "a2", "s1", "s2", "s"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} is not a probability")
        if abs(self.s - (self.a1 * self.s1 + self.a2 * self.s2)) > 1e-12:
            raise ValueError("s must equal a1*s1 + a2*s2")
        return self


def exclusion_radii(j: int, y: float, cfg: NetworkConfig, params: InParams) -> ExclusionRadii:
    """
    第 j 层用户、服务距离为 y 时三个干扰分量的边界半径

    r_1c = (P1/P_j)^(1/α1) y^(α_j/α1)，r_1o = T_j^(1/α1) r_1c，
    r_2 = (P2/P_j)^(1/α2) y^(α_j/α2)。
    """
    if y <= 0:
        raise ValueError("y must be positive")
    p_j, a_j = cfg.power(j), cfg.alpha(j)
    r_1c = (cfg.p1 / p_j) ** (1.0 / cfg.alpha1) * y ** (a_j / cfg.alpha1)
    r_1o = r_1c * params.threshold(j) ** (1.0 / cfg.alpha1)
    r_2 = (cfg.p2 / p_j) ** (1.0 / cfg.alpha2) * y ** (a_j / cfg.alpha2)
    return ExclusionRadii(r_1c=r_1c, r_1o=r_1o, r_2=r_2)


def _w(x: float) -> float:
    # x/(1+x) = 1 - z，其中 z = 1/(1 + s r^-α)
    if x == math.inf:
        return 1.0
    return x / (1.0 + x)


class _Kernel(NamedTuple):
    """一个干扰分量：g(y) = exp(log_scale)·y^power，c0 与对数 Bell 表只依赖 β"""

    log_scale: float
    power: float
    c0: float
    log_bell: np.ndarray


def _build_kernel(
    alpha: float,
    w_in: float,
    w_out: float,
    n_max: int,
    log_scale: float = 0.0,
    power: float = 0.0,
    settings: Optional[QuadratureSettings] = None,
) -> _Kernel:
    delta = 2.0 / alpha
    c0 = beta_upper_tail(delta, 1.0 - delta, w_in, settings) - beta_upper_tail(
        delta, 1.0 - delta, w_out, settings
    )
    if n_max > 0:
        orders = np.arange(1, n_max + 1, dtype=float) - delta
        c = beta_upper_tail(1.0 + delta, orders, w_in, settings) - beta_upper_tail(
            1.0 + delta, orders, w_out, settings
        )
        with np.errstate(divide="ignore"):
            log_c = np.log(np.maximum(c, 0.0))
    else:
        log_c = np.zeros(0)
    return _Kernel(log_scale, power, max(c0, 0.0), log_bell_table(log_c, n_max))


def _log_derivatives(g: float, kernel: _Kernel) -> np.ndarray:
    # log 𝓛̃^(n)，n = 0..n_max
    n_max = kernel.log_bell.shape[0] - 1
    if not g > 0:
        out = np.full(n_max + 1, -np.inf)
        out[0] = 0.0
        return out
    ells = np.arange(n_max + 1)
    return logsumexp(kernel.log_bell + ells * math.log(g), axis=1) - g * kernel.c0


def _kernel_g(kernel: _Kernel, y: float) -> float:
    if kernel.log_scale == -math.inf:
        return 0.0
    return math.exp(kernel.log_scale + kernel.power * math.log(y))


def _log_erlang_terms(y: float, kernels: List[_Kernel], n_max: int) -> np.ndarray:
    logs = [_log_derivatives(_kernel_g(kernel, y), kernel) for kernel in kernels]
    while len(logs) < 3:
        empty = np.full(n_max + 1, -np.inf)
        empty[0] = 0.0
        logs.append(empty)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        rows, log_weight = composition_table(n)
        out[n] = logsumexp(log_weight + logs[0][rows[:, 0]] + logs[1][rows[:, 1]] + logs[2][rows[:, 2]])
    return out


def _tier_kernels(
    j: int,
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    n_max: int,
    settings: QuadratureSettings,
    include_annulus: bool = True,
) -> List[_Kernel]:
    # 代入 s 与各半径后 x = s·r^-α 只剩 β 与 β/T_j，y 只通过 g(y) 出现
    p_j, a_j = cfg.power(j), cfg.alpha(j)
    t_j = params.threshold(j)
    w_beta, w_out = _w(beta), _w(beta / t_j)
    macro_power = 2.0 * a_j / cfg.alpha1
    pico_power = 2.0 * a_j / cfg.alpha2
    macro_base = 2.0 * math.pi / cfg.alpha1 * (beta * cfg.p1 / p_j) ** (2.0 / cfg.alpha1)
    pico_base = 2.0 * math.pi / cfg.alpha2 * (beta * cfg.p2 / p_j) ** (2.0 / cfg.alpha2)

    kernels = []
    if include_annulus:
        thinned = (1.0 - in_probability(cfg, params, settings)) * cfg.lambda1
        log_scale = math.log(macro_base * thinned) if thinned > 0 else -math.inf
        kernels.append(
            _build_kernel(cfg.alpha1, w_beta, w_out, n_max, log_scale, macro_power, settings)
        )
    kernels.append(
        _build_kernel(
            cfg.alpha1, w_out, 0.0, n_max, math.log(macro_base * cfg.lambda1), macro_power, settings
        )
    )
    kernels.append(
        _build_kernel(
            cfg.alpha2, w_beta, 0.0, n_max, math.log(pico_base * cfg.lambda2), pico_power, settings
        )
    )
    return kernels


def _log_pdf(j: int, y: float, cfg: NetworkConfig, log_norm: float) -> float:
    return log_norm + math.log(y) - float(_association_rate(j, y, cfg))


def erlang_terms(
    j: int,
    y: float,
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    n_max: int,
    settings: Optional[QuadratureSettings] = None,
) -> np.ndarray:
    """
    条件于服务距离 y 的 Erlang 项 T_n(y) = E[x^n e^(-x)] / n!，n = 0..n_max

    每一项都是一个概率质量，所有 n 的和为 1。
    """
    settings = settings or DEFAULT_SETTINGS
    kernels = _tier_kernels(j, beta, cfg, params, n_max, settings)
    return np.exp(_log_erlang_terms(y, kernels, n_max))


@lru_cache(maxsize=256)
def _averaged_terms(
    j: int,
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: QuadratureSettings,
    include_annulus: bool,
    first: int,
    last: int,
) -> np.ndarray:
    # ∫ T_n(y) f_Yj(y) dy，n = first..last
    kernels = _tier_kernels(j, beta, cfg, params, last, settings, include_annulus)
    log_norm = math.log(2.0 * math.pi * cfg.density(j) / tier_probability(j, cfg, settings))

    def integrand(y: float) -> np.ndarray:
        if y <= 0:
            return np.zeros(last - first + 1)
        log_terms = _log_erlang_terms(y, kernels, last)[first:]
        return np.exp(log_terms + _log_pdf(j, y, cfg, log_norm))

    if first == 0:
        envelope = serving_log_envelope(j, cfg)
        epsabs = None
    else:
        growth = 2.0 * cfg.alpha(j) / min(cfg.alpha1, cfg.alpha2)
        envelope = serving_log_envelope(j, cfg, extra_power=first * growth)
        epsabs = 0.0
    values = semi_infinite_integral_vec(integrand, settings, log_envelope=envelope, epsabs=epsabs)
    values.setflags(write=False)
    return values


def _dof_masses(
    j: int,
    cfg: NetworkConfig,
    params: InParams,
    settings: QuadratureSettings,
    forced_u: Optional[int],
) -> Dict[int, float]:
    if j == 2:
        return {0: 1.0}
    if forced_u is not None:
        if not 0 <= forced_u < cfg.n1:
            raise ValueError(f"forced_u must lie in [0, {cfg.n1 - 1}]")
        return {forced_u: 1.0}
    l_bar = in_load(cfg, params, settings).l_bar
    masses = {u: u_in0_pmf_from_load(u, params.u_max, l_bar) for u in range(params.u_max + 1)}
    return {u: mass for u, mass in masses.items() if mass > 0}


def _tier_outage(
    j: int,
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings],
    forced_u: Optional[int] = None,
    include_annulus: bool = True,
) -> float:
    if not beta > 0:
        raise ValueError("beta must be positive")
    settings = settings or DEFAULT_SETTINGS
    n_j = cfg.antennas(j)
    masses = _dof_masses(j, cfg, params, settings, forced_u)
    head = _averaged_terms(j, beta, cfg, params, settings, include_annulus, 0, n_j - 1)

    total = 0.0
    for u, mass in masses.items():
        order = n_j - u
        outage = 1.0 - float(np.sum(head[:order]))
        if outage <= OUTAGE_DIRECT_THRESHOLD:
            # 1 - Σ_{n<M} 已接近舍入误差，改为直接对 n ≥ M 的尾部求和
            tail = _averaged_terms(
                j, beta, cfg, params, settings, include_annulus, order, order + OUTAGE_TAIL_TERMS
            )
            outage = float(np.sum(tail))
            if outage > 0 and tail[-1] > OUTAGE_TAIL_REL_TOL * outage:
                logger.warning(f"⚠️ 中断概率尾部级数收敛缓慢 (j={j}, β={beta:.3g}, M={order})")
        total += mass * outage

    if not -PROBABILITY_SLACK <= total <= 1.0 + PROBABILITY_SLACK:
        raise CoverageInvariantError(f"第 {j} 层中断概率 {total} 超出 [0, 1]")
    return min(max(total, 0.0), 1.0)


def outage_macro(
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
    forced_u: Optional[int] = None,
    include_annulus: bool = True,
) -> float:
    """宏用户中断概率 1 - 𝒮1，小 β 下由尾部级数直接计算以保持相对精度"""
    return _tier_outage(1, beta, cfg, params, settings, forced_u, include_annulus)


def outage_pico(
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
    include_annulus: bool = True,
) -> float:
    """微用户中断概率 1 - 𝒮2"""
    return _tier_outage(2, beta, cfg, params, settings, None, include_annulus)


def outage_overall(
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """总中断概率 𝒜1(1-𝒮1) + 𝒜2(1-𝒮2)"""
    a1 = tier_probability(1, cfg, settings)
    a2 = tier_probability(2, cfg, settings)
    return a1 * outage_macro(beta, cfg, params, settings) + a2 * outage_pico(beta, cfg, params, settings)


def coverage_macro(
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
    forced_u: Optional[int] = None,
    include_annulus: bool = True,
) -> float:
    """
    宏用户覆盖概率 𝒮1(β, U, T1, T2)

    对 u_IN,0 的分布取混合，每个 u 对应 Gamma(N1-u, 1) 的期望信号增益。

    :param beta: SIR 阈值（线性）
    :param forced_u: 固定 u_IN,0 = forced_u（其余设置不变），用于自由度单调性检查
    :param include_annulus: False 时去掉环带 1C 分量
    """
    return 1.0 - outage_macro(beta, cfg, params, settings, forced_u, include_annulus)


def coverage_pico(
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
    include_annulus: bool = True,
) -> float:
    """微用户覆盖概率 𝒮2(β, U, T1, T2)，服务微基站用 MRT，M2 = N2"""
    return 1.0 - outage_pico(beta, cfg, params, settings, include_annulus)


def coverage_overall(
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> CoverageResult:
    """
    总覆盖概率 𝒮 = 𝒜1·𝒮1 + 𝒜2·𝒮2

    :param beta: SIR 阈值（线性）
    :return: CoverageResult
    :raises CoverageInvariantError: 概率超出范围
    """
    a1 = tier_probability(1, cfg, settings)
    a2 = tier_probability(2, cfg, settings)
    s1 = coverage_macro(beta, cfg, params, settings)
    s2 = coverage_pico(beta, cfg, params, settings)
    total = a1 + a2
    if abs(total - 1.0) > PROBABILITY_SLACK:
        raise CoverageInvariantError(f"a1 + a2 = {total!r} deviates from 1")
    # 𝒜1 + 𝒜2 = 1 只在积分精度内成立
    a1, a2 = a1 / total, a2 / total
    s = min(max(a1 * s1 + a2 * s2, 0.0), 1.0)
    try:
        return CoverageResult(beta=beta, a1=a1, a2=a2, s1=s1, s2=s2, s=s, mode=params.mode)
    except ValueError as exc:
        raise CoverageInvariantError(str(exc)) from exc


def laplace_1c(
    s: float,
    r_1c: float,
    r_1o: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """
    环带 [r_1c, r_1o] 内未置零宏基站干扰的拉普拉斯变换

    𝓛 = exp(-(2π/α1) p̄λ1 s^(2/α1) [B'(δ, 1-δ, z(r_1c)) - B'(δ, 1-δ, z(r_1o))])，
    其中 δ = 2/α1，z(r) = 1/(1 + s·r^(-α1))。
    """
    return math.exp(laplace_1c_log_derivatives(0, s, r_1c, r_1o, cfg, params, settings)[0])


def laplace_1c_log_derivatives(
    n: int,
    s: float,
    r_1c: float,
    r_1o: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> np.ndarray:
    """log 𝓛̃^(k) for k = 0..n（环带分量）"""
    if not 0 < r_1c <= r_1o:
        raise ValueError("need 0 < r_1c <= r_1o")
    if s < 0:
        raise ValueError("s must be nonnegative")
    settings = settings or DEFAULT_SETTINGS
    thinned = (1.0 - in_probability(cfg, params, settings)) * cfg.lambda1
    alpha = cfg.alpha1
    kernel = _build_kernel(
        alpha, _w(s * r_1c ** -alpha), _w(s * r_1o ** -alpha), n, settings=settings
    )
    g = 2.0 * math.pi / alpha * thinned * s ** (2.0 / alpha)
    return _log_derivatives(g, kernel)


def laplace_tail_log_derivatives(
    n: int, s: float, r: float, tier_density: float, tier_alpha: float
) -> np.ndarray:
    """log 𝓛̃^(k) for k = 0..n（半径 r 之外的齐次 PPP）"""
    if r <= 0:
        raise ValueError("r must be positive")
    if s < 0:
        raise ValueError("s must be nonnegative")
    kernel = _build_kernel(tier_alpha, _w(s * r ** -tier_alpha), 0.0, n)
    g = 2.0 * math.pi / tier_alpha * tier_density * s ** (2.0 / tier_alpha)
    return _log_derivatives(g, kernel)


def laplace_tail(s: float, r: float, tier_density: float, tier_alpha: float) -> float:
    """
    半径 r 之外密度为 tier_density 的 PPP 干扰的拉普拉斯变换

    𝓛 = exp(-(2π/α) λ s^(2/α) B'(2/α, 1-2/α, 1/(1 + s r^(-α))))
    """
    return math.exp(laplace_tail_log_derivatives(0, s, r, tier_density, tier_alpha)[0])


def laplace_1c_deriv(
    n: int,
    s: float,
    r_1c: float,
    r_1o: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """
    环带分量的符号吸收导数 𝓛̃^(n)(s) = s^n |d^n 𝓛 / ds^n|

    𝓛̃^(n) = 𝓛 · Σ_{m∈ℳ_n} n!/Π m_a! · Π_a (g·c_a)^{m_a}，
    g = (2π/α1) p̄λ1 s^(2/α1)，c_a = B'(1+δ, a-δ, z(r_1c)) - B'(1+δ, a-δ, z(r_1o))。
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    return math.exp(laplace_1c_log_derivatives(n, s, r_1c, r_1o, cfg, params, settings)[n])


def laplace_tail_deriv(n: int, s: float, r: float, tier_density: float, tier_alpha: float) -> float:
    """尾部分量的符号吸收导数 𝓛̃^(n)(s)"""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return math.exp(laplace_tail_log_derivatives(n, s, r, tier_density, tier_alpha)[n])
