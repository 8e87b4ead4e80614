# backend/litehetnet/asymptotics.py

"""
小 β 渐近分析

1 - 𝒮_j ~ b_j·β^(N_j - U_j)，总中断概率的阶数增益为 d = min(N1 - U, N2)。
系数 b_j 由 Erlang 项的首阶展开得到：对每个组合 (n1,n2,n3) 与三组划分，
权重为 Π w_a^(m_a)/m_a!，其余的 y 依赖合并为一个服务距离矩 E[Y_j^e]。
"""

import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import gammaln, logsumexp

from backend.litehetnet.analysis import outage_overall
from backend.litehetnet.combinatorics import composition_table, log_bell_table
from backend.litehetnet.geometry import serving_distance_moment, tier_probability
from backend.litehetnet.in_scheme import in_load, in_probability, u_in0_pmf_from_load
from backend.litehetnet.netconfig import InParams, NetworkConfig
from backend.litehetnet.specfun import DEFAULT_SETTINGS, QuadratureSettings

logger = logging.getLogger(__name__)


class AsymptoticResult(BaseModel):
    """小 β 下的中断概率展开 1 - 𝒮 ≈ b·β^d"""

    model_config = ConfigDict(frozen=True)

    beta: float
    u_max: int
    d: int
    d1: int
    d2: int
    u_eff: int
    b1: float
    b2: float
    b: float
    u_star_d: List[int]
    u_star: Optional[int] = None
    value: float

    @model_validator(mode="after")
    def _check_coefficients(self) -> "AsymptoticResult":
        if min(self.b1, self.b2, self.b) <= 0:
            raise ValueError("asymptotic coefficients must be positive")
        return self

    @property
    def effective_order(self) -> int:
        """实际出现的 β 指数 min(d1, d2)；U > 0 但无人请求时 d1 = N1"""
        return min(self.d1, self.d2)


class UStarChoice(NamedTuple):
    """U* 的判定：比较 𝒜2·b2(N1-N2-1) 与 𝒜1·b1(N1-N2) + 𝒜2·b2(N1-N2)"""

    u_star: int
    b_lower: float
    b_upper: float


class CrossoverReport(NamedTuple):
    """各 β 下使中断概率最小的 U，以及仍与渐近 U* 一致的最大 β"""

    table: pd.DataFrame
    u_star: int
    beta_bar: Optional[float]


def order_gain(u: int, cfg: NetworkConfig) -> int:
    """总中断概率的阶数增益 min(N1 - U, N2)"""
    if not 0 <= u < cfg.n1:
        raise ValueError(f"u must lie in [0, {cfg.n1 - 1}], got {u}")
    return min(cfg.n1 - u, cfg.n2)


def effective_dof_loss(
    cfg: NetworkConfig, params: InParams, settings: Optional[QuadratureSettings] = None
) -> int:
    """宏用户的有效自由度损失 U1：有请求发生（L̄ > 0）时为 U，否则为 0"""
    if params.u_max > 0 and in_load(cfg, params, settings).l_bar > 0:
        return params.u_max
    return 0


def _group_table(log_weights: np.ndarray, n_max: int) -> np.ndarray:
    # table[n, l] = log Σ_{|m|=l} Π w_a^(m_a) / m_a!
    table = log_bell_table(log_weights, n_max)
    return table - gammaln(np.arange(n_max + 1) + 1.0)[:, None]


def _log_weights(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(values, 0.0))


def coefficient_b(
    j: int,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """
    第 j 层的渐近中断系数 b_j(U, T1, T2)

    b_j = 𝒫_j Σ_{𝒩_M} Σ_{m,p,q} E[Y_j^e] Π (κ1_a p̄ (1 - T_j^-(a-δ1)))^m_a / m_a!
          · Π (κ1_a T_j^-(a-δ1))^p_a / p_a! · Π κ2_a^q_a / q_a!,

    其中 M = N_j - U_j，κ_k,a = (2π/α_k) λ_k (P_k/P_j)^δk / (a - δk)，
    e = (2α_j/α1)(|m| + |p|) + (2α_j/α2)|q|。

    :return: b_j > 0
    """
    if j not in (1, 2):
        raise ValueError(f"tier must be 1 or 2, got {j}")
    settings = settings or DEFAULT_SETTINGS

    if j == 1:
        u_eff = effective_dof_loss(cfg, params, settings)
        l_bar = in_load(cfg, params, settings).l_bar
        mass = u_in0_pmf_from_load(u_eff, params.u_max, l_bar)
    else:
        u_eff, mass = 0, 1.0
    order = cfg.antennas(j) - u_eff

    p_j, a_j, t_j = cfg.power(j), cfg.alpha(j), params.threshold(j)
    delta1, delta2 = 2.0 / cfg.alpha1, 2.0 / cfg.alpha2
    a = np.arange(1, order + 1, dtype=float)
    kappa1 = 2.0 * math.pi / cfg.alpha1 * cfg.lambda1 * (cfg.p1 / p_j) ** delta1 / (a - delta1)
    kappa2 = 2.0 * math.pi / cfg.alpha2 * cfg.lambda2 * (cfg.p2 / p_j) ** delta2 / (a - delta2)
    outer = t_j ** -(a - delta1)
    thinning = 1.0 - in_probability(cfg, params, settings)

    groups = (
        _group_table(_log_weights(kappa1 * thinning * (1.0 - outer)), order),
        _group_table(_log_weights(kappa1 * outer), order),
        _group_table(_log_weights(kappa2), order),
    )
    macro_step = 2.0 * a_j / cfg.alpha1
    pico_step = 2.0 * a_j / cfg.alpha2

    log_moments: Dict[tuple, float] = {}
    terms = []
    rows, _ = composition_table(order)
    for n1, n2, n3 in rows:
        for l1 in range(n1 + 1):
            g1 = groups[0][n1, l1]
            if g1 == -np.inf:
                continue
            for l2 in range(n2 + 1):
                g2 = groups[1][n2, l2]
                if g2 == -np.inf:
                    continue
                for l3 in range(n3 + 1):
                    g3 = groups[2][n3, l3]
                    if g3 == -np.inf:
                        continue
                    key = (l1 + l2, l3)
                    if key not in log_moments:
                        exponent = macro_step * key[0] + pico_step * key[1]
                        log_moments[key] = math.log(serving_distance_moment(j, exponent, cfg, settings))
                    terms.append(g1 + g2 + g3 + log_moments[key])

    if not terms:
        raise ArithmeticError(f"b_{j} 没有非零项")
    value = mass * math.exp(logsumexp(terms))
    logger.debug(f"b_{j}(U={params.u_max}, T1={params.t1}, T2={params.t2}) = {value:.6g}，阶数 {order}")
    return value


def optimal_u_order(cfg: NetworkConfig) -> List[int]:
    """使阶数增益达到最大值 N2 的全部 U：{0, 1, ..., N1 - N2}"""
    return list(range(cfg.n1 - cfg.n2 + 1))


def optimal_u_asymptotic(
    cfg: NetworkConfig, params: InParams, settings: Optional[QuadratureSettings] = None
) -> UStarChoice:
    """
    小 β 下的最优最大 IN 自由度 U*(T1, T2)

    U = N1-N2-1 时只有微用户贡献 β^N2 项，U = N1-N2 时宏用户与微用户都贡献。
    params 中只使用 t1、t2。

    :raises ValueError: 阈值不都大于 1
    """
    if not (params.t1 > 1 and params.t2 > 1):
        raise ValueError("optimal_u_asymptotic needs t1 > 1 and t2 > 1")
    settings = settings or DEFAULT_SETTINGS
    a1 = tier_probability(1, cfg, settings)
    a2 = tier_probability(2, cfg, settings)
    gap = cfg.n1 - cfg.n2

    below = params.with_changes(u_max=gap - 1)
    at = params.with_changes(u_max=gap)
    b_lower = a2 * coefficient_b(2, cfg, below, settings)
    b_upper = a1 * coefficient_b(1, cfg, at, settings) + a2 * coefficient_b(2, cfg, at, settings)
    u_star = gap - 1 if b_lower < b_upper else gap
    logger.info(f"✅ U* = {u_star}（{b_lower:.4g} vs {b_upper:.4g}）")
    return UStarChoice(u_star=u_star, b_lower=b_lower, b_upper=b_upper)


def asymptotic_outage(
    beta: float,
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> AsymptoticResult:
    """
    渐近中断概率 b·β^d

    阶数较低的一层决定首项：U < N1-N2 时 b = 𝒜2 b2，U = N1-N2 时
    b = 𝒜1 b1 + 𝒜2 b2，U > N1-N2 时 b = 𝒜1 b1。

    :param beta: SIR 阈值（线性），应足够小
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    settings = settings or DEFAULT_SETTINGS
    u_eff = effective_dof_loss(cfg, params, settings)
    d1, d2 = cfg.n1 - u_eff, cfg.n2
    b1 = coefficient_b(1, cfg, params, settings)
    b2 = coefficient_b(2, cfg, params, settings)
    a1 = tier_probability(1, cfg, settings)
    a2 = tier_probability(2, cfg, settings)

    leading = min(d1, d2)
    b = (a1 * b1 if d1 == leading else 0.0) + (a2 * b2 if d2 == leading else 0.0)
    u_star = None
    if params.t1 > 1 and params.t2 > 1:
        u_star = optimal_u_asymptotic(cfg, params, settings).u_star

    return AsymptoticResult(
        beta=beta,
        u_max=params.u_max,
        d=order_gain(params.u_max, cfg),
        d1=d1,
        d2=d2,
        u_eff=u_eff,
        b1=b1,
        b2=b2,
        b=b,
        u_star_d=optimal_u_order(cfg),
        u_star=u_star,
        value=b * beta**leading,
    )


def empirical_u_star(
    betas: Sequence[float],
    cfg: NetworkConfig,
    params: InParams,
    settings: Optional[QuadratureSettings] = None,
) -> CrossoverReport:
    """
    在给定 β 网格上用精确中断概率寻找最优 U，并报告经验交叉点 β̄

    :param betas: 线性 β 网格（递增）
    :return: 表格列为 beta、u_best 以及每个 U 的 outage_u{U}；β̄ 为 u_best 仍等于
             渐近 U* 的最大 β（从小 β 端连续计算）
    """
    choice = optimal_u_asymptotic(cfg, params, settings)
    candidates = optimal_u_order(cfg)
    records = []
    for beta in betas:
        row = {"beta": float(beta)}
        for u in candidates:
            row[f"outage_u{u}"] = outage_overall(beta, cfg, params.with_changes(u_max=u), settings)
        row["u_best"] = min(candidates, key=lambda u: row[f"outage_u{u}"])
        records.append(row)
    table = pd.DataFrame.from_records(records)

    beta_bar = None
    for row in table.sort_values("beta").itertuples(index=False):
        if row.u_best != choice.u_star:
            break
        beta_bar = row.beta
    if beta_bar is None:
        logger.warning("⚠️ 网格中最小的 β 处最优 U 已与渐近 U* 不一致")
    return CrossoverReport(table=table, u_star=choice.u_star, beta_bar=beta_bar)
