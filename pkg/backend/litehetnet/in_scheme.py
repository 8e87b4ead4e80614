# backend/litehetnet/in_scheme.py

import logging
import math
from functools import lru_cache
from typing import TYPE_CHECKING, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import stats
from scipy.spatial import cKDTree

from backend.litehetnet.constants import LBAR_ZERO_LIMIT
from backend.litehetnet.geometry import Association, serving_distance_moment
from backend.litehetnet.netconfig import InParams, NetworkConfig
from backend.litehetnet.specfun import DEFAULT_SETTINGS, QuadratureSettings

if TYPE_CHECKING:
    from backend.litehetnet.montecarlo import NetworkRealization

logger = logging.getLogger(__name__)


class InLoad(BaseModel):
    """每个宏基站收到的平均 IN 请求数 L̄ = L̄1 + L̄2"""

    model_config = ConfigDict(frozen=True)

    l_bar: float
    l1: float
    l2: float

    @model_validator(mode="after")
    def _check_sum(self) -> "InLoad":
        if min(self.l1, self.l2) < 0:
            raise ValueError("request loads must be nonnegative")
        if not math.isclose(self.l_bar, self.l1 + self.l2, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("l_bar must equal l1 + l2")
        return self


class InRequestState(BaseModel):
    """
    一个时隙内的 IN 请求与选择状态

    请求以 (用户, 宏基站) 对的形式存放；selected[i] 表示第 i 个请求被该宏基站选中。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    u_max: int
    request_user: np.ndarray
    request_macro: np.ndarray
    selected: np.ndarray
    k: np.ndarray
    u_in: np.ndarray

    @model_validator(mode="after")
    def _check_selection(self) -> "InRequestState":
        if not np.array_equal(self.u_in, np.minimum(self.u_max, self.k)):
            raise ValueError("u_in must equal min(U, K) at every macro BS")
        chosen = np.bincount(self.request_macro[self.selected], minlength=len(self.k))
        if not np.array_equal(chosen, self.u_in):
            raise ValueError("each macro BS must select exactly u_in requesters")
        return self

    def requesting(self, macro_index: int) -> np.ndarray:
        """向宏基站 macro_index 发出请求的用户"""
        return self.request_user[self.request_macro == macro_index]

    def selected_users(self, macro_index: int) -> np.ndarray:
        """宏基站 macro_index 为其置零的用户"""
        mask = (self.request_macro == macro_index) & self.selected
        return self.request_user[mask]

    def nulled_for(self, user_index: int) -> np.ndarray:
        """为用户 user_index 置零的宏基站"""
        mask = (self.request_user == user_index) & self.selected
        return self.request_macro[mask]


def request_radius(j, serving_distance, cfg: NetworkConfig, params: InParams):
    """
    请求半径 ρ = (P1·T_j/P_j)^(1/α1) · Y^(α_j/α1)

    第 j 层用户当且仅当非服务宏基站距离 D < ρ 时向其发送 IN 请求。
    """
    j = np.asarray(j)
    y = np.asarray(serving_distance, dtype=float)
    power = np.where(j == 1, cfg.p1, cfg.p2)
    alpha = np.where(j == 1, cfg.alpha1, cfg.alpha2)
    threshold = np.where(j == 1, params.t1, params.t2)
    radius = (cfg.p1 * threshold / power) ** (1.0 / cfg.alpha1) * y ** (alpha / cfg.alpha1)
    if radius.ndim == 0:
        return float(radius)
    return radius


def is_potential_in(
    user: Association, macro_distance: float, cfg: NetworkConfig, params: InParams
) -> bool:
    """
    判断某个非服务宏基站是否为该用户的潜在 IN 宏基站

    条件为 SIIR = P_j·Y^(-α_j) / (P1·D^(-α1)) < T_j。

    :param user: 用户的关联结果
    :param macro_distance: 到该宏基站的距离 D（不能是服务宏基站）
    """
    j = user.tier
    log_siir = (
        math.log(cfg.power(j))
        - cfg.alpha(j) * math.log(user.serving_distance)
        - math.log(cfg.p1)
        + cfg.alpha1 * math.log(macro_distance)
    )
    return log_siir < math.log(params.threshold(j))


@lru_cache(maxsize=1024)
def _in_load(cfg: NetworkConfig, params: InParams, settings: QuadratureSettings) -> InLoad:
    loads = []
    for j in (1, 2):
        t_j = params.threshold(j)
        if t_j == 1:
            loads.append(0.0)
            continue
        # 交换积分次序后内层面积为 π(ρ_T² - ρ_1²)，只剩一个矩积分
        exponent = 2.0 * cfg.alpha(j) / cfg.alpha1
        scale = (cfg.p1 / cfg.power(j)) ** (2.0 / cfg.alpha1) * (t_j ** (2.0 / cfg.alpha1) - 1.0)
        moment = serving_distance_moment(j, exponent, cfg, settings)
        loads.append(math.pi * cfg.density(j) * scale * moment)
    return InLoad(l_bar=loads[0] + loads[1], l1=loads[0], l2=loads[1])


def in_load(
    cfg: NetworkConfig, params: InParams, settings: Optional[QuadratureSettings] = None
) -> InLoad:
    """
    每个宏基站的平均 IN 请求数

    L̄_j = πλ_j (P1/P_j)^(2/α1) (T_j^(2/α1) - 1) E[Y_j^(2α_j/α1)]，
    即对请求环带面积关于 Y_j 取期望。
    """
    return _in_load(cfg, params, settings or DEFAULT_SETTINGS)


def poisson_request_pmf(k: int, l_bar: float) -> float:
    """Poisson(L̄) 的概率质量；L̄ = 0 时退化为 0 点分布"""
    if k < 0:
        return 0.0
    if l_bar == 0:
        return 1.0 if k == 0 else 0.0
    return float(stats.poisson.pmf(k, l_bar))


def u_in0_pmf_from_load(u: int, u_max: int, l_bar: float) -> float:
    """给定 L̄ 时 Pr(u_IN,0 = u)；u = U 处的质量为 Pr(K0 ≥ U)"""
    if not 0 <= u <= u_max:
        raise ValueError(f"u must lie in [0, {u_max}], got {u}")
    if u < u_max:
        return poisson_request_pmf(u, l_bar)
    if u_max == 0 or l_bar == 0:
        return 1.0 if u_max == 0 else 0.0
    return float(stats.poisson.sf(u_max - 1, l_bar))


def in_probability_from_load(u_max: int, l_bar: float) -> float:
    """
    给定 L̄ 时的 IN 概率

    p_c = e^(-L̄) Σ_{k<U} L̄^k/k! + (U/L̄)(1 - e^(-L̄) Σ_{k≤U} L̄^k/k!)
    """
    if u_max == 0:
        return 0.0
    if l_bar < LBAR_ZERO_LIMIT:
        return 1.0
    head = stats.poisson.cdf(u_max - 1, l_bar)
    tail = u_max / l_bar * stats.poisson.sf(u_max, l_bar)
    return float(min(max(head + tail, 0.0), 1.0))


def k0_pmf(
    k: int, cfg: NetworkConfig, params: InParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """Pr(K0 = k)，K0 近似服从 Poisson(L̄)"""
    return poisson_request_pmf(k, in_load(cfg, params, settings).l_bar)


def u_in0_pmf(
    u: int, cfg: NetworkConfig, params: InParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """Pr(u_IN,0 = u)，u ∈ {0, ..., U}"""
    if u > params.u_max:
        raise ValueError(f"u={u} exceeds U={params.u_max}")
    return u_in0_pmf_from_load(u, params.u_max, in_load(cfg, params, settings).l_bar)


def in_probability(
    cfg: NetworkConfig, params: InParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """典型用户的 IN 请求被某个潜在 IN 宏基站接受的概率 p_c"""
    return in_probability_from_load(params.u_max, in_load(cfg, params, settings).l_bar)


def thinned_macro_density(
    cfg: NetworkConfig, params: InParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """未接受请求的潜在 IN 宏基站密度 (1 - p_c)·λ1"""
    return (1.0 - in_probability(cfg, params, settings)) * cfg.lambda1


def run_in_protocol(
    realization: "NetworkRealization", params: InParams, rng: np.random.Generator
) -> InRequestState:
    """
    在一个网络实现上运行 IN 协议

    每个调度用户向半径 ρ 内的全部非服务宏基站发送请求；每个宏基站从
    K_ℓ 个请求者中不放回地均匀选出 min(U, K_ℓ) 个。

    :param realization: 网络实现（需要 network、macro、users）
    :param params: IN 参数
    :param rng: 本次试验的随机数生成器
    :return: 请求/选择状态
    """
    cfg = realization.network
    users = realization.users
    n_macro = realization.macro.count

    radii = request_radius(users.tier, users.serving_distance, cfg, params)
    hits = cKDTree(realization.macro.points).query_ball_point(users.locations, r=radii)
    lengths = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
    request_user = np.repeat(np.arange(users.count, dtype=np.int64), lengths)
    request_macro = (
        np.concatenate([np.asarray(h, dtype=np.int64) for h in hits]) if lengths.sum() else np.zeros(0, dtype=np.int64)
    )

    # 宏用户不向自己的服务基站发请求
    own = (users.tier[request_user] == 1) & (users.serving_index[request_user] == request_macro)
    request_user, request_macro = request_user[~own], request_macro[~own]

    k = np.bincount(request_macro, minlength=n_macro).astype(np.int64)
    u_in = np.minimum(params.u_max, k)

    selected = np.zeros(len(request_macro), dtype=bool)
    if params.u_max > 0 and len(request_macro):
        keys = rng.random(len(request_macro))
        order = np.lexsort((keys, request_macro))
        sorted_macro = request_macro[order]
        rank = np.arange(len(order)) - np.searchsorted(sorted_macro, sorted_macro, side="left")
        selected[order] = rank < params.u_max

    return InRequestState(
        u_max=params.u_max,
        request_user=request_user,
        request_macro=request_macro,
        selected=selected,
        k=k,
        u_in=u_in,
    )
