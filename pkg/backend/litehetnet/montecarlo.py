# backend/litehetnet/montecarlo.py

"""
蒙特卡洛仿真引擎

每次试验在以典型用户（原点）为中心的圆盘内采样两层基站与调度用户，
运行 IN 协议后计算典型用户的 SIR。期望信号增益按 Gamma(M_j, 1) 采样，
干扰增益按 Exp(1) 采样；zfbf_oracle 用显式的复高斯信道验证这两个分布。
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import stats
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt
from tqdm import tqdm

from backend.litehetnet.constants import (
    CI_Z_95,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_WINDOW_CONSTANT,
    MAX_RESAMPLE_ATTEMPTS,
    MIN_ORACLE_SAMPLES,
    SINGULAR_COND_LIMIT,
    ZF_RESIDUAL_LIMIT,
)
from backend.litehetnet.geometry import (
    Association,
    EmptyTierError,
    PointSet,
    ScheduledUsers,
    associate,
    associate_many,
    sample_ppp,
    simulation_window_radius,
    tier_probability,
)
from backend.litehetnet.hetnet_enums import SimulationMode
from backend.litehetnet.in_scheme import InRequestState, run_in_protocol
from backend.litehetnet.netconfig import InParams, NetworkConfig
from utils.rng_tools import chunk_ranges, trial_rng

logger = logging.getLogger(__name__)


class SingularStackError(Exception):
    """ZFBF 堆叠信道矩阵数值奇异"""

    pass


class NetworkRealization(BaseModel):
    """
    一个时隙的网络快照

    users 的第 0 个元素是位于原点的典型用户；in_state 在 IN 协议运行后填入。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    network: NetworkConfig
    macro: PointSet
    pico: PointSet
    users: ScheduledUsers
    typical: Association
    in_state: Optional[InRequestState] = None
    resamples: int = 0

    @model_validator(mode="after")
    def _check_typical(self) -> "NetworkRealization":
        if self.users.count == 0 or np.any(self.users.locations[0] != 0.0):
            raise ValueError("the typical user must sit at the origin as user 0")
        if int(self.users.tier[0]) != self.typical.tier:
            raise ValueError("user 0 must carry the typical association")
        return self

    @property
    def scheduled_macro_users(self) -> np.ndarray:
        return self.users.locations[self.users.tier == 1]

    @property
    def scheduled_pico_users(self) -> np.ndarray:
        return self.users.locations[self.users.tier == 2]


class McEstimate(BaseModel):
    """覆盖概率的伯努利均值估计及 95% 置信半宽"""

    model_config = ConfigDict(frozen=True)

    beta: float
    mean: float
    ci_halfwidth_95: float
    trials: int
    seed: int

    @model_validator(mode="after")
    def _check_interval(self) -> "McEstimate":
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError("mean must be a probability")
        expected = CI_Z_95 * math.sqrt(self.mean * (1.0 - self.mean) / self.trials)
        if not math.isclose(self.ci_halfwidth_95, expected, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError("ci_halfwidth_95 must be 1.96*sqrt(m(1-m)/n)")
        return self


class TrialOutcome(NamedTuple):
    """单次试验的结果；微用户的 u_in0、k0 记为 -1"""

    sir: float
    tier: int
    serving_distance: float
    u_in0: int
    k0: int
    typical_requests: int
    typical_honored: int
    resamples: int


class ZfbfReport(BaseModel):
    """ZFBF 预编码分布校验结果"""

    model_config = ConfigDict(frozen=True)

    n1: int
    u: int
    samples: int
    max_residual: float
    mean_gain: float
    gain_ks_statistic: float
    gain_ks_pvalue: float
    leak_ks_statistic: float
    leak_ks_pvalue: float
    resamples: int

    @model_validator(mode="after")
    def _check_residual(self) -> "ZfbfReport":
        if not self.max_residual < ZF_RESIDUAL_LIMIT:
            raise ValueError(f"ZF residual {self.max_residual:.3g} exceeds {ZF_RESIDUAL_LIMIT:g}")
        return self


def _scheduled_approx(
    cfg: NetworkConfig, macro: PointSet, pico: PointSet, radius: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    # 各层调度用户近似为独立 PPP：以 λ_j/𝒜_j 采样候选，只保留关联到第 j 层的，
    # 保留下来的用户平均密度为 λ_j，服务距离服从 f_{Y_j}
    locations, keep = [], []
    for j in (1, 2):
        candidates = sample_ppp(cfg.density(j) / tier_probability(j, cfg), radius, rng)
        table = associate_many(candidates.points, macro, pico, cfg)
        locations.append(candidates.points)
        keep.append(table.tier == j)
    return np.concatenate(locations), np.concatenate(keep)


def _scheduled_full(
    cfg: NetworkConfig,
    macro: PointSet,
    pico: PointSet,
    typical: Association,
    radius: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    # 用户 PPP 关联后每个基站随机调度一个用户；典型用户所在基站调度典型用户
    candidates = sample_ppp(cfg.lambda_u, radius, rng)
    table = associate_many(candidates.points, macro, pico, cfg)
    bs_id = np.where(table.tier == 1, table.serving_index, table.serving_index + macro.count)
    keys = rng.random(candidates.count)
    keep = np.zeros(candidates.count, dtype=bool)
    if candidates.count:
        order = np.lexsort((keys, bs_id))
        sorted_id = bs_id[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_id[1:] != sorted_id[:-1]
        keep[order[first]] = True
    typical_id = typical.serving_index + (0 if typical.tier == 1 else macro.count)
    keep &= bs_id != typical_id
    return candidates.points, keep


def _draw_realization(
    cfg: NetworkConfig,
    params: InParams,
    rng: np.random.Generator,
    mode: SimulationMode,
    radius: float,
) -> NetworkRealization:
    macro = sample_ppp(cfg.lambda1, radius, rng)
    pico = sample_ppp(cfg.lambda2, radius, rng)
    typical = associate((0.0, 0.0), macro, pico, cfg)

    if mode == SimulationMode.Full:
        others, keep = _scheduled_full(cfg, macro, pico, typical, radius, rng)
    else:
        others, keep = _scheduled_approx(cfg, macro, pico, radius, rng)
    others = others[keep]

    locations = np.vstack((np.zeros((1, 2)), others))
    table = associate_many(locations, macro, pico, cfg)
    users = ScheduledUsers(
        locations=locations,
        tier=table.tier,
        serving_index=table.serving_index,
        serving_distance=table.serving_distance,
    )
    realization = NetworkRealization(network=cfg, macro=macro, pico=pico, users=users, typical=typical)
    return realization.model_copy(update={"in_state": run_in_protocol(realization, params, rng)})


def sample_realization(
    cfg: NetworkConfig,
    params: InParams,
    rng: np.random.Generator,
    mode: SimulationMode = SimulationMode.Approximate,
    window_radius: Optional[float] = None,
) -> NetworkRealization:
    """
    采样一个网络快照并运行 IN 协议

    某一层在窗口内没有基站时重新采样（最多 MAX_RESAMPLE_ATTEMPTS 次），
    重采样次数记录在 resamples 中。

    :raises EmptyTierError: 重采样次数用尽
    """
    radius = window_radius or simulation_window_radius(cfg)
    retrying = Retrying(
        retry=retry_if_exception_type(EmptyTierError),
        stop=stop_after_attempt(MAX_RESAMPLE_ATTEMPTS),
        reraise=True,
    )
    for attempt in retrying:
        with attempt:
            realization = _draw_realization(cfg, params, rng, mode, radius)
    resamples = attempt.retry_state.attempt_number - 1
    if resamples:
        logger.debug(f"窗口内出现空层，重采样 {resamples} 次")
    return realization.model_copy(update={"resamples": resamples})


def sample_trial_sir(realization: NetworkRealization, rng: np.random.Generator) -> TrialOutcome:
    """
    在给定快照上采样衰落并计算典型用户的 SIR

    为典型用户置零的宏基站不产生干扰，服务基站不计入干扰。
    """
    cfg = realization.network
    state = realization.in_state
    if state is None:
        raise ValueError("IN protocol has not been run on this realization")
    typical = realization.typical
    j = typical.tier

    if j == 1:
        u_in0 = int(state.u_in[typical.serving_index])
        k0 = int(state.k[typical.serving_index])
        dof = cfg.n1 - u_in0
    else:
        u_in0, k0, dof = -1, -1, cfg.n2
    signal = cfg.power(j) * rng.gamma(dof) * typical.serving_distance ** -cfg.alpha(j)

    macro_on = np.ones(realization.macro.count, dtype=bool)
    macro_on[state.nulled_for(0)] = False
    pico_on = np.ones(realization.pico.count, dtype=bool)
    if j == 1:
        macro_on[typical.serving_index] = False
    else:
        pico_on[typical.serving_index] = False

    interference = 0.0
    for tier, points, active in ((1, realization.macro, macro_on), (2, realization.pico, pico_on)):
        distances = points.distances()
        gains = rng.exponential(size=points.count)
        interference += cfg.power(tier) * np.sum(
            gains[active] * distances[active] ** -cfg.alpha(tier)
        )

    sir = signal / interference if interference > 0 else math.inf
    return TrialOutcome(
        sir=float(sir),
        tier=j,
        serving_distance=typical.serving_distance,
        u_in0=u_in0,
        k0=k0,
        typical_requests=int(np.count_nonzero(state.request_user == 0)),
        typical_honored=int(len(state.nulled_for(0))),
        resamples=realization.resamples,
    )


def _trial_outcome(
    cfg: NetworkConfig,
    params: InParams,
    rng: np.random.Generator,
    mode: SimulationMode,
    window_radius: Optional[float],
) -> TrialOutcome:
    realization = sample_realization(cfg, params, rng, mode, window_radius)
    return sample_trial_sir(realization, rng)


def simulate_trial(
    cfg: NetworkConfig,
    params: InParams,
    beta: float,
    rng: np.random.Generator,
    mode: SimulationMode = SimulationMode.Approximate,
    window_radius: Optional[float] = None,
) -> bool:
    """
    一次试验：典型用户的 SIR 是否超过 β

    :param beta: SIR 阈值（线性）
    :param rng: 本次试验的随机流
    :return: 是否覆盖
    """
    return _trial_outcome(cfg, params, rng, mode, window_radius).sir > beta


def _run_chunk(
    job: Tuple[NetworkConfig, InParams, str, float, int, int, int]
) -> List[TrialOutcome]:
    cfg, params, mode, radius, seed, start, stop = job
    mode = SimulationMode(mode)
    return [_trial_outcome(cfg, params, trial_rng(seed, i), mode, radius) for i in range(start, stop)]


def run_trials(
    cfg: NetworkConfig,
    params: InParams,
    trials: int,
    master_seed: int,
    mode: SimulationMode = SimulationMode.Approximate,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    window_constant: float = DEFAULT_WINDOW_CONSTANT,
    progress: bool = False,
) -> pd.DataFrame:
    """
    运行 trials 次独立试验

    第 i 次试验使用 trial_rng(master_seed, i)，结果与进程数和分块方式无关。

    :param workers: 进程数；1 时在当前进程内运行
    :param progress: 是否显示 tqdm 进度条
    :return: 每行一次试验（TrialOutcome 的字段加 trial 序号），按序号排列
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    radius = simulation_window_radius(cfg, window_constant)
    jobs = [
        (cfg, params, mode.value, radius, master_seed, start, stop)
        for start, stop in chunk_ranges(trials, chunk_size)
    ]
    logger.info(f"开始蒙特卡洛仿真：{trials} 次试验，{len(jobs)} 个分块，窗口半径 {radius:.1f} m")

    if workers <= 1:
        chunks = map(_run_chunk, jobs)
        outcomes = [row for chunk in tqdm(chunks, total=len(jobs), disable=not progress) for row in chunk]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            chunks = executor.map(_run_chunk, jobs)
            outcomes = [
                row for chunk in tqdm(chunks, total=len(jobs), disable=not progress) for row in chunk
            ]

    frame = pd.DataFrame(outcomes, columns=TrialOutcome._fields)
    frame.insert(0, "trial", np.arange(trials))
    resampled = int(frame["resamples"].sum())
    if resampled:
        logger.warning(f"⚠️ 共有 {resampled} 次空层重采样")
    logger.info(f"✅ 蒙特卡洛仿真完成：{trials} 次试验")
    return frame


def coverage_from_trials(
    sir: Sequence[float], beta_grid: Sequence[float], master_seed: int
) -> List[McEstimate]:
    """用同一组 SIR 样本估计每个 β 的覆盖概率（公共随机数）"""
    sir = np.asarray(sir, dtype=float)
    estimates = []
    for beta in beta_grid:
        mean = float(np.mean(sir > beta))
        estimates.append(
            McEstimate(
                beta=float(beta),
                mean=mean,
                ci_halfwidth_95=CI_Z_95 * math.sqrt(mean * (1.0 - mean) / len(sir)),
                trials=len(sir),
                seed=master_seed,
            )
        )
    return estimates


def estimate_coverage(
    cfg: NetworkConfig,
    params: InParams,
    beta_grid: Sequence[float],
    trials: int,
    master_seed: int,
    mode: SimulationMode = SimulationMode.Approximate,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    window_constant: float = DEFAULT_WINDOW_CONSTANT,
    progress: bool = False,
) -> List[McEstimate]:
    """
    估计 β 网格上的覆盖概率

    所有 β 共用同一批网络快照与衰落样本，同一种子下估计值随 β 单调不增。
    """
    frame = run_trials(
        cfg, params, trials, master_seed, mode, workers, chunk_size, window_constant, progress
    )
    return coverage_from_trials(frame["sir"].to_numpy(), beta_grid, master_seed)


def _complex_gaussian(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _draw_stack(n1: int, u: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    # 每个样本一行 h^† 与 u 行 g_i^†
    channels = _complex_gaussian(rng, (samples, u + 1, n1))
    stack = channels.conj()
    if u > 0 and np.max(np.linalg.cond(stack)) > SINGULAR_COND_LIMIT:
        raise SingularStackError("堆叠信道矩阵条件数过大")
    return channels


def zfbf_oracle(n1: int, u: int, samples: int, rng: np.random.Generator) -> ZfbfReport:
    """
    显式 ZFBF 预编码的分布校验

    f = w/‖w‖，w 为 H^†(H H^†)^(-1) 的第一列，H 的各行为 h^†, g_1^†, ..., g_u^†。
    u = 0 时退化为 MRT。

    :param n1: 宏基站天线数
    :param u: 置零的用户数，0 ≤ u < n1
    :param samples: 样本数，至少 1000
    :return: 置零残差、|h^†f|² 对 Gamma(n1-u, 1) 以及独立 |g^†f|² 对 Exp(1) 的 KS 检验
    """
    if not 0 <= u < n1:
        raise ValueError(f"u must lie in [0, {n1 - 1}]")
    if samples < MIN_ORACLE_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_ORACLE_SAMPLES}")

    retrying = Retrying(
        retry=retry_if_exception_type(SingularStackError),
        stop=stop_after_attempt(MAX_RESAMPLE_ATTEMPTS),
        reraise=True,
    )
    for attempt in retrying:
        with attempt:
            channels = _draw_stack(n1, u, samples, rng)
    resamples = attempt.retry_state.attempt_number - 1

    stack = channels.conj()
    w = np.linalg.pinv(stack)[:, :, 0]
    f = w / np.linalg.norm(w, axis=1, keepdims=True)

    responses = np.einsum("sun,sn->su", stack, f)
    gain = np.abs(responses[:, 0]) ** 2
    residual = float(np.max(np.abs(responses[:, 1:]))) if u > 0 else 0.0

    independent = _complex_gaussian(rng, (samples, n1))
    leak = np.abs(np.einsum("sn,sn->s", independent.conj(), f)) ** 2

    gain_test = stats.kstest(gain, stats.gamma(a=n1 - u).cdf)
    leak_test = stats.kstest(leak, "expon")
    return ZfbfReport(
        n1=n1,
        u=u,
        samples=samples,
        max_residual=residual,
        mean_gain=float(np.mean(gain)),
        gain_ks_statistic=float(gain_test.statistic),
        gain_ks_pvalue=float(gain_test.pvalue),
        leak_ks_statistic=float(leak_test.statistic),
        leak_ks_pvalue=float(leak_test.pvalue),
        resamples=resamples,
    )
