# backend/litehetnet/nulling_lab.py

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from backend.litehetnet.analysis import CoverageResult, coverage_overall, outage_overall
from backend.litehetnet.asymptotics import (
    asymptotic_outage,
    empirical_u_star,
    optimal_u_asymptotic,
    optimal_u_order,
)
from backend.litehetnet.constants import (
    CSV_FLOAT_FORMAT,
    FIG2_BETA_DB,
    FIG2_THRESHOLDS,
    FIG2B_BETA_DB,
    FIG2B_CASES,
)
from backend.litehetnet.hetnet_enums import EngineKind, FigureKind, SimulationMode, SweepAxis
from backend.litehetnet.montecarlo import coverage_from_trials, run_trials
from backend.litehetnet.netconfig import (
    InParams,
    ParameterBundle,
    db_to_linear,
    load_config,
)
from backend.litehetnet.plot_templates import get_plot_script

logger = logging.getLogger(__name__)


class SweepSpec(BaseModel):
    """一维参数扫描：坐标轴、取值（严格递增）与参与的引擎"""

    model_config = ConfigDict(frozen=True)

    axis: SweepAxis
    values: Tuple[float, ...]
    engines: Tuple[EngineKind, ...] = (EngineKind.Analytical,)

    @field_validator("values")
    @classmethod
    def _check_values(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        if not values:
            raise ValueError("sweep values must be nonempty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        return values

    @field_validator("engines")
    @classmethod
    def _check_engines(cls, engines: Tuple[EngineKind, ...]) -> Tuple[EngineKind, ...]:
        if not engines or len(set(engines)) != len(engines):
            raise ValueError("engines must be a nonempty set")
        return engines

    @model_validator(mode="after")
    def _check_integer_axis(self) -> "SweepSpec":
        if self.axis == SweepAxis.U and any(v != int(v) for v in self.values):
            raise ValueError("u sweep values must be integers")
        return self


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """按固定格式写 CSV（表头、小数点、9 位有效数字）"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, float_format=CSV_FLOAT_FORMAT, index=False, lineterminator="\n")
    return path


class NullingLab:
    """用户中心干扰置零实验台：解析、仿真与渐近三种引擎的统一入口"""

    def __init__(
        self,
        bundle: Optional[ParameterBundle] = None,
        config_path: Optional[str] = None,
        verbose: bool = True,
        verbose_callback: Optional[Callable[[str], None]] = None,
    ):
        """
        初始化实验台

        :param bundle: 参数集合（优先）
        :param config_path: JSON 配置文件路径（bundle 为空时使用，均为空时取图 2 默认参数）
        :param verbose: 是否输出进度信息
        :param verbose_callback: 进度信息回调函数（可选）
        """
        self.bundle = bundle or load_config(config_path)
        self.network = self.bundle.network
        self.in_params = self.bundle.in_params
        self.engine = self.bundle.engine
        self.settings = self.engine.quadrature()
        self.verbose = verbose
        self.verbose_callback = verbose_callback
        self.last_trials: Optional[pd.DataFrame] = None

    def log(self, message: str) -> None:
        """
        记录进度信息

        :param message: 要记录的消息
        """
        if self.verbose:
            logger.info(message)
            if self.verbose_callback:
                self.verbose_callback(message)

    def _params(self, **changes: Any) -> InParams:
        return self.in_params.with_changes(**changes) if changes else self.in_params

    def _check_params(self, params: InParams) -> InParams:
        if params.u_max >= self.network.n1:
            raise ValueError(f"u_max must be < n1 ({self.network.n1})")
        return params

    def _analytical_map(self, jobs: Sequence[Tuple[float, InParams]]) -> List[CoverageResult]:
        def evaluate(job: Tuple[float, InParams]) -> CoverageResult:
            beta, params = job
            return coverage_overall(beta, self.network, params, self.settings)

        with ThreadPoolExecutor(max_workers=max(1, self.engine.workers)) as executor:
            return list(executor.map(evaluate, jobs))

    def coverage(self, beta_db: Sequence[float], params: Optional[InParams] = None) -> List[CoverageResult]:
        """解析覆盖概率，结果顺序与 beta_db 一致"""
        params = self._check_params(params or self.in_params)
        self.log(f"🔎 解析引擎：{len(beta_db)} 个 β 点，模式 {params.mode}")
        return self._analytical_map([(db_to_linear(b), params) for b in beta_db])

    def coverage_table(self, beta_db: Sequence[float]) -> pd.DataFrame:
        results = self.coverage(beta_db)
        return pd.DataFrame(
            {
                "beta_db": list(beta_db),
                "a1": [r.a1 for r in results],
                "a2": [r.a2 for r in results],
                "s1": [r.s1 for r in results],
                "s2": [r.s2 for r in results],
                "s": [r.s for r in results],
                "mode": [r.mode for r in results],
            }
        )

    def _trials(
        self,
        params: InParams,
        trials: Optional[int],
        seed: Optional[int],
        mode: Optional[SimulationMode],
        progress: bool,
    ) -> pd.DataFrame:
        frame = run_trials(
            self.network,
            params,
            trials or self.engine.trials,
            self.engine.seed if seed is None else seed,
            mode or SimulationMode(self.engine.mode),
            workers=self.engine.workers,
            chunk_size=self.engine.chunk_size,
            window_constant=self.engine.window_constant,
            progress=progress,
        )
        self.last_trials = frame
        return frame

    def simulate(
        self,
        beta_db: Sequence[float],
        trials: Optional[int] = None,
        seed: Optional[int] = None,
        mode: Optional[SimulationMode] = None,
        params: Optional[InParams] = None,
        progress: bool = False,
    ) -> pd.DataFrame:
        """
        蒙特卡洛覆盖概率

        :return: 列 beta_db, s_mc, ci95, trials, seed, mode
        """
        params = self._check_params(params or self.in_params)
        seed = self.engine.seed if seed is None else seed
        mode = mode or SimulationMode(self.engine.mode)
        self.log(f"🎲 仿真引擎：种子 {seed}，模式 {mode.value}")
        frame = self._trials(params, trials, seed, mode, progress)
        estimates = coverage_from_trials(
            frame["sir"].to_numpy(), [db_to_linear(b) for b in beta_db], seed
        )
        return pd.DataFrame(
            {
                "beta_db": list(beta_db),
                "s_mc": [e.mean for e in estimates],
                "ci95": [e.ci_halfwidth_95 for e in estimates],
                "trials": [e.trials for e in estimates],
                "seed": [e.seed for e in estimates],
                "mode": mode.value,
            }
        )

    def compare(
        self,
        beta_db: Sequence[float],
        trials: Optional[int] = None,
        seed: Optional[int] = None,
        mode: Optional[SimulationMode] = None,
        progress: bool = False,
    ) -> pd.DataFrame:
        """
        解析值与仿真值对比

        :return: 列 beta_db, s_analytical, s1, s2, s_mc, ci95, rel_gap
        """
        analytical = self.coverage(beta_db)
        simulated = self.simulate(beta_db, trials, seed, mode, progress=progress)
        s_ana = np.array([r.s for r in analytical])
        frame = pd.DataFrame(
            {
                "beta_db": list(beta_db),
                "s_analytical": s_ana,
                "s1": [r.s1 for r in analytical],
                "s2": [r.s2 for r in analytical],
                "s_mc": simulated["s_mc"].to_numpy(),
                "ci95": simulated["ci95"].to_numpy(),
            }
        )
        frame["rel_gap"] = np.abs(frame["s_analytical"] - frame["s_mc"]) / frame["s_analytical"]
        worst = float(frame["rel_gap"].max())
        self.log(f"✅ 最大相对误差 {worst:.2%}")
        return frame

    def _params_for(self, axis: SweepAxis, value: float) -> InParams:
        if axis == SweepAxis.T1:
            return self._params(t1=value)
        if axis == SweepAxis.T2:
            return self._params(t2=value)
        if axis == SweepAxis.TJoint:
            return self._params(t1=value, t2=value)
        if axis == SweepAxis.U:
            return self._check_params(self._params(u_max=int(value)))
        return self.in_params

    def sweep(
        self,
        spec: SweepSpec,
        beta_db: float = FIG2_BETA_DB,
        trials: Optional[int] = None,
        seed: Optional[int] = None,
        progress: bool = False,
    ) -> pd.DataFrame:
        """
        沿一个坐标轴扫描

        β 轴以外的扫描固定 β = beta_db；仿真在每个点使用相同的种子（配对比较）。
        输出行顺序与 spec.values 一致。
        """
        axis = spec.axis
        values = list(spec.values)
        frame = pd.DataFrame({axis.value: values})
        self.log(f"🔎 扫描 {axis.value}：{len(values)} 个点，引擎 {[e.value for e in spec.engines]}")

        if axis == SweepAxis.BetaDb:
            betas = [db_to_linear(v) for v in values]
            jobs = [(beta, self.in_params) for beta in betas]
        else:
            betas = [db_to_linear(beta_db)] * len(values)
            jobs = [(beta, self._params_for(axis, v)) for beta, v in zip(betas, values)]

        if EngineKind.Analytical in spec.engines:
            frame["s_analytical"] = [r.s for r in self._analytical_map(jobs)]

        if EngineKind.MonteCarlo in spec.engines:
            if axis == SweepAxis.BetaDb:
                simulated = self.simulate(values, trials, seed, progress=progress)
                frame["s_mc"] = simulated["s_mc"].to_numpy()
                frame["ci95"] = simulated["ci95"].to_numpy()
            else:
                means, widths = [], []
                for (beta, params), value in zip(jobs, values):
                    self.log(f"🎲 {axis.value} = {value:g}")
                    sir = self._trials(params, trials, seed, None, progress)["sir"].to_numpy()
                    estimate = coverage_from_trials(sir, [beta], self.engine.seed if seed is None else seed)[0]
                    means.append(estimate.mean)
                    widths.append(estimate.ci_halfwidth_95)
                frame["s_mc"] = means
                frame["ci95"] = widths

        if EngineKind.Asymptotic in spec.engines:
            results = [asymptotic_outage(beta, self.network, params, self.settings) for beta, params in jobs]
            frame["outage_asymptotic"] = [r.value for r in results]
            frame["order"] = [r.effective_order for r in results]

        if "s_analytical" in frame and "s_mc" in frame:
            frame["rel_gap"] = np.abs(frame["s_analytical"] - frame["s_mc"]) / frame["s_analytical"]
        return frame

    def asymptotic_table(
        self,
        u_values: Optional[Sequence[int]] = None,
        t1: Optional[float] = None,
        t2: Optional[float] = None,
        beta: float = 1e-5,
    ) -> pd.DataFrame:
        """
        渐近系数表

        :return: 列 u, d, d1, d2, b1, b2, b, u_star_d, u_star
        """
        changes = {k: v for k, v in (("t1", t1), ("t2", t2)) if v is not None}
        base = self._params(**changes)
        u_values = list(u_values) if u_values is not None else list(range(self.network.n1))
        u_star_d = "{" + ",".join(str(u) for u in optimal_u_order(self.network)) + "}"

        rows = []
        for u in u_values:
            params = self._check_params(base.with_changes(u_max=int(u)))
            result = asymptotic_outage(beta, self.network, params, self.settings)
            rows.append(
                {
                    "u": int(u),
                    "d": result.d,
                    "d1": result.d1,
                    "d2": result.d2,
                    "b1": result.b1,
                    "b2": result.b2,
                    "b": result.b,
                    "u_star_d": u_star_d,
                    "u_star": result.u_star,
                }
            )
        frame = pd.DataFrame.from_records(rows)
        frame["u_star"] = frame["u_star"].astype("Int64")
        return frame

    def threshold_grid(
        self,
        t1_values: Sequence[float],
        t2_values: Sequence[float],
        beta_db: float = FIG2_BETA_DB,
    ) -> Tuple[pd.DataFrame, Dict[str, float]]:
        """
        在 (T1, T2) 网格上计算解析覆盖概率（只做网格搜索）

        :return: (网格表 t1, t2, s1, s2, s；覆盖概率最大的网格点)
        """
        beta = db_to_linear(beta_db)
        grid = [(t1, t2) for t1 in t1_values for t2 in t2_values]
        self.log(f"🔎 阈值网格：{len(grid)} 个点")
        results = self._analytical_map([(beta, self._params(t1=t1, t2=t2)) for t1, t2 in grid])
        frame = pd.DataFrame(
            {
                "t1": [g[0] for g in grid],
                "t2": [g[1] for g in grid],
                "s1": [r.s1 for r in results],
                "s2": [r.s2 for r in results],
                "s": [r.s for r in results],
            }
        )
        best = frame.loc[frame["s"].idxmax()]
        return frame, {"t1": float(best["t1"]), "t2": float(best["t2"]), "s": float(best["s"])}

    def optimal_u_report(self, beta_db: Sequence[float] = FIG2B_BETA_DB) -> Dict[str, Any]:
        """U*_d、U*、两个比较系数以及经验交叉点 β̄"""
        choice = optimal_u_asymptotic(self.network, self.in_params, self.settings)
        crossover = empirical_u_star(
            [db_to_linear(b) for b in beta_db], self.network, self.in_params, self.settings
        )
        self.log(f"✅ U* = {choice.u_star}，β̄ = {crossover.beta_bar}")
        return {
            "u_star_d": optimal_u_order(self.network),
            "u_star": choice.u_star,
            "b_lower": choice.b_lower,
            "b_upper": choice.b_upper,
            "beta_bar": crossover.beta_bar,
            "crossover": crossover.table,
        }

    def _fig2a_frame(self, trials: Optional[int], seed: Optional[int]) -> pd.DataFrame:
        spec = SweepSpec(
            axis=SweepAxis.TJoint,
            values=FIG2_THRESHOLDS,
            engines=(EngineKind.Analytical, EngineKind.MonteCarlo),
        )
        frame = self.sweep(spec, FIG2_BETA_DB, trials, seed).rename(columns={"t_joint": "threshold"})
        baseline = coverage_overall(
            db_to_linear(FIG2_BETA_DB), self.network, InParams(), self.settings
        )
        frame["s_non_in"] = baseline.s
        frame["gain"] = frame["s_analytical"] / baseline.s - 1.0
        return frame

    def _fig2b_frame(self) -> pd.DataFrame:
        records = []
        for u, t1, t2 in FIG2B_CASES:
            if u >= self.network.n1:
                logger.warning(f"⚠️ 跳过 U={u}：超过宏基站天线数")
                continue
            params = InParams(u_max=u, t1=t1, t2=t2)
            self.log(f"🔎 图 2(b)：U={u}, T1={t1:g}, T2={t2:g}")
            for beta_db in FIG2B_BETA_DB:
                beta = db_to_linear(beta_db)
                records.append(
                    {
                        "u": u,
                        "t1": t1,
                        "t2": t2,
                        "beta_db": beta_db,
                        "outage_analytical": outage_overall(beta, self.network, params, self.settings),
                        "outage_asymptotic": asymptotic_outage(beta, self.network, params, self.settings).value,
                    }
                )
        return pd.DataFrame.from_records(records)

    def figure_data(
        self,
        figure: FigureKind,
        out_dir: str,
        trials: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> List[str]:
        """
        生成图数据 CSV 与读取它的 matplotlib 脚本

        :return: 写出的文件路径
        """
        os.makedirs(out_dir, exist_ok=True)
        if figure == FigureKind.Fig2a:
            frame = self._fig2a_frame(trials, seed)
        else:
            frame = self._fig2b_frame()
        csv_name = f"{figure.value}.csv"
        csv_path = write_csv(frame, os.path.join(out_dir, csv_name))
        script_path = os.path.join(out_dir, f"plot_{figure.value}.py")
        with open(script_path, "w", encoding="utf-8") as handle:
            handle.write(get_plot_script(figure, csv_name))
        self.log(f"✅ 已写出 {csv_path} 和 {script_path}")
        return [csv_path, script_path]
