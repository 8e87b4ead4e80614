# backend/litehetnet/cli.py

"""
命令行入口

子命令：coverage | simulate | compare | asymptotic | plotdata | optimal-u。
β 以 dB 给出，可以是单个值、逗号分隔的列表或 START:STOP:STEP（含端点）。
负数开头的网格需写成 --beta-db=-50:-30:2.5。
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from backend.litehetnet.analysis import CoverageInvariantError
from backend.litehetnet.constants import (
    CSV_FLOAT_FORMAT,
    EXIT_CONFIG_ERROR,
    EXIT_INVARIANT_ERROR,
    EXIT_NUMERIC_ERROR,
    EXIT_OK,
    FIG2_BETA_DB,
    FIG2B_BETA_DB,
)
from backend.litehetnet.geometry import EmptyTierError
from backend.litehetnet.hetnet_enums import FigureKind, SimulationMode
from backend.litehetnet.montecarlo import SingularStackError
from backend.litehetnet.netconfig import ConfigError, db_to_linear, load_config
from backend.litehetnet.nulling_lab import NullingLab, write_csv
from backend.litehetnet.specfun import QuadratureError

logger = logging.getLogger(__name__)


def parse_beta_grid(text: str) -> List[float]:
    """
    解析 β 网格（dB）

    :param text: "10"、"0,5,10" 或 "0:20:2"（含端点）
    :return: 严格递增的 dB 值列表
    :raises argparse.ArgumentTypeError: 格式错误
    """
    try:
        if ":" in text:
            start, stop, step = (float(part) for part in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("need STEP > 0 and STOP >= START")
            count = int(round((stop - start) / step))
            values = [round(start + step * i, 12) for i in range(count + 1)]
        else:
            values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid beta grid '{text}': {exc}") from exc
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError(f"beta grid '{text}' must be nonempty and strictly increasing")
    return values


def _parse_int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid integer list '{text}'") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="litehetnet", description="两层异构网络中用户中心干扰置零的解析/仿真实验台"
    )
    parser.add_argument("--verbose", action="store_true", help="输出调试日志")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser, beta_default: Optional[str] = None) -> None:
        sub.add_argument("--config", default=None, help="JSON 配置文件（缺省为图 2 参数）")
        sub.add_argument("--u-max", dest="u_max", type=int, default=None, help="覆盖最大 IN 自由度 U")
        sub.add_argument("--t1", type=float, default=None, help="覆盖宏用户 IN 阈值")
        sub.add_argument("--t2", type=float, default=None, help="覆盖微用户 IN 阈值")
        sub.add_argument("--workers", type=int, default=None, help="并行进程/线程数")
        if beta_default is not None:
            sub.add_argument(
                "--beta-db", dest="beta_db", type=parse_beta_grid, default=parse_beta_grid(beta_default),
                help="SIR 阈值 (dB)：LIST 或 START:STOP:STEP",
            )

    def add_simulation(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--trials", type=int, default=None, help="试验次数")
        sub.add_argument("--seed", type=int, default=None, help="主种子（64 位无符号整数）")
        sub.add_argument("--mode", choices=[m.value for m in SimulationMode], default=None)

    coverage = commands.add_parser("coverage", help="解析覆盖概率（JSON）")
    add_common(coverage, str(FIG2_BETA_DB))

    simulate = commands.add_parser("simulate", help="蒙特卡洛覆盖概率（CSV）")
    add_common(simulate, str(FIG2_BETA_DB))
    add_simulation(simulate)
    simulate.add_argument("--out", default=None, help="CSV 输出路径（缺省写到标准输出）")

    compare = commands.add_parser("compare", help="解析与仿真对比（CSV）")
    add_common(compare, str(FIG2_BETA_DB))
    add_simulation(compare)
    compare.add_argument("--out", default=None)

    asymptotic = commands.add_parser("asymptotic", help="渐近系数与最优 U 表（CSV）")
    add_common(asymptotic)
    asymptotic.add_argument("--u", type=_parse_int_list, default=None, help="U 列表，如 0,1,2")
    asymptotic.add_argument("--out", default=None)

    plotdata = commands.add_parser("plotdata", help="图数据 CSV + matplotlib 脚本")
    add_common(plotdata)
    add_simulation(plotdata)
    plotdata.add_argument("--figure", choices=[f.value for f in FigureKind], required=True)
    plotdata.add_argument("--out", default="figures", help="输出目录")

    optimal = commands.add_parser("optimal-u", help="U*_d、U* 与经验交叉点（JSON）")
    add_common(optimal, ",".join(f"{b:g}" for b in FIG2B_BETA_DB))
    optimal.add_argument("--out", default=None, help="交叉点表 CSV 输出路径")
    return parser


def _make_lab(args: argparse.Namespace) -> NullingLab:
    overrides: Dict[str, Any] = {
        "u_max": args.u_max,
        "t1": args.t1,
        "t2": args.t2,
        "workers": args.workers,
        "trials": getattr(args, "trials", None),
        "seed": getattr(args, "seed", None),
        "mode": getattr(args, "mode", None),
    }
    bundle = load_config(args.config, overrides)
    return NullingLab(bundle, verbose=args.verbose)


def _emit_csv(frame: pd.DataFrame, out: Optional[str]) -> None:
    if out:
        write_csv(frame, out)
        logger.info(f"✅ 结果已写入 {out}")
    else:
        frame.to_csv(sys.stdout, float_format=CSV_FLOAT_FORMAT, index=False, lineterminator="\n")


def _cmd_coverage(lab: NullingLab, args: argparse.Namespace) -> None:
    results = lab.coverage(args.beta_db)
    documents = [
        {"beta_db": beta_db, **result.model_dump()} for beta_db, result in zip(args.beta_db, results)
    ]
    payload = documents[0] if len(documents) == 1 else documents
    print(json.dumps(payload, indent=2))


def _cmd_simulate(lab: NullingLab, args: argparse.Namespace) -> None:
    _emit_csv(lab.simulate(args.beta_db, progress=args.out is not None), args.out)


def _cmd_compare(lab: NullingLab, args: argparse.Namespace) -> None:
    _emit_csv(lab.compare(args.beta_db, progress=args.out is not None), args.out)


def _cmd_asymptotic(lab: NullingLab, args: argparse.Namespace) -> None:
    _emit_csv(lab.asymptotic_table(args.u), args.out)


def _cmd_plotdata(lab: NullingLab, args: argparse.Namespace) -> None:
    for path in lab.figure_data(FigureKind(args.figure), args.out):
        print(path)


def _cmd_optimal_u(lab: NullingLab, args: argparse.Namespace) -> None:
    report = lab.optimal_u_report(args.beta_db)
    crossover = report.pop("crossover")
    beta_bar = report["beta_bar"]
    report["beta_bar_db"] = None if beta_bar is None else float(10.0 * np.log10(beta_bar))
    print(json.dumps(report, indent=2))
    if args.out:
        crossover.insert(0, "beta_db", args.beta_db)
        write_csv(crossover, args.out)


_COMMANDS = {
    "coverage": _cmd_coverage,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "asymptotic": _cmd_asymptotic,
    "plotdata": _cmd_plotdata,
    "optimal-u": _cmd_optimal_u,
}


def _check_command_args(lab: NullingLab, args: argparse.Namespace) -> None:
    """子命令自身参数的合法性，违反时按配置错误处理"""
    n1 = lab.network.n1
    for u in getattr(args, "u", None) or ():
        if not 0 <= u < n1:
            raise ConfigError("u_lt_n1", f"--u values must lie in [0, {n1 - 1}], got {u}")
    if args.command == "optimal-u" and min(lab.in_params.t1, lab.in_params.t2) <= 1.0:
        raise ConfigError("t_gt_1", "optimal-u needs t1 > 1 and t2 > 1")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    命令行主函数

    :return: 退出码（0 成功，2 配置错误，3 数值失败，4 内部不变量被破坏）
    """
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
    )

    try:
        lab = _make_lab(args)
        _check_command_args(lab, args)
    except ConfigError as exc:
        logger.error(f"❌ 配置错误 [{exc.rule}]: {exc.message}")
        return EXIT_CONFIG_ERROR
    except (ValidationError, ValueError) as exc:
        logger.error(f"❌ 参数错误: {exc}")
        return EXIT_CONFIG_ERROR

    # 参数已通过校验，之后的 ValidationError 来自结果模型
    try:
        _COMMANDS[args.command](lab, args)
    except (CoverageInvariantError, ValidationError) as exc:
        logger.error(f"❌ 内部不变量被破坏: {exc}")
        return EXIT_INVARIANT_ERROR
    except (QuadratureError, EmptyTierError, SingularStackError, ArithmeticError, ValueError) as exc:
        logger.error(f"❌ 数值计算失败: {exc}")
        return EXIT_NUMERIC_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
