# backend/litehetnet/netconfig.py

import json
import logging
import math
import os
from typing import Any, Dict, Mapping, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    ValidationInfo,
    field_validator,
    model_validator,
)
from pydantic_core import PydanticCustomError

from backend.litehetnet.constants import (
    DEFAULT_ABS_TOL,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_MAX_SUBDIVISIONS,
    DEFAULT_MAX_WORKERS,
    DEFAULT_MODE,
    DEFAULT_REL_TOL,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    DEFAULT_WINDOW_CONSTANT,
    ENV_MODE,
    ENV_SEED,
    ENV_TRIALS,
    ENV_WINDOW_CONSTANT,
    ENV_WORKERS,
    FIG2_ALPHA1,
    FIG2_ALPHA2,
    FIG2_LAMBDA1,
    FIG2_LAMBDA2,
    FIG2_N1,
    FIG2_N2,
    FIG2_P1_OVER_P2_DB,
    FIG2_U_MAX,
    MAX_SEED,
    MODE_IN,
    MODE_NON_IN,
    USER_DENSITY_FACTOR,
)
from backend.litehetnet.hetnet_enums import SimulationMode
from backend.litehetnet.specfun import QuadratureSettings

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """配置错误，rule 为被违反的规则名"""

    def __init__(self, rule: str, message: str):
        super().__init__(message)
        self.rule = rule
        self.message = message


def db_to_linear(value_db: float) -> float:
    """dB 转线性值"""
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """线性值转 dB"""
    return 10.0 * math.log10(value)


def _check_tier(j: int) -> int:
    if j not in (1, 2):
        raise ValueError(f"tier must be 1 or 2, got {j}")
    return j


class NetworkConfig(BaseModel):
    """两层下行异构网络的参数（宏基站为第 1 层，微基站为第 2 层）"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda1: float = Field(..., description="宏基站密度 [nodes/m²]")
    lambda2: float = Field(..., description="微基站密度 [nodes/m²]")
    lambda_u: float = Field(..., description="用户密度 [nodes/m²]，仅完整仿真模式使用")
    p1: float = Field(..., description="宏基站发射功率（线性）")
    p2: float = Field(..., description="微基站发射功率（线性）")
    alpha1: float = Field(..., description="宏基站路径损耗指数")
    alpha2: float = Field(..., description="微基站路径损耗指数")
    n1: int = Field(..., description="宏基站天线数")
    n2: int = Field(..., description="微基站天线数")

    @model_validator(mode="before")
    @classmethod
    def _default_user_density(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("lambda_u") is None:
            try:
                total = float(data["lambda1"]) + float(data["lambda2"])
            except (KeyError, TypeError, ValueError):
                return data
            data = {**data, "lambda_u": USER_DENSITY_FACTOR * total}
        return data

    @field_validator("lambda1", "lambda2", "lambda_u", "p1", "p2")
    @classmethod
    def _check_positive(cls, value: float, info: ValidationInfo) -> float:
        if not (math.isfinite(value) and value > 0):
            raise PydanticCustomError(
                "positive", "{field} must be positive", {"field": info.field_name}
            )
        return value

    @field_validator("alpha1", "alpha2")
    @classmethod
    def _check_alpha(cls, value: float, info: ValidationInfo) -> float:
        if not (math.isfinite(value) and value > 2):
            raise PydanticCustomError(
                "alpha_gt_2", "{field} must exceed 2", {"field": info.field_name}
            )
        return value

    @field_validator("n2")
    @classmethod
    def _check_n2(cls, value: int) -> int:
        if value < 1:
            raise PydanticCustomError("n2_ge_1", "n2 must be >= 1")
        return value

    @model_validator(mode="after")
    def _check_antennas(self) -> "NetworkConfig":
        if self.n1 <= self.n2:
            raise PydanticCustomError("n1_gt_n2", "n1 must exceed n2")
        return self

    @property
    def p1_over_p2_db(self) -> float:
        return linear_to_db(self.p1 / self.p2)

    def density(self, j: int) -> float:
        return self.lambda1 if _check_tier(j) == 1 else self.lambda2

    def power(self, j: int) -> float:
        return self.p1 if _check_tier(j) == 1 else self.p2

    def alpha(self, j: int) -> float:
        return self.alpha1 if _check_tier(j) == 1 else self.alpha2

    def antennas(self, j: int) -> int:
        return self.n1 if _check_tier(j) == 1 else self.n2


class InParams(BaseModel):
    """IN 方案的设计参数 (U, T1, T2)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    u_max: int = Field(0, description="最大 IN 自由度 U")
    t1: float = Field(1.0, description="宏用户的 IN 阈值")
    t2: float = Field(1.0, description="微用户的 IN 阈值")

    @field_validator("u_max")
    @classmethod
    def _check_u(cls, value: int) -> int:
        if value < 0:
            raise PydanticCustomError("u_nonnegative", "u_max must be >= 0")
        return value

    @field_validator("t1", "t2")
    @classmethod
    def _check_threshold(cls, value: float, info: ValidationInfo) -> float:
        if not (math.isfinite(value) and value >= 1):
            raise PydanticCustomError(
                "threshold_ge_1", "{field} must be >= 1", {"field": info.field_name}
            )
        return value

    @property
    def is_non_in(self) -> bool:
        """U=0 或两个阈值都为 1 时不会发生任何置零"""
        return self.u_max == 0 or (self.t1 == 1 and self.t2 == 1)

    @property
    def mode(self) -> str:
        return MODE_NON_IN if self.is_non_in else MODE_IN

    def threshold(self, j: int) -> float:
        return self.t1 if _check_tier(j) == 1 else self.t2

    def with_changes(self, **changes: Any) -> "InParams":
        """返回修改后的新参数（重新校验）"""
        return InParams.model_validate({**self.model_dump(), **changes})


def _env_default(name: str, default: Any, cast=str):
    return lambda: cast(os.getenv(name, str(default)))


class EngineSettings(BaseModel):
    """引擎设置；默认值可由环境变量覆盖"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    trials: int = Field(default_factory=_env_default(ENV_TRIALS, DEFAULT_TRIALS, int))
    seed: int = Field(default_factory=_env_default(ENV_SEED, DEFAULT_SEED, int))
    mode: SimulationMode = Field(
        default_factory=_env_default(ENV_MODE, DEFAULT_MODE, SimulationMode)
    )
    workers: int = Field(default_factory=_env_default(ENV_WORKERS, DEFAULT_MAX_WORKERS, int))
    chunk_size: int = DEFAULT_CHUNK_SIZE
    window_constant: float = Field(
        default_factory=_env_default(ENV_WINDOW_CONSTANT, DEFAULT_WINDOW_CONSTANT, float)
    )
    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    max_subdivisions: int = DEFAULT_MAX_SUBDIVISIONS

    @field_validator("trials", "workers", "chunk_size", "max_subdivisions")
    @classmethod
    def _check_count(cls, value: int, info: ValidationInfo) -> int:
        if value < 1:
            raise PydanticCustomError(
                "count_ge_1", "{field} must be >= 1", {"field": info.field_name}
            )
        return value

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, value: int) -> int:
        if not 0 <= value <= MAX_SEED:
            raise PydanticCustomError("seed_u64", "seed must be an unsigned 64-bit integer")
        return value

    @field_validator("window_constant", "rel_tol", "abs_tol")
    @classmethod
    def _check_positive(cls, value: float, info: ValidationInfo) -> float:
        if not (math.isfinite(value) and value > 0):
            raise PydanticCustomError(
                "positive", "{field} must be positive", {"field": info.field_name}
            )
        return value

    def quadrature(self) -> QuadratureSettings:
        return QuadratureSettings(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            max_subdivisions=self.max_subdivisions,
        )


class ParameterBundle(BaseModel):
    """一次运行所需的全部参数"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    network: NetworkConfig
    in_params: InParams = Field(default_factory=InParams)
    engine: EngineSettings = Field(default_factory=EngineSettings)

    @model_validator(mode="after")
    def _check_u_max(self) -> "ParameterBundle":
        if self.in_params.u_max >= self.network.n1:
            raise PydanticCustomError("u_lt_n1", "u_max must be < n1")
        return self


NETWORK_KEYS = tuple(NetworkConfig.model_fields)
IN_KEYS = tuple(InParams.model_fields)
ENGINE_KEYS = tuple(EngineSettings.model_fields)
POWER_RATIO_KEY = "p1_over_p2_db"
KNOWN_KEYS = frozenset(NETWORK_KEYS + IN_KEYS + ENGINE_KEYS + (POWER_RATIO_KEY,))


_CUSTOM_RULES = frozenset(
    {
        "positive",
        "alpha_gt_2",
        "n2_ge_1",
        "n1_gt_n2",
        "u_nonnegative",
        "threshold_ge_1",
        "count_ge_1",
        "seed_u64",
        "u_lt_n1",
    }
)


def _to_config_error(exc: ValidationError) -> ConfigError:
    first = exc.errors()[0]
    rule = first["type"]
    message = first["msg"]
    fields = [str(part) for part in first.get("loc", ()) if part not in ("network", "in_params", "engine")]
    if rule not in _CUSTOM_RULES and fields:
        message = f"{'.'.join(fields)}: {message}"
    return ConfigError(rule, message)


def _warn_coupling(params: InParams) -> None:
    if params.u_max == 0 and (params.t1 > 1 or params.t2 > 1):
        logger.warning("⚠️ U=0 时阈值大于 1 只改变请求统计，不会发生置零")
    if params.u_max > 0 and params.t1 == 1 and params.t2 == 1:
        logger.warning("⚠️ T1=T2=1 时没有任何 IN 请求，U>0 不起作用（等价于非 IN 情形）")


def parse_mapping(data: Mapping[str, Any]) -> ParameterBundle:
    """
    把扁平的键值字典解析为参数包

    :param data: 扁平键值字典（键名见 NetworkConfig / InParams / EngineSettings）
    :return: 校验后的参数包
    :raises ConfigError: 未知键、格式错误或违反约束
    """
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ConfigError("unknown_key", f"unknown key(s): {', '.join(unknown)}")

    network = {key: data[key] for key in NETWORK_KEYS if key in data}
    if data.get(POWER_RATIO_KEY) is not None:
        if "p1" in data or "p2" in data:
            raise ConfigError(
                "power_ambiguous", "give either p1/p2 or p1_over_p2_db, not both"
            )
        try:
            ratio_db = float(data[POWER_RATIO_KEY])
        except (TypeError, ValueError) as exc:
            raise ConfigError("malformed", f"p1_over_p2_db: {exc}") from exc
        network["p1"] = db_to_linear(ratio_db)
        network["p2"] = 1.0

    in_part = {key: data[key] for key in IN_KEYS if key in data}
    engine_part = {key: data[key] for key in ENGINE_KEYS if key in data}

    try:
        bundle = ParameterBundle(network=network, in_params=in_part, engine=engine_part)
    except ValidationError as exc:
        raise _to_config_error(exc) from exc

    _warn_coupling(bundle.in_params)
    return bundle


def parse_config(text: str) -> ParameterBundle:
    """
    解析 JSON 配置文档

    :param text: JSON 文本（扁平对象）
    :return: 校验后的参数包
    :raises ConfigError: 文档格式错误或参数违反约束
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("malformed", f"malformed document: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("malformed", "configuration must be a JSON object")
    return parse_mapping(data)


def render_config(bundle: ParameterBundle) -> str:
    """把参数包渲染为 JSON 文档（功率为线性值），parse_config 可以原样读回"""
    flat: Dict[str, Any] = {}
    flat.update(bundle.network.model_dump(mode="json"))
    flat.update(bundle.in_params.model_dump(mode="json"))
    flat.update(bundle.engine.model_dump(mode="json"))
    return json.dumps(flat, indent=2)


def default_document() -> Dict[str, Any]:
    """默认网络（图 2 场景）的参数文档"""
    return {
        "n1": FIG2_N1,
        "n2": FIG2_N2,
        "alpha1": FIG2_ALPHA1,
        "alpha2": FIG2_ALPHA2,
        "p1_over_p2_db": FIG2_P1_OVER_P2_DB,
        "lambda1": FIG2_LAMBDA1,
        "lambda2": FIG2_LAMBDA2,
        "u_max": FIG2_U_MAX,
        "t1": 10.0,
        "t2": 10.0,
    }


def load_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> ParameterBundle:
    """
    读取配置文件并应用命令行覆盖

    :param path: JSON 配置文件路径；为空时使用图 2 参数
    :param overrides: 覆盖项（值为 None 的项被忽略）
    :return: 参数包
    :raises ConfigError: 文件不可读或参数无效
    """
    if path is None:
        data: Dict[str, Any] = default_document()
    else:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError("unreadable", f"cannot read {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("malformed", f"malformed document: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("malformed", "configuration must be a JSON object")

    if overrides:
        data = {**data, **{key: value for key, value in overrides.items() if value is not None}}
    return parse_mapping(data)
