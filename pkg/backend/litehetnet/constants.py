"""
Lite HetNet 常量定义
包含项目中使用的所有默认值、数值容差和魔法数字
"""

import math

# 数值积分相关常量
DEFAULT_REL_TOL = 1e-8
DEFAULT_ABS_TOL = 1e-10
DEFAULT_MAX_SUBDIVISIONS = 400
ENVELOPE_DROP = math.log(1e16)
ENVELOPE_GRID_START = 1e-6
ENVELOPE_GRID_GROWTH = 1.5
ENVELOPE_GRID_SIZE = 240
QUAD_ERROR_SLACK = 1e3

# 不完全贝塔函数的截断区间
Z_FLOOR = 1e-300
Z_CEIL = 1.0 - 1e-16

# IN 方案相关常量
LBAR_ZERO_LIMIT = 1e-8

# 中断概率直接计算（尾部级数）相关常量
OUTAGE_DIRECT_THRESHOLD = 1e-4
OUTAGE_TAIL_TERMS = 16
OUTAGE_TAIL_REL_TOL = 1e-10

# 概率取值的容差
PROBABILITY_SLACK = 1e-9

# 蒙特卡洛相关常量
DEFAULT_TRIALS = 10000
DEFAULT_SEED = 20170603
DEFAULT_CHUNK_SIZE = 500
DEFAULT_MAX_WORKERS = 4
DEFAULT_MODE = "approx"
DEFAULT_WINDOW_CONSTANT = 25.0
WINDOW_TRUNCATION_RATIO = 1e-3
MAX_WINDOW_FACTOR = 200.0
USER_DENSITY_FACTOR = 10.0
MAX_RESAMPLE_ATTEMPTS = 50
CI_Z_95 = 1.96
MAX_SEED = 2**64 - 1

# ZFBF 校验相关常量
SINGULAR_COND_LIMIT = 1e12
ZF_RESIDUAL_LIMIT = 1e-10
MIN_ORACLE_SAMPLES = 1000

# 图 2 场景的默认网络参数（宏基站 10 天线，微基站 8 天线）
FIG2_N1 = 10
FIG2_N2 = 8
FIG2_ALPHA1 = 4.5
FIG2_ALPHA2 = 4.7
FIG2_P1_OVER_P2_DB = 15.0
FIG2_LAMBDA1 = 0.0005
FIG2_LAMBDA2 = 0.001
FIG2_U_MAX = 9
FIG2_BETA_DB = 10.0
FIG2_THRESHOLDS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
FIG2B_BETA_DB = (-50.0, -47.5, -45.0, -42.5, -40.0, -37.5, -35.0, -32.5, -30.0)
FIG2B_CASES = (
    (0, 1.0, 1.0),
    (2, 2.0, 2.0),
    (2, 10.0, 10.0),
    (9, 2.0, 2.0),
    (9, 10.0, 10.0),
)

# 输出格式常量
CSV_FLOAT_FORMAT = "%.9g"
MODE_IN = "IN"
MODE_NON_IN = "non-IN"

# 退出码
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_ERROR = 3
EXIT_INVARIANT_ERROR = 4

# 环境变量名
ENV_TRIALS = "LITEHETNET_TRIALS"
ENV_SEED = "LITEHETNET_SEED"
ENV_WORKERS = "LITEHETNET_WORKERS"
ENV_MODE = "LITEHETNET_MODE"
ENV_WINDOW_CONSTANT = "LITEHETNET_WINDOW_CONSTANT"
