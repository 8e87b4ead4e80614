import logging
import os

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


def load_env() -> bool:
    """
    加载项目根目录下的 .env 文件

    引擎默认值（试验次数、种子、进程数、仿真模式）可以通过环境变量覆盖，
    例如 LITEHETNET_TRIALS=100000。已经存在的环境变量不会被 .env 覆盖。

    :return: 是否找到并加载了 .env 文件
    """
    project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
    dotenv_path = os.path.join(project_root, ".env")

    loaded = load_dotenv(dotenv_path, override=False)
    if loaded:
        logger.debug(f"环境变量已从 {dotenv_path} 加载")
    return loaded
