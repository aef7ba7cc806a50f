from loguru import logger
import os
import sys
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .config.official_configs import DebugConfig

LOGGER_NAME = "dnn-tracking-toolkit"

common_fmt = (
    "<blue>{time:YYYY-MM-DD HH:mm:ss}</blue> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
    "<level>{message}</level>"
)


def _env_or(default: str, key: str) -> str:
    return os.getenv(key, default)


def _truthy(value: str) -> bool:
    return value.lower() in ("1", "true", "yes")


def setup_logging(debug: "DebugConfig") -> None:
    """按 [debug] 配置重新安装 sink；LOG_LEVEL / LOG_FILE / LOG_SERIALIZE 环境变量优先"""
    logger.remove()
    level = _env_or(debug.level, "LOG_LEVEL")
    serialize = _truthy(_env_or(str(debug.serialize), "LOG_SERIALIZE"))
    logger.add(
        sys.stderr,
        level=level,
        format=common_fmt,
        backtrace=debug.backtrace,
        diagnose=debug.diagnose,
    )
    if debug.to_file or os.getenv("LOG_FILE"):
        file_path = _env_or(debug.file_path, "LOG_FILE")
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            file_path,
            level=level,
            format=common_fmt,
            rotation=debug.rotation,
            retention=debug.retention,
            enqueue=True,
            encoding="utf-8",
            serialize=serialize,
            backtrace=debug.backtrace,
            diagnose=debug.diagnose,
        )


# 加载配置之前的默认 sink
logger.remove()
logger.add(sys.stderr, level=_env_or("INFO", "LOG_LEVEL"), format=common_fmt)

logger = logger.bind(name=LOGGER_NAME)
