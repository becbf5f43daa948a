# coding: utf-8
"""
日志配置模块

基于 loguru 的统一日志管理，以及阶段计时工具。
"""

import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

from loguru import logger

# 预定义的日志格式
FORMATS = {
    "simple": "{time:HH:mm:ss} | {level} | {message}",
    "detailed": "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}",
    "colorful": (
        "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
        "<level>{message}</level>"
    ),
}


class LoggerConfig:
    """日志配置管理器"""

    _initialized = False

    @classmethod
    def setup_logger(
        cls,
        level: str = "INFO",
        format_string: Optional[str] = None,
        log_file: Optional[str] = None,
        enable_console: bool = True,
        enable_file: bool = False,
        rotation: str = "10 MB",
        retention: str = "7 days",
    ) -> None:
        """
        设置日志配置

        控制台输出写到 stderr，stdout 留给命令行结果。

        Args:
            level: 日志级别 (TRACE, DEBUG, INFO, SUCCESS, WARNING, ERROR, CRITICAL)
            format_string: 自定义格式字符串
            log_file: 日志文件路径
            enable_console: 是否启用控制台输出
            enable_file: 是否启用文件输出
            rotation: 文件轮转设置
            retention: 日志保留时间
        """
        if cls._initialized:
            return

        logger.remove()
        fmt = format_string or FORMATS["colorful"]

        if enable_console:
            logger.add(sys.stderr, format=fmt, level=level, colorize=True)

        if enable_file and log_file:
            log_path = Path(log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            logger.add(
                log_path,
                format=FORMATS["detailed"],
                level=level,
                rotation=rotation,
                retention=retention,
                encoding="utf-8",
            )

        cls._initialized = True
        logger.debug(f"日志系统初始化完成，级别: {level}")

    @classmethod
    def setup_debug_mode(cls) -> None:
        """设置调试模式"""
        cls.setup_logger(
            level="DEBUG",
            enable_file=True,
            log_file="logs/shadowlab_debug.log",
        )

    @classmethod
    def setup_production_mode(cls) -> None:
        """设置生产模式（长实验）"""
        cls.setup_logger(
            level="INFO",
            enable_file=True,
            log_file="logs/shadowlab.log",
        )

    @classmethod
    def setup_silent_mode(cls) -> None:
        """设置静默模式"""
        cls.setup_logger(level="ERROR", enable_console=True)

    @classmethod
    def add_file_handler(cls, file_path: str, level: str = "DEBUG") -> None:
        """添加文件日志处理器"""
        log_path = Path(file_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_path,
            format=FORMATS["detailed"],
            level=level,
            rotation="10 MB",
            retention="7 days",
            encoding="utf-8",
        )
        logger.info(f"添加文件日志处理器: {file_path}")

    @classmethod
    def reset(cls) -> None:
        """允许重新初始化"""
        cls._initialized = False


def setup_logging(mode: str = "info", log_file: Optional[str] = None) -> None:
    """
    设置 ShadowLab 日志

    每次调用都按给定模式重建全部 handler。

    Args:
        mode: 日志模式 ("debug", "info", "production", "silent")，
            也接受 loguru 级别名
        log_file: 额外的日志文件
    """
    LoggerConfig.reset()
    mode = mode.lower()
    if mode == "debug":
        LoggerConfig.setup_debug_mode()
    elif mode == "production":
        LoggerConfig.setup_production_mode()
    elif mode == "silent":
        LoggerConfig.setup_silent_mode()
    elif mode == "info":
        LoggerConfig.setup_logger(level="INFO")
    else:
        LoggerConfig.setup_logger(level=mode.upper())

    if log_file:
        LoggerConfig.add_file_handler(log_file)


def log_performance(func_name: str, duration: float, **metrics: Any) -> None:
    """记录性能指标"""
    metrics_str = ", ".join(f"{k}={v}" for k, v in metrics.items())
    logger.info(f"性能统计 {func_name}: 耗时 {duration:.4f}s, {metrics_str}")


def log_error_with_context(error: BaseException, context: Dict[str, Any]) -> None:
    """记录带上下文的错误"""
    context_str = ", ".join(f"{k}={v}" for k, v in context.items())
    logger.error(f"错误: {error}, 上下文: {context_str}")


@contextmanager
def timed_stage(name: str, timings: Optional[Dict[str, float]] = None) -> Iterator[None]:
    """
    阶段计时上下文

    Args:
        name: 阶段名称
        timings: 若给出，把耗时（秒）累加到该字典
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        duration = time.perf_counter() - start
        if timings is not None:
            timings[name] = timings.get(name, 0.0) + duration
        log_performance(name, duration)
