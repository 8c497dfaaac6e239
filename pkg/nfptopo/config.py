"""
应用配置模块
集中管理进程级运行参数（求解器、日志、输出目录等）
问题参数（网格、体积分数、长度尺度……）由 RunConfig 配置文件提供
"""

import os
import sys
from typing import List

from dotenv import load_dotenv
from loguru import logger

# 加载.env文件
load_dotenv()


class Settings:
    """
    应用设置类
    从环境变量读取配置，提供默认值
    """

    # 基础配置
    DEBUG: bool = os.getenv("DEBUG", "false").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "./output")

    # 线性求解器配置（direct / cg）
    LINEAR_SOLVER: str = os.getenv("LINEAR_SOLVER", "direct").lower()
    CG_RTOL: float = float(os.getenv("CG_RTOL", "1e-10"))
    CG_MAXITER: int = int(os.getenv("CG_MAXITER", "20000"))
    RESIDUAL_TOL: float = float(os.getenv("RESIDUAL_TOL", "1e-9"))

    # 优化过程输出配置
    LOG_EVERY: int = int(os.getenv("LOG_EVERY", "10"))
    SNAPSHOT_EVERY: int = int(os.getenv("SNAPSHOT_EVERY", "50"))

    # 对比研究的并行进程数
    STUDY_WORKERS: int = int(os.getenv("STUDY_WORKERS", "1"))

    @classmethod
    def validate_config(cls) -> List[str]:
        """
        验证配置的有效性
        返回错误信息列表
        """
        errors = []

        if cls.LINEAR_SOLVER not in ("direct", "cg"):
            errors.append("LINEAR_SOLVER 只能是 direct 或 cg")

        if not 0 < cls.CG_RTOL < 1:
            errors.append("CG_RTOL 必须在 (0, 1) 之间")

        if cls.CG_MAXITER <= 0:
            errors.append("CG_MAXITER 必须大于 0")

        if cls.RESIDUAL_TOL <= 0:
            errors.append("RESIDUAL_TOL 必须大于 0")

        if cls.LOG_EVERY <= 0:
            errors.append("LOG_EVERY 必须大于 0")

        if cls.SNAPSHOT_EVERY < 0:
            errors.append("SNAPSHOT_EVERY 不能为负数")

        if cls.STUDY_WORKERS <= 0:
            errors.append("STUDY_WORKERS 必须大于 0")

        if cls.LOG_LEVEL not in ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"LOG_LEVEL 不是有效的日志级别: {cls.LOG_LEVEL}")

        return errors


def setup_logging(level: str = None):
    """
    配置 loguru 日志输出到标准错误
    """
    logger.remove()
    logger.add(
        sys.stderr,
        level=level or settings.LOG_LEVEL,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}",
        backtrace=settings.DEBUG,
        diagnose=settings.DEBUG,
    )


# 创建全局设置实例
settings = Settings()

# 验证配置
config_errors = settings.validate_config()
if config_errors:
    logger.error("配置验证失败:")
    for error in config_errors:
        logger.error(f"  - {error}")
    if not settings.DEBUG:
        raise ValueError("配置验证失败，请检查配置")
    else:
        logger.warning("DEBUG 模式下继续运行")
