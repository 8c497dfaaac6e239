"""
nfptopo - 命令行主入口
子命令：run <config>、preset-list、study <study-config>
"""

import argparse
import sys
import traceback
from typing import List, Optional

from loguru import logger

from . import __version__
from .commands import register_preset_list, register_run, register_study
from .config import settings, setup_logging
from .errors import ConfigError, NumericalFailureError, OptimizationError, OutputError, TopOptError

# 退出码
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_OUTPUT = 4
EXIT_INTERRUPTED = 130


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfptopo",
        description="基于归一化场乘积（nFP）密度的拓扑优化工具",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="日志级别（默认取 LOG_LEVEL）")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_run(subparsers)
    register_preset_list(subparsers)
    register_study(subparsers)
    return parser


def exit_code_for(exc: BaseException) -> int:
    """
    异常 → 退出码
    """
    if isinstance(exc, OptimizationError) and exc.cause is not None:
        return exit_code_for(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericalFailureError):
        return EXIT_NUMERICAL
    if isinstance(exc, OutputError):
        return EXIT_OUTPUT
    return EXIT_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    """
    解析命令行并执行子命令，返回退出码
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level.upper() if args.log_level else None)

    try:
        return args.handler(args)
    except TopOptError as e:
        logger.error(str(e))
        if settings.DEBUG:
            logger.error(traceback.format_exc())
        return exit_code_for(e)
    except KeyboardInterrupt:
        logger.warning("已中断")
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.error(f"内部错误: {e}")
        if settings.DEBUG:
            logger.error(traceback.format_exc())
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
