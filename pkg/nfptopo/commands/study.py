"""
study 子命令
读取研究配置，运行全部变体并写出对比报告
"""

import argparse
import os

from loguru import logger

from ..config import settings
from ..errors import ConfigValidationError, InvalidArgumentError
from ..services.config_loader import load_study_config
from ..services.experiments import run_study, study_from_config, write_report
from ..services.outputs import write_manifest


def register(subparsers):
    parser = subparsers.add_parser("study", help="按研究配置执行对比研究")
    parser.add_argument("config", help="key=value 研究配置文件")
    parser.add_argument("--output-dir", help="覆盖配置中的 output_dir")
    parser.add_argument("--workers", type=int, help="并行进程数（默认 STUDY_WORKERS）")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    """
    执行 study 子命令
    """
    config = load_study_config(args.config)
    directory = args.output_dir or config.output_dir or os.path.join(settings.OUTPUT_DIR, f"study_{config.study}")

    try:
        spec = study_from_config(config)
    except InvalidArgumentError as e:
        raise ConfigValidationError("study", str(e))
    report = run_study(spec, workers=args.workers)
    write_report(report, directory)
    write_manifest(directory, config)

    logger.info(f"研究 {config.study} 完成: {len(report.results)} 个变体，报告目录 {directory}")
    return 0
