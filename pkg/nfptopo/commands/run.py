"""
run 子命令
读取运行配置、执行一次优化并写出结果
"""

import argparse

from loguru import logger

from ..services.config_loader import load_config, resolve_config
from ..services.optimizer import run as run_optimization
from ..services.outputs import write_outputs
from ..services.presets import build_problem


def register(subparsers):
    parser = subparsers.add_parser("run", help="按配置文件执行一次优化")
    parser.add_argument("config", help="key=value 运行配置文件")
    parser.add_argument("--output-dir", help="覆盖配置中的 output_dir")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    """
    执行 run 子命令
    """
    config = load_config(args.config)
    if args.output_dir:
        config = config.model_copy(update={"output_dir": args.output_dir})
    config = resolve_config(config)

    problem = build_problem(config)
    trace = run_optimization(problem)
    write_outputs(trace, problem.mesh, config.output_dir, config)

    final = trace.final
    logger.info(
        f"完成: {problem.name}, 迭代 {final.iteration} ({trace.stop_reason}), "
        f"f0={final.f0:.6g}, 灰度={final.grayness:.4f}, 输出目录 {config.output_dir}"
    )
    return 0
