"""
命令行子命令包
每个模块提供 register(subparsers) 注册子命令，并由 handler 执行
"""

from .presets import register as register_preset_list
from .run import register as register_run
from .study import register as register_study

__all__ = ["register_run", "register_preset_list", "register_study"]
