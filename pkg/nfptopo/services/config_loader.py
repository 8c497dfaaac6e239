"""
配置文件服务
扁平 key=value 文本（允许 # 注释与空行），由 python-dotenv 的解析器逐行解析
"""

import os
from typing import Dict, Optional, Type, TypeVar

from dotenv.parser import parse_stream
from loguru import logger
from pydantic import BaseModel, ValidationError

from ..config import settings
from ..errors import ConfigError, ConfigParseError, ConfigValidationError
from ..models.run_config import RunConfig, StudyConfig
from .presets import COMPLIANT_SCALE, OUTPUT_SPRING, STIFF_SCALE, get_preset

ConfigModel = TypeVar("ConfigModel", bound=BaseModel)


def _binding_line(binding) -> int:
    """
    绑定的起始行号会包含前导空行，这里定位到实际内容所在行
    """
    text = binding.original.string
    leading = text[: len(text) - len(text.lstrip())]
    return binding.original.line + leading.count("\n")


def read_pairs(path: str) -> Dict[str, Optional[str]]:
    """
    读取配置文件为 键 → 值 字典，空值视为未设置
    """
    try:
        with open(path, "r", encoding="utf-8") as stream:
            bindings = list(parse_stream(stream))
    except FileNotFoundError:
        raise ConfigError(f"配置文件不存在: {path}")
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}")

    pairs: Dict[str, Optional[str]] = {}
    for binding in bindings:
        if binding.error:
            raise ConfigParseError(path, _binding_line(binding), binding.original.string.strip())
        if binding.key is None:
            continue
        if binding.key in pairs:
            raise ConfigValidationError(binding.key, f"在第 {_binding_line(binding)} 行重复出现")
        value = binding.value.strip() if binding.value is not None else ""
        pairs[binding.key] = value or None
    return pairs


def _validate(model: Type[ConfigModel], pairs: Dict[str, Optional[str]]) -> ConfigModel:
    values = {key: value for key, value in pairs.items() if value is not None or key not in model.model_fields}
    try:
        config = model(**values)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or "?"
        raise ConfigValidationError(key, error["msg"])
    get_preset(config.preset)
    return config


def load_config(path: str) -> RunConfig:
    """
    读取并校验单次运行配置
    """
    config = _validate(RunConfig, read_pairs(path))
    logger.info(f"已加载运行配置 {path}: 预设 {config.preset}")
    return config


def load_study_config(path: str) -> StudyConfig:
    """
    读取并校验对比研究配置
    """
    config = _validate(StudyConfig, read_pairs(path))
    logger.info(f"已加载研究配置 {path}: {config.study}, 预设 {config.preset}")
    return config


def resolve_config(config: RunConfig) -> RunConfig:
    """
    用预设默认值补全配置中未设置的项
    """
    preset = get_preset(config.preset)
    counts = dict(zip(("nx", "ny", "nz"), preset.counts))
    updates = {}
    for axis, length_key in zip(("nx", "ny", "nz"), ("lx", "ly", "lz")):
        if axis not in counts:
            continue
        count = getattr(config, axis) if getattr(config, axis) is not None else counts[axis]
        updates[axis] = count
        if getattr(config, length_key) is None:
            updates[length_key] = float(count)

    if config.vf is None:
        updates["vf"] = preset.volume_fraction
    shape = config.neighborhood or preset.neighborhood
    updates["neighborhood"] = shape
    if config.ls is None and shape != "circle":
        updates["ls"] = preset.ls
    if config.mu is None:
        updates["mu"] = COMPLIANT_SCALE if preset.kind == "compliant" else STIFF_SCALE
    if config.spring is None and preset.kind == "compliant":
        updates["spring"] = OUTPUT_SPRING
    if config.snapshot_every is None:
        updates["snapshot_every"] = settings.SNAPSHOT_EVERY
    if config.output_dir is None:
        updates["output_dir"] = os.path.join(settings.OUTPUT_DIR, preset.name)
    return config.model_copy(update=updates)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(item) for item in value)
    return str(value)


def dump_config(config: BaseModel) -> str:
    """
    按字段顺序输出 key=value 文本，可被 load_config 原样读回
    """
    lines = [f"{key}={_format_value(getattr(config, key))}" for key in type(config).model_fields]
    return "\n".join(lines) + "\n"
