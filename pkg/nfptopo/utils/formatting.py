"""
文本格式化工具
"""

import re


def format_number(value) -> str:
    """
    CSV 单元格：None 为空，浮点数保留 17 位有效数字
    """
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def safe_label(label: str) -> str:
    """
    变体标签 → 可用作文件名的片段
    """
    return re.sub(r"[^A-Za-z0-9._-]+", "_", label)
