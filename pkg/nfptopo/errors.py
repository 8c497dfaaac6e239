"""
异常定义模块
所有业务异常都继承自 TopOptError，命令行入口按类别映射退出码
"""

from typing import Optional


class TopOptError(Exception):
    """
    拓扑优化工具包的基础异常
    """


class InvalidArgumentError(TopOptError, ValueError):
    """
    参数不合法（数量、长度、形状参数等）
    """


class DomainError(InvalidArgumentError):
    """
    变量超出函数定义域（如 β 不在形函数定义域内，或对数参数非正）
    """


class PreconditionError(TopOptError):
    """
    调用前置条件不满足（如未求解的系统状态）
    """


class NumericalFailureError(TopOptError, ArithmeticError):
    """
    数值失败：奇异/不定刚度矩阵、内层求解不收敛、退化状态
    """


class OptimizationError(TopOptError):
    """
    优化循环中的失败，附带迭代号
    """

    def __init__(self, message: str, iteration: int, cause: Optional[BaseException] = None):
        super().__init__(f"第 {iteration} 次迭代失败: {message}")
        self.iteration = iteration
        self.cause = cause


class ConfigError(TopOptError):
    """
    配置文件错误的基类
    """


class ConfigParseError(ConfigError):
    """
    配置文件解析失败，记录行号
    """

    def __init__(self, path: str, line: int, text: str):
        super().__init__(f"{path}:{line}: 无法解析的配置行: {text!r}")
        self.path = path
        self.line = line


class ConfigValidationError(ConfigError):
    """
    配置项校验失败，记录出错的键名
    """

    def __init__(self, key: str, message: str):
        super().__init__(f"配置项 {key} 不合法: {message}")
        self.key = key


class OutputError(TopOptError):
    """
    结果文件写入失败，记录路径
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"无法写入 {path}: {message}")
        self.path = path
