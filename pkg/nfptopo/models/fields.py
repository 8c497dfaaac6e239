"""
场模型
设计变量场 β、物理密度场 ρ 以及投影基线所用的 μ 场
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, InvalidArgumentError
from .shaping import ShapingFunction


@dataclass(frozen=True)
class DesignField:
    """
    设计变量场
    每个单元一个 β_i，满足 β_l ≤ β_i ≤ β_u 且位于形函数定义域内
    """

    values: np.ndarray = field(repr=False)
    shaping: ShapingFunction
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), values.shape).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), values.shape).copy()
        if np.any(lower > upper):
            raise InvalidArgumentError("设计变量下界大于上界")
        self.shaping.check_domain(lower)
        self.shaping.check_domain(upper)
        if np.any(values < lower) or np.any(values > upper):
            raise DomainError("设计变量超出上下界")
        for array in (values, lower, upper):
            array.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __len__(self):
        return self.values.size

    def with_values(self, values: np.ndarray) -> "DesignField":
        return DesignField(values=values, shaping=self.shaping, lower=self.lower, upper=self.upper)


@dataclass(frozen=True)
class DensityField:
    """
    物理密度场 ρ
    0 ≤ ρ_i ≤ 1
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidArgumentError("密度场必须是一维数组")
        if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
            raise DomainError("密度必须位于 [0, 1] 内")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class ProjectionField:
    """
    投影方法的设计变量场 μ（基线对比）
    beta_h 为全局锐度参数；full_form 为 True 时保留线性修正项 m·e^{-β_H}
    """

    values: np.ndarray = field(repr=False)
    beta_h: float = 1.0
    constant_weight: bool = True
    full_form: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if self.beta_h < 0:
            raise InvalidArgumentError(f"投影锐度参数 β_H 不能为负: {self.beta_h}")
        if not self.constant_weight:
            raise InvalidArgumentError("仅支持常数权函数的投影形式")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise DomainError("投影设计变量 μ 必须位于 [0, 1] 内")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size
