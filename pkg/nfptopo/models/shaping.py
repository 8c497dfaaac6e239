"""
形函数模型
f(β) 将设计变量映射到 (0, 1]，其对数导数 T2 = f'(β)/f(β) 控制密度梯度的大小
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import DomainError, InvalidArgumentError

# 支持的形函数种类
SHAPING_KINDS = ("exp", "tanh", "power", "atan")

# power 形函数的默认指数
DEFAULT_POWER_EXPONENT = 12

# exp 形函数下界系数：β_l = -10 × |N_i|
EXP_LOWER_FACTOR = 10.0


@dataclass(frozen=True)
class ShapingFunction:
    """
    形函数
    exp:   f = e^β,            β ∈ (-∞, 0]
    tanh:  f = 1 - tanh β,     β ∈ [0, ∞)
    power: f = β^(-n),         β ∈ [1, ∞)
    atan:  f = 1 - atan(β)/(π/2), β ∈ [0, ∞)
    """

    kind: str = "exp"
    n: int = DEFAULT_POWER_EXPONENT

    def __post_init__(self):
        if self.kind not in SHAPING_KINDS:
            raise InvalidArgumentError(f"未知的形函数: {self.kind}，可选 {', '.join(SHAPING_KINDS)}")
        if self.kind == "power" and self.n < 1:
            raise InvalidArgumentError(f"power 形函数的指数必须 ≥ 1，实际 {self.n}")

    def __str__(self):
        return f"power(n={self.n})" if self.kind == "power" else self.kind

    @property
    def domain(self) -> Tuple[float, float]:
        """
        β 的定义域 [下限, 上限]
        """
        if self.kind == "exp":
            return (-np.inf, 0.0)
        if self.kind == "power":
            return (1.0, np.inf)
        return (0.0, np.inf)

    @property
    def t2_bounds(self) -> Tuple[float, float]:
        """
        T2 在定义域上的取值范围（闭区间包络）
        """
        return {
            "exp": (1.0, 1.0),
            "tanh": (-2.0, -1.0),
            "power": (-float(self.n), 0.0),
            "atan": (-1.0, 0.0),
        }[self.kind]

    def check_domain(self, beta: np.ndarray):
        beta = np.asarray(beta, dtype=float)
        low, high = self.domain
        if not np.all(np.isfinite(beta)):
            raise DomainError(f"{self} 形函数的 β 必须为有限值")
        if np.any(beta < low) or np.any(beta > high):
            raise DomainError(
                f"β 超出 {self} 形函数定义域 [{low}, {high}]: "
                f"min={beta.min():.6g}, max={beta.max():.6g}"
            )

    def value(self, beta: np.ndarray) -> np.ndarray:
        """
        f(β)
        """
        return np.exp(self.log_value(beta))

    def log_value(self, beta: np.ndarray) -> np.ndarray:
        """
        ln f(β)，按种类采用数值稳定的闭式表达
        """
        beta = np.asarray(beta, dtype=float)
        self.check_domain(beta)
        if self.kind == "exp":
            return beta.copy()
        if self.kind == "tanh":
            # 1 - tanh β = 2 e^{-2β} / (1 + e^{-2β})
            return np.log(2.0) - 2.0 * beta - np.log1p(np.exp(-2.0 * beta))
        if self.kind == "power":
            return -self.n * np.log(beta)
        # 1 - atan(β)/(π/2) = atan2(1, β)/(π/2)
        return np.log(np.arctan2(1.0, beta) / (np.pi / 2))

    def t2(self, beta: np.ndarray) -> np.ndarray:
        """
        T2(β) = f'(β)/f(β)
        """
        beta = np.asarray(beta, dtype=float)
        self.check_domain(beta)
        if self.kind == "exp":
            return np.ones_like(beta)
        if self.kind == "tanh":
            return -(1.0 + np.tanh(beta))
        if self.kind == "power":
            return -self.n / beta
        return -1.0 / (np.arctan2(1.0, beta) * (1.0 + beta * beta))

    def inverse(self, value: float) -> float:
        """
        求 β 使 f(β) = value，value ∈ (0, 1]
        """
        if not 0.0 < value <= 1.0:
            raise DomainError(f"形函数取值必须在 (0, 1] 内，实际 {value}")
        if self.kind == "exp":
            return float(np.log(value))
        if self.kind == "tanh":
            return float(np.arctanh(1.0 - value))
        if self.kind == "power":
            return float(value ** (-1.0 / self.n))
        return float(np.tan((1.0 - value) * np.pi / 2))

    def default_bounds(self, sizes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        逐单元默认上下界
        exp 的下界取 -10 × |N_i|；其余种类为常数界
        """
        sizes = np.asarray(sizes, dtype=float)
        if self.kind == "exp":
            return -EXP_LOWER_FACTOR * sizes, np.zeros_like(sizes)
        if self.kind == "tanh":
            return np.zeros_like(sizes), np.full_like(sizes, 10.0)
        if self.kind == "power":
            return np.ones_like(sizes), np.full_like(sizes, 1.0e6)
        return np.zeros_like(sizes), np.full_like(sizes, 1.0e6)
