"""
求解状态与优化轨迹模型
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SystemState:
    """
    组装并求解后的系统
    stiffness 为含弹簧的完整刚度矩阵（约束消去前）；u 为真实载荷位移，v 为虚拟载荷位移
    """

    stiffness: sp.csr_matrix = field(repr=False)
    free_dofs: np.ndarray = field(repr=False)
    force: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    dummy_force: Optional[np.ndarray] = field(default=None, repr=False)
    v: Optional[np.ndarray] = field(default=None, repr=False)
    spring_energy: float = 0.0

    @property
    def solved(self) -> bool:
        return self.u is not None

    @property
    def strain_energy_uu(self) -> float:
        """
        uᵀKu（含弹簧）
        """
        return float(self.u @ (self.stiffness @ self.u))

    @property
    def mutual_energy(self) -> float:
        """
        vᵀKu
        """
        if self.v is None:
            return 0.0
        return float(self.v @ (self.stiffness @ self.u))


@dataclass(frozen=True)
class IterationRecord:
    """
    单次迭代记录
    """

    iteration: int
    f0: float
    g1: float
    grayness: float
    mse_se: Optional[float] = None
    beta_h: Optional[float] = None


@dataclass
class OptimizationTrace:
    """
    优化轨迹
    """

    problem_name: str
    records: List[IterationRecord] = field(default_factory=list)

    # 迭代号 → 物理密度快照
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    # 迭代号 → 设计变量快照（与 snapshots 同步保存，可用于热启动）
    design_snapshots: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    # 灰度目标 → 首次达到的迭代号
    milestones: Dict[float, Optional[int]] = field(default_factory=dict)

    stop_reason: str = "max_iter"
    final_design: Optional[np.ndarray] = field(default=None, repr=False)
    final_density: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def initial(self) -> IterationRecord:
        return self.records[0]

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def record_at(self, iteration: int) -> IterationRecord:
        for record in self.records:
            if record.iteration == iteration:
                return record
        raise KeyError(iteration)

    def min_grayness(self) -> float:
        return min(record.grayness for record in self.records)
