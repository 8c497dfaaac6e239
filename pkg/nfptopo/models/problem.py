"""
问题定义模型
材料、载荷工况、目标函数、停止准则、优化器参数以及汇总它们的 ProblemSpec
"""

from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import InvalidArgumentError
from .mesh import GridMesh
from .shaping import ShapingFunction


class MaterialModel(BaseModel):
    """
    线弹性材料 + SIMP 插值参数
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    youngs_modulus: float = Field(2.0e4, gt=0)
    poisson_ratio: float = Field(0.3, ge=0, lt=0.5)
    penalty: float = Field(3.0, ge=1)
    rho_min: float = Field(1.0e-4, gt=0, lt=0.1)


class ObjectiveSpec(BaseModel):
    """
    目标函数定义
    stiff: f0 = μ_s·½uᵀKu；compliant: f0 = -μ_CM·vᵀKu/uᵀKu
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["stiff", "compliant"] = "stiff"
    scale: float = Field(1.0e3, gt=0)
    volume_fraction: float = Field(0.35, gt=0, lt=1)

    def permitted_volume(self, mesh: GridMesh) -> float:
        """
        V* = v_f · Σ V_i
        """
        return self.volume_fraction * mesh.volume


class StoppingRule(BaseModel):
    """
    停止准则
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iter: int = Field(2000, ge=1)
    g_tol: Optional[float] = Field(None, gt=0, lt=1)
    tol_fun: Optional[float] = Field(1.0e-10, ge=0)
    window: int = Field(10, ge=1)


class OptimizerSettings(BaseModel):
    """
    MMA 与步长阻尼参数
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    step: float = Field(0.005, gt=0, le=1)
    asy_init: float = Field(0.5, gt=0)
    asy_incr: float = Field(1.2, gt=1)
    asy_decr: float = Field(0.7, gt=0, lt=1)
    move_limit: float = Field(0.5, gt=0, le=1)


class NeighborhoodSpec(BaseModel):
    """
    邻域形状：square(ls) / circle(r_min) / immediate
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    shape: Literal["square", "circle", "immediate"] = "square"
    ls: int = Field(2, ge=0)
    r_min: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check_radius(self):
        if self.shape == "circle" and self.r_min is None:
            raise ValueError("circle 邻域需要 r_min")
        return self

    def label(self) -> str:
        if self.shape == "square":
            return f"square(ls={self.ls})"
        if self.shape == "circle":
            return f"circle(r_min={self.r_min:g})"
        return "immediate"


class ProjectionSettings(BaseModel):
    """
    投影基线的 β_H 延拓策略：从 start 开始，每 every 次迭代乘以 factor，直至 maximum
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    start: float = Field(1.0, ge=0)
    factor: float = Field(2.0, ge=1)
    every: int = Field(50, ge=1)
    maximum: float = Field(512.0, ge=0)
    full_form: bool = False


@dataclass
class LoadCase:
    """
    载荷工况
    fixed_dofs: 约束自由度；loads: 外载；springs: 弹簧刚度；dummy_loads: 柔顺机构的虚拟载荷
    """

    fixed_dofs: np.ndarray
    loads: Dict[int, float] = field(default_factory=dict)
    springs: Dict[int, float] = field(default_factory=dict)
    dummy_loads: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.fixed_dofs = np.unique(np.asarray(self.fixed_dofs, dtype=np.int64))

    def validate(self, mesh: GridMesh):
        """
        检查自由度编号与弹簧刚度的合法性
        """
        all_dofs = list(self.fixed_dofs) + list(self.loads) + list(self.springs) + list(self.dummy_loads)
        for dof in all_dofs:
            if not 0 <= int(dof) < mesh.n_dofs:
                raise InvalidArgumentError(f"自由度编号 {dof} 超出范围 [0, {mesh.n_dofs})")
        for dof, stiffness in self.springs.items():
            if stiffness < 0:
                raise InvalidArgumentError(f"弹簧刚度不能为负: dof={dof}, K_s={stiffness}")

    def scaled(self, factor: float) -> "LoadCase":
        """
        外载乘以 factor，约束、弹簧与虚拟载荷不变
        """
        return LoadCase(
            fixed_dofs=self.fixed_dofs.copy(),
            loads={dof: factor * value for dof, value in self.loads.items()},
            springs=dict(self.springs),
            dummy_loads=dict(self.dummy_loads),
        )

    @staticmethod
    def vector(entries: Dict[int, float], n_dofs: int) -> np.ndarray:
        vector = np.zeros(n_dofs)
        for dof, value in entries.items():
            vector[dof] += value
        return vector


@dataclass
class ProblemSpec:
    """
    一次优化运行所需的全部定义
    """

    name: str
    mesh: GridMesh
    loads: LoadCase
    neighborhood: NeighborhoodSpec = field(default_factory=NeighborhoodSpec)
    shaping: ShapingFunction = field(default_factory=ShapingFunction)
    material: MaterialModel = field(default_factory=MaterialModel)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    stopping: StoppingRule = field(default_factory=StoppingRule)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    # 参数化方式：nfp 或 projection（基线）
    method: Literal["nfp", "projection"] = "nfp"
    projection: ProjectionSettings = field(default_factory=ProjectionSettings)

    # 记录首次达到的灰度目标
    milestones: Tuple[float, ...] = ()

    # 快照间隔（0 表示只保存最终结果）
    snapshot_every: int = 50

    def __post_init__(self):
        self.loads.validate(self.mesh)
        if self.objective.kind == "compliant" and not self.loads.dummy_loads:
            raise InvalidArgumentError("柔顺机构问题需要虚拟载荷")
        if self.snapshot_every < 0:
            raise InvalidArgumentError("快照间隔不能为负")
