"""
数据模型包
网格、形函数、设计/密度场、问题定义、求解状态与运行配置
"""

from .fields import DensityField, DesignField, ProjectionField
from .mesh import GridMesh, NeighborhoodTable
from .problem import (
    LoadCase,
    MaterialModel,
    NeighborhoodSpec,
    ObjectiveSpec,
    OptimizerSettings,
    ProblemSpec,
    ProjectionSettings,
    StoppingRule,
)
from .run_config import RunConfig, StudyConfig
from .shaping import ShapingFunction
from .state import IterationRecord, OptimizationTrace, SystemState

__all__ = [
    "GridMesh",
    "NeighborhoodTable",
    "ShapingFunction",
    "DesignField",
    "DensityField",
    "ProjectionField",
    "LoadCase",
    "MaterialModel",
    "NeighborhoodSpec",
    "ObjectiveSpec",
    "OptimizerSettings",
    "ProblemSpec",
    "ProjectionSettings",
    "StoppingRule",
    "SystemState",
    "IterationRecord",
    "OptimizationTrace",
    "RunConfig",
    "StudyConfig",
]
