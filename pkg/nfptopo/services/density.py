"""
密度服务
nFP 密度求值、梯度、链式回传、灰度度量，以及 Heaviside 投影基线
所有连乘均在对数空间内完成，避免大邻域下的下溢
"""

from typing import Dict

import numpy as np
import scipy.sparse as sp

from ..errors import DomainError, InvalidArgumentError
from ..models.fields import DensityField, DesignField, ProjectionField
from ..models.mesh import NeighborhoodTable
from ..models.problem import ProjectionSettings


def normalized_field_product(values, measures) -> float:
    """
    归一化场乘积：exp(Σ A_i ln v_i / Σ A_i)，即加权几何平均
    """
    values = np.asarray(values, dtype=float)
    measures = np.asarray(measures, dtype=float)
    if values.shape != measures.shape or values.ndim != 1 or values.size == 0:
        raise InvalidArgumentError("values 与 measures 必须是等长的非空一维数组")
    if np.any(values <= 0):
        raise DomainError("归一化场乘积要求所有取值 > 0（对数无定义）")
    if np.any(measures <= 0):
        raise InvalidArgumentError("归一化场乘积要求所有测度 > 0")
    return float(np.exp(np.dot(measures, np.log(values)) / np.sum(measures)))


def _check_sizes(design: DesignField, nbr: NeighborhoodTable):
    if len(design) != nbr.n_elements:
        raise InvalidArgumentError(f"设计变量个数 {len(design)} 与单元数 {nbr.n_elements} 不一致")


def evaluate_density(design: DesignField, nbr: NeighborhoodTable) -> DensityField:
    """
    ρ_i = 1 - exp(Σ_j w_ij ln f(β_j))
    """
    _check_sizes(design, nbr)
    log_f = design.shaping.log_value(design.values)
    log_complement = nbr.matrix @ log_f
    return DensityField(values=-np.expm1(log_complement))


def density_gradient_row(i: int, rho: DensityField, design: DesignField, nbr: NeighborhoodTable) -> Dict[int, float]:
    """
    ∂ρ_i/∂β_j = -(1-ρ_i)·w_ij·T2(β_j)，j ∈ N_i
    """
    _check_sizes(design, nbr)
    neighbors = nbr.neighbors(i)
    weights = nbr.weights_of(i)
    t2 = design.shaping.t2(design.values[neighbors])
    entries = -(1.0 - rho.values[i]) * weights * t2
    return {int(j): float(value) for j, value in zip(neighbors, entries)}


def density_jacobian(rho: DensityField, design: DesignField, nbr: NeighborhoodTable) -> sp.csr_matrix:
    """
    稀疏雅可比矩阵 ∂ρ/∂β
    """
    _check_sizes(design, nbr)
    t2 = design.shaping.t2(design.values)
    jacobian = sp.diags(-(1.0 - rho.values)) @ nbr.matrix @ sp.diags(t2)
    return sp.csr_matrix(jacobian)


def backpropagate(df0_drho, rho: DensityField, design: DesignField, nbr: NeighborhoodTable) -> np.ndarray:
    """
    链式法则：(df0/dβ)_j = Σ_{i: j∈N_i} (df0/dρ)_i ∂ρ_i/∂β_j
    沿反向邻接求和
    """
    df0_drho = np.asarray(df0_drho, dtype=float)
    if df0_drho.shape != (nbr.n_elements,):
        raise InvalidArgumentError(f"df0/dρ 长度 {df0_drho.size} 与单元数 {nbr.n_elements} 不一致")
    _check_sizes(design, nbr)
    t2 = design.shaping.t2(design.values)
    return -t2 * (nbr.reverse_matrix @ ((1.0 - rho.values) * df0_drho))


def grayness(rho) -> float:
    """
    灰度度量 g = Σ 4ρ_i(1-ρ_i)/n
    """
    values = rho.values if isinstance(rho, DensityField) else np.asarray(rho, dtype=float)
    if values.size == 0:
        raise InvalidArgumentError("空密度场无法计算灰度")
    return float(np.sum(4.0 * values * (1.0 - values)) / values.size)


def _projection_mean(field: ProjectionField, nbr: NeighborhoodTable) -> np.ndarray:
    if len(field) != nbr.n_elements:
        raise InvalidArgumentError(f"投影变量个数 {len(field)} 与单元数 {nbr.n_elements} 不一致")
    return nbr.matrix @ field.values


def projection_density(field: ProjectionField, nbr: NeighborhoodTable) -> DensityField:
    """
    常数权函数的投影密度 ρ_i = 1 - exp(-β_H Σ w_ij μ_j)
    full_form 时加上线性修正项 m_i·e^{-β_H}
    """
    mean = _projection_mean(field, nbr)
    rho = -np.expm1(-field.beta_h * mean)
    if field.full_form:
        rho = rho + mean * np.exp(-field.beta_h)
    return DensityField(values=np.clip(rho, 0.0, 1.0))


def _projection_factor(field: ProjectionField, rho: DensityField, nbr: NeighborhoodTable) -> np.ndarray:
    """
    ∂ρ_i/∂μ_j = factor_i · w_ij
    """
    if not field.full_form:
        return field.beta_h * (1.0 - rho.values)
    mean = _projection_mean(field, nbr)
    return field.beta_h * np.exp(-field.beta_h * mean) + np.exp(-field.beta_h)


def projection_gradient_row(i: int, rho: DensityField, field: ProjectionField, nbr: NeighborhoodTable) -> Dict[int, float]:
    """
    ∂ρ_i/∂μ_j = β_H(1-ρ_i)·w_ij，j ∈ N_i
    """
    factor = _projection_factor(field, rho, nbr)[i]
    return {int(j): float(factor * w) for j, w in zip(nbr.neighbors(i), nbr.weights_of(i))}


def projection_backpropagate(df0_drho, rho: DensityField, field: ProjectionField, nbr: NeighborhoodTable) -> np.ndarray:
    """
    投影参数化下的链式回传 df0/dμ
    """
    df0_drho = np.asarray(df0_drho, dtype=float)
    if df0_drho.shape != (nbr.n_elements,):
        raise InvalidArgumentError(f"df0/dρ 长度 {df0_drho.size} 与单元数 {nbr.n_elements} 不一致")
    factor = _projection_factor(field, rho, nbr)
    return nbr.reverse_matrix @ (factor * df0_drho)


class ContinuationSchedule:
    """
    β_H 延拓：start · factor^(k // every)，不超过 maximum
    """

    def __init__(self, settings: ProjectionSettings):
        self.settings = settings

    def __call__(self, iteration: int) -> float:
        s = self.settings
        value = s.start * s.factor ** (max(iteration, 0) // s.every)
        return float(min(value, s.maximum))
