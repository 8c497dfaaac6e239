"""
目标函数服务
刚度结构与柔顺机构目标、体积约束及其对 ρ 的伴随灵敏度
两类目标都是自伴随的，灵敏度由缓存的单元位移逐单元计算
"""

from typing import Tuple

import numpy as np

from ..errors import InvalidArgumentError, NumericalFailureError, PreconditionError
from ..models.fields import DensityField
from ..models.mesh import GridMesh
from ..models.problem import MaterialModel, ObjectiveSpec
from ..models.state import SystemState
from .fem import element_strain_energy_terms, simp_derivative


def _require_solved(state: SystemState):
    if state is None or not state.solved:
        raise PreconditionError("系统尚未求解，无法计算目标函数")


def stiff_objective_and_sens(state: SystemState, rho: DensityField, mesh: GridMesh, material: MaterialModel,
                             spec: ObjectiveSpec) -> Tuple[float, np.ndarray]:
    """
    f0 = μ_s·½uᵀKu
    df0/dρ_i = -μ_s·η(1-ρ_min)/2·ρ_i^(η-1)·u_eᵀK₀u_e
    """
    if spec.kind != "stiff":
        raise InvalidArgumentError(f"目标类型应为 stiff，实际 {spec.kind}")
    _require_solved(state)
    uku, _ = element_strain_energy_terms(state, mesh, material)
    f0 = spec.scale * 0.5 * state.strain_energy_uu
    sens = -spec.scale * 0.5 * simp_derivative(rho.values, material) * uku
    return f0, sens


def cm_objective_and_sens(state: SystemState, rho: DensityField, mesh: GridMesh, material: MaterialModel,
                          spec: ObjectiveSpec) -> Tuple[float, np.ndarray]:
    """
    f0 = -μ_CM·vᵀKu/uᵀKu
    df0/dρ_i = μ_CM·[vᵀKu/(uᵀKu)²·(-uᵀ∂K/∂ρ_i u) + 1/uᵀKu·(uᵀ∂K/∂ρ_i v)]
    """
    if spec.kind != "compliant":
        raise InvalidArgumentError(f"目标类型应为 compliant，实际 {spec.kind}")
    _require_solved(state)
    if state.v is None:
        raise PreconditionError("柔顺机构目标需要虚拟载荷位移 v")
    strain = state.strain_energy_uu
    if not strain > 0:
        raise NumericalFailureError(f"uᵀKu = {strain:.3e} ≤ 0，状态退化")
    mutual = state.mutual_energy

    uku, ukv = element_strain_energy_terms(state, mesh, material)
    dk = simp_derivative(rho.values, material)
    f0 = -spec.scale * mutual / strain
    sens = spec.scale * (mutual / strain ** 2 * (-dk * uku) + dk * ukv / strain)
    return f0, sens


def objective_and_sens(state: SystemState, rho: DensityField, mesh: GridMesh, material: MaterialModel,
                       spec: ObjectiveSpec) -> Tuple[float, np.ndarray]:
    """
    按目标类型分派
    """
    if spec.kind == "stiff":
        return stiff_objective_and_sens(state, rho, mesh, material, spec)
    return cm_objective_and_sens(state, rho, mesh, material, spec)


def volume_constraint_and_sens(rho: DensityField, mesh: GridMesh, spec: ObjectiveSpec) -> Tuple[float, np.ndarray]:
    """
    g1 = Σρ_iV_i/V* - 1，dg1/dρ_i = V_i/V*
    """
    permitted = spec.permitted_volume(mesh)
    if not permitted > 0:
        raise InvalidArgumentError("允许体积 V* 必须 > 0")
    volumes = mesh.element_measures
    g1 = float(np.dot(rho.values, volumes) / permitted - 1.0)
    return g1, volumes / permitted
