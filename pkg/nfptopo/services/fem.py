"""
有限元服务
单元刚度、SIMP 插值、全局组装、约束消去与稀疏求解
"""

import functools
import itertools
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from loguru import logger

from ..config import settings
from ..errors import InvalidArgumentError, NumericalFailureError, PreconditionError
from ..models.fields import DensityField
from ..models.mesh import GridMesh
from ..models.problem import LoadCase, MaterialModel
from ..models.state import SystemState

# 迭代细化的最大步数
_MAX_REFINEMENT_STEPS = 3


def _elasticity_matrix(dimension: int, E: float, nu: float) -> np.ndarray:
    """
    本构矩阵：二维平面应力，三维各向同性
    """
    if dimension == 2:
        return E / (1.0 - nu ** 2) * np.array([
            [1.0, nu, 0.0],
            [nu, 1.0, 0.0],
            [0.0, 0.0, (1.0 - nu) / 2.0],
        ])
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    shear = E / (2.0 * (1.0 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] += 2.0 * shear
    D[np.arange(3, 6), np.arange(3, 6)] = shear
    return D


def _strain_displacement(dimension: int, dN: np.ndarray) -> np.ndarray:
    """
    由形函数物理导数 dN (dim, 节点数) 组装 B 矩阵
    """
    n_nodes = dN.shape[1]
    if dimension == 2:
        B = np.zeros((3, 2 * n_nodes))
        B[0, 0::2] = dN[0]
        B[1, 1::2] = dN[1]
        B[2, 0::2] = dN[1]
        B[2, 1::2] = dN[0]
        return B
    B = np.zeros((6, 3 * n_nodes))
    B[0, 0::3] = dN[0]
    B[1, 1::3] = dN[1]
    B[2, 2::3] = dN[2]
    B[3, 0::3] = dN[1]
    B[3, 1::3] = dN[0]
    B[4, 1::3] = dN[2]
    B[4, 2::3] = dN[1]
    B[5, 0::3] = dN[2]
    B[5, 2::3] = dN[0]
    return B


@functools.lru_cache(maxsize=16)
def _cached_element_stiffness(dimension: int, E: float, nu: float, edge_lengths: Tuple[float, ...]) -> np.ndarray:
    from .mesh import _HEX_CORNERS, _QUAD_CORNERS

    corners = np.asarray(_QUAD_CORNERS if dimension == 2 else _HEX_CORNERS, dtype=float)
    signs = 2.0 * corners - 1.0
    h = np.asarray(edge_lengths)
    D = _elasticity_matrix(dimension, E, nu)
    det_j = float(np.prod(h / 2.0))
    gauss = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))

    size = dimension * len(corners)
    ke = np.zeros((size, size))
    # 矩形/长方体单元上 2 点高斯积分是精确的
    for point in itertools.product(gauss, repeat=dimension):
        point = np.asarray(point)
        factors = 1.0 + signs * point
        dN = np.empty((dimension, len(corners)))
        for axis in range(dimension):
            others = np.prod(np.delete(factors, axis, axis=1), axis=1)
            dN[axis] = signs[:, axis] * others / 2.0 ** dimension * (2.0 / h[axis])
        B = _strain_displacement(dimension, dN)
        ke += B.T @ D @ B * det_j
    ke = 0.5 * (ke + ke.T)
    ke.setflags(write=False)
    return ke


def element_stiffness(dimension: int, youngs_modulus: float, poisson_ratio: float,
                      edge_lengths: Sequence[float]) -> np.ndarray:
    """
    实体单元刚度矩阵 K₀（二维 8×8 平面应力单位厚度，三维 24×24）
    """
    edge_lengths = tuple(float(h) for h in edge_lengths)
    if dimension not in (2, 3) or len(edge_lengths) != dimension:
        raise InvalidArgumentError(f"单元维度与边长不匹配: dim={dimension}, h={edge_lengths}")
    if any(not h > 0 for h in edge_lengths):
        raise InvalidArgumentError(f"退化单元: 边长 {edge_lengths}")
    if not youngs_modulus > 0 or not 0 <= poisson_ratio < 0.5:
        raise InvalidArgumentError(f"材料参数不合法: E={youngs_modulus}, ν={poisson_ratio}")
    return _cached_element_stiffness(dimension, float(youngs_modulus), float(poisson_ratio), edge_lengths)


def mesh_element_stiffness(mesh: GridMesh, material: MaterialModel) -> np.ndarray:
    return element_stiffness(mesh.dimension, material.youngs_modulus, material.poisson_ratio, mesh.edge_lengths)


def simp_scale(rho, material: MaterialModel):
    """
    SIMP 插值：ρ^η(1-ρ_min) + ρ_min
    """
    rho = np.asarray(rho, dtype=float)
    scale = rho ** material.penalty * (1.0 - material.rho_min) + material.rho_min
    return float(scale) if scale.ndim == 0 else scale


def simp_derivative(rho, material: MaterialModel) -> np.ndarray:
    """
    d(SIMP)/dρ = η(1-ρ_min)ρ^(η-1)
    """
    rho = np.asarray(rho, dtype=float)
    return material.penalty * (1.0 - material.rho_min) * rho ** (material.penalty - 1.0)


def assemble_stiffness(mesh: GridMesh, rho: DensityField, material: MaterialModel, loads: LoadCase) -> sp.csr_matrix:
    """
    组装全局刚度矩阵（含弹簧），约束消去之前
    """
    if len(rho) != mesh.n_elements:
        raise InvalidArgumentError(f"密度个数 {len(rho)} 与单元数 {mesh.n_elements} 不一致")
    ke = mesh_element_stiffness(mesh, material)
    edofs = mesh.element_dofs
    size = edofs.shape[1]
    rows = np.kron(edofs, np.ones((size, 1), dtype=np.int64)).ravel()
    cols = np.kron(edofs, np.ones((1, size), dtype=np.int64)).ravel()
    values = (ke.ravel()[None, :] * simp_scale(rho.values, material)[:, None]).ravel()
    K = sp.coo_matrix((values, (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()
    K = (K + K.T) / 2.0
    if loads.springs:
        K = K + sp.diags(LoadCase.vector(loads.springs, mesh.n_dofs))
    return sp.csr_matrix(K)


def _direct_solver(K_ff: sp.csc_matrix):
    try:
        return spla.factorized(K_ff)
    except RuntimeError as e:
        raise NumericalFailureError(f"刚度矩阵奇异，请检查约束是否足以消除刚体位移: {e}")


def _cg_solver(K_ff: sp.csc_matrix):
    preconditioner = sp.diags(1.0 / K_ff.diagonal())

    def solve(rhs: np.ndarray) -> np.ndarray:
        solution, info = spla.cg(K_ff, rhs, rtol=settings.CG_RTOL, maxiter=settings.CG_MAXITER, M=preconditioner)
        if info != 0:
            raise NumericalFailureError(f"共轭梯度法未收敛 (info={info})")
        return solution

    return solve


def _solve_checked(solve, K_ff: sp.csc_matrix, rhs: np.ndarray, label: str) -> np.ndarray:
    """
    求解并检查相对残差，必要时做迭代细化
    """
    norm = np.linalg.norm(rhs)
    if norm == 0:
        return np.zeros_like(rhs)
    x = solve(rhs)
    for _ in range(_MAX_REFINEMENT_STEPS + 1):
        if not np.all(np.isfinite(x)):
            raise NumericalFailureError(f"{label} 求解结果含非有限值，刚度矩阵可能奇异：约束不足以消除刚体位移")
        residual = rhs - K_ff @ x
        relative = np.linalg.norm(residual) / norm
        if relative < settings.RESIDUAL_TOL:
            return x
        x = x + solve(residual)
    raise NumericalFailureError(
        f"{label} 相对残差 {relative:.3e} 超过 {settings.RESIDUAL_TOL:.1e}，可能约束不足而存在刚体位移"
    )


def assemble_and_solve(mesh: GridMesh, rho: DensityField, material: MaterialModel, loads: LoadCase,
                       solver: Optional[str] = None) -> SystemState:
    """
    组装、消去约束并求解 Ku = F（存在虚拟载荷时同时求解 Kv = F_d）
    """
    loads.validate(mesh)
    if loads.fixed_dofs.size == 0 and not any(k > 0 for k in loads.springs.values()):
        raise NumericalFailureError("没有任何约束或弹簧，刚度矩阵奇异")

    K = assemble_stiffness(mesh, rho, material, loads)
    free = np.setdiff1d(np.arange(mesh.n_dofs), loads.fixed_dofs)
    K_ff = sp.csc_matrix(K[free][:, free])

    force = LoadCase.vector(loads.loads, mesh.n_dofs)
    dummy_force = LoadCase.vector(loads.dummy_loads, mesh.n_dofs) if loads.dummy_loads else None

    solver = solver or settings.LINEAR_SOLVER
    if solver == "direct":
        try:
            solve = _direct_solver(K_ff)
        except MemoryError:
            logger.warning("直接分解内存不足，改用共轭梯度法")
            solve = _cg_solver(K_ff)
    elif solver == "cg":
        solve = _cg_solver(K_ff)
    else:
        raise InvalidArgumentError(f"未知的线性求解器: {solver}")

    u = np.zeros(mesh.n_dofs)
    u[free] = _solve_checked(solve, K_ff, force[free], "Ku=F")
    if np.any(force) and not u @ force > 0:
        raise NumericalFailureError("uᵀF ≤ 0：刚度矩阵不定，请检查弹簧刚度与约束")

    v = None
    if dummy_force is not None:
        v = np.zeros(mesh.n_dofs)
        v[free] = _solve_checked(solve, K_ff, dummy_force[free], "Kv=F_d")

    springs = LoadCase.vector(loads.springs, mesh.n_dofs) if loads.springs else None
    spring_energy = float(np.sum(springs * u * u)) if springs is not None else 0.0

    for array in (u, force) + ((v, dummy_force) if v is not None else ()):
        array.setflags(write=False)

    return SystemState(
        stiffness=K,
        free_dofs=free,
        force=force,
        u=u,
        dummy_force=dummy_force,
        v=v,
        spring_energy=spring_energy,
    )


def element_strain_energy_terms(state: SystemState, mesh: GridMesh,
                                material: MaterialModel) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    逐单元二次型 u_eᵀK₀u_e 与 u_eᵀK₀v_e（无虚拟载荷时后者为 None）
    """
    if state is None or not state.solved:
        raise PreconditionError("系统尚未求解")
    ke = mesh_element_stiffness(mesh, material)
    ue = state.u[mesh.element_dofs]
    uku = np.einsum("ei,ij,ej->e", ue, ke, ue)
    # 半正定二次型，消除舍入造成的负值
    uku = np.maximum(uku, 0.0)
    ukv = None
    if state.v is not None:
        ve = state.v[mesh.element_dofs]
        ukv = np.einsum("ei,ij,ej->e", ue, ke, ve)
    return uku, ukv


def mechanism_ratio(state: SystemState) -> float:
    """
    柔顺机构指标 MSE/SE = 2·vᵀKu / uᵀKu
    """
    if state.v is None:
        raise PreconditionError("缺少虚拟载荷位移 v")
    energy = state.strain_energy_uu
    if not energy > 0:
        raise NumericalFailureError("uᵀKu ≤ 0，状态退化")
    return 2.0 * state.mutual_energy / energy
