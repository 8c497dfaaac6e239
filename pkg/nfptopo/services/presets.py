"""
预设问题服务
二维悬臂梁、中点加载梁、位移反向机构，以及三维悬臂梁、MBB 梁（半模型）、反向机构（四分之一模型）
坐标约定：y 轴向上，节点 j = 0 位于底边
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..config import settings
from ..errors import ConfigValidationError, InvalidArgumentError
from ..models.mesh import GridMesh
from ..models.problem import (
    LoadCase,
    MaterialModel,
    ObjectiveSpec,
    OptimizerSettings,
    ProblemSpec,
    ProjectionSettings,
    StoppingRule,
)
from ..models.run_config import RunConfig
from ..models.shaping import ShapingFunction
from .mesh import build_grid, neighborhood_from_config

# 目标缩放系数默认值
STIFF_SCALE = 1.0e3
COMPLIANT_SCALE = 1.0e5

# 输出端人工弹簧刚度 k_a
OUTPUT_SPRING = 100.0


def _nodes_where(mesh: GridMesh, mask: np.ndarray) -> np.ndarray:
    return np.nonzero(mask)[0]


def _dofs(mesh: GridMesh, nodes: np.ndarray, axes) -> np.ndarray:
    return mesh.node_dofs[np.ix_(np.atleast_1d(nodes), list(axes))].ravel()


def _cantilever2d(mesh: GridMesh, spring: float) -> LoadCase:
    """
    左边固支，右边中点竖直向下的单位载荷
    """
    nx, ny = mesh.counts
    grid = mesh.node_grid_indices()
    fixed = _dofs(mesh, _nodes_where(mesh, grid[:, 0] == 0), (0, 1))
    tip = mesh.node_index(nx, ny // 2)
    return LoadCase(fixed_dofs=fixed, loads={mesh.node_dof(tip, 1): -1.0})


def _midload2d(mesh: GridMesh, spring: float) -> LoadCase:
    """
    半模型：左边为对称面（u_x = 0），左上角向下加载，右下角滚动支座（u_y = 0）
    """
    nx, ny = mesh.counts
    grid = mesh.node_grid_indices()
    symmetry = _dofs(mesh, _nodes_where(mesh, grid[:, 0] == 0), (0,))
    support = mesh.node_dof(mesh.node_index(nx, 0), 1)
    load = mesh.node_dof(mesh.node_index(0, ny), 1)
    return LoadCase(fixed_dofs=np.append(symmetry, support), loads={load: -1.0})


def _inverter2d(mesh: GridMesh, spring: float) -> LoadCase:
    """
    上半模型：底边为对称面（u_y = 0）
    左下角输入 +x 载荷；右下角为输出端，x 方向弹簧与 -x 虚拟载荷（与输入方向相反）
    左边顶部一段固支
    """
    nx, ny = mesh.counts
    grid = mesh.node_grid_indices()
    symmetry = _dofs(mesh, _nodes_where(mesh, grid[:, 1] == 0), (1,))
    clamp_height = max(1, ny // 10)
    clamp = _dofs(mesh, _nodes_where(mesh, (grid[:, 0] == 0) & (grid[:, 1] >= ny - clamp_height)), (0, 1))
    input_dof = mesh.node_dof(mesh.node_index(0, 0), 0)
    output_dof = mesh.node_dof(mesh.node_index(nx, 0), 0)
    return LoadCase(
        fixed_dofs=np.concatenate([symmetry, clamp]),
        loads={input_dof: 1.0},
        springs={output_dof: spring},
        dummy_loads={output_dof: -1.0},
    )


def _cantilever3d(mesh: GridMesh, spring: float) -> LoadCase:
    """
    x = 0 面固支；x = L 端面中线（y = ny/2，沿 z）向下的均布线载荷，合力为 1
    不利用对称性
    """
    nx, ny, nz = mesh.counts
    grid = mesh.node_grid_indices()
    fixed = _dofs(mesh, _nodes_where(mesh, grid[:, 0] == 0), (0, 1, 2))
    line = _nodes_where(mesh, (grid[:, 0] == nx) & (grid[:, 1] == ny // 2))
    loads = {int(mesh.node_dof(node, 1)): -1.0 / len(line) for node in line}
    return LoadCase(fixed_dofs=fixed, loads=loads)


def _mbb3d(mesh: GridMesh, spring: float) -> LoadCase:
    """
    半模型：x = 0 为对称面（u_x = 0）
    顶边 (x = 0, y = ny) 沿 z 向下加载，底边 (x = nx, y = 0) 沿 z 为支座（u_y = u_z = 0）
    """
    nx, ny, nz = mesh.counts
    grid = mesh.node_grid_indices()
    symmetry = _dofs(mesh, _nodes_where(mesh, grid[:, 0] == 0), (0,))
    support = _dofs(mesh, _nodes_where(mesh, (grid[:, 0] == nx) & (grid[:, 1] == 0)), (1, 2))
    line = _nodes_where(mesh, (grid[:, 0] == 0) & (grid[:, 1] == ny))
    loads = {int(mesh.node_dof(node, 1)): -1.0 / len(line) for node in line}
    return LoadCase(fixed_dofs=np.concatenate([symmetry, support]), loads=loads)


def _inverter3d(mesh: GridMesh, spring: float) -> LoadCase:
    """
    四分之一模型：y = 0 与 z = 0 为对称面
    原点输入 +x 载荷；(nx, 0, 0) 为输出端，x 方向弹簧 k_a 与 -x 虚拟载荷
    x = 0 面上远离对称面的角区固支
    """
    nx, ny, nz = mesh.counts
    grid = mesh.node_grid_indices()
    symmetry_y = _dofs(mesh, _nodes_where(mesh, grid[:, 1] == 0), (1,))
    symmetry_z = _dofs(mesh, _nodes_where(mesh, grid[:, 2] == 0), (2,))
    reach_y = max(1, ny // 8)
    reach_z = max(1, nz // 8)
    corner = (grid[:, 0] == 0) & (grid[:, 1] >= ny - reach_y) & (grid[:, 2] >= nz - reach_z)
    clamp = _dofs(mesh, _nodes_where(mesh, corner), (0, 1, 2))
    input_dof = mesh.node_dof(mesh.node_index(0, 0, 0), 0)
    output_dof = mesh.node_dof(mesh.node_index(nx, 0, 0), 0)
    return LoadCase(
        fixed_dofs=np.concatenate([symmetry_y, symmetry_z, clamp]),
        loads={input_dof: 1.0},
        springs={output_dof: spring},
        dummy_loads={output_dof: -1.0},
    )


@dataclass(frozen=True)
class PresetDefinition:
    """
    预设问题定义：默认网格、体积分数、邻域与边界条件
    """

    name: str
    description: str
    counts: Tuple[int, ...]
    volume_fraction: float
    neighborhood: str
    ls: int
    kind: str
    boundary: Callable[[GridMesh, float], LoadCase]

    @property
    def dimension(self) -> int:
        return len(self.counts)


PRESETS: Dict[str, PresetDefinition] = {
    preset.name: preset
    for preset in (
        PresetDefinition("cantilever2d", "二维悬臂梁：左边固支，右边中点加载", (120, 60), 0.35, "square", 2, "stiff",
                         _cantilever2d),
        PresetDefinition("midload2d", "二维中点加载梁（半模型）", (120, 40), 0.35, "square", 2, "stiff", _midload2d),
        PresetDefinition("inverter2d", "二维位移反向机构（半模型）", (120, 60), 0.20, "square", 2, "compliant",
                         _inverter2d),
        PresetDefinition("cantilever3d", "三维悬臂梁（全模型）", (80, 40, 40), 0.25, "immediate", 1, "stiff",
                         _cantilever3d),
        PresetDefinition("mbb3d", "三维 MBB 梁（半模型）", (90, 30, 30), 0.25, "immediate", 1, "stiff", _mbb3d),
        PresetDefinition("inverter3d", "三维位移反向机构（四分之一模型）", (80, 40, 40), 0.15, "immediate", 1, "compliant",
                         _inverter3d),
    )
}


def get_preset(name: str) -> PresetDefinition:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigValidationError("preset", f"未知的预设问题 {name!r}，可选 {', '.join(PRESETS)}")


def _resolve_counts(config: RunConfig, preset: PresetDefinition) -> Tuple[int, ...]:
    requested = (config.nx, config.ny, config.nz)
    if preset.dimension == 2 and config.nz is not None:
        raise ConfigValidationError("nz", f"二维预设 {preset.name} 不接受 nz")
    return tuple(
        requested[axis] if requested[axis] is not None else preset.counts[axis]
        for axis in range(preset.dimension)
    )


def _resolve_edge_lengths(config: RunConfig, counts: Tuple[int, ...]) -> Tuple[float, ...]:
    lengths = (config.lx, config.ly, config.lz)
    edges = []
    for axis, count in enumerate(counts):
        length = lengths[axis] if lengths[axis] is not None else float(count)
        edges.append(length / count)
    return tuple(edges)


def build_problem(config: RunConfig, milestones: Tuple[float, ...] = ()) -> ProblemSpec:
    """
    由运行配置构建 ProblemSpec，未给出的项取预设默认值
    """
    preset = get_preset(config.preset)
    counts = _resolve_counts(config, preset)
    mesh = build_grid(preset.dimension, counts, _resolve_edge_lengths(config, counts))

    shape = config.neighborhood or preset.neighborhood
    if shape == "circle" and config.rmin is None:
        raise ConfigValidationError("rmin", "circle 邻域需要 rmin")
    neighborhood = neighborhood_from_config(shape, config.ls if config.ls is not None else preset.ls, config.rmin)

    spring = config.spring if config.spring is not None else OUTPUT_SPRING
    loads = preset.boundary(mesh, spring)

    default_scale = COMPLIANT_SCALE if preset.kind == "compliant" else STIFF_SCALE
    objective = ObjectiveSpec(
        kind=preset.kind,
        scale=config.mu if config.mu is not None else default_scale,
        volume_fraction=config.vf if config.vf is not None else preset.volume_fraction,
    )
    try:
        shaping = ShapingFunction(kind=config.function, n=config.power_n)
    except InvalidArgumentError as e:
        raise ConfigValidationError("function", str(e))

    problem = ProblemSpec(
        name=preset.name,
        mesh=mesh,
        loads=loads,
        neighborhood=neighborhood,
        shaping=shaping,
        material=MaterialModel(
            youngs_modulus=config.E,
            poisson_ratio=config.nu,
            penalty=config.eta,
            rho_min=config.rho_min,
        ),
        objective=objective,
        stopping=StoppingRule(max_iter=config.max_iter, g_tol=config.g_tol, tol_fun=config.tol_fun),
        optimizer=OptimizerSettings(step=config.step, move_limit=config.move_limit),
        method=config.method,
        projection=ProjectionSettings(maximum=config.beta_max),
        milestones=tuple(milestones),
        snapshot_every=config.snapshot_every if config.snapshot_every is not None else settings.SNAPSHOT_EVERY,
    )
    logger.debug(f"预设问题 {preset.name} 已构建: {mesh!r}, {neighborhood.label()}, v_f={objective.volume_fraction}")
    return problem


def presets(names: Optional[List[str]] = None) -> List[ProblemSpec]:
    """
    按默认配置构建预设问题列表
    """
    return [build_problem(RunConfig(preset=name)) for name in (names or list(PRESETS))]
