"""
网格服务
构建结构化网格与单元邻域表
"""

import itertools
import math
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from loguru import logger

from ..errors import InvalidArgumentError
from ..models.mesh import GridMesh, NeighborhoodTable
from ..models.problem import NeighborhoodSpec

# 单元局部节点顺序（相对于单元左下角节点的偏移），逆时针，三维先底面后顶面
_QUAD_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
_HEX_CORNERS = tuple((i, j, k) for k in (0, 1) for (i, j) in _QUAD_CORNERS)


def build_grid(dimension: int, counts: Sequence[int], edge_lengths: Sequence[float]) -> GridMesh:
    """
    构建二维四节点四边形或三维八节点六面体结构化网格
    """
    if dimension not in (2, 3):
        raise InvalidArgumentError(f"只支持二维或三维网格，实际 {dimension}")
    counts = tuple(int(c) for c in counts)
    edge_lengths = tuple(float(h) for h in edge_lengths)
    if len(counts) != dimension or len(edge_lengths) != dimension:
        raise InvalidArgumentError(f"{dimension} 维网格需要 {dimension} 个单元数与边长")
    if any(c < 1 for c in counts):
        raise InvalidArgumentError(f"单元数必须 ≥ 1: {counts}")
    if any(not h > 0 for h in edge_lengths):
        raise InvalidArgumentError(f"单元边长必须 > 0: {edge_lengths}")

    node_counts = [c + 1 for c in counts]

    # 节点坐标：x 最快
    node_grids = np.meshgrid(*[np.arange(n) for n in node_counts], indexing="ij")
    node_ijk = np.stack([g.ravel(order="F") for g in node_grids], axis=1)
    node_coords = node_ijk * np.asarray(edge_lengths)

    # 单元→节点连接
    element_grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    element_ijk = np.stack([g.ravel(order="F") for g in element_grids], axis=1)
    strides = np.cumprod([1] + node_counts[:-1])
    base_nodes = element_ijk @ strides
    corners = _QUAD_CORNERS if dimension == 2 else _HEX_CORNERS
    offsets = np.asarray(corners) @ strides
    connectivity = base_nodes[:, None] + offsets[None, :]

    centroids = (element_ijk + 0.5) * np.asarray(edge_lengths)
    measures = np.full(element_ijk.shape[0], float(np.prod(edge_lengths)))

    n_nodes = node_coords.shape[0]
    node_dofs = np.arange(dimension * n_nodes).reshape(n_nodes, dimension)
    element_dofs = node_dofs[connectivity].reshape(connectivity.shape[0], -1)

    for array in (node_coords, connectivity, centroids, measures, node_dofs, element_dofs):
        array.setflags(write=False)

    mesh = GridMesh(
        dimension=dimension,
        counts=counts,
        edge_lengths=edge_lengths,
        node_coords=node_coords,
        connectivity=connectivity,
        centroids=centroids,
        element_measures=measures,
        node_dofs=node_dofs,
        element_dofs=element_dofs,
    )
    logger.debug(f"网格构建完成: {mesh!r}")
    return mesh


def build_neighborhoods(mesh: GridMesh, spec: NeighborhoodSpec) -> NeighborhoodTable:
    """
    构建单元邻域表
    square(ls): 索引空间切比雪夫距离 ≤ ls；circle(r_min): 形心欧氏距离 ≤ r_min；
    immediate: 与单元共享节点的全部单元（含自身）
    边界附近的邻域取与计算域的交集，权重重新归一化
    """
    if spec.shape == "square":
        if spec.ls < 0:
            raise InvalidArgumentError(f"ls 必须 ≥ 0: {spec.ls}")
        reach = [spec.ls] * mesh.dimension
        radius = None
    elif spec.shape == "immediate":
        reach = [1] * mesh.dimension
        radius = None
    else:
        if spec.r_min is None or not spec.r_min > 0:
            raise InvalidArgumentError(f"r_min 必须 > 0: {spec.r_min}")
        reach = [int(math.floor(spec.r_min / h + 1e-12)) for h in mesh.edge_lengths]
        radius = spec.r_min

    element_ijk = mesh.element_grid_indices()
    counts = np.asarray(mesh.counts)
    strides = np.cumprod([1] + list(mesh.counts[:-1]))
    h = np.asarray(mesh.edge_lengths)

    rows, cols = [], []
    for offset in itertools.product(*[range(-r, r + 1) for r in reach]):
        offset = np.asarray(offset)
        if radius is not None:
            distance = float(np.sqrt(np.sum((offset * h) ** 2)))
            # 圆形边界包含在内
            if distance > radius * (1.0 + 1e-12):
                continue
        target = element_ijk + offset
        inside = np.all((target >= 0) & (target < counts), axis=1)
        rows.append(np.nonzero(inside)[0])
        cols.append(target[inside] @ strides)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n = mesh.n_elements
    measures = mesh.element_measures
    incidence = sp.csr_matrix((measures[cols], (rows, cols)), shape=(n, n))
    incidence.sort_indices()

    # A(Γ_i) = Σ_{j∈N_i} A(Ω_j)，w_ij = A(Ω_j)/A(Γ_i)
    neighborhood_measures = np.asarray(incidence.sum(axis=1)).ravel()
    weights = sp.diags(1.0 / neighborhood_measures) @ incidence
    weights = sp.csr_matrix(weights)
    weights.sort_indices()
    reverse = weights.transpose().tocsr()
    reverse.sort_indices()

    table = NeighborhoodTable(
        shape=spec.label(),
        matrix=weights,
        reverse_matrix=reverse,
        measures=neighborhood_measures,
    )
    logger.debug(
        f"邻域表构建完成: {table.shape}, 平均邻域大小 {table.sizes.mean():.2f}, 非零元 {weights.nnz}"
    )
    return table


def neighborhood_from_config(shape: str, ls: Optional[int] = None, r_min: Optional[float] = None) -> NeighborhoodSpec:
    """
    由配置项构造邻域定义
    """
    if shape == "circle":
        if r_min is None:
            raise InvalidArgumentError("circle 邻域需要 rmin")
        return NeighborhoodSpec(shape="circle", r_min=r_min)
    if shape == "immediate":
        return NeighborhoodSpec(shape="immediate", ls=1)
    if shape != "square":
        raise InvalidArgumentError(f"未知的邻域形状: {shape}")
    return NeighborhoodSpec(shape="square", ls=2 if ls is None else ls)
