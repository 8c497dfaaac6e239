"""
网格模型
结构化二维四边形 / 三维六面体网格，以及嵌入最小长度尺度的单元邻域表
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GridMesh:
    """
    结构化网格
    单元与节点按字典序编号（x 最快，其次 y，最后 z）
    """

    # 维度（2 或 3）
    dimension: int

    # 各方向单元数 (nx, ny[, nz])
    counts: Tuple[int, ...]

    # 各方向单元边长 (hx, hy[, hz])
    edge_lengths: Tuple[float, ...]

    # 节点坐标 (节点数, dim)
    node_coords: np.ndarray = field(repr=False)

    # 单元→节点连接表 (单元数, 4|8)，逆时针，三维先底面后顶面
    connectivity: np.ndarray = field(repr=False)

    # 单元形心 (单元数, dim)
    centroids: np.ndarray = field(repr=False)

    # 单元面积/体积 A(Ω_j)
    element_measures: np.ndarray = field(repr=False)

    # 节点→自由度映射 (节点数, dim)
    node_dofs: np.ndarray = field(repr=False)

    # 单元→自由度表 (单元数, 4·dim 或 8·dim)
    element_dofs: np.ndarray = field(repr=False)

    def __repr__(self):
        dims = "×".join(str(c) for c in self.counts)
        return f"<GridMesh({self.dimension}D, {dims}, elements={self.n_elements}, dofs={self.n_dofs})>"

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.counts))

    @property
    def n_nodes(self) -> int:
        return int(np.prod([c + 1 for c in self.counts]))

    @property
    def n_dofs(self) -> int:
        return self.dimension * self.n_nodes

    @property
    def nodes_per_element(self) -> int:
        return 2 ** self.dimension

    @property
    def domain_lengths(self) -> Tuple[float, ...]:
        """
        计算域各方向的物理长度
        """
        return tuple(c * h for c, h in zip(self.counts, self.edge_lengths))

    @property
    def volume(self) -> float:
        return float(np.sum(self.element_measures))

    def node_index(self, *ijk: int) -> int:
        """
        由节点网格坐标 (i, j[, k]) 得到节点编号
        """
        self._check_arity(ijk)
        index = 0
        stride = 1
        for axis, value in enumerate(ijk):
            size = self.counts[axis] + 1
            if not 0 <= value < size:
                raise IndexError(f"节点坐标越界: axis={axis}, value={value}")
            index += value * stride
            stride *= size
        return index

    def element_index(self, *ijk: int) -> int:
        """
        由单元网格坐标 (i, j[, k]) 得到单元编号
        """
        self._check_arity(ijk)
        index = 0
        stride = 1
        for axis, value in enumerate(ijk):
            if not 0 <= value < self.counts[axis]:
                raise IndexError(f"单元坐标越界: axis={axis}, value={value}")
            index += value * stride
            stride *= self.counts[axis]
        return index

    def node_dof(self, node: int, axis: int) -> int:
        return int(self.node_dofs[node, axis])

    def element_grid_indices(self) -> np.ndarray:
        """
        所有单元的网格坐标 (单元数, dim)
        """
        grids = np.meshgrid(*[np.arange(c) for c in self.counts], indexing="ij")
        # 字典序：x 最快，因此按 Fortran 顺序展开
        return np.stack([g.ravel(order="F") for g in grids], axis=1)

    def node_grid_indices(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(c + 1) for c in self.counts], indexing="ij")
        return np.stack([g.ravel(order="F") for g in grids], axis=1)

    def as_grid(self, values: np.ndarray) -> np.ndarray:
        """
        把逐单元数组整理为 [nz,] ny, nx 形状（行 = y 方向索引）
        """
        return np.asarray(values).reshape(tuple(reversed(self.counts)))

    def _check_arity(self, ijk):
        if len(ijk) != self.dimension:
            raise IndexError(f"需要 {self.dimension} 个坐标分量，实际 {len(ijk)} 个")


@dataclass(frozen=True)
class NeighborhoodTable:
    """
    单元邻域表
    W[i, j] = A(Ω_j)/A(Γ_i)，j ∈ N_i；每行之和为 1
    """

    # 邻域形状描述，如 square(ls=2)
    shape: str

    # 正向邻域权重矩阵 (CSR)
    matrix: sp.csr_matrix = field(repr=False)

    # 反向邻接（正向表的转置，CSR）
    reverse_matrix: sp.csr_matrix = field(repr=False)

    # 邻域测度 A(Γ_i)
    measures: np.ndarray = field(repr=False)

    @property
    def n_elements(self) -> int:
        return self.matrix.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        """
        各单元邻域中的单元个数 |N_i|
        """
        return np.diff(self.matrix.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[start:stop]

    def weights_of(self, i: int) -> np.ndarray:
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.data[start:stop]

    def reverse_neighbors(self, j: int) -> np.ndarray:
        """
        返回 {i : j ∈ N_i}
        """
        start, stop = self.reverse_matrix.indptr[j], self.reverse_matrix.indptr[j + 1]
        return self.reverse_matrix.indices[start:stop]
