"""
结果输出服务
密度 CSV（17 位有效数字）、P2 灰度图、收敛历史与配置回显
"""

import os
from typing import List, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel

from ..errors import OutputError
from ..models.mesh import GridMesh
from ..models.run_config import RunConfig
from ..models.state import OptimizationTrace
from .config_loader import dump_config

# 实体阈值，用于三维体素列表
SOLID_THRESHOLD = 0.5

HISTORY_HEADER = "iter,f0,g1,grayness"


def _ensure_directory(directory: str):
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise OutputError(directory, str(e))


def _save(path: str, rows: np.ndarray, fmt: str, delimiter: str = ",", header: str = ""):
    try:
        np.savetxt(path, rows, fmt=fmt, delimiter=delimiter, header=header, comments="")
    except OSError as e:
        raise OutputError(path, str(e))


def _write_text(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(path, str(e))


def pgm_pixels(rho: np.ndarray) -> np.ndarray:
    """
    灰度值 round((1-ρ)·255)：实体为黑（0），空洞为白（255）
    """
    return np.floor((1.0 - np.clip(rho, 0.0, 1.0)) * 255.0 + 0.5).astype(np.int64)


def write_density_csv(path: str, grid: np.ndarray):
    """
    二维数组按行写出，第 0 行对应 y 方向索引 0
    """
    _save(path, np.atleast_2d(grid), fmt="%.17g")


def write_pgm(path: str, grid: np.ndarray):
    """
    P2 纯文本灰度图，图像顶行为 y 方向最大索引
    """
    grid = np.atleast_2d(grid)
    rows, cols = grid.shape
    pixels = pgm_pixels(grid)[::-1]
    _save(path, pixels, fmt="%d", delimiter=" ", header=f"P2\n{cols} {rows}\n255")


def read_density_csv(path: str) -> np.ndarray:
    """
    读回密度 CSV，按单元编号顺序展平
    """
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2).ravel()
    except OSError as e:
        raise OutputError(path, str(e))


def write_density(directory: str, stem: str, mesh: GridMesh, rho: np.ndarray) -> List[str]:
    """
    写出一个密度场：二维为单个 CSV + PGM，三维为每个 z 层各一组
    """
    grid = mesh.as_grid(rho)
    paths = []
    if mesh.dimension == 2:
        slices = [(stem, grid)]
    else:
        slices = [(f"{stem}_z{k:03d}", grid[k]) for k in range(grid.shape[0])]
    for name, layer in slices:
        csv_path = os.path.join(directory, f"{name}.csv")
        pgm_path = os.path.join(directory, f"{name}.pgm")
        write_density_csv(csv_path, layer)
        write_pgm(pgm_path, layer)
        paths.extend([csv_path, pgm_path])
    return paths


def write_solid_voxels(path: str, mesh: GridMesh, rho: np.ndarray):
    """
    三维实体体素列表（ρ ≥ 0.5），列为 i,j,k,rho
    """
    solid = np.nonzero(np.asarray(rho) >= SOLID_THRESHOLD)[0]
    ijk = mesh.element_grid_indices()[solid]
    rows = np.column_stack([ijk.astype(float), np.asarray(rho)[solid]]) if solid.size else np.empty((0, 4))
    _save(path, rows, fmt=["%d", "%d", "%d", "%.17g"], header="i,j,k,rho")


def write_history(path: str, trace: OptimizationTrace):
    """
    收敛历史，列为 iter,f0,g1,grayness
    """
    lines = [HISTORY_HEADER]
    lines.extend(
        f"{record.iteration:d},{record.f0:.17g},{record.g1:.17g},{record.grayness:.17g}"
        for record in trace.records
    )
    _write_text(path, "\n".join(lines) + "\n")


def write_manifest(directory: str, config: BaseModel) -> str:
    """
    配置回显，格式与配置文件一致
    """
    path = os.path.join(directory, "manifest")
    _write_text(path, dump_config(config))
    return path


def write_outputs(trace: OptimizationTrace, mesh: GridMesh, directory: str,
                  config: Optional[RunConfig] = None) -> List[str]:
    """
    写出一次运行的全部结果文件
    """
    if trace.final_density is None:
        raise OutputError(directory, "优化轨迹中没有最终密度")
    _ensure_directory(directory)

    paths = write_density(directory, "density_final", mesh, trace.final_density)
    final_iteration = trace.final.iteration
    for iteration, rho in sorted(trace.snapshots.items()):
        if iteration == final_iteration:
            continue
        paths.extend(write_density(directory, f"density_iter{iteration:05d}", mesh, rho))

    if mesh.dimension == 3:
        voxel_path = os.path.join(directory, "solid_voxels.csv")
        write_solid_voxels(voxel_path, mesh, trace.final_density)
        paths.append(voxel_path)

    history_path = os.path.join(directory, "history.csv")
    write_history(history_path, trace)
    paths.append(history_path)

    if config is not None:
        paths.append(write_manifest(directory, config))

    logger.info(f"结果已写入 {directory}（{len(paths)} 个文件）")
    return paths
