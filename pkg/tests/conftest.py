"""
Pytest配置文件
提供测试所需的共享fixture
"""

import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from nfptopo.models.problem import MaterialModel, NeighborhoodSpec
from nfptopo.models.run_config import RunConfig
from nfptopo.services.mesh import build_grid, build_neighborhoods
from nfptopo.services.presets import build_problem


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 长时间运行的验收测试（设置 RUN_SLOW=1 启用）")


def pytest_collection_modifyitems(config, items):
    """未设置 RUN_SLOW=1 时跳过 slow 测试"""
    if os.getenv("RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="设置 RUN_SLOW=1 运行长时间测试")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """固定种子的随机数发生器"""
    return np.random.default_rng(20240611)


@pytest.fixture
def material():
    """默认材料"""
    return MaterialModel()


@pytest.fixture
def small_mesh():
    """6×4 二维网格"""
    return build_grid(2, (6, 4), (1.0, 1.0))


@pytest.fixture
def small_neighborhood(small_mesh):
    """6×4 网格上的 square(ls=1) 邻域"""
    return build_neighborhoods(small_mesh, NeighborhoodSpec(shape="square", ls=1))


@pytest.fixture
def make_problem():
    """按预设与覆盖项构建小规模问题"""

    def factory(preset="cantilever2d", **overrides):
        return build_problem(RunConfig(preset=preset, **overrides))

    return factory


@pytest.fixture
def write_config(tmp_path):
    """写出 key=value 配置文件"""

    def factory(text, name="run.cfg"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return factory
