"""
长时间运行的验收测试（设置 RUN_SLOW=1 启用）
"""

import numpy as np
import pytest

from nfptopo.models.run_config import RunConfig
from nfptopo.services.experiments import run_projection_compare, run_step_size
from nfptopo.services.optimizer import run
from nfptopo.services.presets import build_problem

pytestmark = pytest.mark.slow


class TestDeskScale:
    """桌面规模验收测试类"""

    def test_cantilever_2d(self):
        """测试 60×30 悬臂梁 800 次迭代：满足体积约束、柔度减半、灰度下降"""
        problem = build_problem(RunConfig(preset="cantilever2d", nx=60, ny=30, vf=0.35, ls=2, step=0.005,
                                          max_iter=800, tol_fun=None))
        trace = run(problem)

        assert abs(trace.final.g1) <= 1e-3
        assert trace.final.f0 <= 0.5 * trace.initial.f0
        assert trace.final.grayness <= 0.10
        assert trace.final.grayness < trace.record_at(100).grayness

    def test_midload_grayness_milestone(self):
        """测试中点加载梁在 804 次迭代内达到 g ≤ 0.1"""
        problem = build_problem(RunConfig(preset="midload2d", max_iter=804, g_tol=0.1, tol_fun=None), (0.1,))
        trace = run(problem)

        assert trace.milestones[0.1] is not None
        assert trace.milestones[0.1] <= 804

    def test_cantilever_3d_symmetry(self):
        """测试三维悬臂梁（全模型）的密度关于 z 向中面对称"""
        problem = build_problem(RunConfig(preset="cantilever3d", nx=20, ny=10, nz=10, max_iter=100, tol_fun=None))
        trace = run(problem)
        grid = problem.mesh.as_grid(trace.final_density)

        np.testing.assert_allclose(grid, grid[::-1], atol=1e-6)


@pytest.fixture(scope="module")
def projection_report():
    """中点加载梁上 nFP 与投影法的灰度对比（1000 次迭代）"""
    problem = build_problem(RunConfig(preset="midload2d", max_iter=1000, tol_fun=None))
    return run_projection_compare(problem, [0.1, 0.025])


@pytest.fixture(scope="module")
def inverter_report():
    """160×80 反向机构在 S = 0.1 与 S = 0.025 下的步长研究"""
    base = build_problem(RunConfig(preset="inverter2d", nx=160, ny=80, vf=0.2, neighborhood="circle", rmin=2.0,
                                   max_iter=1000))
    return run_step_size(base, [0.1, 0.025])


class TestStudies:
    """对比研究验收测试类"""

    def test_nfp_reaches_fine_grayness(self, projection_report):
        """测试 nFP 在 1000 次迭代内达到 g ≤ 0.025，且较大的灰度目标不会更晚达到"""
        table = projection_report.metrics["milestones"]

        assert isinstance(table["nfp"]["0.025"], int)
        assert table["nfp"]["0.1"] <= table["nfp"]["0.025"]

    @pytest.mark.xfail(strict=False, reason="简化式投影 + 无阻尼 MMA 的基线可能越过 0.025，平台现象依赖具体实现，见 DESIGN.md")
    def test_projection_plateau(self, projection_report):
        """测试投影基线在 1000 次迭代内停在 g > 0.025 的平台"""
        table = projection_report.metrics["milestones"]

        assert isinstance(table["projection"]["0.025"], dict)
        assert table["projection"]["0.025"]["stuck"] is True

    def test_inverter_inverts_output(self, inverter_report):
        """测试反向机构两种步长下输出端都反向运动"""
        for result in inverter_report.results:
            # 正确反向时输出端位移为 -x，f0 < 0 且 vᵀKu > 0
            assert result.trace.final.f0 < 0
            assert result.trace.final.mse_se > 0

    @pytest.mark.xfail(strict=False, reason="1000 次迭代时两种步长的 |f0| 排序不稳定，见 DESIGN.md")
    def test_inverter_smaller_step_not_worse(self, inverter_report):
        """测试小步长的 |f0| 不小于大步长"""
        small = inverter_report.result("S0.025").trace.final.f0
        large = inverter_report.result("S0.1").trace.final.f0

        assert abs(small) >= abs(large)
