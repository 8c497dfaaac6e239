"""
对比研究测试
"""

import dataclasses
import os

import numpy as np
import orjson
import pytest

from nfptopo.errors import InvalidArgumentError
from nfptopo.models.run_config import StudyConfig
from nfptopo.services.experiments import (
    StudySpec,
    StudyVariant,
    density_correlation,
    mesh_independence_spec,
    projection_compare_spec,
    resample_to,
    run_mesh_independence,
    run_projection_compare,
    run_variants,
    run_vf_ls_sweep,
    step_size_spec,
    study_from_config,
    write_report,
)
from nfptopo.services.mesh import build_grid


class TestStudySpec:
    """研究定义测试类"""

    def test_requires_two_variants(self, make_problem):
        """测试变体少于 2 个"""
        with pytest.raises(InvalidArgumentError):
            StudySpec(kind="step_size", variants=[StudyVariant("a", make_problem(nx=4, ny=2))])

    def test_duplicate_labels(self, make_problem):
        """测试变体标签重复"""
        problem = make_problem(nx=4, ny=2)
        with pytest.raises(InvalidArgumentError):
            StudySpec(kind="step_size", variants=[StudyVariant("a", problem), StudyVariant("a", problem)])

    def test_unknown_kind(self, make_problem):
        """测试未知的研究类型"""
        problem = make_problem(nx=4, ny=2)
        with pytest.raises(InvalidArgumentError):
            StudySpec(kind="random_search", variants=[StudyVariant("a", problem), StudyVariant("b", problem)])

    def test_step_size_labels(self, make_problem):
        """测试步长研究的变体标签与步长"""
        spec = step_size_spec(make_problem(nx=4, ny=2), [0.1, 0.5])

        assert [variant.label for variant in spec.variants] == ["S0.1", "S0.5"]
        assert spec.variants[1].problem.optimizer.step == 0.5


class TestResampling:
    """重采样与相关系数测试类"""

    def test_fine_to_coarse(self):
        """测试细网格按形心重采样到粗网格"""
        fine = build_grid(2, (4, 2), (0.5, 0.5))
        coarse = build_grid(2, (2, 1), (1.0, 1.0))

        np.testing.assert_array_equal(resample_to(fine, np.arange(8.0), coarse), [5.0, 7.0])

    def test_same_mesh_is_identity(self, small_mesh, rng):
        """测试同一网格上重采样不改变数值"""
        values = rng.uniform(size=small_mesh.n_elements)

        np.testing.assert_array_equal(resample_to(small_mesh, values, small_mesh), values)

    def test_correlation(self, rng):
        """测试 Pearson 相关系数及常数场的约定"""
        a = rng.uniform(size=20)

        assert density_correlation(a, a) == pytest.approx(1.0)
        assert density_correlation(a, 1.0 - a) == pytest.approx(-1.0)
        assert density_correlation(np.full(5, 0.3), np.full(5, 0.3)) == 1.0
        assert np.isnan(density_correlation(np.full(5, 0.3), np.full(5, 0.4)))


class TestMeshIndependence:
    """网格无关性研究测试类"""

    def test_refinement_keeps_domain(self, make_problem):
        """测试加密后的变体共享物理计算域"""
        base = make_problem(nx=8, ny=4)
        spec = mesh_independence_spec(base, [((8, 4), 1), ((16, 8), 2)])

        assert [variant.label for variant in spec.variants] == ["8x4_ls1", "16x8_ls2"]
        fine = spec.variants[1].problem
        assert fine.mesh.edge_lengths == pytest.approx((0.5, 0.5))
        assert fine.mesh.domain_lengths == pytest.approx(base.mesh.domain_lengths)
        assert fine.neighborhood.ls == 2
        assert fine.loads.fixed_dofs.size == 2 * 9

    def test_inconsistent_domain(self, make_problem):
        """测试给定网格的物理计算域不一致"""
        base = make_problem(nx=8, ny=4)
        other = build_grid(2, (16, 8), (1.0, 1.0))

        with pytest.raises(InvalidArgumentError):
            mesh_independence_spec(base, [((8, 4), 1), (other, 2)])

    def test_dimension_mismatch(self, make_problem):
        """测试加密项维度与问题不一致"""
        with pytest.raises(InvalidArgumentError):
            mesh_independence_spec(make_problem(nx=8, ny=4), [((8, 4), 1), ((8, 4, 2), 1)])

    def test_identical_meshes_correlate(self, make_problem):
        """测试相同网格运行两次时相关系数为 1"""
        base = make_problem(nx=8, ny=4, ls=1, step=0.1, max_iter=3)
        report = run_mesh_independence(base, [((8, 4), 1), ((8, 4), 1)], workers=1)

        assert report.metrics["coarsest"] == "8x4_ls1"
        assert len(report.metrics["correlations"]) == 1
        assert report.metrics["correlations"][0]["r"] == pytest.approx(1.0)


class TestSweepAndReport:
    """参数扫描与报告输出测试类"""

    def test_vf_ls_sweep_report(self, make_problem, tmp_path):
        """测试 (v_f, ls) 扫描及报告文件"""
        base = make_problem(nx=8, ny=4, step=0.1, max_iter=3)
        report = run_vf_ls_sweep(base, [(0.3, 1), (0.4, 1)], workers=1)

        assert [result.label for result in report.results] == ["vf0.3_ls1", "vf0.4_ls1"]
        assert report.result("vf0.3_ls1").trace.initial.grayness == pytest.approx(4 * 0.3 * 0.7)

        directory = str(tmp_path / "study")
        paths = write_report(report, directory)
        for name in ("summary.csv", "history_vf0.3_ls1.csv", "density_vf0.3_ls1.csv", "density_vf0.4_ls1.pgm",
                     "report.json"):
            assert os.path.join(directory, name) in paths
            assert os.path.exists(os.path.join(directory, name))

        with open(os.path.join(directory, "summary.csv"), encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0].startswith("label,problem,iterations,stop_reason")
        assert len(lines) == 3

        with open(os.path.join(directory, "history_vf0.4_ls1.csv"), encoding="utf-8") as f:
            history = f.read().splitlines()
        assert history[0] == "iter,f0,g1,grayness,mse_se,beta_h"
        assert len(history) == 1 + 4

        with open(os.path.join(directory, "report.json"), "rb") as f:
            payload = orjson.loads(f.read())
        assert payload["kind"] == "vf_ls_sweep"
        assert [variant["volume_fraction"] for variant in payload["variants"]] == [0.3, 0.4]
        assert payload["variants"][0]["neighborhood"] == "square(ls=1)"

    def test_result_lookup(self, make_problem):
        """测试按标签查找不存在的变体"""
        report = run_vf_ls_sweep(make_problem(nx=4, ny=2, max_iter=1), [(0.3, 1), (0.4, 1)], workers=1)

        with pytest.raises(KeyError):
            report.result("vf0.5_ls1")


class TestProjectionCompare:
    """投影法对比测试类"""

    def test_variants(self, make_problem):
        """测试 nFP 与投影变体的参数"""
        spec = projection_compare_spec(make_problem(preset="midload2d", nx=8, ny=4), [0.1, 0.5])

        nfp = spec.variants[0].problem
        projection = spec.variants[1].problem
        assert [variant.label for variant in spec.variants] == ["nfp", "projection"]
        assert nfp.method == "nfp" and str(nfp.shaping) == "exp"
        assert projection.method == "projection"
        assert projection.optimizer.step == 1.0
        assert nfp.stopping.g_tol == projection.stopping.g_tol == 0.1
        assert spec.milestones == (0.5, 0.1)

    def test_requires_targets(self, make_problem):
        """测试缺少灰度目标"""
        with pytest.raises(InvalidArgumentError):
            projection_compare_spec(make_problem(preset="midload2d", nx=8, ny=4), [])

    def test_milestone_metrics(self, make_problem):
        """测试里程碑指标：已达到为迭代号，未达到标记 stuck 与平台灰度"""
        problem = make_problem(preset="midload2d", nx=8, ny=4, ls=1, max_iter=4)
        report = run_projection_compare(problem, [0.1, 0.99], workers=1)

        table = report.metrics["milestones"]
        assert set(table) == {"nfp", "projection"}
        for label, entries in table.items():
            assert set(entries) == {"0.99", "0.1"}
            assert entries["0.99"] == 0
            stuck = entries["0.1"]
            if isinstance(stuck, dict):
                assert stuck["stuck"] is True
                assert stuck["plateau"] == pytest.approx(report.result(label).trace.min_grayness())
        assert all(record.beta_h == 1.0 for record in report.result("projection").trace.records)


class TestStudyFromConfig:
    """由研究配置构建研究测试类"""

    def _config(self, **values):
        return StudyConfig(preset="cantilever2d", nx=8, ny=4, max_iter=2, **values)

    def test_mesh_independence(self):
        """测试网格无关性研究"""
        spec = study_from_config(self._config(study="mesh_independence", refinements="8x4:1,16x8:2"))

        assert spec.kind == "mesh_independence"
        assert [variant.problem.mesh.counts for variant in spec.variants] == [(8, 4), (16, 8)]

    def test_mesh_independence_requires_refinements(self):
        """测试缺少 refinements"""
        with pytest.raises(InvalidArgumentError):
            study_from_config(self._config(study="mesh_independence"))

    def test_vf_ls_sweep(self):
        """测试扫描为 v_f 与 ls 的笛卡尔积"""
        spec = study_from_config(self._config(study="vf_ls_sweep", vf_values="0.3,0.4", ls_values="1,2"))

        assert [variant.label for variant in spec.variants] == ["vf0.3_ls1", "vf0.3_ls2", "vf0.4_ls1", "vf0.4_ls2"]

    def test_function_choice_defaults(self):
        """测试默认对比四种形函数"""
        spec = study_from_config(self._config(study="function_choice"))

        assert [variant.label for variant in spec.variants] == ["exp", "tanh", "power(n=12)", "atan"]

    def test_step_size(self):
        """测试步长研究"""
        spec = study_from_config(self._config(study="step_size", steps="0.005,0.1"))

        assert [variant.problem.optimizer.step for variant in spec.variants] == [0.005, 0.1]
        with pytest.raises(InvalidArgumentError):
            study_from_config(self._config(study="step_size"))

    def test_projection_compare_defaults(self):
        """测试投影对比的默认灰度目标"""
        spec = study_from_config(self._config(study="projection_compare"))

        assert spec.milestones == (0.1, 0.025)
        assert spec.variants[1].problem.projection.maximum == 512.0


class TestParallel:
    """并行运行测试类"""

    def test_workers_match_sequential(self, make_problem):
        """测试多进程运行结果与顺序运行一致"""
        base = make_problem(nx=8, ny=4, ls=1, step=0.1, max_iter=2)
        problems = [base, dataclasses.replace(base, optimizer=base.optimizer.model_copy(update={"step": 0.3}))]

        sequential = run_variants(problems, workers=1)
        parallel = run_variants(problems, workers=2)

        for first, second in zip(sequential, parallel):
            np.testing.assert_array_equal(first.final_density, second.final_density)
            assert first.records == second.records
