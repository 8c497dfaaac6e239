"""
有限元服务测试
"""

import numpy as np
import pytest

from nfptopo.errors import InvalidArgumentError, NumericalFailureError, PreconditionError
from nfptopo.models.fields import DensityField
from nfptopo.models.problem import LoadCase, MaterialModel
from nfptopo.services.fem import (
    assemble_and_solve,
    assemble_stiffness,
    element_stiffness,
    element_strain_energy_terms,
    mechanism_ratio,
    simp_derivative,
    simp_scale,
)
from nfptopo.services.mesh import build_grid


def _uniform(mesh, value=1.0):
    return DensityField(np.full(mesh.n_elements, value))


class TestElementStiffness:
    """单元刚度矩阵测试类"""

    def test_quad_reference_entry(self):
        """测试单位正方形单元的对角元（E=1, ν=0.3）"""
        ke = element_stiffness(2, 1.0, 0.3, (1.0, 1.0))

        assert ke.shape == (8, 8)
        assert ke[0, 0] == pytest.approx(0.45 / 0.91, rel=1e-12)
        np.testing.assert_allclose(ke, ke.T)

    @pytest.mark.parametrize("dimension,edges,rigid_modes", [
        (2, (1.0, 1.0), 3),
        (2, (0.5, 2.0), 3),
        (3, (1.0, 1.0, 1.0), 6),
    ])
    def test_rigid_body_modes(self, dimension, edges, rigid_modes):
        """测试零特征值个数等于刚体位移数"""
        ke = element_stiffness(dimension, 1.0, 0.3, edges)
        eigenvalues = np.linalg.eigvalsh(ke)

        assert np.sum(np.abs(eigenvalues) < 1e-10 * eigenvalues.max()) == rigid_modes
        assert eigenvalues.min() > -1e-10

    def test_scales_with_youngs_modulus(self):
        """测试刚度与杨氏模量成正比"""
        base = element_stiffness(2, 1.0, 0.3, (1.0, 1.0))
        scaled = element_stiffness(2, 2.0e4, 0.3, (1.0, 1.0))

        np.testing.assert_allclose(scaled, 2.0e4 * base)

    @pytest.mark.parametrize("dimension,E,nu,edges", [
        (2, 1.0, 0.3, (1.0,)),
        (2, 1.0, 0.3, (1.0, 0.0)),
        (2, 0.0, 0.3, (1.0, 1.0)),
        (2, 1.0, 0.5, (1.0, 1.0)),
        (4, 1.0, 0.3, (1.0, 1.0, 1.0, 1.0)),
    ])
    def test_invalid_arguments(self, dimension, E, nu, edges):
        """测试非法的单元参数"""
        with pytest.raises(InvalidArgumentError):
            element_stiffness(dimension, E, nu, edges)


class TestSimp:
    """SIMP 插值测试类"""

    def test_end_points(self, material):
        """测试 ρ = 0 与 ρ = 1 处的插值"""
        assert simp_scale(0.0, material) == pytest.approx(material.rho_min)
        assert simp_scale(1.0, material) == pytest.approx(1.0)

    def test_derivative(self, material):
        """测试导数与中心差分一致"""
        rho = np.array([0.1, 0.5, 0.9])
        eps = 1e-7
        numeric = (simp_scale(rho + eps, material) - simp_scale(rho - eps, material)) / (2 * eps)

        np.testing.assert_allclose(simp_derivative(rho, material), numeric, rtol=1e-6)


class TestAssembleAndSolve:
    """组装与求解测试类"""

    def test_single_element_matches_dense_solve(self, material):
        """测试单单元悬臂与稠密求解一致"""
        mesh = build_grid(2, (1, 1), (1.0, 1.0))
        fixed = np.concatenate([mesh.node_dofs[mesh.node_index(0, 0)], mesh.node_dofs[mesh.node_index(0, 1)]])
        load_dof = mesh.node_dof(mesh.node_index(1, 0), 1)
        loads = LoadCase(fixed_dofs=fixed, loads={load_dof: -1.0})
        state = assemble_and_solve(mesh, _uniform(mesh), material, loads)

        ke = element_stiffness(2, material.youngs_modulus, material.poisson_ratio, (1.0, 1.0))
        K = np.zeros((mesh.n_dofs, mesh.n_dofs))
        K[np.ix_(mesh.element_dofs[0], mesh.element_dofs[0])] = ke
        free = np.setdiff1d(np.arange(mesh.n_dofs), fixed)
        force = np.zeros(mesh.n_dofs)
        force[load_dof] = -1.0
        expected = np.zeros(mesh.n_dofs)
        expected[free] = np.linalg.solve(K[np.ix_(free, free)], force[free])

        np.testing.assert_allclose(state.u, expected, rtol=1e-10, atol=1e-14)
        np.testing.assert_array_equal(state.u[fixed], 0.0)
        assert state.strain_energy_uu > 0

    def test_stiffness_is_symmetric(self, make_problem):
        """测试全局刚度矩阵对称"""
        problem = make_problem(nx=6, ny=3)
        K = assemble_stiffness(problem.mesh, _uniform(problem.mesh, 0.4), problem.material, problem.loads)

        assert abs(K - K.T).max() < 1e-12 * abs(K).max()

    def test_no_constraints_is_singular(self, small_mesh, material):
        """测试没有约束时报数值失败"""
        loads = LoadCase(fixed_dofs=np.array([], dtype=np.int64), loads={1: -1.0})

        with pytest.raises(NumericalFailureError):
            assemble_and_solve(small_mesh, _uniform(small_mesh), material, loads)

    def test_insufficient_supports_names_constraints(self, small_mesh, material):
        """测试只约束一个自由度（仍有刚体位移）时报错信息指出约束不足"""
        tip = small_mesh.node_dof(small_mesh.node_index(6, 4), 1)
        loads = LoadCase(fixed_dofs=np.array([0]), loads={tip: -1.0})

        with pytest.raises(NumericalFailureError, match="约束"):
            assemble_and_solve(small_mesh, _uniform(small_mesh), material, loads)

    def test_spring_reduces_tip_displacement(self, material):
        """测试单单元悬臂在加载点加弹簧后，端部位移随弹簧刚度增大单调减小"""
        mesh = build_grid(2, (1, 1), (1.0, 1.0))
        fixed = np.concatenate([mesh.node_dofs[mesh.node_index(0, 0)], mesh.node_dofs[mesh.node_index(0, 1)]])
        tip = mesh.node_dof(mesh.node_index(1, 0), 1)
        displacements = []
        for stiffness in (0.0, 10.0, 100.0, 1.0e3, 1.0e4):
            loads = LoadCase(fixed_dofs=fixed, loads={tip: -1.0}, springs={tip: stiffness})
            state = assemble_and_solve(mesh, _uniform(mesh), material, loads)
            displacements.append(abs(state.u[tip]))

        assert np.all(np.diff(displacements) < 0)

    def test_displacement_is_linear_in_load(self, make_problem):
        """测试载荷放大 c 倍时位移同样放大 c 倍"""
        problem = make_problem(nx=8, ny=4)
        rho = _uniform(problem.mesh, 0.5)
        base = assemble_and_solve(problem.mesh, rho, problem.material, problem.loads)
        scaled = assemble_and_solve(problem.mesh, rho, problem.material, problem.loads.scaled(2.5))

        np.testing.assert_allclose(scaled.u, 2.5 * base.u, rtol=1e-10, atol=1e-14 * np.abs(base.u).max())
        assert scaled.strain_energy_uu == pytest.approx(2.5 ** 2 * base.strain_energy_uu, rel=1e-10)

    def test_out_of_range_dof(self, small_mesh, material):
        """测试越界的自由度编号"""
        loads = LoadCase(fixed_dofs=np.array([0, 1]), loads={small_mesh.n_dofs: -1.0})

        with pytest.raises(InvalidArgumentError):
            assemble_and_solve(small_mesh, _uniform(small_mesh), material, loads)

    def test_density_length_mismatch(self, make_problem):
        """测试密度个数与单元数不一致"""
        problem = make_problem(nx=6, ny=3)

        with pytest.raises(InvalidArgumentError):
            assemble_and_solve(problem.mesh, DensityField(np.ones(5)), problem.material, problem.loads)

    def test_cg_matches_direct(self, make_problem):
        """测试共轭梯度法与直接法结果一致"""
        problem = make_problem(nx=12, ny=6)
        rho = _uniform(problem.mesh, 0.5)
        direct = assemble_and_solve(problem.mesh, rho, problem.material, problem.loads, solver="direct")
        cg = assemble_and_solve(problem.mesh, rho, problem.material, problem.loads, solver="cg")

        np.testing.assert_allclose(cg.u, direct.u, rtol=1e-6, atol=1e-8 * np.abs(direct.u).max())

    def test_unknown_solver(self, make_problem):
        """测试未知的线性求解器"""
        problem = make_problem(nx=4, ny=2)

        with pytest.raises(InvalidArgumentError):
            assemble_and_solve(problem.mesh, _uniform(problem.mesh), problem.material, problem.loads, solver="lu")

    def test_solution_is_read_only(self, make_problem):
        """测试求解结果只读"""
        problem = make_problem(nx=4, ny=2)
        state = assemble_and_solve(problem.mesh, _uniform(problem.mesh), problem.material, problem.loads)

        with pytest.raises(ValueError):
            state.u[0] = 1.0

    def test_element_energies_sum_to_total(self, make_problem):
        """测试逐单元 ρ 加权的 u_eᵀK₀u_e 之和等于 uᵀKu"""
        problem = make_problem(nx=8, ny=4)
        rho = _uniform(problem.mesh, 0.6)
        state = assemble_and_solve(problem.mesh, rho, problem.material, problem.loads)
        uku, ukv = element_strain_energy_terms(state, problem.mesh, problem.material)

        assert ukv is None
        assert np.all(uku >= 0)
        total = np.sum(simp_scale(rho.values, problem.material) * uku)
        assert total == pytest.approx(state.strain_energy_uu, rel=1e-10)

    def test_refinement_converges(self):
        """测试网格加密后跨中截面平均挠度的变化小于 2%"""
        deflections = []
        material = MaterialModel()
        for counts in ((60, 30), (120, 60)):
            mesh = build_grid(2, counts, (60.0 / counts[0], 30.0 / counts[1]))
            nx, ny = counts
            grid = mesh.node_grid_indices()
            fixed = mesh.node_dofs[grid[:, 0] == 0].ravel()
            tip = mesh.node_dof(mesh.node_index(nx, ny // 2), 1)
            state = assemble_and_solve(mesh, _uniform(mesh), material, LoadCase(fixed_dofs=fixed, loads={tip: -1.0}))
            section = mesh.node_dofs[grid[:, 0] == nx // 2][:, 1]
            deflections.append(state.u[section].mean())

        coarse, fine = deflections
        assert coarse < 0 and fine < 0
        assert abs(coarse - fine) / abs(fine) < 0.02

    def test_3d_cantilever_solves(self, make_problem):
        """测试三维悬臂梁可求解且柔度为正"""
        problem = make_problem(preset="cantilever3d", nx=4, ny=2, nz=2)
        state = assemble_and_solve(problem.mesh, _uniform(problem.mesh, 0.5), problem.material, problem.loads)

        assert state.u @ state.force > 0


class TestMechanism:
    """柔顺机构状态测试类"""

    def test_dummy_solution_and_ratio(self, make_problem):
        """测试虚拟载荷位移与 MSE/SE 指标"""
        problem = make_problem(preset="inverter2d", nx=8, ny=4)
        state = assemble_and_solve(problem.mesh, _uniform(problem.mesh, 0.5), problem.material, problem.loads)

        assert state.v is not None
        K = state.stiffness
        expected = 2.0 * (state.v @ (K @ state.u)) / (state.u @ (K @ state.u))
        assert mechanism_ratio(state) == pytest.approx(expected)

        output_dof, spring = next(iter(problem.loads.springs.items()))
        assert state.spring_energy == pytest.approx(spring * state.u[output_dof] ** 2)

    def test_ratio_requires_dummy(self, make_problem):
        """测试刚度问题上调用 MSE/SE 报前置条件错误"""
        problem = make_problem(nx=4, ny=2)
        state = assemble_and_solve(problem.mesh, _uniform(problem.mesh), problem.material, problem.loads)

        with pytest.raises(PreconditionError):
            mechanism_ratio(state)
