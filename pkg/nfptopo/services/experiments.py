"""
对比研究服务
网格无关性、体积分数/长度尺度扫描、形函数选择、步长研究以及与投影法的对比
"""

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
from loguru import logger

from ..config import settings
from ..errors import InvalidArgumentError, OutputError
from ..models.mesh import GridMesh
from ..models.problem import NeighborhoodSpec, ProblemSpec, ProjectionSettings
from ..models.run_config import STUDY_KINDS, StudyConfig, parse_refinement
from ..models.shaping import ShapingFunction
from ..models.state import OptimizationTrace
from ..utils.formatting import format_number, safe_label
from . import optimizer
from .mesh import build_grid
from .outputs import write_density
from .presets import OUTPUT_SPRING, build_problem, get_preset

# 投影法默认的固定步长
PROJECTION_STEP = 1.0

# 网格加密间允许的物理邻域尺寸相对偏差
NEIGHBORHOOD_SIZE_TOLERANCE = 0.25


@dataclass
class StudyVariant:
    label: str
    problem: ProblemSpec


@dataclass
class StudySpec:
    """
    对比研究定义
    """

    kind: str
    variants: List[StudyVariant]

    # 记录首次达到的灰度目标
    milestones: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise InvalidArgumentError(f"未知的研究类型: {self.kind}")
        if len(self.variants) < 2:
            raise InvalidArgumentError("对比研究至少需要 2 个变体")
        labels = [variant.label for variant in self.variants]
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError(f"变体标签重复: {labels}")


@dataclass
class VariantResult:
    label: str
    problem: ProblemSpec = field(repr=False)
    trace: OptimizationTrace = field(repr=False)

    def summary(self, milestones: Sequence[float]) -> Dict[str, Any]:
        final = self.trace.final
        row: Dict[str, Any] = {
            "label": self.label,
            "problem": self.problem.name,
            "iterations": final.iteration,
            "stop_reason": self.trace.stop_reason,
            "f0_initial": self.trace.initial.f0,
            "f0_final": final.f0,
            "g1_final": final.g1,
            "grayness_final": final.grayness,
            "grayness_min": self.trace.min_grayness(),
            "mse_se_final": final.mse_se,
        }
        for target in milestones:
            row[f"g<={target:g}"] = self.trace.milestones.get(target)
        return row


@dataclass
class StudyReport:
    kind: str
    results: List[VariantResult]
    milestones: Tuple[float, ...] = ()
    metrics: Dict[str, Any] = field(default_factory=dict)

    def result(self, label: str) -> VariantResult:
        for result in self.results:
            if result.label == label:
                return result
        raise KeyError(label)


def _with_milestones(problem: ProblemSpec, milestones: Sequence[float]) -> ProblemSpec:
    return dataclasses.replace(problem, milestones=tuple(milestones)) if milestones else problem


def run_variants(problems: Sequence[ProblemSpec], workers: Optional[int] = None) -> List[OptimizationTrace]:
    """
    运行全部变体，结果按变体顺序返回
    """
    workers = workers or settings.STUDY_WORKERS
    if workers <= 1 or len(problems) <= 1:
        return [optimizer.run(problem) for problem in problems]
    with ProcessPoolExecutor(max_workers=min(workers, len(problems))) as executor:
        return list(executor.map(optimizer.run, problems))


def run_study(spec: StudySpec, workers: Optional[int] = None) -> StudyReport:
    """
    运行对比研究并按类型计算附加指标
    """
    logger.info(f"开始研究 {spec.kind}: {len(spec.variants)} 个变体")
    problems = [_with_milestones(variant.problem, spec.milestones) for variant in spec.variants]
    traces = run_variants(problems, workers)
    results = [
        VariantResult(label=variant.label, problem=problem, trace=trace)
        for variant, problem, trace in zip(spec.variants, problems, traces)
    ]
    report = StudyReport(kind=spec.kind, results=results, milestones=tuple(spec.milestones))
    if spec.kind == "mesh_independence":
        report.metrics = _mesh_independence_metrics(results)
    elif spec.kind == "projection_compare":
        report.metrics = _milestone_metrics(results, spec.milestones)
    for result in results:
        final = result.trace.final
        logger.info(f"{spec.kind} [{result.label}]: f0={final.f0:.6g}, 灰度={final.grayness:.4f}, "
                    f"迭代 {final.iteration} ({result.trace.stop_reason})")
    return report


def remesh(problem: ProblemSpec, counts: Sequence[int], ls: int) -> ProblemSpec:
    """
    在相同物理域上以新的单元数重建预设问题，邻域取 square(ls)
    """
    preset = get_preset(problem.name)
    counts = tuple(int(c) for c in counts)
    if len(counts) != problem.mesh.dimension:
        raise InvalidArgumentError(f"网格加密的维度 {len(counts)} 与问题维度 {problem.mesh.dimension} 不一致")
    edges = tuple(length / count for length, count in zip(problem.mesh.domain_lengths, counts))
    mesh = build_grid(problem.mesh.dimension, counts, edges)
    spring = next(iter(problem.loads.springs.values()), OUTPUT_SPRING)
    return dataclasses.replace(
        problem,
        mesh=mesh,
        loads=preset.boundary(mesh, spring),
        neighborhood=NeighborhoodSpec(shape="square", ls=ls),
    )


def _check_same_domain(meshes: Sequence[GridMesh]):
    reference = np.asarray(meshes[0].domain_lengths)
    for mesh in meshes[1:]:
        lengths = np.asarray(mesh.domain_lengths)
        if lengths.shape != reference.shape or not np.allclose(lengths, reference, rtol=1e-9):
            raise InvalidArgumentError(f"网格加密的物理计算域不一致: {tuple(reference)} vs {tuple(lengths)}")


def mesh_independence_spec(base: ProblemSpec,
                           refinements: Sequence[Tuple[Union[GridMesh, Sequence[int]], int]]) -> StudySpec:
    variants = []
    for target, ls in refinements:
        counts = target.counts if isinstance(target, GridMesh) else tuple(target)
        problem = remesh(base, counts, ls)
        if isinstance(target, GridMesh):
            _check_same_domain([base.mesh, target])
        label = f"{'x'.join(str(c) for c in counts)}_ls{ls}"
        if any(variant.label == label for variant in variants):
            label = f"{label}_{len(variants)}"
        variants.append(StudyVariant(label=label, problem=problem))

    meshes = [variant.problem.mesh for variant in variants]
    _check_same_domain(meshes)
    sizes = np.array([variant.problem.neighborhood.ls * variant.problem.mesh.edge_lengths[0] for variant in variants])
    if sizes.min() > 0 and sizes.max() / sizes.min() - 1.0 > NEIGHBORHOOD_SIZE_TOLERANCE:
        logger.warning(f"各加密级别的物理邻域尺寸差异较大: {sizes.tolist()}")
    return StudySpec(kind="mesh_independence", variants=variants)


def run_mesh_independence(base: ProblemSpec, refinements, workers: Optional[int] = None) -> StudyReport:
    """
    同一物理邻域尺寸下的多级网格加密
    """
    return run_study(mesh_independence_spec(base, refinements), workers)


def resample_to(source: GridMesh, values: np.ndarray, target: GridMesh) -> np.ndarray:
    """
    最近形心重采样：取包含目标单元形心的源单元的值
    """
    h = np.asarray(source.edge_lengths)
    ijk = np.floor(target.centroids / h).astype(np.int64)
    ijk = np.clip(ijk, 0, np.asarray(source.counts) - 1)
    strides = np.cumprod([1] + list(source.counts[:-1]))
    return np.asarray(values)[ijk @ strides]


def density_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """
    Pearson 相关系数；两个常数场相等时记为 1
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 1.0 if np.array_equal(a, b) else float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def _mesh_independence_metrics(results: List[VariantResult]) -> Dict[str, Any]:
    coarsest = min(results, key=lambda result: result.problem.mesh.n_elements)
    target = coarsest.problem.mesh
    resampled = {
        result.label: resample_to(result.problem.mesh, result.trace.final_density, target) for result in results
    }
    correlations = []
    for index, first in enumerate(results):
        for second in results[index + 1:]:
            correlations.append({
                "a": first.label,
                "b": second.label,
                "r": density_correlation(resampled[first.label], resampled[second.label]),
            })
    return {"coarsest": coarsest.label, "correlations": correlations, "resampled": resampled}


def projection_compare_spec(problem: ProblemSpec, g_tols: Sequence[float],
                            schedule: Optional[ProjectionSettings] = None,
                            projection_step: float = PROJECTION_STEP) -> StudySpec:
    if not g_tols:
        raise InvalidArgumentError("投影对比需要至少一个灰度目标")
    if problem.name != "midload2d":
        logger.warning(f"投影对比通常使用 midload2d，当前问题为 {problem.name}")
    target = min(g_tols)
    stopping = problem.stopping.model_copy(update={"g_tol": target})
    nfp = dataclasses.replace(problem, method="nfp", shaping=ShapingFunction("exp"), stopping=stopping)
    projection = dataclasses.replace(
        problem,
        method="projection",
        projection=schedule or problem.projection,
        optimizer=problem.optimizer.model_copy(update={"step": projection_step}),
        stopping=stopping,
    )
    return StudySpec(
        kind="projection_compare",
        variants=[StudyVariant("nfp", nfp), StudyVariant("projection", projection)],
        milestones=tuple(sorted(set(g_tols), reverse=True)),
    )


def run_projection_compare(problem: ProblemSpec, g_tols: Sequence[float],
                           schedule: Optional[ProjectionSettings] = None,
                           projection_step: float = PROJECTION_STEP,
                           workers: Optional[int] = None) -> StudyReport:
    """
    nFP 与 β_H 延拓投影法的灰度收敛对比
    未达到的目标记为 stuck，并给出平台灰度
    """
    return run_study(projection_compare_spec(problem, g_tols, schedule, projection_step), workers)


def _milestone_metrics(results: List[VariantResult], milestones: Sequence[float]) -> Dict[str, Any]:
    table = {}
    for result in results:
        entries = {}
        for target in milestones:
            reached = result.trace.milestones.get(target)
            entries[f"{target:g}"] = reached if reached is not None else {
                "stuck": True,
                "plateau": result.trace.min_grayness(),
            }
        table[result.label] = entries
    return {"milestones": table}


def vf_ls_sweep_spec(base: ProblemSpec, variants: Sequence[Tuple[float, int]]) -> StudySpec:
    items = []
    for vf, ls in variants:
        problem = dataclasses.replace(
            base,
            objective=base.objective.model_copy(update={"volume_fraction": vf}),
            neighborhood=NeighborhoodSpec(shape="square", ls=ls),
        )
        items.append(StudyVariant(label=f"vf{vf:g}_ls{ls}", problem=problem))
    return StudySpec(kind="vf_ls_sweep", variants=items)


def run_vf_ls_sweep(base: ProblemSpec, variants: Sequence[Tuple[float, int]],
                    workers: Optional[int] = None) -> StudyReport:
    """
    同一问题、同一网格下的 (v_f, ls) 组合
    """
    return run_study(vf_ls_sweep_spec(base, variants), workers)


def function_choice_spec(base: ProblemSpec, kinds: Sequence[Union[str, ShapingFunction]]) -> StudySpec:
    variants = []
    for kind in kinds:
        shaping = kind if isinstance(kind, ShapingFunction) else ShapingFunction(kind)
        variants.append(StudyVariant(label=str(shaping), problem=dataclasses.replace(base, shaping=shaping)))
    return StudySpec(kind="function_choice", variants=variants)


def run_function_choice(base: ProblemSpec, kinds: Sequence[Union[str, ShapingFunction]],
                        workers: Optional[int] = None) -> StudyReport:
    """
    不同形函数 f(β) 的对比
    """
    return run_study(function_choice_spec(base, kinds), workers)


def step_size_spec(base: ProblemSpec, steps: Sequence[float]) -> StudySpec:
    variants = [
        StudyVariant(label=f"S{step:g}",
                     problem=dataclasses.replace(base, optimizer=base.optimizer.model_copy(update={"step": step})))
        for step in steps
    ]
    return StudySpec(kind="step_size", variants=variants)


def run_step_size(base: ProblemSpec, steps: Sequence[float], workers: Optional[int] = None) -> StudyReport:
    """
    MMA 步长阻尼系数 S 的对比
    """
    return run_study(step_size_spec(base, steps), workers)


def study_from_config(config: StudyConfig) -> StudySpec:
    """
    由研究配置构建 StudySpec，未给出的变量列表取研究默认值
    """
    base = build_problem(config)
    kind = config.study
    if kind == "mesh_independence":
        refinements = [parse_refinement(item) for item in (config.refinements or [])]
        if not refinements:
            raise InvalidArgumentError("mesh_independence 研究需要 refinements")
        return mesh_independence_spec(base, refinements)
    if kind == "vf_ls_sweep":
        vf_values = config.vf_values or [base.objective.volume_fraction]
        ls_values = config.ls_values or [base.neighborhood.ls]
        return vf_ls_sweep_spec(base, [(vf, ls) for vf in vf_values for ls in ls_values])
    if kind == "function_choice":
        kinds = config.functions or ["exp", "tanh", "power", "atan"]
        return function_choice_spec(base, [ShapingFunction(kind, config.power_n) for kind in kinds])
    if kind == "step_size":
        if not config.steps:
            raise InvalidArgumentError("step_size 研究需要 steps")
        return step_size_spec(base, config.steps)
    g_tols = config.g_tols or [0.1, 0.025]
    schedule = ProjectionSettings(maximum=config.beta_max)
    return projection_compare_spec(base, g_tols, schedule, config.projection_step)


def _write(path: str, data: Union[str, bytes]):
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        with open(path, mode) as f:
            f.write(data)
    except OSError as e:
        raise OutputError(path, str(e))


def write_report(report: StudyReport, directory: str) -> List[str]:
    """
    写出研究报告：summary.csv、每个变体的 history_<label>.csv 与最终密度、report.json
    """
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise OutputError(directory, str(e))

    paths = []
    rows = [result.summary(report.milestones) for result in report.results]
    columns = list(rows[0])
    lines = [",".join(columns)] + [",".join(format_number(row[column]) for column in columns) for row in rows]
    summary_path = os.path.join(directory, "summary.csv")
    _write(summary_path, "\n".join(lines) + "\n")
    paths.append(summary_path)

    variants = []
    for result, row in zip(report.results, rows):
        label = safe_label(result.label)
        history = ["iter,f0,g1,grayness,mse_se,beta_h"]
        history.extend(
            ",".join(format_number(value) for value in (r.iteration, r.f0, r.g1, r.grayness, r.mse_se, r.beta_h))
            for r in result.trace.records
        )
        history_path = os.path.join(directory, f"history_{label}.csv")
        _write(history_path, "\n".join(history) + "\n")
        paths.append(history_path)
        paths.extend(write_density(directory, f"density_{label}", result.problem.mesh, result.trace.final_density))

        problem = result.problem
        variants.append({
            **row,
            "counts": list(problem.mesh.counts),
            "neighborhood": problem.neighborhood.label(),
            "shaping": str(problem.shaping),
            "method": problem.method,
            "volume_fraction": problem.objective.volume_fraction,
            "step": problem.optimizer.step,
            "milestones": {f"{target:g}": reached for target, reached in result.trace.milestones.items()},
        })

    metrics = {key: value for key, value in report.metrics.items() if key != "resampled"}
    payload = {"kind": report.kind, "variants": variants, "metrics": metrics}
    report_path = os.path.join(directory, "report.json")
    _write(report_path, orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY))
    paths.append(report_path)

    logger.info(f"研究报告已写入 {directory}")
    return paths
