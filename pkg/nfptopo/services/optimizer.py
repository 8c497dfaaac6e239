"""
优化器服务
移动渐近线法（MMA，单个不等式约束）+ 步长阻尼，以及完整的优化循环
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from loguru import logger

from ..config import settings
from ..errors import InvalidArgumentError, NumericalFailureError, OptimizationError, TopOptError
from ..models.fields import DensityField, DesignField, ProjectionField
from ..models.mesh import NeighborhoodTable
from ..models.problem import OptimizerSettings, ProblemSpec
from ..models.shaping import ShapingFunction
from ..models.state import IterationRecord, OptimizationTrace
from .density import (
    ContinuationSchedule,
    backpropagate,
    evaluate_density,
    grayness,
    projection_backpropagate,
    projection_density,
)
from .fem import assemble_and_solve, mechanism_ratio
from .mesh import build_neighborhoods
from .objectives import objective_and_sens, volume_constraint_and_sens

# MMA 子问题常数
_RAA0 = 1.0e-5
_ALBEFA = 0.1
_ASY_MIN_FACTOR = 0.01
_ASY_MAX_FACTOR = 10.0

# 对偶二分求解
_DUAL_TOL = 1.0e-10
_DUAL_MAX_ITER = 500
_DUAL_LAMBDA_MAX = 1.0e30
_DUAL_LAMBDA_MIN = 1.0e-40


@dataclass
class MmaState:
    """
    MMA 内部状态（单一所有者，可变）
    step 为外部步长阻尼系数 S：S < 1 时渐近线的扩张速率与宽度上限随 S 收缩
    """

    asy_init: float = 0.5
    asy_incr: float = 1.2
    asy_decr: float = 0.7
    move_limit: float = 0.5
    step: float = 1.0
    iteration: int = 0
    low: Optional[np.ndarray] = field(default=None, repr=False)
    upp: Optional[np.ndarray] = field(default=None, repr=False)
    x_old1: Optional[np.ndarray] = field(default=None, repr=False)
    x_old2: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.move_limit <= 1:
            raise InvalidArgumentError(f"move_limit 必须在 (0, 1] 内: {self.move_limit}")
        if not 0 < self.step <= 1:
            raise InvalidArgumentError(f"步长系数 S 必须在 (0, 1] 内: {self.step}")

    @classmethod
    def from_settings(cls, optimizer: OptimizerSettings) -> "MmaState":
        return cls(
            asy_init=optimizer.asy_init,
            asy_incr=optimizer.asy_incr,
            asy_decr=optimizer.asy_decr,
            move_limit=optimizer.move_limit,
            step=optimizer.step,
        )

    @property
    def expansion(self) -> float:
        """
        同向移动时的扩张系数；阻尼步只走完候选位移的 S 倍，扩张按 S 折算
        """
        return 1.0 + self.step * (self.asy_incr - 1.0)

    @property
    def max_width(self) -> float:
        """
        渐近线到设计点的最大距离（以 span 计）：S = 1 时为 10，S → 0 时退化为 asy_init
        """
        return self.asy_init + self.step * (_ASY_MAX_FACTOR - self.asy_init)


def _update_asymptotes(x: np.ndarray, span: np.ndarray, state: MmaState):
    if state.iteration <= 2 or state.low is None:
        state.low = x - state.asy_init * span
        state.upp = x + state.asy_init * span
        return
    trend = (x - state.x_old1) * (state.x_old1 - state.x_old2)
    factor = np.ones_like(x)
    factor[trend > 0] = state.expansion
    factor[trend < 0] = state.asy_decr
    low = x - factor * (state.x_old1 - state.low)
    upp = x + factor * (state.upp - state.x_old1)
    width = max(state.max_width, _ASY_MIN_FACTOR)
    state.low = np.clip(low, x - width * span, x - _ASY_MIN_FACTOR * span)
    state.upp = np.clip(upp, x + _ASY_MIN_FACTOR * span, x + width * span)


def _approximation_terms(gradient: np.ndarray, ux: np.ndarray, xl: np.ndarray, span: np.ndarray):
    """
    MMA 凸可分近似的系数 p、q
    """
    p = np.maximum(gradient, 0.0)
    q = np.maximum(-gradient, 0.0)
    pq = 0.001 * (p + q) + _RAA0 / span
    return (p + pq) * ux ** 2, (q + pq) * xl ** 2


def mma_step(x: np.ndarray, f0: float, df0: np.ndarray, g1: float, dg1: np.ndarray,
             lower: np.ndarray, upper: np.ndarray, state: MmaState) -> np.ndarray:
    """
    求解一次 MMA 子问题（单个约束 g1 ≤ 0），返回候选设计
    内层用对偶二分法求约束乘子，相对精度 1e-10
    """
    x = np.asarray(x, dtype=float)
    df0 = np.asarray(df0, dtype=float)
    dg1 = np.asarray(dg1, dtype=float)
    if not (np.all(np.isfinite(df0)) and np.all(np.isfinite(dg1)) and np.isfinite(f0) and np.isfinite(g1)):
        raise InvalidArgumentError("目标或约束的梯度含非有限值")
    if np.any(lower > upper) or x.shape != df0.shape or x.shape != dg1.shape:
        raise InvalidArgumentError("设计变量、梯度与上下界的形状或取值不一致")

    state.iteration += 1
    span = np.maximum(upper - lower, 1.0e-5)
    _update_asymptotes(x, span, state)
    low, upp = state.low, state.upp

    alpha = np.maximum.reduce([low + _ALBEFA * (x - low), x - state.move_limit * span, lower])
    beta = np.minimum.reduce([upp - _ALBEFA * (upp - x), x + state.move_limit * span, upper])

    ux = upp - x
    xl = x - low
    p0, q0 = _approximation_terms(df0, ux, xl, span)
    p1, q1 = _approximation_terms(dg1, ux, xl, span)
    b = np.sum(p1 / ux + q1 / xl) - g1

    def primal(lam: float) -> np.ndarray:
        sqrt_p = np.sqrt(p0 + lam * p1)
        sqrt_q = np.sqrt(q0 + lam * q1)
        candidate = (sqrt_p * low + sqrt_q * upp) / (sqrt_p + sqrt_q)
        return np.clip(candidate, alpha, beta)

    def constraint(lam: float) -> float:
        candidate = primal(lam)
        return float(np.sum(p1 / (upp - candidate) + q1 / (candidate - low)) - b)

    if constraint(0.0) <= 0.0:
        candidate = primal(0.0)
    else:
        lo, hi = _bracket_multiplier(constraint)
        if hi is None:
            logger.warning("MMA 子问题在移动限内不可行，取约束最小化的设计")
            candidate = primal(_DUAL_LAMBDA_MAX)
        else:
            candidate = primal(_bisect_multiplier(constraint, lo, hi))

    state.x_old2 = state.x_old1
    state.x_old1 = x.copy()
    return candidate


def _bracket_multiplier(constraint: Callable[[float], float]):
    """
    寻找 [lo, hi] 使 constraint(lo) > 0 ≥ constraint(hi)；不可行时 hi 为 None
    """
    hi = 1.0
    if constraint(hi) <= 0.0:
        lo = hi / 10.0
        while constraint(lo) <= 0.0:
            hi = lo
            lo /= 10.0
            if lo < _DUAL_LAMBDA_MIN:
                return 0.0, hi
        return lo, hi
    lo = hi
    while constraint(hi) > 0.0:
        lo = hi
        hi *= 10.0
        if hi > _DUAL_LAMBDA_MAX:
            return lo, None
    return lo, hi


def _bisect_multiplier(constraint: Callable[[float], float], lo: float, hi: float) -> float:
    for _ in range(_DUAL_MAX_ITER):
        if hi - lo <= _DUAL_TOL * hi:
            return hi
        mid = 0.5 * (lo + hi)
        if constraint(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    raise NumericalFailureError("MMA 对偶子问题二分未收敛")


def apply_step_damping(x_old: np.ndarray, x_candidate: np.ndarray, step: float,
                       lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None) -> np.ndarray:
    """
    x_new = x_old + S·(x_candidate - x_old)，再截断到上下界
    """
    if not 0.0 < step <= 1.0:
        raise InvalidArgumentError(f"步长系数 S 必须在 (0, 1] 内: {step}")
    x_old = np.asarray(x_old, dtype=float)
    x_new = x_old + step * (np.asarray(x_candidate, dtype=float) - x_old)
    if lower is not None or upper is not None:
        x_new = np.clip(x_new, lower, upper)
    return x_new


class DesignMap(ABC):
    """
    设计变量 → 物理密度的参数化
    """

    lower: np.ndarray
    upper: np.ndarray

    @abstractmethod
    def initial(self, volume_fraction: float) -> np.ndarray:
        """均匀初始设计，使 ρ = v_f"""

    @abstractmethod
    def density(self, x: np.ndarray, iteration: int) -> DensityField:
        """物理密度"""

    @abstractmethod
    def backpropagate(self, x: np.ndarray, rho: DensityField, df_drho: np.ndarray, iteration: int) -> np.ndarray:
        """df/dρ → df/dx"""

    def sharpness(self, iteration: int) -> Optional[float]:
        return None


class NfpDesignMap(DesignMap):
    """
    nFP 参数化：ρ_i = 1 - Π f(β_j)^{w_ij}
    """

    def __init__(self, shaping: ShapingFunction, nbr: NeighborhoodTable):
        self.shaping = shaping
        self.nbr = nbr
        self.lower, self.upper = shaping.default_bounds(nbr.sizes)

    def _field(self, x: np.ndarray) -> DesignField:
        return DesignField(values=x, shaping=self.shaping, lower=self.lower, upper=self.upper)

    def initial(self, volume_fraction: float) -> np.ndarray:
        return initial_design(self.shaping, volume_fraction, self.lower, self.upper)

    def density(self, x, iteration):
        return evaluate_density(self._field(x), self.nbr)

    def backpropagate(self, x, rho, df_drho, iteration):
        return backpropagate(df_drho, rho, self._field(x), self.nbr)


class ProjectionDesignMap(DesignMap):
    """
    投影基线参数化：ρ_i = 1 - exp(-β_H Σ w_ij μ_j)，β_H 按延拓策略增长
    """

    def __init__(self, nbr: NeighborhoodTable, schedule: ContinuationSchedule):
        self.nbr = nbr
        self.schedule = schedule
        self.lower = np.zeros(nbr.n_elements)
        self.upper = np.ones(nbr.n_elements)

    def _field(self, x, iteration) -> ProjectionField:
        return ProjectionField(values=x, beta_h=self.schedule(iteration),
                               full_form=self.schedule.settings.full_form)

    def initial(self, volume_fraction: float) -> np.ndarray:
        beta_h = self.schedule(0)
        value = -np.log1p(-volume_fraction) / beta_h if beta_h > 0 else 1.0
        return np.full(self.nbr.n_elements, float(np.clip(value, 0.0, 1.0)))

    def density(self, x, iteration):
        return projection_density(self._field(x, iteration), self.nbr)

    def backpropagate(self, x, rho, df_drho, iteration):
        return projection_backpropagate(df_drho, rho, self._field(x, iteration), self.nbr)

    def sharpness(self, iteration):
        return self.schedule(iteration)


def initial_design(shaping: ShapingFunction, volume_fraction: float,
                   lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """
    均匀 β₀，满足 1 - f(β₀) = v_f，并截断到上下界
    """
    if not 0.0 < volume_fraction < 1.0:
        raise InvalidArgumentError(f"体积分数必须在 (0, 1) 内: {volume_fraction}")
    beta0 = shaping.inverse(1.0 - volume_fraction)
    return np.clip(np.full(np.shape(lower), beta0), lower, upper)


@dataclass
class Evaluation:
    """
    一次完整求值（密度 → 求解 → 目标/约束 → 回传）的结果
    """

    rho: DensityField
    f0: float
    df0: np.ndarray
    g1: float
    dg1: np.ndarray
    grayness: float
    mse_se: Optional[float] = None


class Evaluator:
    """
    给定问题的设计求值器
    """

    def __init__(self, problem: ProblemSpec, nbr: Optional[NeighborhoodTable] = None):
        self.problem = problem
        self.nbr = nbr or build_neighborhoods(problem.mesh, problem.neighborhood)
        if problem.method == "projection":
            self.design_map: DesignMap = ProjectionDesignMap(self.nbr, ContinuationSchedule(problem.projection))
        else:
            self.design_map = NfpDesignMap(problem.shaping, self.nbr)

    def __call__(self, x: np.ndarray, iteration: int = 0) -> Evaluation:
        problem = self.problem
        rho = self.design_map.density(x, iteration)
        state = assemble_and_solve(problem.mesh, rho, problem.material, problem.loads)
        f0, df0_drho = objective_and_sens(state, rho, problem.mesh, problem.material, problem.objective)
        g1, dg1_drho = volume_constraint_and_sens(rho, problem.mesh, problem.objective)
        df0 = self.design_map.backpropagate(x, rho, df0_drho, iteration)
        dg1 = self.design_map.backpropagate(x, rho, dg1_drho, iteration)
        ratio = mechanism_ratio(state) if problem.objective.kind == "compliant" else None
        return Evaluation(rho=rho, f0=f0, df0=df0, g1=g1, dg1=dg1, grayness=grayness(rho), mse_se=ratio)


def run(problem: ProblemSpec, callback: Optional[Callable[[IterationRecord], None]] = None) -> OptimizationTrace:
    """
    优化主循环：密度 → 求解 → 目标与灵敏度 → 回传 → MMA → 步长阻尼
    终止条件：达到 max_iter、窗口内 |Δf0| < tol_fun、或 g(ρ) ≤ g_tol
    """
    evaluator = Evaluator(problem)
    design_map = evaluator.design_map
    stopping = problem.stopping
    mma = MmaState.from_settings(problem.optimizer)
    trace = OptimizationTrace(problem_name=problem.name, milestones={g: None for g in problem.milestones})

    logger.info(
        f"开始优化 {problem.name}: {problem.mesh!r}, 邻域 {evaluator.nbr.shape}, 形函数 {problem.shaping}, "
        f"方法 {problem.method}, v_f={problem.objective.volume_fraction}, S={problem.optimizer.step}"
    )

    x = design_map.initial(problem.objective.volume_fraction)
    iteration = 0
    try:
        evaluation = evaluator(x, iteration)
    except TopOptError as e:
        raise OptimizationError(str(e), iteration, e) from e
    _record(trace, problem, design_map, iteration, x, evaluation, callback)

    while iteration < stopping.max_iter:
        iteration += 1
        try:
            candidate = mma_step(x, evaluation.f0, evaluation.df0, evaluation.g1, evaluation.dg1,
                                 design_map.lower, design_map.upper, mma)
            x = apply_step_damping(x, candidate, problem.optimizer.step, design_map.lower, design_map.upper)
            evaluation = evaluator(x, iteration)
        except TopOptError as e:
            raise OptimizationError(str(e), iteration, e) from e
        _record(trace, problem, design_map, iteration, x, evaluation, callback)

        if stopping.g_tol is not None and evaluation.grayness <= stopping.g_tol:
            trace.stop_reason = "grayness"
            break
        if stopping.tol_fun is not None and _objective_stalled(trace, stopping.window, stopping.tol_fun):
            trace.stop_reason = "tol_fun"
            break
    else:
        trace.stop_reason = "max_iter"

    trace.final_design = x.copy()
    trace.final_density = evaluation.rho.values.copy()
    trace.snapshots[iteration] = trace.final_density
    trace.design_snapshots[iteration] = trace.final_design
    final = trace.final
    logger.info(
        f"优化结束 {problem.name}: 原因 {trace.stop_reason}, 迭代 {final.iteration}, "
        f"f0={final.f0:.6g}, g1={final.g1:.3e}, 灰度={final.grayness:.4f}"
    )
    return trace


def _record(trace: OptimizationTrace, problem: ProblemSpec, design_map: DesignMap, iteration: int,
            x: np.ndarray, evaluation: Evaluation, callback):
    record = IterationRecord(
        iteration=iteration,
        f0=evaluation.f0,
        g1=evaluation.g1,
        grayness=evaluation.grayness,
        mse_se=evaluation.mse_se,
        beta_h=design_map.sharpness(iteration),
    )
    trace.records.append(record)

    for target, reached in trace.milestones.items():
        if reached is None and evaluation.grayness <= target:
            trace.milestones[target] = iteration
            logger.info(f"{problem.name}: 第 {iteration} 次迭代灰度 {evaluation.grayness:.4f} ≤ {target}")

    if problem.snapshot_every and iteration % problem.snapshot_every == 0:
        trace.snapshots[iteration] = evaluation.rho.values.copy()
        trace.design_snapshots[iteration] = x.copy()

    message = (
        f"{problem.name} 迭代 {iteration:5d}: f0={evaluation.f0:.6e}, g1={evaluation.g1:+.3e}, "
        f"灰度={evaluation.grayness:.4f}"
    )
    if iteration % settings.LOG_EVERY == 0:
        logger.info(message)
    else:
        logger.debug(message)

    if callback is not None:
        callback(record)


def _objective_stalled(trace: OptimizationTrace, window: int, tol_fun: float) -> bool:
    """
    最近 window 次迭代的目标变化均小于 tol_fun
    """
    if len(trace.records) <= window:
        return False
    recent = np.array([record.f0 for record in trace.records[-(window + 1):]])
    return bool(np.max(np.abs(np.diff(recent))) < tol_fun)
