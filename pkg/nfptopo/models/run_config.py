"""
运行配置模型
对应扁平 key=value 配置文件中的每个键；未知键直接拒绝
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

STUDY_KINDS = ("mesh_independence", "vf_ls_sweep", "function_choice", "step_size", "projection_compare")


def _split_list(value):
    """
    逗号分隔的字符串 → 列表
    """
    if value is None or isinstance(value, (list, tuple)):
        return value
    text = str(value).strip()
    if not text:
        return None
    return [item.strip() for item in text.split(",") if item.strip()]


class RunConfig(BaseModel):
    """
    单次优化运行配置
    取值为 None 的项在解析时由预设问题的默认值补全
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    # 预设问题名
    preset: str

    # 网格单元数
    nx: Optional[int] = Field(None, ge=1)
    ny: Optional[int] = Field(None, ge=1)
    nz: Optional[int] = Field(None, ge=1)

    # 计算域物理尺寸（默认单元边长为 1）
    lx: Optional[float] = Field(None, gt=0)
    ly: Optional[float] = Field(None, gt=0)
    lz: Optional[float] = Field(None, gt=0)

    # 体积分数与邻域
    vf: Optional[float] = Field(None, gt=0, lt=1)
    neighborhood: Optional[Literal["square", "circle", "immediate"]] = None
    ls: Optional[int] = Field(None, ge=0)
    rmin: Optional[float] = Field(None, gt=0)

    # 形函数
    function: Literal["exp", "tanh", "power", "atan"] = "exp"
    power_n: int = Field(12, ge=1)

    # 材料常数
    E: float = Field(2.0e4, gt=0)
    nu: float = Field(0.3, ge=0, lt=0.5)
    eta: float = Field(3.0, ge=1)
    rho_min: float = Field(1.0e-4, gt=0, lt=0.1)

    # 目标缩放系数 μ_s / μ_CM 与输出弹簧刚度
    mu: Optional[float] = Field(None, gt=0)
    spring: Optional[float] = Field(None, ge=0)

    # 优化器
    step: float = Field(0.005, gt=0, le=1)
    max_iter: int = Field(2000, ge=1)
    g_tol: Optional[float] = Field(None, gt=0, lt=1)
    tol_fun: Optional[float] = Field(1.0e-10, ge=0)
    move_limit: float = Field(0.5, gt=0, le=1)

    # 参数化方式与投影延拓上限
    method: Literal["nfp", "projection"] = "nfp"
    beta_max: float = Field(512.0, ge=0)

    # 输出
    output_dir: Optional[str] = None
    snapshot_every: Optional[int] = Field(None, ge=0)


class StudyConfig(RunConfig):
    """
    对比研究配置：在 RunConfig 的基础上增加研究类型与变量列表
    refinements 形如 100x50:2,140x70:3
    """

    study: Literal["mesh_independence", "vf_ls_sweep", "function_choice", "step_size", "projection_compare"]
    refinements: Optional[List[str]] = None
    g_tols: Optional[List[float]] = None
    steps: Optional[List[float]] = None
    functions: Optional[List[Literal["exp", "tanh", "power", "atan"]]] = None
    vf_values: Optional[List[float]] = None
    ls_values: Optional[List[int]] = None
    projection_step: float = Field(1.0, gt=0, le=1)

    @field_validator("refinements", "g_tols", "steps", "functions", "vf_values", "ls_values", mode="before")
    @classmethod
    def _parse_list(cls, value):
        return _split_list(value)

    @field_validator("refinements")
    @classmethod
    def _check_refinements(cls, value):
        if value is None:
            return value
        for item in value:
            parse_refinement(item)
        return value

    @field_validator("g_tols")
    @classmethod
    def _check_g_tols(cls, value):
        if value is not None and any(not 0 < g < 1 for g in value):
            raise ValueError("g_tols 中的每一项都必须在 (0, 1) 内")
        return value

    @field_validator("steps")
    @classmethod
    def _check_steps(cls, value):
        if value is not None and any(not 0 < s <= 1 for s in value):
            raise ValueError("steps 中的每一项都必须在 (0, 1] 内")
        return value

    @field_validator("vf_values")
    @classmethod
    def _check_vf_values(cls, value):
        if value is not None and any(not 0 < v < 1 for v in value):
            raise ValueError("vf_values 中的每一项都必须在 (0, 1) 内")
        return value


def parse_refinement(text: str) -> Tuple[Tuple[int, ...], int]:
    """
    解析 "NXxNY[xNZ]:ls" → ((nx, ny[, nz]), ls)
    """
    try:
        counts_text, ls_text = text.split(":")
        counts = tuple(int(part) for part in counts_text.lower().split("x"))
        ls = int(ls_text)
    except ValueError:
        raise ValueError(f"无法解析的网格加密项: {text!r}，应形如 100x50:2")
    if len(counts) not in (2, 3) or any(c < 1 for c in counts) or ls < 0:
        raise ValueError(f"网格加密项不合法: {text!r}")
    return counts, ls
