"""
ShadowLab - 流的伪轨道追踪实验工具

ShadowLab 在三维向量场上构造有限 (δ,T)-链，并在 weak / normal / strong 三类
时间重参数化下判定它们能否被真实轨道 ε-追踪；配套提供奇异截面、不稳定分支路标、
单侧/双侧点分类与截面扩张测量，用于复现 Lorenz 型奇点导致追踪性质失效的机制。
"""

__version__ = "0.1.0"
__author__ = "ShadowLab Team"

from .errors import (
    ConfigurationError,
    InconclusiveError,
    NumericalError,
    ShadowLabError,
    StageError,
    exit_code_for,
)
from .flow import Tolerance, Trajectory, VectorFieldSpec, flow_map, integrate
from .models import LorenzMapOracle, make_model
from .chains import FiniteChain, chain_eval, validate_chain
from .tracing import (
    Reparametrization,
    TraceClass,
    TraceVerdict,
    align_normal,
    align_strong,
    align_weak,
    verify_trace,
)
from .geometry import branch_landmarks, build_singular_sections, classify_side, sample_attractor
from .hyperbolicity import orbit_hyperbolicity, sectional_growth
from .config import (
    ConfigManager,
    ExperimentConfig,
    ShadowLabConfig,
    get_current_config,
    get_recipe,
    load_config,
    save_config,
    update_config,
)
from .core.reports import ExperimentReport, load_report, recheck_report
from .core.plotting import emit_plot_data
from .core.experiment import run_experiment

__all__ = [
    # 错误
    "ShadowLabError",
    "ConfigurationError",
    "NumericalError",
    "InconclusiveError",
    "StageError",
    "exit_code_for",

    # 流与模型
    "VectorFieldSpec",
    "Trajectory",
    "Tolerance",
    "integrate",
    "flow_map",
    "make_model",
    "LorenzMapOracle",

    # 链与追踪
    "FiniteChain",
    "chain_eval",
    "validate_chain",
    "Reparametrization",
    "TraceClass",
    "TraceVerdict",
    "align_weak",
    "align_normal",
    "align_strong",
    "verify_trace",

    # 几何与双曲性
    "sample_attractor",
    "classify_side",
    "build_singular_sections",
    "branch_landmarks",
    "sectional_growth",
    "orbit_hyperbolicity",

    # 配置
    "ConfigManager",
    "ShadowLabConfig",
    "ExperimentConfig",
    "load_config",
    "save_config",
    "get_current_config",
    "update_config",
    "get_recipe",

    # 实验与报告
    "run_experiment",
    "ExperimentReport",
    "load_report",
    "recheck_report",
    "emit_plot_data",
]
