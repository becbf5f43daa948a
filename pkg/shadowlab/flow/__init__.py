"""
流核心模块

积分轨道、求流映射 X_t 以及沿轨道传播微分 DX_t。
"""

from .field import VectorFieldSpec, jacobian_check, singularity_residuals
from .frames import TangentFrame, fundamental_matrix, propagate_frame
from .integrator import (
    DEFAULT_TOLERANCE,
    Tolerance,
    Trajectory,
    flow_at,
    flow_map,
    integrate,
    orbit_window,
    step_doubling_error,
)

__all__ = [
    # 类型
    "VectorFieldSpec",
    "Trajectory",
    "TangentFrame",
    "Tolerance",
    "DEFAULT_TOLERANCE",

    # 流
    "integrate",
    "flow_at",
    "flow_map",
    "orbit_window",
    "step_doubling_error",

    # 切映射
    "propagate_frame",
    "fundamental_matrix",

    # 校验
    "jacobian_check",
    "singularity_residuals",
]
