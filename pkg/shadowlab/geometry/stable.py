"""
稳定方向估计

有限时间反向扩张：沿 x 出发的正向轨道，从终点反向积分变分方程，
DX_{−h} 在 x 处的主导左奇异向量即为最强收缩方向的估计。
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp

from ..errors import NumericalError
from ..flow.field import VectorFieldSpec
from ..flow.integrator import Tolerance, integrate

# 主导奇异值与次奇异值之比低于该值视为无主导方向
MIN_CONTRAST = 1.0 + 1e-6


@dataclass(frozen=True, eq=False)
class StableDirection:
    """稳定方向估计结果"""

    direction: np.ndarray
    horizon: float
    contrast: float
    angle_change_deg: float
    converged: bool

    @property
    def inconclusive(self) -> bool:
        return not self.converged


def backward_expansion(
    spec: VectorFieldSpec,
    x: np.ndarray,
    horizon: float,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """
    DX_{−h}：从 X_h(x) 处的切空间映回 x 处的切空间

    Returns:
        3×3 矩阵
    """
    traj = integrate(spec, x, horizon, tol)
    tol = traj.tolerance

    def rhs(s: float, psi: np.ndarray) -> np.ndarray:
        y = traj.flow_at(max(horizon - s, 0.0))
        return (-spec.jacobian(y) @ psi.reshape(3, 3)).ravel()

    sol = solve_ivp(
        rhs, (0.0, horizon), np.eye(3).ravel(), method="DOP853", rtol=tol.rtol, atol=tol.atol
    )
    if not sol.success:
        raise NumericalError(f"反向变分方程积分失败: {sol.message}")
    return sol.y[:, -1].reshape(3, 3)


def _dominant(psi: np.ndarray) -> tuple:
    u, s, _ = np.linalg.svd(psi)
    direction = u[:, 0]
    pivot = direction[np.argmax(np.abs(direction))]
    direction = direction * math.copysign(1.0, pivot)
    contrast = s[0] / s[1] if s[1] > 0 else math.inf
    return direction, float(contrast)


def line_angle_deg(u: np.ndarray, v: np.ndarray) -> float:
    """两条直线（不计方向）的夹角，单位度"""
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, c)))


def estimate_stable_direction(
    spec: VectorFieldSpec,
    x: np.ndarray,
    horizon: float = 1.0,
    tol: Optional[Tolerance] = None,
    max_angle_deg: float = 1.0,
) -> StableDirection:
    """
    估计 x 处的稳定方向

    以 horizon 与 2·horizon 两次估计的夹角判断收敛。

    Args:
        spec: 向量场
        x: 状态
        horizon: 有限时间窗口
        tol: 积分误差目标
        max_angle_deg: 收敛判据

    Returns:
        StableDirection；对比度不足或未收敛时 converged=False
    """
    if horizon <= 0:
        raise ValueError(f"horizon 必须为正: {horizon}")
    x = np.asarray(x, dtype=float)
    d1, c1 = _dominant(backward_expansion(spec, x, horizon, tol))
    d2, c2 = _dominant(backward_expansion(spec, x, 2.0 * horizon, tol))
    angle = line_angle_deg(d1, d2)
    converged = min(c1, c2) >= MIN_CONTRAST and angle <= max_angle_deg
    if not converged:
        logger.debug(f"稳定方向未收敛: x={x}, 对比度={min(c1, c2):.6g}, 夹角={angle:.3g}°")
    return StableDirection(
        direction=d2,
        horizon=2.0 * horizon,
        contrast=c2,
        angle_change_deg=angle,
        converged=bool(converged),
    )
