"""
切标架传播

沿轨道积分变分方程 v' = J(x(t))·v，得到 DX_t(x)v。
先求基本解矩阵 Φ(t)（Φ(0)=I），标架向量取 Φ(t)·v0，
因而对初始向量严格线性。
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import DomainError, FrameCollapseError, NumericalError
from .field import VectorFieldSpec
from .integrator import Tolerance, Trajectory

# 标架退化阈值：|v1×v2| / (|v1||v2|)
COLLAPSE_THRESHOLD = 1e-10


def fundamental_matrix(
    spec: VectorFieldSpec,
    traj: Trajectory,
    t0: float = 0.0,
    t1: Optional[float] = None,
    tol: Optional[Tolerance] = None,
    t_eval: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    求 [t0, t1] 上的基本解矩阵

    Args:
        spec: 向量场
        traj: 基轨道
        t0: 起始时间
        t1: 终止时间，默认 traj.T
        tol: 误差目标，默认沿用轨道的误差目标
        t_eval: 输出时间（相对 t0），默认只输出终点

    Returns:
        形状 (len(t_eval), 3, 3) 的 Φ(t0 + s) 序列
    """
    tol = tol or traj.tolerance
    t1 = traj.T if t1 is None else t1
    if not 0.0 <= t0 <= t1 <= traj.T + 1e-12 * max(1.0, traj.T):
        raise DomainError(f"非法区间 [{t0}, {t1}]，轨道长度 {traj.T}")
    span = t1 - t0
    t_eval = np.array([span]) if t_eval is None else np.asarray(t_eval, dtype=float)
    if span == 0.0:
        return np.repeat(np.eye(3)[None], len(t_eval), axis=0)

    def rhs(s: float, phi: np.ndarray) -> np.ndarray:
        x = traj.flow_at(min(t0 + s, traj.T))
        return (spec.jacobian(x) @ phi.reshape(3, 3)).ravel()

    sol = solve_ivp(
        rhs,
        (0.0, span),
        np.eye(3).ravel(),
        method="DOP853",
        rtol=tol.rtol,
        atol=tol.atol,
        t_eval=np.clip(t_eval, 0.0, span),
    )
    if not sol.success:
        raise NumericalError(f"变分方程积分失败: {sol.message}")
    out = sol.y.T.reshape(-1, 3, 3)
    out[t_eval == 0.0] = np.eye(3)
    return out


@dataclass(frozen=True, eq=False)
class TangentFrame:
    """
    沿轨道传播的 k 个切向量

    Attributes:
        trajectory: 基轨道
        initial: (k, 3) 初始向量
        times: 轨道节点时间
        vectors: (len(times), k, 3) 各节点的传播向量
    """

    trajectory: Trajectory
    initial: np.ndarray
    times: np.ndarray
    vectors: np.ndarray

    @property
    def k(self) -> int:
        return int(self.initial.shape[0])

    def final(self) -> np.ndarray:
        return self.vectors[-1].copy()


def propagate_frame(
    spec: VectorFieldSpec,
    traj: Trajectory,
    initial_vectors: np.ndarray,
    tol: Optional[Tolerance] = None,
    check_collapse: bool = True,
) -> TangentFrame:
    """
    传播切标架

    Args:
        spec: 向量场
        traj: 基轨道
        initial_vectors: (k, 3) 或 (3,) 初始向量，k ∈ {1, 2}
        tol: 误差目标
        check_collapse: k=2 时检查标架是否退化

    Returns:
        TangentFrame

    Raises:
        ValueError: k 不是 1 或 2，或 k=2 时初始向量线性相关
        FrameCollapseError: 传播后两向量接近平行，调用方需要重新正交化
    """
    initial = np.atleast_2d(np.asarray(initial_vectors, dtype=float))
    k = initial.shape[0]
    if k not in (1, 2) or initial.shape[1] != 3:
        raise ValueError(f"标架必须是 1 或 2 个三维向量，得到形状 {initial.shape}")
    if k == 2 and _collapse_ratio(initial[0], initial[1]) < COLLAPSE_THRESHOLD:
        raise ValueError("初始向量线性相关")

    phis = fundamental_matrix(spec, traj, tol=tol, t_eval=traj.times)
    vectors = np.einsum("nij,kj->nki", phis, initial)
    vectors[0] = initial

    if k == 2 and check_collapse:
        for t, (u, v) in zip(traj.times, vectors):
            if _collapse_ratio(u, v) < COLLAPSE_THRESHOLD:
                raise FrameCollapseError(f"标架在 t={t:.6g} 处退化", time=float(t))

    return TangentFrame(trajectory=traj, initial=initial, times=traj.times.copy(), vectors=vectors)


def _collapse_ratio(u: np.ndarray, v: np.ndarray) -> float:
    denom = np.linalg.norm(u) * np.linalg.norm(v)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(np.cross(u, v)) / denom)
