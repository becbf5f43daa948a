"""
双曲性与截面双曲性的有限时间估计

沿轨道分段求基本解矩阵，按 renorm 间隔做 QR 重正交化并累计对数增长。
这些量是一致常数 K、λ 的有限时间替代，只报告速率与间隙，不作集合层面的断言。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ..errors import DomainError, FrameCollapseError
from ..flow.field import VectorFieldSpec
from ..flow.frames import COLLAPSE_THRESHOLD, fundamental_matrix
from ..flow.integrator import Tolerance, Trajectory, integrate
from ..geometry.stable import estimate_stable_direction

# 默认重正交化间隔
DEFAULT_RENORM = 0.5


def two_norm(u: Sequence[float], v: Sequence[float]) -> float:
    """
    2-范数 ||u, v|| = sqrt(<u,u><v,v> − <u,v>²)

    即 u、v 张成的平行四边形面积，在 ℝ³ 中等于 |u×v|。
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    value = float(np.dot(u, u) * np.dot(v, v) - np.dot(u, v) ** 2)
    return float(np.sqrt(max(value, 0.0)))


@dataclass(eq=False)
class GrowthReport:
    """
    增长率报告

    Attributes:
        x: 基点
        horizon: 时间窗口
        renorm: 重正交化间隔
        log_rates: 三个对数增长率（降序，1/时间）
        area_rate: 中心 2-平面的面积对数增长率
        stable_rate: 稳定方向的对数增长率
        flow_rate: 流方向 X(x) 的对数增长率
        domination_gap: 各步中心增长与稳定增长之差的最小值
        profile: 每步的 (中心 − 稳定) 对数增长率
        stable_converged: 稳定方向估计是否收敛
    """

    x: np.ndarray
    horizon: float
    renorm: float
    log_rates: np.ndarray
    area_rate: float = float("nan")
    stable_rate: float = float("nan")
    flow_rate: float = float("nan")
    domination_gap: float = float("nan")
    profile: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stable_converged: bool = True

    def to_dict(self) -> Dict[str, Any]:
        def num(v: float) -> Optional[float]:
            return float(v) if np.isfinite(v) else None

        return {
            "x": [float(v) for v in self.x],
            "horizon": float(self.horizon),
            "renorm": float(self.renorm),
            "log_rates": [float(v) for v in self.log_rates],
            "area_rate": num(self.area_rate),
            "stable_rate": num(self.stable_rate),
            "flow_rate": num(self.flow_rate),
            "domination_gap": num(self.domination_gap),
            "profile": [float(v) for v in self.profile],
            "stable_converged": bool(self.stable_converged),
        }


def _chunks(horizon: float, renorm: float) -> np.ndarray:
    if horizon <= 0 or renorm <= 0:
        raise ValueError(f"horizon 与 renorm 必须为正: {horizon}, {renorm}")
    n = max(1, int(np.ceil(horizon / renorm - 1e-12)))
    return np.linspace(0.0, horizon, n + 1)


def _step_matrices(spec: VectorFieldSpec, traj: Trajectory, edges: np.ndarray, tol: Optional[Tolerance]):
    for t0, t1 in zip(edges[:-1], edges[1:]):
        yield t1 - t0, fundamental_matrix(spec, traj, t0, t1, tol)[0]


def qr_growth(
    spec: VectorFieldSpec,
    traj: Trajectory,
    initial: np.ndarray,
    renorm: float = DEFAULT_RENORM,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """
    每步 QR 重正交化的对数增长

    Args:
        initial: (3, k) 初始标架（按列）

    Returns:
        (steps, k) 每步 log|R_ii|；前 j 列之和等于前 j 列张成体积的对数增长
    """
    Q, _ = np.linalg.qr(np.asarray(initial, dtype=float))
    logs = []
    for _, phi in _step_matrices(spec, traj, _chunks(traj.T, renorm), tol):
        Q, R = np.linalg.qr(phi @ Q)
        diag = np.abs(np.diag(R))
        if np.any(diag <= 0):
            raise FrameCollapseError("QR 重正交化时标架退化", time=float(traj.T))
        logs.append(np.log(diag))
    return np.asarray(logs)


def lyapunov_spectrum(
    spec: VectorFieldSpec,
    x: Sequence[float],
    horizon: float,
    renorm: float = DEFAULT_RENORM,
    tol: Optional[Tolerance] = None,
    traj: Optional[Trajectory] = None,
) -> np.ndarray:
    """
    QR 法有限时间 Lyapunov 指数

    Returns:
        三个指数，降序
    """
    traj = traj or integrate(spec, x, horizon, tol)
    logs = qr_growth(spec, traj, np.eye(3), renorm, tol)
    return np.sort(logs.sum(axis=0) / traj.T)[::-1]


def frame_growth(
    spec: VectorFieldSpec,
    x: Sequence[float],
    u: Sequence[float],
    v: Sequence[float],
    horizon: float,
    renorm: float = DEFAULT_RENORM,
    tol: Optional[Tolerance] = None,
) -> float:
    """
    2-标架 (u, v) 的面积对数增长率

    Raises:
        ValueError: u、v 线性相关
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if two_norm(u, v) < COLLAPSE_THRESHOLD * np.linalg.norm(u) * np.linalg.norm(v):
        raise ValueError("u 与 v 线性相关")
    traj = integrate(spec, x, horizon, tol)
    logs = qr_growth(spec, traj, np.column_stack([u, v]), renorm, tol)
    return float(logs.sum() / traj.T)


def central_plane(spec: VectorFieldSpec, x: np.ndarray, stable: np.ndarray) -> np.ndarray:
    """
    与稳定方向正交的 2-平面的标准正交基 (3, 2)

    第一列取 X(x) 在该平面内的投影方向（X(x) 为零或与稳定方向平行时任取）。
    """
    s = stable / np.linalg.norm(stable)
    flow = spec.eval(x)
    first = flow - np.dot(flow, s) * s
    if np.linalg.norm(first) < 1e-12:
        first = np.cross(s, np.eye(3)[int(np.argmin(np.abs(s)))])
    first = first / np.linalg.norm(first)
    second = np.cross(s, first)
    return np.column_stack([first, second / np.linalg.norm(second)])


def domination_profile(
    spec: VectorFieldSpec,
    traj: Trajectory,
    plane: np.ndarray,
    stable: np.ndarray,
    renorm: float = DEFAULT_RENORM,
    tol: Optional[Tolerance] = None,
) -> Dict[str, np.ndarray]:
    """
    逐步的中心增长与稳定增长

    中心 2-平面与其法向组成 3-标架做 QR；稳定方向单独传播并归一化。

    Returns:
        {"logs": (steps, 3) QR 对数增长, "stable": (steps,) 稳定方向对数增长,
         "dt": (steps,) 步长, "profile": (steps,) (min 中心 − 稳定)/dt}
    """
    normal = np.cross(plane[:, 0], plane[:, 1])
    Q = np.column_stack([plane, normal])
    s = stable / np.linalg.norm(stable)
    logs, stable_logs, dts = [], [], []
    for dt, phi in _step_matrices(spec, traj, _chunks(traj.T, renorm), tol):
        Q, R = np.linalg.qr(phi @ Q)
        diag = np.abs(np.diag(R))
        if diag[1] <= COLLAPSE_THRESHOLD * diag[0]:
            raise FrameCollapseError(f"中心标架在重正交化后仍然退化（比值 {diag[1] / diag[0]:.3g}）", time=float(traj.T))
        s = phi @ s
        norm = np.linalg.norm(s)
        s = s / norm
        logs.append(np.log(diag))
        stable_logs.append(np.log(norm))
        dts.append(dt)
    logs = np.asarray(logs)
    stable_logs = np.asarray(stable_logs)
    dts = np.asarray(dts)
    profile = (np.minimum(logs[:, 0], logs[:, 1]) - stable_logs) / dts
    return {"logs": logs, "stable": stable_logs, "dt": dts, "profile": profile}


def sectional_growth(
    spec: VectorFieldSpec,
    x: Sequence[float],
    horizon: float,
    renorm: float = DEFAULT_RENORM,
    stable_horizon: float = 1.0,
    tol: Optional[Tolerance] = None,
    stable_direction: Optional[Sequence[float]] = None,
) -> GrowthReport:
    """
    截面扩张测量

    在 x 处取与稳定方向估计正交的 2-平面，传播并累计面积增长；
    同时传播稳定方向，报告速率与支配间隙。

    Args:
        spec: 向量场
        x: 基点
        horizon: 时间窗口
        renorm: 重正交化间隔
        stable_horizon: 稳定方向估计的窗口
        tol: 积分误差目标
        stable_direction: 已知的稳定方向（跳过估计）

    Returns:
        GrowthReport，log_rates 为中心 2-平面与法向 3-标架的 QR 速率（降序）

    Raises:
        FrameCollapseError: 重正交化后中心标架仍然退化
    """
    x = np.asarray(x, dtype=float)
    converged = True
    if stable_direction is None:
        estimate = estimate_stable_direction(spec, x, stable_horizon, tol)
        stable = estimate.direction
        converged = estimate.converged
    else:
        stable = np.asarray(stable_direction, dtype=float)
    traj = integrate(spec, x, horizon, tol)
    plane = central_plane(spec, x, stable)
    result = domination_profile(spec, traj, plane, stable, renorm, tol)
    totals = result["logs"].sum(axis=0) / traj.T
    flow0, flow1 = spec.speed(x), spec.speed(traj.endpoint)
    flow_rate = float(np.log(flow1 / flow0) / traj.T) if flow0 > 0 and flow1 > 0 else float("nan")
    report = GrowthReport(
        x=x,
        horizon=float(traj.T),
        renorm=float(renorm),
        log_rates=np.sort(totals)[::-1],
        area_rate=float(totals[0] + totals[1]),
        stable_rate=float(result["stable"].sum() / traj.T),
        flow_rate=flow_rate,
        domination_gap=float(np.min(result["profile"])),
        profile=result["profile"],
        stable_converged=converged,
    )
    logger.debug(
        f"截面增长 x={x}: 面积速率 {report.area_rate:.4g}, 稳定速率 {report.stable_rate:.4g}, "
        f"支配间隙 {report.domination_gap:.4g}"
    )
    return report


def orbit_hyperbolicity(
    spec: VectorFieldSpec,
    x: Sequence[float],
    horizon: float,
    renorm: float = DEFAULT_RENORM,
    avoid_radius: float = 1.0,
    tol: Optional[Tolerance] = None,
) -> GrowthReport:
    """
    无奇点轨道段的双曲性测量

    Args:
        spec: 向量场
        x: 段起点
        horizon: 时间窗口
        renorm: 重正交化间隔
        avoid_radius: 轨道段与每个奇点的最小距离要求
        tol: 积分误差目标

    Returns:
        GrowthReport，log_rates 为 Lyapunov 指数，flow_rate 为流方向增长率

    Raises:
        DomainError: 轨道段进入某个奇点的 avoid_radius 邻域
    """
    x = np.asarray(x, dtype=float)
    traj = integrate(spec, x, horizon, tol)
    for q in spec.singularities:
        closest = float(np.min(np.linalg.norm(traj.states - q, axis=1)))
        if closest < avoid_radius:
            raise DomainError(f"轨道段进入奇点 {np.round(q, 6).tolist()} 的 {avoid_radius} 邻域（最近 {closest:.4g}）")
    rates = lyapunov_spectrum(spec, x, horizon, renorm, tol, traj=traj)
    flow0, flow1 = spec.speed(x), spec.speed(traj.endpoint)
    return GrowthReport(
        x=x,
        horizon=float(traj.T),
        renorm=float(renorm),
        log_rates=rates,
        flow_rate=float(np.log(flow1 / flow0) / traj.T),
    )


def growth_survey(
    spec: VectorFieldSpec,
    points: Sequence[Sequence[float]],
    horizon: float,
    renorm: float = DEFAULT_RENORM,
    tol: Optional[Tolerance] = None,
) -> List[GrowthReport]:
    """在多个点上运行截面扩张测量"""
    reports = [sectional_growth(spec, p, horizon, renorm, tol=tol) for p in np.atleast_2d(points)]
    positive = sum(r.area_rate > 0 and r.domination_gap > 0 for r in reports)
    logger.info(f"截面扩张测量: {positive}/{len(reports)} 个点面积速率与支配间隙均为正")
    return reports
