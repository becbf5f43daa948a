"""
不稳定分支与路标点

从 σ 沿 ±v_u 追踪 W^l_γ、W^r_γ，在弧长 2β_σ 处取路标 y^l_σ、y^r_σ，
β_σ 在分离条件下二分取最大，并对截面出发的轨道做蒙特卡洛认证。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from ..errors import ConfigurationError, EscapedError, GeometryError
from ..flow.field import VectorFieldSpec
from ..flow.integrator import Tolerance, Trajectory, integrate
from ..models.catalog import lorenz_like_frame
from .sections import (
    SingularSectionPair,
    branch_sign,
    first_entry_time,
    first_exit_time,
)


@dataclass(eq=False)
class BranchCurve:
    """
    一条局部不稳定分支 W^{l,r}_γ

    Attributes:
        name: "l" 或 "r"
        trajectory: 从 σ ± seed·v_u 出发的轨道
        exit_time: 离开 B_γ(σ) 的时间
        times: 采样时间
        points: 采样点
        arclength: 采样点处的累计弧长（从种子点起算）
    """

    name: str
    trajectory: Trajectory
    exit_time: float
    times: np.ndarray
    points: np.ndarray
    arclength: np.ndarray

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def time_at_arclength(self, s: float) -> float:
        """累计弧长为 s 的轨道时间"""
        if not 0.0 <= s <= self.length:
            raise ValueError(f"弧长 {s} 超出分支长度 {self.length}")
        return float(np.interp(s, self.arclength, self.times))

    def point_at_arclength(self, s: float) -> np.ndarray:
        return self.trajectory.flow_at(self.time_at_arclength(s))

    def time_at_radius(self, sigma: np.ndarray, radius: float) -> Optional[float]:
        """分支第一次到达距 σ 为 radius 的时间"""
        return first_exit_time(self.trajectory, sigma, radius)


@dataclass(eq=False)
class UnstableBranches:
    """
    不稳定分支与路标

    Attributes:
        sigma: 奇点
        gamma: 局部分支半径（可能已自动缩小）
        left: W^l_γ
        right: W^r_γ
        beta: 分离半径 β_σ
        y_left: 路标 y^l_σ
        y_right: 路标 y^r_σ
        seed_offset: 分支种子点到 σ 的距离
        gamma_shrinks: γ 被缩小的次数
        certificate: 条件 (1)–(3) 的检查结果
    """

    sigma: np.ndarray
    gamma: float
    left: BranchCurve
    right: BranchCurve
    beta: float = 0.0
    y_left: Optional[np.ndarray] = None
    y_right: Optional[np.ndarray] = None
    seed_offset: float = 1e-8
    gamma_shrinks: int = 0
    certificate: Dict[str, Any] = field(default_factory=dict)

    def branch(self, name: str) -> BranchCurve:
        return self.left if branch_sign(name) < 0 else self.right

    def landmark(self, name: str) -> np.ndarray:
        y = self.y_left if branch_sign(name) < 0 else self.y_right
        if y is None:
            raise GeometryError("路标尚未计算", point=self.sigma)
        return y

    def landmark_time(self, name: str) -> float:
        """分支轨道到达路标的时间"""
        return self.branch(name).time_at_arclength(2.0 * self.beta)

    @property
    def separation(self) -> float:
        if self.y_left is None or self.y_right is None:
            return 0.0
        return float(np.linalg.norm(self.y_left - self.y_right))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma.tolist(),
            "gamma": self.gamma,
            "beta": self.beta,
            "y_left": None if self.y_left is None else self.y_left.tolist(),
            "y_right": None if self.y_right is None else self.y_right.tolist(),
            "separation": self.separation,
            "seed_offset": self.seed_offset,
            "gamma_shrinks": self.gamma_shrinks,
            "branch_lengths": {"l": self.left.length, "r": self.right.length},
            "certificate": self.certificate,
        }


def _trace_one(
    spec: VectorFieldSpec,
    sigma: np.ndarray,
    unstable: np.ndarray,
    name: str,
    gamma: float,
    seed_offset: float,
    horizon: float,
    samples: int,
    tol: Optional[Tolerance],
) -> Optional[BranchCurve]:
    seed = sigma + branch_sign(name) * seed_offset * unstable
    traj = integrate(spec, seed, horizon, tol)
    exit_time = first_exit_time(traj, sigma, gamma)
    if exit_time is None:
        logger.debug(f"分支 {name} 在 {horizon} 内未离开 B_{gamma}(σ)")
        return None
    times = np.linspace(0.0, exit_time, samples)
    points = traj.sample(times)
    radii = np.linalg.norm(points - sigma, axis=1)
    if np.any(np.diff(radii) < -1e-12 * gamma):
        logger.debug(f"分支 {name} 离开 B_{gamma}(σ) 前距离不单调")
        return None
    arclength = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    return BranchCurve(
        name=name,
        trajectory=traj,
        exit_time=float(exit_time),
        times=times,
        points=points,
        arclength=arclength,
    )


def backward_contained(
    spec: VectorFieldSpec,
    curve: BranchCurve,
    sigma: np.ndarray,
    gamma: float,
    checks: int = 5,
    window: float = 0.5,
    tol: Optional[Tolerance] = None,
) -> bool:
    """
    分支采样点的反向轨道留在 B_γ(σ) 内（O⁻(x) ⊆ B_γ(σ) 的有限窗口检查）

    反向时长取 min(该点在分支上的时间, window)；反向积分沿稳定方向
    指数放大误差，窗口不宜过长。
    """
    backward = spec.reversed()
    for t in np.linspace(0.0, curve.exit_time, checks + 1)[1:]:
        try:
            traj = integrate(backward, curve.trajectory.flow_at(t), min(t, window), tol)
        except EscapedError:
            return False
        if np.max(np.linalg.norm(traj.states - sigma, axis=1)) > gamma * (1.0 + 1e-6):
            return False
    return True


def trace_unstable_branches(
    spec: VectorFieldSpec,
    sigma: Sequence[float],
    gamma: float,
    seed_offset: float = 1e-8,
    horizon: float = 20.0,
    samples: int = 2000,
    max_shrinks: int = 12,
    tol: Optional[Tolerance] = None,
) -> UnstableBranches:
    """
    追踪 σ 的两条局部不稳定分支

    分支在 horizon 内没有离开 B_γ(σ)、离开前距离不单调，或反向包含检查失败时，
    γ 减半后重试。

    Raises:
        GeometryError: 缩小 max_shrinks 次后仍失败
    """
    sigma = np.asarray(sigma, dtype=float)
    if gamma <= 0:
        raise ValueError(f"gamma 必须为正: {gamma}")
    unstable = lorenz_like_frame(spec, sigma)["unstable"]
    for shrinks in range(max_shrinks + 1):
        curves = [
            _trace_one(spec, sigma, unstable, name, gamma, seed_offset, horizon, samples, tol)
            for name in ("l", "r")
        ]
        if all(c is not None for c in curves) and all(
            backward_contained(spec, c, sigma, gamma, tol=tol) for c in curves
        ):
            if shrinks:
                logger.warning(f"γ 自动缩小 {shrinks} 次，最终 γ={gamma}")
            return UnstableBranches(
                sigma=sigma,
                gamma=gamma,
                left=curves[0],
                right=curves[1],
                seed_offset=seed_offset,
                gamma_shrinks=shrinks,
            )
        gamma /= 2.0
    raise GeometryError(f"缩小 {max_shrinks} 次后仍无法得到局部不稳定分支", point=sigma)


def _leaf_orbit_tree(
    spec: VectorFieldSpec,
    sections: SingularSectionPair,
    leaf_points: int,
    tol: Optional[Tolerance],
) -> cKDTree:
    """
    O⁺(l*_R) 的采样点索引

    l* 上的轨道收敛到 σ；数值轨道在最接近 σ 之后会沿某条分支离开，
    因此只保留到最近点为止的部分。
    """
    chunks: List[np.ndarray] = []
    for section in sections.sections:
        for x in section.l_star_points(leaf_points):
            traj = integrate(spec, x, sections.horizon, tol)
            ts = np.linspace(0.0, traj.T, 2000)
            points = traj.sample(ts)
            closest = int(np.argmin(np.linalg.norm(points - sections.sigma, axis=1)))
            chunks.append(points[: closest + 1])
    return cKDTree(np.vstack(chunks))


def separation_holds(
    branches: UnstableBranches,
    sections: SingularSectionPair,
    beta: float,
    leaf_tree: cKDTree,
) -> bool:
    """
    条件 (1)：d(y^l, y^r) > 2β，B_β(y) 与 R、O⁺(l*_R) 均不相交
    """
    if 2.0 * beta > min(branches.left.length, branches.right.length):
        return False
    y_l = branches.left.point_at_arclength(2.0 * beta)
    y_r = branches.right.point_at_arclength(2.0 * beta)
    if np.linalg.norm(y_l - y_r) <= 2.0 * beta:
        return False
    for y in (y_l, y_r):
        if sections.distance(y) <= beta:
            return False
        dist, _ = leaf_tree.query(y)
        if dist <= beta:
            return False
    return True


def certify_launches(
    spec: VectorFieldSpec,
    branches: UnstableBranches,
    sections: SingularSectionPair,
    launches: int,
    width: float,
    horizon: float,
    rng: np.random.Generator,
    tol: Optional[Tolerance] = None,
) -> Dict[str, Any]:
    """
    条件 (2)–(3)：从 V^l_ε(l*) 出发的轨道在 T_σ 内进入 B_β(y^l) 且不进入 B_β(y^r)，
    右侧对称

    Returns:
        每个截面、每个分支的发射数与违规数
    """
    results: Dict[str, Any] = {}
    total_violations = 0
    for section in sections.sections:
        for name in ("l", "r"):
            sign = branch_sign(name)
            target = branches.landmark(name)
            other = branches.landmark("r" if name == "l" else "l")
            violations = 0
            for _ in range(launches):
                s = rng.uniform(-section.half_extent[1], section.half_extent[1])
                u = section.l_star_at(s) + sign * width * (1.0 - rng.random())
                traj = integrate(spec, section.point(u, s), horizon, tol)
                entered = first_entry_time(traj, target, branches.beta) is not None
                missed = first_entry_time(traj, other, branches.beta) is None
                if not (entered and missed):
                    violations += 1
            results[f"{section.name}{name}"] = {"launches": launches, "violations": violations}
            total_violations += violations
    results["total_violations"] = total_violations
    results["certified"] = total_violations == 0
    return results


def branch_landmarks(
    spec: VectorFieldSpec,
    sigma: Sequence[float],
    gamma: float,
    sections: SingularSectionPair,
    beta_floor: float = 1e-3,
    launches: int = 100,
    launch_width: float = 1e-3,
    landmark_horizon: float = 2.0,
    leaf_points: int = 11,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    tol: Optional[Tolerance] = None,
    precision: float = 1e-6,
) -> UnstableBranches:
    """
    计算路标 y^l_σ、y^r_σ 与分离半径 β_σ

    Args:
        spec: 向量场
        sigma: Lorenz 型奇点
        gamma: 局部分支半径（必要时自动缩小）
        sections: 奇异截面对
        beta_floor: β_σ 的下界
        launches: 每个截面、每侧的认证发射数
        launch_width: V_ε(l*) 的宽度 ε
        landmark_horizon: 认证时间窗口 T_σ
        leaf_points: 每条 l* 上用于 O⁺(l*_R) 的点数
        seed: 认证采样种子（未给出 rng 时使用）
        rng: 认证采样的随机数生成器
        tol: 积分误差目标
        precision: β 二分精度

    Returns:
        UnstableBranches，certificate 中含条件 (1)–(3) 的结果

    Raises:
        ConfigurationError: β_floor 处条件 (1) 已不成立
    """
    sigma = np.asarray(sigma, dtype=float)
    rng = rng if rng is not None else np.random.default_rng(seed)
    branches = trace_unstable_branches(spec, sigma, gamma, tol=tol)
    leaf_tree = _leaf_orbit_tree(spec, sections, leaf_points, tol)

    hi = 0.5 * min(branches.left.length, branches.right.length)
    lo = beta_floor
    if not separation_holds(branches, sections, lo, leaf_tree):
        raise ConfigurationError(f"β_σ 下界 {beta_floor} 处分离条件 (1) 已不成立")
    if separation_holds(branches, sections, hi, leaf_tree):
        lo = hi
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        if separation_holds(branches, sections, mid, leaf_tree):
            lo = mid
        else:
            hi = mid
    beta = lo
    branches.beta = beta
    branches.y_left = branches.left.point_at_arclength(2.0 * beta)
    branches.y_right = branches.right.point_at_arclength(2.0 * beta)

    launches_report = certify_launches(
        spec, branches, sections, launches, launch_width, landmark_horizon, rng, tol
    )
    branches.certificate = {
        "condition_1": True,
        "beta_floor": beta_floor,
        "launch_width": launch_width,
        "landmark_horizon": landmark_horizon,
        "launches": launches_report,
    }
    if not launches_report["certified"]:
        logger.warning(f"路标认证存在 {launches_report['total_violations']} 次违规")
    logger.info(f"路标计算完成: β_σ={beta:.6g}, 分离距离={branches.separation:.6g}")
    return branches


def mirror_defect(branches: UnstableBranches, mirror: Tuple[float, float, float] = (-1.0, -1.0, 1.0)) -> float:
    """路标在镜像对称 (x,y,z) ↦ (−x,−y,z) 下的偏差"""
    m = np.asarray(mirror, dtype=float)
    return float(np.linalg.norm(branches.landmark("l") - m * branches.landmark("r")))
