"""
奇异截面

Lorenz 型奇点 σ 附近的一对横截矩形 Σ_t、Σ_b。矩形位于局部稳定流形
上下两侧（沿弱稳定方向偏移），被稳定叶分层；特殊叶 l* 与 W^s(σ) 相交，
把矩形分为 l、r 两个分支。l 分支的轨道沿 −v_u 离开 σ，r 分支沿 +v_u。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import brentq

from ..errors import GeometryError
from ..flow.field import VectorFieldSpec
from ..flow.integrator import Tolerance, Trajectory, integrate
from ..models.catalog import is_lorenz_like, lorenz_like_frame
from .stable import estimate_stable_direction

# 分支标记：l 对应 −v_u，r 对应 +v_u
BRANCH_SIGNS = {"l": -1, "r": 1}


def branch_sign(branch: str) -> int:
    if branch not in BRANCH_SIGNS:
        raise ValueError(f"分支必须是 'l' 或 'r': {branch}")
    return BRANCH_SIGNS[branch]


def _dense_times(traj: Trajectory, t0: float, t1: float, refine: int) -> np.ndarray:
    nodes = traj.times[(traj.times >= t0) & (traj.times <= t1)]
    nodes = np.unique(np.concatenate([[t0], nodes, [t1]]))
    if refine <= 1 or len(nodes) < 2:
        return nodes
    frac = np.linspace(0.0, 1.0, refine, endpoint=False)
    fine = (nodes[:-1, None] + np.diff(nodes)[:, None] * frac[None, :]).ravel()
    return np.concatenate([fine, nodes[-1:]])


def _ball_crossing(
    traj: Trajectory,
    center: np.ndarray,
    radius: float,
    t_min: float,
    entering: bool,
    refine: int = 4,
) -> Optional[float]:
    if t_min > traj.T:
        return None
    ts = _dense_times(traj, t_min, traj.T, refine)
    gap = np.linalg.norm(traj.sample(ts) - center, axis=1) - radius
    hits = np.flatnonzero(gap <= 0) if entering else np.flatnonzero(gap > 0)
    if len(hits) == 0:
        return None
    j = int(hits[0])
    if j == 0:
        return float(ts[0])

    def signed(t: float) -> float:
        return float(np.linalg.norm(traj.flow_at(t) - center) - radius)

    return float(brentq(signed, ts[j - 1], ts[j], xtol=1e-13))


def first_entry_time(
    traj: Trajectory,
    center: Sequence[float],
    radius: float,
    t_min: float = 0.0,
) -> Optional[float]:
    """t ≥ t_min 中第一次进入闭球 B_radius(center) 的时间，未进入返回 None"""
    return _ball_crossing(traj, np.asarray(center, dtype=float), radius, t_min, entering=True)


def first_exit_time(
    traj: Trajectory,
    center: Sequence[float],
    radius: float,
    t_min: float = 0.0,
) -> Optional[float]:
    """t ≥ t_min 中第一次离开闭球 B_radius(center) 的时间，未离开返回 None"""
    return _ball_crossing(traj, np.asarray(center, dtype=float), radius, t_min, entering=False)


def exit_side(
    spec: VectorFieldSpec,
    x: np.ndarray,
    sigma: np.ndarray,
    unstable: np.ndarray,
    exit_radius: float,
    horizon: float,
    tol: Optional[Tolerance] = None,
) -> int:
    """
    轨道离开 σ 邻域的方向

    Returns:
        +1 沿 +v_u 离开，−1 沿 −v_u 离开，0 表示时间窗口内未离开
    """
    traj = integrate(spec, x, horizon, tol)
    ts = _dense_times(traj, 0.0, traj.T, 2)
    coord = (traj.sample(ts) - sigma) @ unstable
    out = np.flatnonzero(np.abs(coord) >= exit_radius)
    if len(out) == 0:
        return 0
    return int(np.sign(coord[out[0]]))


@dataclass(eq=False)
class CrossSection:
    """
    横截矩形

    Attributes:
        name: "t" 或 "b"
        center: 矩形中心
        normal: 单位法向
        axes: (2, 3)，第 0 行为横叶方向（与 v_u 同向），第 1 行为叶方向
        half_extent: 两个方向的半边长
        l_star_s: l* 曲线节点的叶方向坐标
        l_star_u: 各节点处 l* 的横叶坐标
        leaf_directions: 网格点上估计的稳定方向（投影到平面内）
        transversality: 网格上 ⟨X, normal⟩ 的最小绝对值
    """

    name: str
    center: np.ndarray
    normal: np.ndarray
    axes: np.ndarray
    half_extent: np.ndarray
    l_star_s: np.ndarray = field(default_factory=lambda: np.zeros(1))
    l_star_u: np.ndarray = field(default_factory=lambda: np.zeros(1))
    leaf_directions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    transversality: float = 0.0

    def point(self, u: float, s: float) -> np.ndarray:
        """矩形坐标 (u, s) 对应的点"""
        return self.center + u * self.axes[0] + s * self.axes[1]

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """(u, s, h)：面内坐标与离面高度"""
        rel = np.asarray(x, dtype=float) - self.center
        return np.array([rel @ self.axes[0], rel @ self.axes[1], rel @ self.normal])

    def distance(self, x: np.ndarray) -> float:
        """点到矩形的欧氏距离"""
        u, s, h = self.coordinates(x)
        du = max(abs(u) - self.half_extent[0], 0.0)
        ds = max(abs(s) - self.half_extent[1], 0.0)
        return float(np.sqrt(du * du + ds * ds + h * h))

    def l_star_at(self, s: float) -> float:
        """叶方向坐标 s 处 l* 的横叶坐标（节点间线性插值）"""
        return float(np.interp(s, self.l_star_s, self.l_star_u))

    @property
    def l_star(self) -> float:
        """矩形中线上的 u*"""
        return self.l_star_at(0.0)

    def component(self, x: np.ndarray) -> str:
        """x 所在的分支：l（u < u*(s)）或 r（u ≥ u*(s)）"""
        u, s, _ = self.coordinates(x)
        return "l" if u < self.l_star_at(s) else "r"

    def leaf_points(self, u: float, n: int = 11) -> np.ndarray:
        """坐标 u 处的叶上的 n 个点"""
        s = np.linspace(-self.half_extent[1], self.half_extent[1], n)
        return np.array([self.point(u, si) for si in s])

    def l_star_points(self, n: int = 11) -> np.ndarray:
        s = np.linspace(-self.half_extent[1], self.half_extent[1], n)
        return np.array([self.point(self.l_star_at(si), si) for si in s])

    def grid(self, n: int) -> np.ndarray:
        us = np.linspace(-self.half_extent[0], self.half_extent[0], n)
        ss = np.linspace(-self.half_extent[1], self.half_extent[1], n)
        return np.array([self.point(u, s) for u in us for s in ss])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "center": self.center.tolist(),
            "normal": self.normal.tolist(),
            "axes": self.axes.tolist(),
            "half_extent": self.half_extent.tolist(),
            "l_star": {"s": self.l_star_s.tolist(), "u": self.l_star_u.tolist()},
            "transversality": float(self.transversality),
        }


@dataclass(eq=False)
class SingularSectionPair:
    """
    奇异截面对 R = Σ_t ∪ Σ_b

    Attributes:
        sigma: 奇点
        top: Σ_t
        bottom: Σ_b
        unstable: σ 的单位不稳定特征向量
        horizon: 截面时间窗口 T_R
        exit_radius: 判定离开 σ 邻域的不稳定坐标阈值
    """

    sigma: np.ndarray
    top: CrossSection
    bottom: CrossSection
    unstable: np.ndarray
    horizon: float
    exit_radius: float

    @property
    def sections(self) -> Tuple[CrossSection, CrossSection]:
        return self.top, self.bottom

    def distance(self, x: np.ndarray) -> float:
        """点到 R 的距离"""
        return min(self.top.distance(x), self.bottom.distance(x))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma.tolist(),
            "top": self.top.to_dict(),
            "bottom": self.bottom.to_dict(),
            "unstable": self.unstable.tolist(),
            "horizon": self.horizon,
            "exit_radius": self.exit_radius,
        }


def check_transversality(
    spec: VectorFieldSpec,
    section: CrossSection,
    floor: float,
    n: int = 9,
) -> float:
    """
    在 n×n 网格上检查流的横截性

    Returns:
        min |⟨X, normal⟩|

    Raises:
        GeometryError: 符号改变或低于下界，附带违规点
    """
    points = section.grid(n)
    flux = np.array([spec.eval(x) @ section.normal for x in points])
    signs = np.sign(flux)
    if np.any(signs != signs[0]):
        bad = points[int(np.argmax(signs != signs[0]))]
        raise GeometryError(f"截面 Σ_{section.name} 上流方向改变符号", point=bad)
    worst = int(np.argmin(np.abs(flux)))
    if abs(flux[worst]) < floor:
        raise GeometryError(
            f"截面 Σ_{section.name} 横截性不足: {abs(flux[worst]):.3g} < {floor}",
            point=points[worst],
        )
    return float(np.abs(flux).min())


def locate_l_star(
    spec: VectorFieldSpec,
    section: CrossSection,
    sigma: np.ndarray,
    unstable: np.ndarray,
    exit_radius: float,
    horizon: float,
    s: float = 0.0,
    tol: Optional[Tolerance] = None,
    precision: float = 1e-9,
    max_iter: int = 80,
) -> float:
    """
    在叶方向坐标 s 处沿横叶方向二分定位 l*：两侧的轨道分别沿 −v_u 与 +v_u 离开

    Returns:
        l* 的横叶坐标 u*

    Raises:
        GeometryError: 矩形两端未夹住 l*
    """
    lo, hi = -section.half_extent[0], section.half_extent[0]
    side_lo = exit_side(spec, section.point(lo, s), sigma, unstable, exit_radius, horizon, tol)
    side_hi = exit_side(spec, section.point(hi, s), sigma, unstable, exit_radius, horizon, tol)
    if side_lo != -1 or side_hi != 1:
        raise GeometryError(
            f"Σ_{section.name} 在 s={s:.3g} 处两端的离开方向为 ({side_lo}, {side_hi})，无法夹住 l*",
            point=section.point(0.0, s),
        )
    for i in range(max_iter):
        if hi - lo <= precision:
            break
        mid = 0.5 * (lo + hi)
        side = exit_side(spec, section.point(mid, s), sigma, unstable, exit_radius, horizon, tol)
        if side == 0:
            logger.debug(f"Σ_{section.name}: s={s:.3g} 第 {i} 次二分命中 W^s(σ)，u*={mid}")
            return float(mid)
        if side < 0:
            lo = mid
        else:
            hi = mid
    u_star = 0.5 * (lo + hi)
    logger.debug(f"Σ_{section.name}: s={s:.3g} 处 l* 二分收敛 u*={u_star}，区间宽度 {hi - lo:.3g}")
    return float(u_star)


def l_star_reaches(
    spec: VectorFieldSpec,
    section: CrossSection,
    sigma: np.ndarray,
    gamma: float,
    horizon: float,
    tol: Optional[Tolerance] = None,
) -> bool:
    """l* 上的点正向积分进入 B_γ(σ)"""
    traj = integrate(spec, section.point(section.l_star, 0.0), horizon, tol)
    return first_entry_time(traj, sigma, gamma) is not None


def build_singular_sections(
    spec: VectorFieldSpec,
    sigma: Sequence[float],
    offset: float = 1.0,
    extents: Tuple[float, float] = (0.5, 0.5),
    transversality_floor: float = 1e-3,
    horizon: float = 5.0,
    tol: Optional[Tolerance] = None,
    precision: float = 1e-9,
    leaf_grid: int = 3,
    leaf_nodes: int = 5,
    gamma: Optional[float] = None,
) -> SingularSectionPair:
    """
    构造奇点 σ 的奇异截面对

    Args:
        spec: 向量场
        sigma: Lorenz 型奇点
        offset: 截面中心沿 ±弱稳定方向到 σ 的距离
        extents: 横叶方向与叶方向的半边长
        transversality_floor: |⟨X, normal⟩| 的下界
        horizon: l* 二分时每条轨道的积分时长 T_R
        tol: 积分误差目标
        precision: l* 二分精度
        leaf_grid: 每个截面上估计叶方向的网格边长
        leaf_nodes: l* 曲线的节点数（每个节点一次二分）
        gamma: 给定时要求 l* 上的点在 horizon 内进入 B_γ(σ)

    Returns:
        SingularSectionPair

    Raises:
        GeometryError: σ 不是 Lorenz 型、边长退化、横截性失败或 l* 不进入 B_γ(σ)
    """
    sigma = np.asarray(sigma, dtype=float)
    if min(extents) <= 0 or offset <= 0:
        raise GeometryError(f"截面尺寸退化: offset={offset}, extents={extents}", point=sigma)
    if not is_lorenz_like(spec, sigma):
        raise GeometryError(f"{spec.name} 在 {sigma} 处的奇点不是 Lorenz 型", point=sigma)

    frame = lorenz_like_frame(spec, sigma)
    unstable, weak = frame["unstable"], frame["weak_stable"]
    exit_radius = 2.0 * max(extents)
    sections: List[CrossSection] = []
    for name, sign in (("t", 1.0), ("b", -1.0)):
        center = sigma + sign * offset * weak
        normal = weak.copy()
        leaf = _leaf_axis(spec, center, normal, frame["strong_stable"], tol)
        across = np.cross(normal, leaf)
        across *= np.sign(across @ unstable) or 1.0
        section = CrossSection(
            name=name,
            center=center,
            normal=normal,
            axes=np.vstack([across, leaf]),
            half_extent=np.asarray(extents, dtype=float),
        )
        section.transversality = check_transversality(spec, section, transversality_floor)
        section.leaf_directions = np.array(
            [_projected(estimate_stable_direction(spec, x, 1.0, tol).direction, normal)
             for x in section.grid(leaf_grid)]
        )
        section.l_star_s = (
            np.linspace(-extents[1], extents[1], leaf_nodes) if leaf_nodes > 1 else np.zeros(1)
        )
        section.l_star_u = np.array(
            [locate_l_star(spec, section, sigma, unstable, exit_radius, horizon, s, tol, precision)
             for s in section.l_star_s]
        )
        if gamma is not None and not l_star_reaches(spec, section, sigma, gamma, horizon, tol):
            raise GeometryError(
                f"Σ_{name} 的 l* 在 {horizon:.3g} 内未进入 B_γ(σ), γ={gamma:.3g}",
                point=section.point(section.l_star, 0.0),
            )
        sections.append(section)

    pair = SingularSectionPair(
        sigma=sigma,
        top=sections[0],
        bottom=sections[1],
        unstable=unstable,
        horizon=horizon,
        exit_radius=exit_radius,
    )
    logger.info(
        f"奇异截面构造完成: u*(Σ_t)={pair.top.l_star:.3g}, u*(Σ_b)={pair.bottom.l_star:.3g}"
    )
    return pair


def _projected(v: np.ndarray, normal: np.ndarray) -> np.ndarray:
    w = v - (v @ normal) * normal
    n = np.linalg.norm(w)
    return w / n if n > 0 else w


def _leaf_axis(
    spec: VectorFieldSpec,
    center: np.ndarray,
    normal: np.ndarray,
    fallback: np.ndarray,
    tol: Optional[Tolerance],
) -> np.ndarray:
    estimate = estimate_stable_direction(spec, center, 1.0, tol)
    direction = estimate.direction if estimate.converged else fallback
    leaf = _projected(direction, normal)
    if np.linalg.norm(leaf) < 1e-8:
        leaf = _projected(fallback, normal)
    if np.linalg.norm(leaf) < 1e-8:
        raise GeometryError("稳定方向与截面法向平行，无法确定叶方向", point=center)
    return leaf * (np.sign(leaf @ fallback) or 1.0)
