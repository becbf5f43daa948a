"""
单侧点与双侧点分类

用过 x、由稳定方向与流方向张成的平面近似局部稳定叶 F^s_ε(x)，
统计吸引子样本在平面两侧的命中数。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ..flow.field import VectorFieldSpec
from ..flow.integrator import Tolerance, flow_map
from .attractor import AttractorSample
from .stable import estimate_stable_direction


class SideVerdict(Enum):
    """分类结论"""

    SIDE = "side"
    BI_SIDE = "bi-side"
    NEITHER = "neither"
    INCONCLUSIVE = "inconclusive"


@dataclass
class SideClassification:
    """
    单侧/双侧分类结果

    Attributes:
        point: 被分类的点
        eps: 最大探测半径
        stable_direction: 局部稳定方向
        normal: 分割平面的单位法向
        verdict: 结论
        component: SIDE 时被命中的一侧（+1 或 −1）
        radii: 探测半径序列
        counts: 每个半径下 (正侧命中数, 负侧命中数)
    """

    point: np.ndarray
    eps: float
    stable_direction: Optional[np.ndarray]
    normal: Optional[np.ndarray]
    verdict: SideVerdict
    component: Optional[int] = None
    radii: List[float] = field(default_factory=list)
    counts: List[List[int]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point": self.point.tolist(),
            "eps": self.eps,
            "stable_direction": None if self.stable_direction is None else self.stable_direction.tolist(),
            "normal": None if self.normal is None else self.normal.tolist(),
            "verdict": self.verdict.value,
            "component": self.component,
            "radii": list(self.radii),
            "counts": [list(c) for c in self.counts],
        }


def radius_schedule(eps: float, n_radii: int) -> List[float]:
    """ε, ε/2, ε/4, …"""
    return [eps / 2 ** i for i in range(n_radii)]


def split_counts(
    sample: AttractorSample,
    x: np.ndarray,
    normal: np.ndarray,
    radius: float,
) -> List[int]:
    """B_r(x) 内样本在平面两侧的命中数 [正侧, 负侧]"""
    idx = sample.indices_within(x, radius)
    if len(idx) == 0:
        return [0, 0]
    signed = (sample.points[idx] - x) @ normal
    return [int(np.sum(signed > 0)), int(np.sum(signed < 0))]


def decide_side(counts: Sequence[Sequence[int]], threshold: int) -> tuple:
    """
    按探测序列的命中数给出结论

    Returns:
        (SideVerdict, component)
    """
    if sum(counts[0]) == 0:
        return SideVerdict.NEITHER, None
    for sign, (hit, miss) in ((1, (0, 1)), (-1, (1, 0))):
        if all(c[miss] == 0 and c[hit] >= threshold for c in counts):
            return SideVerdict.SIDE, sign
    if all(min(c) >= threshold for c in counts):
        return SideVerdict.BI_SIDE, None
    return SideVerdict.INCONCLUSIVE, None


def classify_side(
    spec: VectorFieldSpec,
    x: Sequence[float],
    sample: AttractorSample,
    eps: float,
    n_radii: int = 4,
    threshold: int = 5,
    horizon: float = 1.0,
    tol: Optional[Tolerance] = None,
    stable_direction: Optional[np.ndarray] = None,
) -> SideClassification:
    """
    对 x 做单侧/双侧分类

    Args:
        spec: 向量场
        x: 待分类点
        sample: 吸引子样本
        eps: 最大探测半径
        n_radii: 探测半径个数（每次减半）
        threshold: 每侧判定为“有吸引子”所需的最少命中数
        horizon: 稳定方向估计的时间窗口
        tol: 积分误差目标
        stable_direction: 已知的稳定方向（给出时跳过估计）

    Returns:
        SideClassification
    """
    x = np.asarray(x, dtype=float)
    radii = radius_schedule(eps, n_radii)
    if sample.count_within(x, eps) == 0:
        return SideClassification(
            point=x, eps=eps, stable_direction=None, normal=None,
            verdict=SideVerdict.NEITHER, radii=radii, counts=[[0, 0] for _ in radii],
        )

    if stable_direction is None:
        estimate = estimate_stable_direction(spec, x, horizon, tol)
        if estimate.inconclusive:
            return SideClassification(
                point=x, eps=eps, stable_direction=estimate.direction, normal=None,
                verdict=SideVerdict.INCONCLUSIVE, radii=radii,
            )
        stable_direction = estimate.direction

    flow_dir = spec.eval(x)
    normal = np.cross(stable_direction, flow_dir)
    norm = np.linalg.norm(normal)
    if norm <= 1e-12 * max(1.0, np.linalg.norm(flow_dir)):
        logger.debug(f"稳定方向与流方向平行，无法构造分割平面: x={x}")
        return SideClassification(
            point=x, eps=eps, stable_direction=stable_direction, normal=None,
            verdict=SideVerdict.INCONCLUSIVE, radii=radii,
        )
    normal = normal / norm

    counts = [split_counts(sample, x, normal, r) for r in radii]
    verdict, component = decide_side(counts, threshold)
    return SideClassification(
        point=x,
        eps=eps,
        stable_direction=np.asarray(stable_direction, dtype=float),
        normal=normal,
        verdict=verdict,
        component=component,
        radii=radii,
        counts=counts,
    )


def bi_side_invariance_audit(
    spec: VectorFieldSpec,
    points: Sequence[Sequence[float]],
    sample: AttractorSample,
    eps: float,
    times: Sequence[float] = (1.0, 5.0, 10.0),
    tol: Optional[Tolerance] = None,
    **kwargs: Any,
) -> Dict[str, Any]:
    """
    双侧点正向不变性审计

    对每个被判为双侧的点，检查 X_t(x) 在给定时刻仍为双侧。
    X_t(x) 的任何其他结论（含 inconclusive 与 neither）都记为违例，按结论分别计数。

    Returns:
        {"checked", "violations", "by_verdict", "details"}
    """
    details = []
    by_verdict: Dict[str, int] = {}
    checked = 0
    for x in points:
        base = classify_side(spec, x, sample, eps, tol=tol, **kwargs)
        if base.verdict is not SideVerdict.BI_SIDE:
            continue
        checked += 1
        row = {"point": list(map(float, x)), "verdicts": {}}
        for t in times:
            moved = classify_side(spec, flow_map(spec, x, t, tol), sample, eps, tol=tol, **kwargs)
            row["verdicts"][str(t)] = moved.verdict.value
            if moved.verdict is not SideVerdict.BI_SIDE:
                by_verdict[moved.verdict.value] = by_verdict.get(moved.verdict.value, 0) + 1
        details.append(row)
    return {
        "checked": checked,
        "violations": sum(by_verdict.values()),
        "by_verdict": by_verdict,
        "details": details,
    }


def radius_halving_audit(
    spec: VectorFieldSpec,
    points: Sequence[Sequence[float]],
    sample: AttractorSample,
    eps: float,
    halvings: int = 3,
    n_radii: int = 4,
    threshold: int = 5,
    horizon: float = 1.0,
    tol: Optional[Tolerance] = None,
) -> Dict[str, Any]:
    """
    半径减半下的结论稳定性审计

    每个点以 ε, ε/2, … 为最大半径依次分类（稳定方向只估计一次）。
    相邻两次之间 side → bi-side 记为违例，bi-side → side 单独计数。

    Returns:
        {"checked", "violations", "bi_side_to_side", "details"}
    """
    details = []
    violations = 0
    reverse = 0
    for x in points:
        x = np.asarray(x, dtype=float)
        estimate = estimate_stable_direction(spec, x, horizon, tol)
        if estimate.inconclusive:
            continue
        verdicts = [
            classify_side(
                spec, x, sample, eps / 2 ** i, n_radii=n_radii, threshold=threshold,
                tol=tol, stable_direction=estimate.direction,
            ).verdict
            for i in range(halvings + 1)
        ]
        for before, after in zip(verdicts, verdicts[1:]):
            if before is SideVerdict.SIDE and after is SideVerdict.BI_SIDE:
                violations += 1
            elif before is SideVerdict.BI_SIDE and after is SideVerdict.SIDE:
                reverse += 1
        details.append({"point": x.tolist(), "verdicts": [v.value for v in verdicts]})
    if violations:
        logger.warning(f"半径减半审计: {violations} 次 side → bi-side")
    return {
        "checked": len(details),
        "violations": violations,
        "bi_side_to_side": reverse,
        "details": details,
    }


def strong_stable_audit(
    sample: AttractorSample,
    sigma: np.ndarray,
    strong_stable: np.ndarray,
    radius: float = 1e-2,
    axis_length: float = 1.0,
) -> Dict[str, Any]:
    """
    F^ss(σ) ∩ Λ = {σ} 的采样检查

    统计落在强稳定轴线段（长度 axis_length）附近 radius 内、
    但在 B_radius(σ) 之外的样本点数。只报告，不作为证明。
    """
    rel = sample.points - np.asarray(sigma, dtype=float)
    axis = np.asarray(strong_stable, dtype=float) / np.linalg.norm(strong_stable)
    along = rel @ axis
    perp = np.linalg.norm(rel - np.outer(along, axis), axis=1)
    near_axis = (np.abs(along) <= axis_length) & (perp <= radius)
    outside_ball = np.linalg.norm(rel, axis=1) > radius
    count = int(np.sum(near_axis & outside_ball))
    return {"radius": radius, "axis_length": axis_length, "hits": count, "sample_size": len(sample)}


def boundary_type_audit(
    sample: AttractorSample,
    sigma: np.ndarray,
    weak_stable: np.ndarray,
    strong_stable: np.ndarray,
    radius: float = 1.0,
    slab: float = 0.1,
) -> Dict[str, Any]:
    """
    边界型奇点的操作化检查

    在 B_radius(σ) 内、距局部稳定流形（由弱稳定与强稳定方向张成）
    不超过 slab 的样本中，按弱稳定坐标的符号统计两侧命中数。
    只有一侧被命中即视为边界型。
    """
    rel = sample.points - np.asarray(sigma, dtype=float)
    ws = np.asarray(weak_stable, dtype=float)
    ss = np.asarray(strong_stable, dtype=float)
    normal = np.cross(ws, ss)
    normal /= np.linalg.norm(normal)
    near = (np.linalg.norm(rel, axis=1) <= radius) & (np.abs(rel @ normal) <= slab)
    coord = rel[near] @ ws
    positive, negative = int(np.sum(coord > 0)), int(np.sum(coord < 0))
    return {
        "positive": positive,
        "negative": negative,
        "boundary_type": (positive == 0) != (negative == 0),
    }
