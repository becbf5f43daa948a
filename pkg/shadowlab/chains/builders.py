"""
链构造器

正对照用的随机扰动链，以及在 Lorenz 型奇点附近拼接的对抗链：
先沿 p 的轨道进入 B_{δ/2}(σ)，再跳到指定不稳定分支上，沿分支流到路标 y_σ。
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..errors import EscapedError, GeometryError, NotSingularApproachError
from ..flow.field import VectorFieldSpec
from ..flow.integrator import DEFAULT_TOLERANCE, Tolerance, Trajectory, integrate
from ..geometry.attractor import AttractorSample
from ..geometry.branches import UnstableBranches
from ..geometry.sections import BRANCH_SIGNS, SingularSectionPair, branch_sign, exit_side, first_entry_time
from ..geometry.sides import SideClassification, SideVerdict, classify_side
from ..models.catalog import lorenz_like_frame
from .chain import FiniteChain

# 奇点接近检测的默认时间预算
APPROACH_BUDGET = 1000.0
# 分段积分的块长
APPROACH_CHUNK = 50.0
# 分支上的跳跃点到 σ 的距离占 δ/2 的比例
BRANCH_JUMP_FRACTION = 0.5
# 判定被命中一侧的离开分支时，沿分割平面法向的位移
SIDE_NUDGE = 1e-6

SIGN_BRANCHES = {sign: name for name, sign in BRANCH_SIGNS.items()}
OPPOSITE_BRANCH = {"l": "r", "r": "l"}


def uniform_in_ball(rng: np.random.Generator, radius: float, dim: int = 3) -> np.ndarray:
    """半径 radius 的球内均匀分布的一个点"""
    if radius <= 0:
        return np.zeros(dim)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.random() ** (1.0 / dim)


def build_perturbed_chain(
    spec: VectorFieldSpec,
    x0: Sequence[float],
    durations: Sequence[float],
    noise: float,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    T: Optional[float] = None,
    tol: Optional[Tolerance] = None,
) -> FiniteChain:
    """
    随机扰动链 x_{i+1} = X_{t_i}(x_i) + ξ_i，|ξ_i| ≤ noise

    Args:
        spec: 向量场
        x0: 起点
        durations: 段时长 t_0..t_k
        noise: 扰动半径，链的 δ 取 2·noise
        seed: 随机种子（未给出 rng 时使用）
        rng: 随机数生成器
        T: 最小时长参数，默认取最短段时长
        tol: 积分误差目标

    Returns:
        FiniteChain

    Raises:
        EscapedError: 积分过程中轨道逃逸
    """
    if noise < 0:
        raise ValueError(f"noise 必须非负: {noise}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    tol = tol or DEFAULT_TOLERANCE
    durs = np.asarray(durations, dtype=float).reshape(-1)
    T = float(durs.min()) if T is None else float(T)
    if np.any(durs < T):
        raise ValueError(f"存在小于 T={T} 的段时长")

    points = [np.asarray(x0, dtype=float).reshape(3)]
    segments = []
    for i, t in enumerate(durs):
        seg = integrate(spec, points[-1], t, tol)
        segments.append(seg)
        if i < len(durs) - 1:
            points.append(seg.endpoint + uniform_in_ball(rng, noise))

    logger.debug(f"扰动链构造完成: {len(points)} 段, noise={noise}")
    return FiniteChain(
        points=np.vstack(points),
        durations=durs,
        T=T,
        delta=2.0 * noise,
        spec=spec,
        segments=tuple(segments),
        seed=seed,
        metadata={"builder": "perturbed", "noise": float(noise)},
    )


def approach_time(
    spec: VectorFieldSpec,
    x: Sequence[float],
    sigma: Sequence[float],
    radius: float,
    t_min: float = 0.0,
    budget: float = APPROACH_BUDGET,
    chunk: float = APPROACH_CHUNK,
    tol: Optional[Tolerance] = None,
) -> float:
    """
    x 的正向轨道在 [t_min, budget] 内第一次进入 B_radius(σ) 的时间

    Raises:
        NotSingularApproachError: 预算内未进入，或轨道逃逸
    """
    sigma = np.asarray(sigma, dtype=float)
    start = np.asarray(x, dtype=float)
    offset = 0.0
    try:
        while offset < budget:
            span = min(chunk, budget - offset)
            traj = integrate(spec, start, span, tol)
            hit = first_entry_time(traj, sigma, radius, max(t_min - offset, 0.0))
            if hit is not None:
                return offset + hit
            offset += span
            start = traj.endpoint
    except EscapedError as e:
        raise NotSingularApproachError(
            f"轨道在 t={offset + e.last_time:.6g} 逃逸，未接近奇点 {sigma}"
        ) from e
    raise NotSingularApproachError(f"轨道在时间预算 {budget} 内未进入 B_{radius:.3g}({sigma})")


def branch_leg(
    branches: UnstableBranches,
    branch: str,
    radius: float,
    T: float,
) -> Tuple[np.ndarray, float, np.ndarray]:
    """
    分支上的一段：从 B_radius(σ) 内的点 x 流到路标 y_σ，时长 ≥ T

    时长不足 T 时沿分支向 σ 回退取更早的点。

    Returns:
        (x, 时长, 路标)

    Raises:
        GeometryError: 分支种子到路标的时间不足 T
    """
    curve = branches.branch(branch)
    t_land = branches.landmark_time(branch)
    t_radius = curve.time_at_radius(branches.sigma, radius)
    start = t_land if t_radius is None else min(t_radius, t_land)
    start = min(start, t_land - T)
    if start < 0:
        raise GeometryError(
            f"分支 {branch} 从种子到路标只有 {t_land:.3g}，不足 T={T}",
            point=branches.sigma,
        )
    return curve.trajectory.flow_at(start), float(t_land - start), branches.landmark(branch)


def _landmark_miss(seg: Trajectory, landmark: np.ndarray) -> float:
    return float(np.linalg.norm(seg.endpoint - landmark))


def resolve_branch(branch: str, accumulated: Optional[str]) -> str:
    """
    跳跃所用的分支

    "auto" 取被延续分支的反向；显式给出的分支不得是被延续的那一支。

    Raises:
        ValueError: 未知的分支名
        GeometryError: "auto" 但起点一侧的延续未知，或显式分支正是被延续的分支
    """
    if branch == "auto":
        if accumulated is None:
            raise GeometryError("起点一侧的延续分支未知，无法自动选择跳跃分支")
        return OPPOSITE_BRANCH[accumulated]
    branch_sign(branch)
    if branch == accumulated:
        raise GeometryError(f"分支 {branch} 正是起点一侧延续到的分支，跳到这一支的链可被追踪")
    return branch


def build_adversarial_chain(
    spec: VectorFieldSpec,
    p: Sequence[float],
    sigma: Sequence[float],
    branch: str,
    delta: float,
    T: float,
    branches: UnstableBranches,
    accumulated: Optional[str] = None,
    budget: float = APPROACH_BUDGET,
    tol: Optional[Tolerance] = None,
) -> FiniteChain:
    """
    两段对抗链 {(p, t_0), (x_1, t_1)}

    t_0 ≥ T 为 p 的轨道进入 B_{δ/2}(σ) 的时间；x_1 取在指定分支上、
    距 σ 不超过 δ/4 处，X_{t_1}(x_1) 为该分支的路标。

    Args:
        spec: 向量场
        p: 起点（轨道需接近 σ）
        sigma: Lorenz 型奇点
        branch: "l"、"r" 或 "auto"（取 accumulated 的反向）
        delta: 跳跃上界 δ
        T: 最小时长
        branches: 带路标的不稳定分支
        accumulated: p 一侧的吸引子沿流延续后离开 σ 所走的分支，未知时为 None
        budget: 奇点接近检测的时间预算
        tol: 积分误差目标

    Returns:
        FiniteChain

    Raises:
        NotSingularApproachError: p 的轨道在预算内未进入 B_{δ/2}(σ)
        GeometryError: 分支选择与 accumulated 冲突
    """
    branch = resolve_branch(branch, accumulated)
    if delta <= 0 or T <= 0:
        raise ValueError(f"δ 与 T 必须为正: δ={delta}, T={T}")
    tol = tol or DEFAULT_TOLERANCE
    sigma = np.asarray(sigma, dtype=float)
    p = np.asarray(p, dtype=float)
    t0 = approach_time(spec, p, sigma, delta / 2.0, t_min=T, budget=budget, tol=tol)
    x1, t1, landmark = branch_leg(branches, branch, BRANCH_JUMP_FRACTION * delta / 2.0, T)

    chain = FiniteChain.create(
        spec,
        [p, x1],
        [t0, t1],
        delta=delta,
        T=T,
        tol=tol,
        metadata={
            "builder": "adversarial",
            "sigma": sigma.tolist(),
            "branch": branch,
            "accumulated": accumulated,
            "landmark": landmark.tolist(),
            "approach_time": t0,
        },
    )
    chain.metadata["landmark_miss"] = _landmark_miss(chain.segments[-1], landmark)
    logger.info(f"对抗链构造完成: δ={delta}, t_0={t0:.4g}, t_1={t1:.4g}, 分支 {branch}")
    return chain


def build_three_leg_chain(
    spec: VectorFieldSpec,
    p: Sequence[float],
    t0: float,
    x1: Sequence[float],
    sigma: Sequence[float],
    delta: float,
    T: float,
    branches: UnstableBranches,
    branch: Optional[str] = None,
    exit_horizon: float = 5.0,
    budget: float = APPROACH_BUDGET,
    tol: Optional[Tolerance] = None,
) -> FiniteChain:
    """
    三段链 {(p, t_0), (x_1, t_1), (x_2, t_2)}

    q = X_{t_0}(p) 为双侧路标点，x_1 取在 q 附近未被延续的一侧；
    x_1 的轨道进入 B_{δ/2}(σ) 后跳到与其离开方向相反的分支上。

    Args:
        spec: 向量场
        p: 起点
        t0: 第一段时长（≥ T）
        x1: q 附近的点
        sigma: Lorenz 型奇点
        delta: 跳跃上界 δ
        T: 最小时长
        branches: 带路标的不稳定分支
        branch: 第三段所在分支；None 时取 x_1 离开方向的反向（无法判定时取 l）
        exit_horizon: 判定离开方向的积分时长
        budget: 奇点接近检测的时间预算
        tol: 积分误差目标

    Returns:
        FiniteChain

    Raises:
        NotSingularApproachError: x_1 的轨道在预算内未进入 B_{δ/2}(σ)
        GeometryError: 给出的 branch 正是 x_1 离开 σ 所走的分支
    """
    if t0 < T:
        raise ValueError(f"第一段时长 {t0} 小于 T={T}")
    tol = tol or DEFAULT_TOLERANCE
    sigma = np.asarray(sigma, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    t1 = approach_time(spec, x1, sigma, delta / 2.0, t_min=T, budget=budget, tol=tol)

    near = integrate(spec, x1, t1, tol).endpoint
    unstable = lorenz_like_frame(spec, sigma)["unstable"]
    side = exit_side(spec, near, sigma, unstable, branches.gamma, exit_horizon, tol)
    exit_branch = SIGN_BRANCHES.get(side)
    if branch is None and exit_branch is None:
        branch = "l"
    else:
        branch = resolve_branch(branch or "auto", exit_branch)
    x2, t2, landmark = branch_leg(branches, branch, BRANCH_JUMP_FRACTION * delta / 2.0, T)

    chain = FiniteChain.create(
        spec,
        [p, x1, x2],
        [t0, t1, t2],
        delta=delta,
        T=T,
        tol=tol,
        metadata={
            "builder": "three-leg",
            "sigma": sigma.tolist(),
            "branch": branch,
            "x1_exit_side": side,
            "landmark": landmark.tolist(),
            "approach_time": t1,
        },
    )
    chain.metadata["landmark_miss"] = _landmark_miss(chain.segments[-1], landmark)
    logger.info(f"三段链构造完成: δ={delta}, 第三段分支 {branch}")
    return chain


@dataclass
class SideApproach:
    """
    对抗链的起点

    Attributes:
        p: l* 上的节点
        approach_time: p 的轨道进入 B_{δ/2}(σ) 的时间
        side: p 的单侧/双侧分类
        accumulated: 被命中一侧沿流延续后离开 σ 所走的分支；p 不是单侧点时为 None
    """

    p: np.ndarray
    approach_time: float
    side: SideClassification
    accumulated: Optional[str] = None

    @property
    def is_side_point(self) -> bool:
        return self.accumulated is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p.tolist(),
            "approach_time": float(self.approach_time),
            "side": self.side.to_dict(),
            "accumulated": self.accumulated,
            "is_side_point": self.is_side_point,
        }


def accumulated_branch(
    spec: VectorFieldSpec,
    sections: SingularSectionPair,
    side: SideClassification,
    nudge: float = SIDE_NUDGE,
    tol: Optional[Tolerance] = None,
) -> Optional[str]:
    """
    单侧点被命中的一侧离开 σ 邻域所走的分支

    沿分割平面法向把点推向被命中的一侧，再判定离开方向。

    Returns:
        "l" 或 "r"；不是单侧点或在 sections.horizon 内未离开时为 None
    """
    if side.verdict is not SideVerdict.SIDE or side.normal is None:
        return None
    x = side.point + nudge * side.component * side.normal
    sign = exit_side(spec, x, sections.sigma, sections.unstable, sections.exit_radius, sections.horizon, tol)
    return SIGN_BRANCHES.get(sign)


def find_side_approach_point(
    spec: VectorFieldSpec,
    sections: SingularSectionPair,
    sample: AttractorSample,
    delta: float,
    T: float,
    eps: float,
    n_radii: int = 4,
    threshold: int = 5,
    budget: float = APPROACH_BUDGET,
    tol: Optional[Tolerance] = None,
) -> SideApproach:
    """
    在 l* 的二分节点中选取对抗链的起点

    每个节点先按吸引子样本做单侧/双侧分类。单侧且能判定延续分支的节点优先，
    其余节点按到截面中线的距离排在后面；返回第一个轨道在预算内进入 B_{δ/2}(σ) 的节点。

    Args:
        spec: 向量场
        sections: 奇异截面对
        sample: 吸引子样本
        delta: 跳跃上界 δ
        T: 最小时长
        eps: 单侧分类的最大半径
        n_radii: 单侧分类的半径个数
        threshold: 单侧分类的命中数阈值
        budget: 奇点接近检测的时间预算
        tol: 积分误差目标

    Returns:
        SideApproach

    Raises:
        NotSingularApproachError: 所有节点都未在预算内接近 σ
    """
    ranked = []
    for section in sections.sections:
        for s, u in zip(section.l_star_s, section.l_star_u):
            p = section.point(u, s)
            side = classify_side(spec, p, sample, eps, n_radii=n_radii, threshold=threshold, tol=tol)
            accumulated = accumulated_branch(spec, sections, side, tol=tol)
            ranked.append(((accumulated is None, abs(float(s)), len(ranked)), p, side, accumulated))
    ranked.sort(key=lambda item: item[0])

    last: Optional[Exception] = None
    for _, p, side, accumulated in ranked:
        try:
            t0 = approach_time(spec, p, sections.sigma, delta / 2.0, t_min=T, budget=budget, tol=tol)
        except NotSingularApproachError as e:
            last = e
            continue
        if accumulated is None:
            logger.warning(f"l* 上没有可用的单侧点，退回到 {side.verdict.value} 节点 p={p}")
        else:
            logger.info(f"单侧起点 p={p}: 一侧延续到分支 {accumulated}, 进入时间 {t0:.4g}")
        return SideApproach(p=p, approach_time=t0, side=side, accumulated=accumulated)
    raise NotSingularApproachError(f"l* 节点均未在预算内进入 B_{delta / 2:.3g}(σ): {last}")


def chain_summary(chain: FiniteChain) -> Dict[str, Any]:
    """报告中使用的链摘要"""
    return {
        "k": chain.k,
        "delta": chain.delta,
        "T": chain.T,
        "durations": chain.durations.tolist(),
        "points": chain.points.tolist(),
        "seed": chain.seed,
        "metadata": dict(chain.metadata),
    }
