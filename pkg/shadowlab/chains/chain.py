"""
有限 (δ,T)-链

链 {x_i; t_i}₀^k、部分和时钟 S_i、拼接求值 x₀*t 以及跳跃缺陷校验。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..errors import DomainError
from ..flow.field import VectorFieldSpec
from ..flow.integrator import DEFAULT_TOLERANCE, Tolerance, Trajectory, integrate

# 校验缺陷时在 δ 之外允许的积分误差倍数
DEFECT_MARGIN_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class ChainClock:
    """部分和 S_0 = 0, S_{i+1} = S_i + t_i"""

    partial_sums: np.ndarray

    @classmethod
    def from_durations(cls, durations: Sequence[float]) -> "ChainClock":
        sums = np.concatenate([[0.0], np.cumsum(np.asarray(durations, dtype=float))])
        return cls(partial_sums=sums)

    @property
    def total(self) -> float:
        """S_{k+1}"""
        return float(self.partial_sums[-1])

    def segment_index(self, t: np.ndarray) -> np.ndarray:
        """满足 S_i ≤ t < S_{i+1} 的 i；t = S_{k+1} 归到最后一段"""
        k = len(self.partial_sums) - 2
        idx = np.searchsorted(self.partial_sums, t, side="right") - 1
        return np.clip(idx, 0, k)


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """
    有限 (δ,T)-链

    Attributes:
        points: (k+1, 3) 链点 x_0..x_k
        durations: (k+1,) 段时长 t_0..t_k
        T: 最小时长参数
        delta: 跳跃上界
        spec: 向量场
        segments: 每个链点出发的轨道段 X_s(x_i), s ∈ [0, t_i]
        seed: 构造时使用的随机种子（若有）
        metadata: 构造器记录的附加信息
    """

    points: np.ndarray
    durations: np.ndarray
    T: float
    delta: float
    spec: VectorFieldSpec
    segments: Tuple[Trajectory, ...]
    seed: Optional[int] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        spec: VectorFieldSpec,
        points: Sequence[Sequence[float]],
        durations: Sequence[float],
        delta: float,
        T: Optional[float] = None,
        tol: Optional[Tolerance] = None,
        seed: Optional[int] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "FiniteChain":
        """
        创建链并积分各段

        Raises:
            ValueError: 形状不匹配、时长小于 T 或 δ < 0
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        durs = np.asarray(durations, dtype=float).reshape(-1)
        if len(pts) != len(durs) or len(pts) == 0:
            raise ValueError(f"链点数 {len(pts)} 与时长数 {len(durs)} 不一致")
        T = float(durs.min()) if T is None else float(T)
        if np.any(durs < T):
            raise ValueError(f"存在小于 T={T} 的段时长: {durs.min()}")
        if T < 0 or delta < 0:
            raise ValueError(f"T 与 δ 必须非负: T={T}, δ={delta}")
        tol = tol or DEFAULT_TOLERANCE
        segments = tuple(integrate(spec, x, t, tol) for x, t in zip(pts, durs))
        return cls(
            points=pts,
            durations=durs,
            T=T,
            delta=float(delta),
            spec=spec,
            segments=segments,
            seed=seed,
            metadata=dict(metadata or {}),
        )

    @property
    def k(self) -> int:
        return len(self.points) - 1

    @property
    def clock(self) -> ChainClock:
        return ChainClock.from_durations(self.durations)

    @property
    def total_time(self) -> float:
        return self.clock.total

    @property
    def tolerance(self) -> Tolerance:
        return self.segments[0].tolerance

    def __call__(self, t: float) -> np.ndarray:
        return chain_eval(self, t)


def chain_sample(chain: FiniteChain, ts: np.ndarray) -> np.ndarray:
    """
    向量化的 x₀*t

    Raises:
        DomainError: 存在 t 超出 [0, S_{k+1}]
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    clock = chain.clock
    if np.any(ts < 0) or np.any(ts > clock.total):
        raise DomainError(f"链时间超出范围 [0, {clock.total}]")
    idx = clock.segment_index(ts)
    out = np.empty((len(ts), 3))
    for i in np.unique(idx):
        mask = idx == i
        local = ts[mask] - clock.partial_sums[i]
        out[mask] = chain.segments[i].sample(np.minimum(local, chain.durations[i]))
    return out


def chain_eval(chain: FiniteChain, t: float) -> np.ndarray:
    """
    求 x₀*t = X_{t−S_i}(x_i)，S_i ≤ t < S_{i+1}

    t = S_{k+1} 时返回 X_{t_k}(x_k)。
    """
    return chain_sample(chain, np.array([t]))[0]


@dataclass
class ChainValidation:
    """链校验结果"""

    defects: List[float]
    delta: float
    margins: List[float]
    failing: List[int]

    @property
    def passed(self) -> bool:
        return not self.failing

    @property
    def max_defect(self) -> float:
        return max(self.defects, default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "defects": list(self.defects),
            "delta": self.delta,
            "margins": list(self.margins),
            "failing": list(self.failing),
            "passed": self.passed,
        }


def jump_sizes(chain: FiniteChain) -> np.ndarray:
    """各接合点 S_{i+1} 处的跳跃 |X_{t_i}(x_i) − x_{i+1}|"""
    ends = np.array([seg.endpoint for seg in chain.segments[:-1]]).reshape(-1, 3)
    return np.linalg.norm(ends - chain.points[1:], axis=1)


def validate_chain(chain: FiniteChain) -> ChainValidation:
    """
    逐接合点计算缺陷 d(X_{t_i}(x_i), x_{i+1})

    缺陷不超过 δ 加上积分误差余量（10 倍误差尺度）即通过。
    """
    defects = jump_sizes(chain)
    tol = chain.tolerance
    margins = [DEFECT_MARGIN_FACTOR * tol.scale(x) for x in chain.points[1:]]
    failing = [i for i, (d, m) in enumerate(zip(defects, margins)) if d > chain.delta + m]
    if failing:
        logger.debug(f"链校验失败的接合点: {failing}")
    return ChainValidation(
        defects=[float(d) for d in defects],
        delta=chain.delta,
        margins=[float(m) for m in margins],
        failing=failing,
    )


def chain_from_orbit(
    spec: VectorFieldSpec,
    x0: Sequence[float],
    durations: Sequence[float],
    delta: float = 0.0,
    T: Optional[float] = None,
    tol: Optional[Tolerance] = None,
) -> FiniteChain:
    """沿一条真实轨道取点的零缺陷链 x_{i+1} = X_{t_i}(x_i)"""
    tol = tol or DEFAULT_TOLERANCE
    points = [np.asarray(x0, dtype=float)]
    for t in list(durations)[:-1]:
        points.append(integrate(spec, points[-1], t, tol).endpoint)
    return FiniteChain.create(spec, points, durations, delta=delta, T=T, tol=tol)


def chain_window(chain: FiniteChain, i0: int, i1: int) -> FiniteChain:
    """子链 {x_i; t_i}, i0 ≤ i ≤ i1"""
    if not 0 <= i0 <= i1 <= chain.k:
        raise ValueError(f"非法窗口 [{i0}, {i1}]，链长度 {chain.k + 1}")
    return FiniteChain(
        points=chain.points[i0 : i1 + 1].copy(),
        durations=chain.durations[i0 : i1 + 1].copy(),
        T=chain.T,
        delta=chain.delta,
        spec=chain.spec,
        segments=chain.segments[i0 : i1 + 1],
        seed=chain.seed,
        metadata={**chain.metadata, "window": [i0, i1]},
    )
