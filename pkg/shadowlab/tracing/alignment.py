"""
单调时间对齐

在链时间网格 τ_a 与候选轨道时间网格 s_b 上，求单调匹配路径使最大匹配距离最小：
弱类为带自由终点的离散 Fréchet 值；强类在相邻链节点之间限制弦斜率
g 落在 [1−ε_rep, 1+ε_rep] 内。ε_rep > 0 时强类每一步的代价包含它在网格上光栅化
出的阶梯路径所经过的全部单元，因此强类值不小于弱类值；ε_rep = 0 时
只计对角单元，值就是恒等对齐在链网格上的最大距离。
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from ..chains.chain import FiniteChain, chain_sample
from ..errors import GridTooCoarseError
from ..flow.integrator import Trajectory
from .reparam import SLOPE_RTOL, Reparametrization

Path = List[Tuple[int, int]]

# 网格时间去重的相对容差（相对 max(1, 链总时长)）
TIME_RTOL = 1e-12


@dataclass(eq=False)
class AlignmentGrid:
    """
    对齐网格

    Attributes:
        tau: 链时间节点（含每个 S_i 与 S_{k+1}）
        s: 候选轨道时间节点
        chain_values: 链在 tau 处的取值
        orbit_values: 轨道在 s 处的取值
        distances: D[a][b] = d(x₀*τ_a, X_{s_b}(z))
        modulus: 单元连续模（速度上界 × 单元宽度）
    """

    tau: np.ndarray
    s: np.ndarray
    chain_values: np.ndarray
    orbit_values: np.ndarray
    distances: np.ndarray
    modulus: float

    @property
    def shape(self) -> Tuple[int, int]:
        return self.distances.shape


@dataclass(eq=False)
class Alignment:
    """对齐结果：离散化 sup 距离、见证重参数化与匹配路径"""

    error: float
    g: Optional[Reparametrization]
    path: Path
    grid: Optional[AlignmentGrid]
    modulus: float = 0.0

    def __iter__(self):
        yield self.error
        yield self.g


def weak_alignment(D: np.ndarray) -> Tuple[float, Path]:
    """
    带自由终点的离散 Fréchet 值

    路径从 (0, 0) 出发，每步 (1,0)、(0,1) 或 (1,1)，止于最后一行的任意列。
    按反对角线向量化。

    Returns:
        (最小的最大匹配距离, 路径)
    """
    D = np.asarray(D, dtype=float)
    N, M = D.shape
    P = np.full((N + 1, M + 1), np.inf)
    P[0, 0] = -np.inf
    for k in range(N + M - 1):
        a = np.arange(max(0, k - M + 1), min(N - 1, k) + 1)
        b = k - a
        best = np.minimum(np.minimum(P[a, b + 1], P[a + 1, b]), P[a, b])
        P[a + 1, b + 1] = np.maximum(D[a, b], best)
    V = P[1:, 1:]
    end = int(np.argmin(V[N - 1]))
    return float(V[N - 1, end]), _backtrack_weak(V, N - 1, end)


def _backtrack_weak(V: np.ndarray, a: int, b: int) -> Path:
    path = [(a, b)]
    while (a, b) != (0, 0):
        options = []
        if a > 0 and b > 0:
            options.append((V[a - 1, b - 1], 0, (a - 1, b - 1)))
        if a > 0:
            options.append((V[a - 1, b], 1, (a - 1, b)))
        if b > 0:
            options.append((V[a, b - 1], 2, (a, b - 1)))
        a, b = min(options)[2]
        path.append((a, b))
    return path[::-1]


def band_alignment(
    D: np.ndarray,
    tau: Sequence[float],
    s: Sequence[float],
    eps_rep: float,
) -> Tuple[float, Path]:
    """
    斜率受限的对齐

    每个链节点 a 匹配唯一的轨道节点 b_a，b_0 = 0；相邻匹配的斜率
    (s_{b_a} − s_{b_{a−1}}) / (τ_a − τ_{a−1}) 落在 [1−ε_rep, 1+ε_rep] 内。
    一步 (a−1, b') → (a, b) 的代价为 D[a−1][b'+1..b−1] 与 D[a][b] 的最大值；
    ε_rep = 0 时只有斜率为 1 的步可行，代价只取 D[a][b]。

    Returns:
        (值, 路径)；无可行路径时值为 +inf，路径为空
    """
    D = np.asarray(D, dtype=float)
    tau = np.asarray(tau, dtype=float)
    s = np.asarray(s, dtype=float)
    N, M = D.shape
    lo, hi = 1.0 - eps_rep, 1.0 + eps_rep
    slack = SLOPE_RTOL * max(1.0, abs(hi))
    cols = np.arange(M)

    V = np.full((N, M), np.inf)
    V[0, 0] = D[0, 0]
    parent = np.zeros((N, M), dtype=int)
    for a in range(1, N):
        dt = tau[a] - tau[a - 1]
        # 斜率上界允许的最大下标偏移 j = b − b'
        reach = int(np.max(cols - np.searchsorted(s, s - (hi + slack) * dt, side="left")))
        costs = np.full((reach + 1, M), np.inf)
        # inner[b] = max D[a−1][b−j+1..b−1]
        inner = np.full(M, -np.inf)
        for j in range(reach + 1):
            if j >= 2 and eps_rep > 0:
                inner[j:] = np.maximum(inner[j:], D[a - 1][1 : M - j + 1])
            b = cols[j:]
            slope = (s[b] - s[b - j]) / dt
            allowed = (slope >= lo - slack) & (slope <= hi + slack)
            costs[j, j:] = np.where(allowed, np.maximum(V[a - 1][b - j], inner[j:]), np.inf)
        # 并列时取最小的 b'
        j_best = reach - np.argmin(costs[::-1], axis=0)
        parent[a] = cols - j_best
        V[a] = np.maximum(D[a], costs[j_best, cols])

    end = int(np.argmin(V[N - 1]))
    value = float(V[N - 1, end])
    if not np.isfinite(value):
        return value, []
    path = [(N - 1, end)]
    b = end
    for a in range(N - 1, 0, -1):
        b = int(parent[a, b])
        path.append((a - 1, b))
    return value, path[::-1]


def witness_from_path(
    tau: np.ndarray,
    s: np.ndarray,
    path: Path,
    end_slope: float = 0.0,
) -> Reparametrization:
    """
    由匹配路径构造分段线性见证 g

    每个链节点取其第一个匹配的轨道节点；连续取值相同的节点在当前值
    与下一个取值之间的前半段均匀错开，使 g 严格递增。
    """
    first = {}
    for a, b in path:
        first.setdefault(a, b)
    idx = sorted(first)
    u = np.asarray([tau[a] for a in idx], dtype=float)
    v = np.asarray([s[first[a]] for a in idx], dtype=float)
    cell = float(np.min(np.diff(s))) if len(s) > 1 else 1.0

    j = 0
    while j < len(v):
        k = j
        while k + 1 < len(v) and v[k + 1] == v[j]:
            k += 1
        if k > j:
            nxt = v[k + 1] if k + 1 < len(v) else v[j] + cell
            run = k - j + 1
            v[j : k + 1] = v[j] + 0.5 * (nxt - v[j]) * np.arange(run) / run
        j = k + 1
    return Reparametrization(u, v, end_slope, end_slope)


def _speeds(spec, states: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.array([spec.eval(x) for x in states]).reshape(-1, 3), axis=1)


def _adaptive_times(
    spec,
    traj: Trajectory,
    t0: float,
    t1: float,
    spacing: float,
    max_dt: float,
    min_nodes: int,
    passes: int = 4,
) -> np.ndarray:
    """
    [t0, t1) 上的自适应节点

    从积分节点出发逐单元细分，直到每个单元 Δt ≤ max_dt 且 Δt·max(|X| 两端) ≤ spacing。
    """
    if t1 <= t0:
        return np.array([t0])
    inner = traj.times[(traj.times > t0) & (traj.times < t1)]
    times = np.union1d(
        np.concatenate([[t0], inner, [t1]]),
        np.linspace(t0, t1, max(min_nodes, 2), endpoint=False),
    )
    for _ in range(passes):
        speeds = _speeds(spec, traj.sample(times))
        widths = np.diff(times)
        ratio = np.maximum(widths / max_dt, widths * np.maximum(speeds[:-1], speeds[1:]) / spacing)
        pieces = np.maximum(np.ceil(ratio - 1e-9), 1).astype(int)
        if np.all(pieces == 1):
            break
        extra = [times[i] + widths[i] * np.arange(1, m) / m for i, m in enumerate(pieces) if m > 1]
        times = np.union1d(times, np.concatenate(extra))
    return times[:-1]


def strictly_increasing(times: np.ndarray, atol: float) -> np.ndarray:
    """排序后去掉与前一个节点相差不超过 atol 的节点"""
    times = np.sort(np.asarray(times, dtype=float))
    if len(times) == 0:
        return times
    return times[np.concatenate([[True], np.diff(times) > atol])]


def _drop_near(times: np.ndarray, anchors: np.ndarray, atol: float) -> np.ndarray:
    """去掉与 anchors（已排序）中某个节点相差不超过 atol 的节点"""
    if len(anchors) == 0 or len(times) == 0:
        return times
    right = np.clip(np.searchsorted(anchors, times), 0, len(anchors) - 1)
    left = np.clip(right - 1, 0, len(anchors) - 1)
    gap = np.minimum(np.abs(times - anchors[right]), np.abs(times - anchors[left]))
    return times[gap > atol]


def _uniform_times(t0: float, t1: float, max_dt: float, min_nodes: int) -> np.ndarray:
    n = max(min_nodes, int(np.ceil((t1 - t0) / max_dt - 1e-9)))
    return t0 + (t1 - t0) * np.arange(n) / n


def _cell_modulus(spec, times: np.ndarray, values: np.ndarray, ends: np.ndarray) -> float:
    """相邻节点间 Δt × 两端速度的最大值；ends 标记每个单元是否跨越接合点"""
    if len(times) < 2:
        return 0.0
    speeds = np.linalg.norm(np.array([spec.eval(x) for x in values]), axis=1)
    widths = np.diff(times)
    bound = widths * np.maximum(speeds[:-1], speeds[1:])
    return float(np.max(np.where(ends, 0.0, bound), initial=0.0))


def build_grid(
    chain: FiniteChain,
    traj: Trajectory,
    spacing: float,
    max_dt: float = 0.05,
    min_nodes: int = 2,
    uniform: bool = False,
) -> AlignmentGrid:
    """
    构造对齐网格

    Args:
        chain: 有限链
        traj: 候选点 z 的轨道
        spacing: 自适应网格中相邻节点的目标位移
        max_dt: 相邻节点的最大时间间隔
        min_nodes: 每段最少节点数（≥ 2）
        uniform: 为真时按 max_dt 等距取点（链与轨道共用步长）

    Returns:
        AlignmentGrid
    """
    if min_nodes < 2:
        raise ValueError(f"每段最少节点数必须 ≥ 2: {min_nodes}")
    if spacing <= 0 or max_dt <= 0:
        raise ValueError(f"网格参数必须为正: spacing={spacing}, max_dt={max_dt}")
    clock = chain.clock
    atol = TIME_RTOL * max(1.0, clock.total)
    tau_parts, crossing = [], []
    seg_end_values, seg_end_times = [], []
    for i, seg in enumerate(chain.segments):
        if uniform:
            local = _uniform_times(0.0, seg.T, max_dt, min_nodes)
        else:
            local = _adaptive_times(chain.spec, seg, 0.0, seg.T, spacing, max_dt, min_nodes)
        # 平移到全局时钟后去重，并去掉与下一个接合点重合的节点
        shifted = strictly_increasing(clock.partial_sums[i] + local, atol)
        shifted = shifted[(shifted < clock.partial_sums[i + 1] - atol) | (shifted == shifted[0])]
        tau_parts.append(shifted)
        flags = np.zeros(len(shifted), dtype=bool)
        flags[-1] = True
        crossing.append(flags)
        seg_end_values.append(seg.endpoint)
        seg_end_times.append(clock.partial_sums[i + 1])
    tau = np.concatenate(tau_parts + [[clock.total]])
    ends = np.concatenate(crossing)
    chain_values = chain_sample(chain, tau)

    if uniform:
        s = _uniform_times(0.0, traj.T, max_dt, min_nodes)
        s = np.concatenate([s, [traj.T]])
    else:
        s = np.concatenate([_adaptive_times(chain.spec, traj, 0.0, traj.T, spacing, max_dt, min_nodes), [traj.T]])
    # 轨道网格包含链网格节点，斜率为 1 的对齐总是可行
    anchors = tau[tau <= traj.T]
    s = np.union1d(_drop_near(strictly_increasing(s, atol), anchors, atol), anchors)
    orbit_values = traj.sample(s)

    spec = chain.spec
    chain_mod = _cell_modulus(spec, tau, chain_values, ends)
    tail = [
        (T_end - part[-1]) * max(spec.speed(end), spec.speed(chain_sample(chain, part[-1:])[0]))
        for part, T_end, end in zip(tau_parts, seg_end_times, seg_end_values)
    ]
    orbit_mod = _cell_modulus(spec, s, orbit_values, np.zeros(len(s) - 1, dtype=bool))
    modulus = max(chain_mod, orbit_mod, max(tail, default=0.0))
    distances = cdist(chain_values, orbit_values)
    logger.debug(f"对齐网格 {distances.shape}, 连续模 {modulus:.3g}")
    return AlignmentGrid(
        tau=tau,
        s=s,
        chain_values=chain_values,
        orbit_values=orbit_values,
        distances=distances,
        modulus=modulus,
    )


def _checked_grid(
    chain: FiniteChain,
    traj: Trajectory,
    spacing: float,
    max_dt: float,
    min_nodes: int,
    eps: Optional[float],
    grid: Optional[AlignmentGrid],
    uniform: bool = False,
) -> AlignmentGrid:
    grid = grid or build_grid(chain, traj, spacing, max_dt, min_nodes, uniform)
    if eps is not None and grid.modulus > eps / 4.0:
        raise GridTooCoarseError(
            f"网格连续模 {grid.modulus:.3g} 超过 ε/4 = {eps / 4.0:.3g}，需要加密网格",
            modulus=grid.modulus,
        )
    return grid


def align_weak(
    chain: FiniteChain,
    traj: Trajectory,
    spacing: float = 0.01,
    max_dt: float = 0.05,
    min_nodes: int = 2,
    eps: Optional[float] = None,
    grid: Optional[AlignmentGrid] = None,
) -> Alignment:
    """
    弱类对齐（g ∈ Rep）

    Raises:
        GridTooCoarseError: 给出 eps 且连续模超过 ε/4
    """
    grid = _checked_grid(chain, traj, spacing, max_dt, min_nodes, eps, grid)
    value, path = weak_alignment(grid.distances)
    g = witness_from_path(grid.tau, grid.s, path, end_slope=0.0)
    return Alignment(error=value, g=g, path=path, grid=grid, modulus=grid.modulus)


def align_normal(
    chain: FiniteChain,
    traj: Trajectory,
    spacing: float = 0.01,
    max_dt: float = 0.05,
    min_nodes: int = 2,
    eps: Optional[float] = None,
    grid: Optional[AlignmentGrid] = None,
) -> Alignment:
    """正规类对齐（g ∈ Rep*）：弱类见证两端以斜率 1 延拓"""
    weak = align_weak(chain, traj, spacing, max_dt, min_nodes, eps, grid)
    g = weak.g
    extended = Reparametrization(g.breakpoints, g.values, 1.0, 1.0)
    return Alignment(error=weak.error, g=extended, path=weak.path, grid=weak.grid, modulus=weak.modulus)


def align_strong(
    chain: FiniteChain,
    traj: Trajectory,
    eps_rep: float,
    spacing: float = 0.01,
    max_dt: float = 0.05,
    min_nodes: int = 2,
    eps: Optional[float] = None,
    grid: Optional[AlignmentGrid] = None,
) -> Alignment:
    """
    强类对齐（g ∈ Rep(ε_rep)）

    无可行路径时 error 为 +inf，g 为 None。
    """
    if eps_rep < 0:
        raise ValueError(f"eps_rep 必须非负: {eps_rep}")
    grid = _checked_grid(chain, traj, spacing, max_dt, min_nodes, eps, grid)
    value, path = band_alignment(grid.distances, grid.tau, grid.s, eps_rep)
    if not path:
        return Alignment(error=value, g=None, path=[], grid=grid, modulus=grid.modulus)
    g = witness_from_path(grid.tau, grid.s, path, end_slope=1.0)
    return Alignment(error=value, g=g, path=path, grid=grid, modulus=grid.modulus)
