"""
追踪验证器

对给定的有限链与候选点集合，逐个求单调时间对齐的最小误差，
并给出带见证 (z, g) 的判定。traced=True 是可复核的证书；
traced=False 只是对所评估候选集合的有界结论。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..chains.builders import uniform_in_ball
from ..chains.chain import FiniteChain, chain_sample
from ..core.pool import WorkerPool
from ..errors import EscapedError, GridTooCoarseError
from ..flow.field import VectorFieldSpec
from ..flow.integrator import Tolerance, Trajectory, integrate
from ..geometry.attractor import AttractorSample
from .alignment import align_normal, align_strong, align_weak, build_grid
from .reparam import Reparametrization, classify


class TraceClass(str, Enum):
    """重参数化类"""

    WEAK = "weak"
    NORMAL = "normal"
    STRONG = "strong"


def parse_trace_class(value: Union[str, TraceClass]) -> TraceClass:
    try:
        return TraceClass(value)
    except ValueError:
        raise ValueError(f"未知的追踪类: {value}，可选 weak/normal/strong")


@dataclass
class TraceBudget:
    """
    候选生成与网格预算

    Attributes:
        subsample: 从吸引子样本等间隔抽取的候选数
        cloud_points: B_{2ε}(x_0) 内样本点的上限
        refine_depth: 细化层数，第 k 层半径 2ε·2^{-k}
        refine_points: 每层细化的随机点数
        restrict_to_attractor: 候选只取吸引子样本点：不含 x_0，细化点替换为最近的样本点
        resolution: 细化点替换为样本点的最大距离
        orbit_factor: 候选轨道长度相对链总时长的倍数
        grid_spacing: 自适应网格目标位移，None 表示 ε/8
        max_dt: 网格最大时间间隔
        min_nodes: 每段最少节点数
        max_grid_refinements: 连续模过大时网格加密的最多次数
        batch_size: 每批评估的候选数（剪枝在批之间进行）
    """

    subsample: int = 1000
    cloud_points: int = 1000
    refine_depth: int = 12
    refine_points: int = 32
    restrict_to_attractor: bool = False
    resolution: float = 1e-3
    orbit_factor: float = 1.5
    grid_spacing: Optional[float] = None
    max_dt: float = 0.05
    min_nodes: int = 2
    max_grid_refinements: int = 3
    batch_size: int = 64

    def spacing_for(self, eps: float) -> float:
        return self.grid_spacing if self.grid_spacing is not None else eps / 8.0


@dataclass(eq=False)
class CandidateResult:
    """单个候选的评估结果"""

    z: np.ndarray
    error: float
    g: Optional[Reparametrization] = None
    modulus: float = 0.0
    grid_times: Optional[np.ndarray] = None
    spacing: float = 0.0
    too_coarse: bool = False

    @property
    def key(self) -> Tuple[float, Tuple[float, ...]]:
        return (self.error, tuple(float(v) for v in self.z))


@dataclass(eq=False)
class TraceVerdict:
    """
    追踪判定

    traced 当且仅当 achieved_error ≤ eps 且见证 best_g 属于所声明的类。
    """

    eps: float
    trace_class: TraceClass
    best_z: Optional[np.ndarray]
    best_g: Optional[Reparametrization]
    achieved_error: float
    traced: bool
    candidate_count: int
    eps_rep: float = 0.0
    evaluated: int = 0
    pruned: int = 0
    refinement_depth: int = 0
    modulus: float = 0.0
    grid_spacing: float = 0.0
    grid_times: Optional[np.ndarray] = None
    orbit_length: float = 0.0
    inconclusive: bool = False
    coarse_candidates: int = 0
    candidate_source: str = "explicit"
    delta: Optional[float] = None
    witness_in_class: bool = False

    @property
    def state(self) -> str:
        if self.traced:
            return "traced"
        return "inconclusive" if self.inconclusive else "not-traced"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": float(self.eps),
            "class": self.trace_class.value,
            "eps_rep": float(self.eps_rep),
            "best_z": None if self.best_z is None else [float(v) for v in self.best_z],
            "best_g": None if self.best_g is None else self.best_g.to_dict(),
            "achieved_error": _finite_or_none(self.achieved_error),
            "traced": bool(self.traced),
            "state": self.state,
            "candidate_count": int(self.candidate_count),
            "evaluated": int(self.evaluated),
            "pruned": int(self.pruned),
            "refinement_depth": int(self.refinement_depth),
            "modulus": float(self.modulus),
            "grid_spacing": float(self.grid_spacing),
            "grid_times": None if self.grid_times is None else [float(t) for t in self.grid_times],
            "orbit_length": float(self.orbit_length),
            "inconclusive": bool(self.inconclusive),
            "coarse_candidates": int(self.coarse_candidates),
            "candidate_source": self.candidate_source,
            "delta": self.delta,
            "witness_in_class": bool(self.witness_in_class),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TraceVerdict":
        error = data.get("achieved_error")
        return cls(
            eps=float(data["eps"]),
            trace_class=parse_trace_class(data["class"]),
            best_z=None if data.get("best_z") is None else np.asarray(data["best_z"], dtype=float),
            best_g=None if data.get("best_g") is None else Reparametrization.from_dict(data["best_g"]),
            achieved_error=float("inf") if error is None else float(error),
            traced=bool(data["traced"]),
            candidate_count=int(data["candidate_count"]),
            eps_rep=float(data.get("eps_rep", 0.0)),
            evaluated=int(data.get("evaluated", 0)),
            pruned=int(data.get("pruned", 0)),
            refinement_depth=int(data.get("refinement_depth", 0)),
            modulus=float(data.get("modulus", 0.0)),
            grid_spacing=float(data.get("grid_spacing", 0.0)),
            grid_times=None if data.get("grid_times") is None else np.asarray(data["grid_times"], dtype=float),
            orbit_length=float(data.get("orbit_length", 0.0)),
            inconclusive=bool(data.get("inconclusive", False)),
            coarse_candidates=int(data.get("coarse_candidates", 0)),
            candidate_source=data.get("candidate_source", "explicit"),
            delta=data.get("delta"),
            witness_in_class=bool(data.get("witness_in_class", False)),
        )


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


@dataclass(eq=False)
class _Candidate:
    z: np.ndarray
    sample_time: Optional[float] = None


def _candidate_orbit(
    chain: FiniteChain,
    candidate: _Candidate,
    length: float,
    sample: Optional[AttractorSample],
    tol: Optional[Tolerance],
) -> Trajectory:
    """样本长轨道上的视图可用时直接截取，否则积分"""
    traj = sample.trajectory if sample is not None else None
    if candidate.sample_time is not None and traj is not None and candidate.sample_time + length <= traj.T:
        return traj.segment(candidate.sample_time, candidate.sample_time + length)
    return integrate(chain.spec, candidate.z, length, tol or chain.tolerance)


def evaluate_candidate(
    chain: FiniteChain,
    candidate: _Candidate,
    eps: float,
    trace_class: TraceClass,
    eps_rep: float,
    budget: TraceBudget,
    sample: Optional[AttractorSample] = None,
    tol: Optional[Tolerance] = None,
) -> CandidateResult:
    """
    评估一个候选点

    网格连续模超过 ε/4 时把 spacing 与 max_dt 减半重试，
    超过 max_grid_refinements 次后标记为过粗。
    """
    z = np.asarray(candidate.z, dtype=float)
    length = budget.orbit_factor * chain.total_time
    try:
        traj = _candidate_orbit(chain, candidate, length, sample, tol)
    except EscapedError as e:
        logger.debug(f"候选 {z} 的轨道逃逸: {e}")
        return CandidateResult(z=z, error=float("inf"))

    spacing, max_dt = budget.spacing_for(eps), budget.max_dt
    last_modulus = float("inf")
    for _ in range(budget.max_grid_refinements + 1):
        try:
            grid = build_grid(chain, traj, spacing, max_dt, budget.min_nodes)
            kwargs = dict(eps=eps, grid=grid)
            if trace_class is TraceClass.STRONG:
                result = align_strong(chain, traj, eps_rep, **kwargs)
            elif trace_class is TraceClass.NORMAL:
                result = align_normal(chain, traj, **kwargs)
            else:
                result = align_weak(chain, traj, **kwargs)
        except GridTooCoarseError as e:
            last_modulus = e.modulus
            spacing, max_dt = spacing / 2.0, max_dt / 2.0
            continue
        return CandidateResult(
            z=z,
            error=result.error,
            g=result.g,
            modulus=result.modulus,
            grid_times=result.grid.tau,
            spacing=spacing,
        )
    logger.warning(f"候选 {z} 的网格加密 {budget.max_grid_refinements} 次后连续模仍为 {last_modulus:.3g}")
    return CandidateResult(z=z, error=float("inf"), modulus=last_modulus, spacing=spacing, too_coarse=True)


def _evaluate_one(args: Tuple) -> CandidateResult:
    return evaluate_candidate(*args)


def base_candidates(
    chain: FiniteChain,
    eps: float,
    candidates: Optional[Sequence[Sequence[float]]],
    sample: Optional[AttractorSample],
    budget: TraceBudget,
) -> Tuple[List[_Candidate], str]:
    """
    初始候选集合

    显式列表原样使用；吸引子样本取等间隔子样本与 B_{2ε}(x_0) 内的样本点，
    不限定在吸引子上时再加上 x_0 本身。
    """
    if candidates is not None:
        points = np.asarray(candidates, dtype=float).reshape(-1, 3)
        return [_Candidate(p) for p in points], "explicit"
    if sample is None or len(sample) == 0:
        raise ValueError("必须提供候选点列表或吸引子样本")

    x0 = chain.points[0]
    n = len(sample)
    picks = np.unique(np.linspace(0, n - 1, min(budget.subsample, n)).astype(int))
    near = sample.indices_within(x0, 2.0 * eps)
    if len(near) > budget.cloud_points:
        near = near[np.unique(np.linspace(0, len(near) - 1, budget.cloud_points).astype(int))]
    indices = np.union1d(picks, near)
    out = [] if budget.restrict_to_attractor else [_Candidate(x0.copy())]
    out.extend(_Candidate(sample.points[i], float(sample.times[i])) for i in indices)
    restricted = ", restricted" if budget.restrict_to_attractor else ""
    return out, f"attractor-sample(subsample={len(picks)}, cloud={len(near)}{restricted})"


def refinement_cloud(
    center: np.ndarray,
    eps: float,
    level: int,
    budget: TraceBudget,
    rng: np.random.Generator,
    sample: Optional[AttractorSample] = None,
) -> List[_Candidate]:
    """
    第 level 层细化点：B_{2ε·2^{-level}}(center) 内均匀随机

    限定在吸引子上时，分辨率内的点换成最近的样本点，其余丢弃。
    """
    radius = 2.0 * eps * 0.5**level
    points = np.array([center + uniform_in_ball(rng, radius) for _ in range(budget.refine_points)])
    if budget.restrict_to_attractor and sample is not None:
        snapped = sample.snap(points, budget.resolution)
        return [_Candidate(sample.points[i], float(sample.times[i])) for i in snapped]
    return [_Candidate(p) for p in points]


class _Search:
    """按下界排序、分批评估并剪枝的候选搜索"""

    def __init__(
        self,
        chain: FiniteChain,
        eps: float,
        trace_class: TraceClass,
        eps_rep: float,
        budget: TraceBudget,
        sample: Optional[AttractorSample],
        pool: WorkerPool,
        tol: Optional[Tolerance],
    ):
        self.chain = chain
        self.eps = eps
        self.trace_class = trace_class
        self.eps_rep = eps_rep
        self.budget = budget
        self.sample = sample
        self.pool = pool
        self.tol = tol
        self.best: Optional[CandidateResult] = None
        self.count = 0
        self.evaluated = 0
        self.pruned = 0
        self.coarse = 0

    def run(self, candidates: List[_Candidate]) -> None:
        x0 = self.chain.points[0]
        self.count += len(candidates)
        bounds = [float(np.linalg.norm(c.z - x0)) for c in candidates]
        order = sorted(range(len(candidates)), key=lambda i: (bounds[i], tuple(candidates[i].z)))
        size = max(1, self.budget.batch_size)
        for start in range(0, len(order), size):
            batch = []
            for i in order[start : start + size]:
                if self.best is not None and bounds[i] > self.best.error:
                    self.pruned += 1
                else:
                    batch.append(candidates[i])
            if not batch:
                continue
            jobs = [
                (self.chain, c, self.eps, self.trace_class, self.eps_rep, self.budget, self.sample, self.tol)
                for c in batch
            ]
            for result in self.pool.map_ordered(_evaluate_one, jobs):
                self.evaluated += 1
                self.coarse += int(result.too_coarse)
                if self.best is None or result.key < self.best.key:
                    self.best = result


def verify_trace(
    chain: FiniteChain,
    eps: float,
    trace_class: Union[str, TraceClass] = TraceClass.WEAK,
    candidates: Optional[Sequence[Sequence[float]]] = None,
    sample: Optional[AttractorSample] = None,
    eps_rep: float = 0.0,
    budget: Optional[TraceBudget] = None,
    workers: int = 1,
    rng: Optional[np.random.Generator] = None,
    seed: Optional[int] = None,
    tol: Optional[Tolerance] = None,
) -> TraceVerdict:
    """
    判定链能否被某个候选点 ε-追踪

    Args:
        chain: 有限链
        eps: 追踪精度 ε
        trace_class: weak / normal / strong
        candidates: 显式候选点列表
        sample: 吸引子样本（未给出 candidates 时作为候选来源）
        eps_rep: strong 类的 ε_rep
        budget: 候选与网格预算
        workers: 并行评估的进程数
        rng: 细化点的随机数生成器
        seed: 未给出 rng 时使用的种子
        tol: 候选轨道的积分误差目标

    Returns:
        TraceVerdict
    """
    if eps <= 0:
        raise ValueError(f"eps 必须为正: {eps}")
    cls = parse_trace_class(trace_class)
    budget = budget or TraceBudget()
    rng = rng if rng is not None else np.random.default_rng(seed)
    pool = WorkerPool(workers)

    initial, source = base_candidates(chain, eps, candidates, sample, budget)
    search = _Search(chain, eps, cls, eps_rep, budget, sample, pool, tol)
    search.run(initial)

    depth = 0
    for level in range(budget.refine_depth):
        center = search.best.z if search.best is not None and np.isfinite(search.best.error) else chain.points[0]
        cloud = refinement_cloud(center, eps, level, budget, rng, sample)
        if cloud:
            search.run(cloud)
        depth = level + 1

    best = search.best
    error = best.error if best is not None else float("inf")
    traced = bool(error <= eps)
    inconclusive = not traced and search.coarse > 0
    verdict = TraceVerdict(
        eps=float(eps),
        trace_class=cls,
        best_z=None if best is None else best.z,
        best_g=None if best is None else best.g,
        achieved_error=float(error),
        traced=traced,
        candidate_count=search.count,
        eps_rep=float(eps_rep),
        evaluated=search.evaluated,
        pruned=search.pruned,
        refinement_depth=depth,
        modulus=0.0 if best is None else float(best.modulus),
        grid_spacing=0.0 if best is None else float(best.spacing),
        grid_times=None if best is None else best.grid_times,
        orbit_length=budget.orbit_factor * chain.total_time,
        inconclusive=inconclusive,
        coarse_candidates=search.coarse,
        candidate_source=source,
        delta=float(chain.delta),
    )
    verdict.witness_in_class = verdict_class_ok(verdict)
    if verdict.traced and not verdict.witness_in_class:
        logger.warning(f"见证 g 不属于 {cls.value} 类，撤销 traced 结论")
        verdict.traced = False
    log_level = "warning" if inconclusive else "info"
    getattr(logger, log_level)(
        f"追踪判定 [{cls.value}] ε={eps:g}: {verdict.state}, 误差 {error:.4g}, "
        f"候选 {search.count}（评估 {search.evaluated}, 剪枝 {search.pruned}）"
    )
    return verdict


def verdict_class_ok(verdict: TraceVerdict) -> bool:
    """见证 g 是否属于判定所声明的类"""
    if verdict.best_g is None:
        return False
    classes = classify(verdict.best_g, verdict.eps_rep)
    if verdict.trace_class is TraceClass.STRONG:
        return classes.in_rep_eps
    if verdict.trace_class is TraceClass.NORMAL:
        return classes.in_rep_star
    return classes.in_rep


def recheck_certificate(
    chain: FiniteChain,
    verdict: TraceVerdict,
    spec: Optional[VectorFieldSpec] = None,
    tol: Optional[Tolerance] = None,
) -> float:
    """
    由序列化的见证重新计算网格上的最大距离

    Returns:
        max_a d(x₀*τ_a, X_{g(τ_a)}(z))；无见证时为 +inf
    """
    if verdict.best_z is None or verdict.best_g is None or verdict.grid_times is None:
        return float("inf")
    spec = spec or chain.spec
    tau = np.asarray(verdict.grid_times, dtype=float)
    s = np.asarray(verdict.best_g(tau), dtype=float)
    horizon = float(np.max(s))
    orbit = integrate(spec, verdict.best_z, horizon, tol or chain.tolerance)
    distances = np.linalg.norm(chain_sample(chain, tau) - orbit.sample(np.clip(s, 0.0, horizon)), axis=1)
    return float(np.max(distances))


@dataclass
class AuditRow:
    z: np.ndarray
    weak: float
    normal: float
    strong: float
    # ε_rep = 0 时强类只计对角单元，与弱类的比较允许相差一个连续模
    slack: float = 0.0

    @property
    def monotone(self) -> bool:
        return self.weak <= self.normal <= self.strong + self.slack

    def to_dict(self) -> Dict[str, Any]:
        return {
            "z": [float(v) for v in self.z],
            "weak": _finite_or_none(self.weak),
            "normal": _finite_or_none(self.normal),
            "strong": _finite_or_none(self.strong),
            "monotone": self.monotone,
        }


@dataclass
class ImplicationAudit:
    """三类对齐误差的逐候选比较"""

    eps: float
    eps_rep: float
    rows: List[AuditRow] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(not row.monotone for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "eps_rep": self.eps_rep,
            "violations": self.violations,
            "rows": [row.to_dict() for row in self.rows],
        }


def implication_audit(
    chain: FiniteChain,
    eps: float,
    candidates: Sequence[Sequence[float]],
    eps_rep: float = 0.1,
    spacing: Optional[float] = None,
    max_dt: float = 0.05,
    orbit_factor: float = 1.5,
    tol: Optional[Tolerance] = None,
) -> ImplicationAudit:
    """
    在同一网格上比较 weak、normal、strong 三类误差

    类的嵌套使最小值满足 weak ≤ normal ≤ strong。
    """
    spacing = spacing if spacing is not None else eps / 8.0
    audit = ImplicationAudit(eps=float(eps), eps_rep=float(eps_rep))
    length = orbit_factor * chain.total_time
    for z in np.asarray(candidates, dtype=float).reshape(-1, 3):
        traj = integrate(chain.spec, z, length, tol or chain.tolerance)
        grid = build_grid(chain, traj, spacing, max_dt)
        weak = align_weak(chain, traj, grid=grid).error
        normal = align_normal(chain, traj, grid=grid).error
        strong = align_strong(chain, traj, eps_rep, grid=grid).error
        slack = grid.modulus if eps_rep == 0 else 0.0
        audit.rows.append(AuditRow(z=z, weak=weak, normal=normal, strong=strong, slack=slack))
    if audit.violations:
        logger.warning(f"类单调性违例 {audit.violations}/{len(audit.rows)}")
    else:
        logger.info(f"类单调性审计通过: {len(audit.rows)} 个候选")
    return audit


@dataclass
class DeltaSweepRow:
    delta: float
    verdicts: List[TraceVerdict]

    @property
    def all_traced(self) -> bool:
        return bool(self.verdicts) and all(v.traced for v in self.verdicts)

    @property
    def worst_error(self) -> float:
        return max((v.achieved_error for v in self.verdicts), default=float("inf"))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta": self.delta,
            "all_traced": self.all_traced,
            "worst_error": _finite_or_none(self.worst_error),
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


@dataclass
class DeltaSweep:
    """固定 ε 与 T，按 δ 递减扫描的结果"""

    eps: float
    T: float
    rows: List[DeltaSweepRow] = field(default_factory=list)

    @property
    def delta_estimate(self) -> Optional[float]:
        """所有构造出的链都被追踪的最大 δ；没有则为 None"""
        traced = [row.delta for row in self.rows if row.all_traced]
        return max(traced) if traced else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "T": self.T,
            "delta_estimate": self.delta_estimate,
            "rows": [row.to_dict() for row in self.rows],
        }


ChainBuilder = Callable[[float], Union[FiniteChain, Sequence[FiniteChain]]]


def delta_sweep(
    spec: VectorFieldSpec,
    eps: float,
    T: float,
    deltas: Sequence[float],
    builder: ChainBuilder,
    **verify_kwargs: Any,
) -> DeltaSweep:
    """
    有限链版本的扫描：对每个 δ 构造链并判定

    Args:
        spec: 向量场（仅用于日志与校验链的向量场一致）
        eps: 追踪精度
        T: 最小时长参数
        deltas: 严格递减的 δ 序列
        builder: builder(δ) 返回一条或多条链
        **verify_kwargs: 透传给 verify_trace

    Returns:
        DeltaSweep
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValueError("δ 序列不能为空")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError(f"δ 序列必须严格递减: {deltas}")
    sweep = DeltaSweep(eps=float(eps), T=float(T))
    for delta in deltas:
        built = builder(delta)
        chains = [built] if isinstance(built, FiniteChain) else list(built)
        for c in chains:
            if c.spec.name != spec.name:
                raise ValueError(f"链的向量场 {c.spec.name} 与 {spec.name} 不一致")
        verdicts = [verify_trace(c, eps, **verify_kwargs) for c in chains]
        sweep.rows.append(DeltaSweepRow(delta=delta, verdicts=verdicts))
        logger.info(f"δ={delta:g}: {len(chains)} 条链, 全部追踪={sweep.rows[-1].all_traced}")
    return sweep
