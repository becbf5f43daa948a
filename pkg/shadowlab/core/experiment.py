"""
实验编排

按配置运行一个命名实验：采样、截面与路标、链构造、追踪判定、单侧点分类与增长率测量，
每个阶段计时并把错误归属到阶段名称，最终汇总为 ExperimentReport。
"""

from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from ..chains import (
    FiniteChain,
    build_adversarial_chain,
    build_perturbed_chain,
    build_three_leg_chain,
    SideApproach,
    chain_summary,
    find_side_approach_point,
    uniform_in_ball,
    validate_chain,
)
from ..config.config_manager import ShadowLabConfig
from ..errors import DomainError, GeometryError, StageError
from ..flow import Tolerance, VectorFieldSpec
from ..geometry import (
    AttractorSample,
    SingularSectionPair,
    UnstableBranches,
    bi_side_invariance_audit,
    boundary_type_audit,
    branch_landmarks,
    build_singular_sections,
    classify_side,
    load_point_cloud,
    mirror_defect,
    radius_halving_audit,
    sample_attractor,
    save_point_cloud,
    strong_stable_audit,
)
from ..hyperbolicity import growth_survey, orbit_hyperbolicity
from ..logger_config import log_error_with_context, timed_stage
from ..models import (
    LorenzMapOracle,
    is_lorenz_like,
    lorenz_like_frame,
    make_model,
    oracle_fixed_point,
    oracle_iterate,
)
from ..tracing import TraceVerdict, implication_audit, verify_trace
from .plotting import emit_all
from .reports import ExperimentReport, write_report
from .rng import SeedStream

# 报告中每条分支折线保留的最多点数
POLYLINE_POINTS = 200
# C = 误差/δ 在各 δ 间允许的最大比值
LINEAR_RATIO_BOUND = 2.0
# fpotp-failure 每个 δ 至少评估的候选数
MIN_CANDIDATES = 10_000


@contextmanager
def stage(name: str, timings: Optional[Dict[str, float]] = None) -> Iterator[None]:
    """
    命名阶段：计时，并把内部错误包装为 StageError

    已经是 StageError 的错误原样抛出。
    """
    try:
        with timed_stage(name, timings):
            yield
    except StageError:
        raise
    except Exception as e:
        log_error_with_context(e, {"stage": name})
        raise StageError(name, e) from e


@dataclass
class ExperimentRun:
    """一次实验运行的共享状态"""

    config: ShadowLabConfig
    spec: VectorFieldSpec
    tol: Tolerance
    stream: SeedStream
    report: ExperimentReport
    workers: int

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        with stage(name, self.report.timings):
            yield

    # ---- 共享阶段 ----

    def sample(self) -> AttractorSample:
        cfg = self.config.attractor
        with self.stage("sample-attractor"):
            cache = Path(cfg.cache_path) if cfg.cache_path else None
            if cache is not None and cache.exists():
                logger.info(f"从缓存读取点云: {cache}")
                return load_point_cloud(cache)
            sample = sample_attractor(
                self.spec,
                cfg.x0,
                transient=cfg.transient,
                duration=cfg.duration,
                count=cfg.count,
                tol=self.tol,
                seed=self.config.seed,
            )
            if cache is not None:
                save_point_cloud(sample, cache)
            return sample

    def sigma(self) -> np.ndarray:
        with self.stage("singularity"):
            for q in self.spec.singularities:
                if is_lorenz_like(self.spec, q):
                    return np.asarray(q, dtype=float)
            raise GeometryError(f"向量场 {self.spec.name} 没有 Lorenz 型奇点")

    def landmarks(self, sigma: np.ndarray):
        geo = self.config.geometry
        with self.stage("sections"):
            sections = build_singular_sections(
                self.spec,
                sigma,
                offset=geo.offset,
                extents=tuple(geo.extents),
                transversality_floor=geo.transversality_floor,
                horizon=geo.section_horizon,
                tol=self.tol,
                gamma=geo.gamma,
            )
        with self.stage("landmarks"):
            branches = branch_landmarks(
                self.spec,
                sigma,
                geo.gamma,
                sections,
                beta_floor=geo.beta_floor,
                launches=geo.launches,
                launch_width=geo.launch_width,
                landmark_horizon=geo.landmark_horizon,
                rng=self.stream.spawn("landmarks"),
                tol=self.tol,
            )
        self.report.landmarks = {
            "sections": sections.to_dict(),
            "branches": branches.to_dict(),
            "mirror_defect": mirror_defect(branches) if self.spec.name == "lorenz" else None,
            "polylines": {name: _polyline(branches.branch(name).points) for name in ("l", "r")},
        }
        return sections, branches

    def epsilon(self, branches: Optional[UnstableBranches] = None) -> float:
        if self.config.tracing.epsilon is not None:
            return float(self.config.tracing.epsilon)
        if branches is None or branches.beta is None:
            raise GeometryError("未给出 tracing.epsilon，且没有可用的 β_σ")
        eps = branches.beta / 4.0
        logger.info(f"ε 取 β_σ/4 = {eps:.6g}")
        return eps

    def trace(
        self,
        chain: FiniteChain,
        eps: float,
        key: str,
        sample: Optional[AttractorSample] = None,
        candidates: Optional[Sequence[Sequence[float]]] = None,
    ) -> TraceVerdict:
        tracing = self.config.tracing
        with self.stage("verify-trace"):
            verdict = verify_trace(
                chain,
                eps,
                trace_class=tracing.trace_class,
                candidates=candidates,
                sample=sample,
                eps_rep=tracing.eps_rep,
                budget=tracing.to_budget(),
                workers=self.workers,
                rng=self.stream.spawn(key),
                tol=self.tol,
            )
        self.report.traces.append(
            {
                "delta": chain.delta,
                "chain": chain_summary(chain),
                "validation": validate_chain(chain).to_dict(),
                "verdict": verdict.to_dict(),
            }
        )
        budget = self.report.budget
        budget["traces"] = budget.get("traces", 0) + 1
        budget["candidates"] = budget.get("candidates", 0) + verdict.candidate_count
        budget["evaluated"] = budget.get("evaluated", 0) + verdict.evaluated
        budget["pruned"] = budget.get("pruned", 0) + verdict.pruned
        budget["coarse_candidates"] = budget.get("coarse_candidates", 0) + verdict.coarse_candidates
        return verdict

    def audit_classes(self, chain: FiniteChain, eps: float) -> None:
        tracing = self.config.tracing
        n = tracing.audit_candidates
        if n <= 0:
            return
        with self.stage("implication-audit"):
            rng = self.stream.spawn("implication-audit")
            x0 = chain.points[0]
            candidates = [x0] + [x0 + uniform_in_ball(rng, 2.0 * eps) for _ in range(n - 1)]
            audit = implication_audit(
                chain,
                eps,
                candidates,
                eps_rep=tracing.eps_rep,
                spacing=tracing.grid_spacing,
                max_dt=tracing.max_dt,
                orbit_factor=tracing.orbit_factor,
                tol=self.tol,
            )
        self.report.audits["implication"] = audit.to_dict()

    def growth(self, sample: AttractorSample) -> None:
        cfg = self.config.growth
        if cfg.points <= 0:
            return
        with self.stage("growth"):
            picks = np.unique(np.linspace(0, len(sample) - 1, min(cfg.points, len(sample))).astype(int))
            reports = growth_survey(self.spec, sample.points[picks], cfg.horizon, cfg.renorm, self.tol)
        self.report.growth.extend(r.to_dict() for r in reports)

    def oracle(self) -> None:
        cfg = self.config.oracle
        with self.stage("oracle"):
            oracle = LorenzMapOracle(c=cfg.c, alpha=cfg.alpha)
            it = oracle_iterate(oracle, cfg.x0, cfg.steps)
        self.report.audits["oracle"] = {
            "c": oracle.c,
            "alpha": oracle.alpha,
            "x0": cfg.x0,
            "word": it.word(),
            "boundary_step": it.boundary_step,
            "fixed_points": {"+": oracle_fixed_point(oracle, 1), "-": oracle_fixed_point(oracle, -1)},
        }


def _polyline(points: np.ndarray) -> List[List[float]]:
    step = max(1, int(np.ceil(len(points) / POLYLINE_POINTS)))
    picked = points[::step]
    if len(points) and not np.array_equal(picked[-1], points[-1]):
        picked = np.vstack([picked, points[-1]])
    return picked.tolist()


def _finite_errors(verdicts: Sequence[TraceVerdict]) -> List[float]:
    return [v.achieved_error for v in verdicts if np.isfinite(v.achieved_error)]


# ---- 各实验 ----


def _adversarial_branch(branch: str, approach: SideApproach) -> str:
    """auto 且起点不是单侧点时退回 r，由 p-side-point 断言记录"""
    if branch == "auto" and approach.accumulated is None:
        logger.warning("起点不是单侧点，跳跃分支退回 r")
        return "r"
    return branch


def _fpotp_failure(run: ExperimentRun) -> None:
    cfg = run.config
    geo = cfg.geometry
    sample = run.sample()
    sigma = run.sigma()
    sections, branches = run.landmarks(sigma)
    eps = run.epsilon(branches)
    deltas = cfg.tracing.deltas

    with run.stage("approach-point"):
        approach = find_side_approach_point(
            run.spec, sections, sample, min(deltas), cfg.chain.T, geo.side_eps,
            n_radii=geo.side_radii, threshold=geo.side_threshold,
            budget=cfg.chain.approach_budget, tol=run.tol,
        )
    branch = _adversarial_branch(cfg.chain.branch, approach)
    run.report.sides.append({**approach.side.to_dict(), "label": "p"})
    run.report.audits["approach_point"] = {**approach.to_dict(), "branch": branch}

    verdicts = []
    chains = []
    for delta in deltas:
        with run.stage("build-chain"):
            chain = build_adversarial_chain(
                run.spec, approach.p, sigma, branch, delta, cfg.chain.T, branches,
                accumulated=approach.accumulated, budget=cfg.chain.approach_budget, tol=run.tol,
            )
        chains.append(chain)
        verdicts.append(run.trace(chain, eps, f"trace/{delta!r}", sample=sample))

    report = run.report
    report.add_claim(
        "p-side-point",
        approach.is_side_point,
        verdict=approach.side.verdict.value,
        accumulated=approach.accumulated,
        branch=branch,
    )
    counts = [v.candidate_count for v in verdicts]
    report.add_claim("candidate-budget", min(counts) >= MIN_CANDIDATES, counts=counts, required=MIN_CANDIDATES)
    report.add_claim("chains-valid", all(validate_chain(c).passed for c in chains))
    report.add_claim(
        "not-traced",
        not any(v.traced for v in verdicts),
        traced_deltas=[v.delta for v in verdicts if v.traced],
    )
    modulus = max(v.modulus for v in verdicts)
    floor = branches.beta / 2.0 - modulus
    worst = min(v.achieved_error for v in verdicts)
    report.add_claim("error-floor", worst >= floor, min_error=worst, floor=floor)

    run.audit_classes(chains[-1], eps)
    run.growth(sample)
    run.oracle()


def _side_point_failure(run: ExperimentRun) -> None:
    cfg = run.config
    geo = cfg.geometry
    sample = run.sample()
    sigma = run.sigma()
    sections, branches = run.landmarks(sigma)
    eps = run.epsilon(branches)

    with run.stage("side-point"):
        x1, p, t0, q = _side_point_chain_start(sections, sample, cfg.chain.T)
        jump = float(np.linalg.norm(q - x1))
    run.report.audits["side_point"] = {"x1": x1, "q": q, "p": p, "t0": t0, "jump": jump}
    logger.info(f"双侧点链起点: t_0={t0:.4g}, |q − x_1|={jump:.4g}")

    with run.stage("classify-side"):
        labelled = [("branch-l", branches.branch("l").point_at_arclength(branches.beta)),
                    ("branch-r", branches.branch("r").point_at_arclength(branches.beta)),
                    ("l*", x1),
                    ("q", q)]
        picks = _evenly(len(sample), geo.side_points)
        labelled.extend((f"sample-{i}", sample.points[i]) for i in picks)
        for label, x in labelled:
            result = classify_side(
                run.spec, x, sample, geo.side_eps, n_radii=geo.side_radii,
                threshold=geo.side_threshold, tol=run.tol,
            )
            run.report.sides.append({**result.to_dict(), "label": label})

    with run.stage("side-audits"):
        frame = lorenz_like_frame(run.spec, sigma)
        run.report.audits["bi_side_invariance"] = bi_side_invariance_audit(
            run.spec, sample.points[picks], sample, geo.side_eps, times=geo.audit_times, tol=run.tol,
            n_radii=geo.side_radii, threshold=geo.side_threshold,
        )
        run.report.audits["radius_halving"] = radius_halving_audit(
            run.spec, [x for _, x in labelled], sample, geo.side_eps,
            n_radii=geo.side_radii, threshold=geo.side_threshold, tol=run.tol,
        )
        run.report.audits["strong_stable"] = strong_stable_audit(sample, sigma, frame["strong_stable"])
        run.report.audits["boundary_type"] = boundary_type_audit(
            sample, sigma, frame["weak_stable"], frame["strong_stable"]
        )
    halving = run.report.audits["radius_halving"]
    run.report.add_claim(
        "side-stable-under-halving",
        halving["violations"] == 0,
        violations=halving["violations"],
        checked=halving["checked"],
    )

    verdicts = []
    chains = []
    for delta in cfg.tracing.deltas:
        with run.stage("build-chain"):
            chain = build_three_leg_chain(
                run.spec, p, t0, x1, sigma, delta, cfg.chain.T, branches,
                budget=cfg.chain.approach_budget, tol=run.tol,
            )
        chains.append(chain)
        verdicts.append(run.trace(chain, eps, f"trace/{delta!r}", sample=sample))

    validations = [validate_chain(c) for c in chains]
    run.report.add_claim(
        "chains-valid",
        all(v.passed for v in validations),
        max_defects=[v.max_defect for v in validations],
    )
    run.report.add_claim(
        "not-traced",
        not any(v.traced for v in verdicts),
        traced_deltas=[v.delta for v in verdicts if v.traced],
    )
    run.audit_classes(chains[-1], eps)
    run.growth(sample)
    run.oracle()


def _evenly(n: int, count: int) -> np.ndarray:
    if n == 0 or count <= 0:
        return np.zeros(0, dtype=int)
    return np.unique(np.linspace(0, n - 1, min(count, n)).astype(int))


def _side_point_chain_start(sections: SingularSectionPair, sample: AttractorSample, T: float):
    """
    三段链的起点

    x_1 取上截面 l* 上离样本最近的节点，q 为离 x_1 最近、且之前至少有 T 时长样本的
    样本点，p 为样本轨道上 q 之前 t_0 ≥ T 处的点。

    Returns:
        (x_1, p, t_0, q)

    Raises:
        GeometryError: 样本时长不足 T
    """
    times = sample.times
    eligible = np.flatnonzero(times - times[0] >= T)
    if len(eligible) == 0:
        raise GeometryError(f"吸引子样本时长 {times[-1] - times[0]:.3g} 不足 T={T}")
    nodes = sections.top.l_star_points()
    x1 = nodes[int(np.argmin(sample.nearest_distance(nodes)))]
    j = eligible[int(np.argmin(np.linalg.norm(sample.points[eligible] - x1, axis=1)))]
    i = int(np.searchsorted(times, times[j] - T, side="right")) - 1
    t0 = float(times[j] - times[i])
    if sample.trajectory is not None:
        p = sample.trajectory.flow_at(float(times[i]))
        q = sample.trajectory.flow_at(float(times[j]))
    else:
        p, q = sample.points[i], sample.points[j]
    return x1, p, t0, q


def _control(run: ExperimentRun) -> None:
    cfg = run.config
    eps = run.epsilon()
    x0 = np.asarray(cfg.chain.x0, dtype=float)

    verdicts = []
    for delta in cfg.tracing.deltas:
        chain = build_configured_chain(run, delta)
        verdicts.append(run.trace(chain, eps, f"trace/{delta!r}", candidates=[x0]))
        last = chain

    report = run.report
    report.add_claim(
        "traced",
        all(v.traced for v in verdicts),
        untraced_deltas=[v.delta for v in verdicts if not v.traced],
    )
    errors = [v.achieved_error for v in verdicts]
    report.add_claim(
        "error-non-increasing",
        all(b <= a for a, b in zip(errors, errors[1:])),
        errors=errors,
    )
    fitted = [v.achieved_error / v.delta for v in verdicts if np.isfinite(v.achieved_error) and v.achieved_error > 0]
    ratio = max(fitted) / min(fitted) if len(fitted) >= 2 else 1.0
    report.add_claim("linear-in-delta", ratio <= LINEAR_RATIO_BOUND, constants=fitted, ratio=ratio)

    run.audit_classes(last, eps)
    growth = cfg.growth
    if growth.points > 0:
        with run.stage("growth"):
            try:
                orbit_report = orbit_hyperbolicity(
                    run.spec, x0, growth.orbit_horizon, growth.renorm, avoid_radius=growth.avoid_radius, tol=run.tol
                )
                report.audits["orbit_hyperbolicity"] = orbit_report.to_dict()
            except DomainError as e:
                report.audits["orbit_hyperbolicity"] = {"error": str(e)}


def open_run(config: ShadowLabConfig, workers: Optional[int] = None) -> ExperimentRun:
    """
    校验配置并建立运行状态（向量场、误差目标、随机数流与空报告）

    Raises:
        ConfigurationError: 配置非法
    """
    config.validate()
    report = ExperimentReport(experiment=config.experiment, config=config.to_dict())
    with stage("setup", report.timings):
        spec = make_model(config.model.name, **config.model.params)
    return ExperimentRun(
        config=config,
        spec=spec,
        tol=config.integrator.to_tolerance(),
        stream=SeedStream(config.seed),
        report=report,
        workers=workers or config.workers,
    )


def build_configured_chain(
    run: ExperimentRun,
    delta: float,
    sample: Optional[AttractorSample] = None,
) -> FiniteChain:
    """
    按 config.chain.builder 构造单条链

    adversarial 与 three-leg 需要截面、路标与吸引子样本（缺省时现场采样）。
    """
    cfg = run.config.chain
    if cfg.builder == "perturbed":
        with run.stage("build-chain"):
            return build_perturbed_chain(
                run.spec, cfg.x0, [cfg.segment_time] * cfg.segments, noise=delta / 2.0,
                seed=run.stream.integer_seed(f"chain/{delta!r}"), T=cfg.T, tol=run.tol,
            )
    sigma = run.sigma()
    sections, branches = run.landmarks(sigma)
    sample = sample if sample is not None else run.sample()
    if cfg.builder == "adversarial":
        geo = run.config.geometry
        with run.stage("build-chain"):
            approach = find_side_approach_point(
                run.spec, sections, sample, delta, cfg.T, geo.side_eps,
                n_radii=geo.side_radii, threshold=geo.side_threshold,
                budget=cfg.approach_budget, tol=run.tol,
            )
            return build_adversarial_chain(
                run.spec, approach.p, sigma, _adversarial_branch(cfg.branch, approach), delta, cfg.T, branches,
                accumulated=approach.accumulated, budget=cfg.approach_budget, tol=run.tol,
            )
    with run.stage("build-chain"):
        x1, p, t0, _ = _side_point_chain_start(sections, sample, cfg.T)
        return build_three_leg_chain(
            run.spec, p, t0, x1, sigma, delta, cfg.T, branches, budget=cfg.approach_budget, tol=run.tol
        )


EXPERIMENTS = {
    "fpotp-failure": _fpotp_failure,
    "side-point-failure": _side_point_failure,
    "hyperbolic-control": _control,
    "limit-cycle-control": _control,
}


def run_experiment(
    config: ShadowLabConfig,
    out_dir: Optional[Union[str, Path]] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """
    运行配置指定的实验

    Args:
        config: 实验配置
        out_dir: 输出目录；给出时写入 report.json 与 plot_kinds 中的 CSV
        workers: 覆盖 config.workers

    Returns:
        ExperimentReport

    Raises:
        ConfigurationError: 配置非法
        StageError: 某个阶段失败，包装原始错误
    """
    from .. import __version__

    run = open_run(config, workers)
    report, spec = run.report, run.spec
    logger.info(f"🚀 开始实验 {config.experiment}（模型 {spec.name}, seed={config.seed}）")
    EXPERIMENTS[config.experiment](run)

    report.generator = {"name": "shadowlab", "version": __version__, "rng": run.stream.describe()}
    logger.info(f"实验 {config.experiment} 完成: {report.status}")

    if out_dir is not None:
        out = Path(out_dir)
        with stage("write-report", report.timings):
            write_report(report, out / "report.json")
        with stage("plot-data", report.timings):
            emit_all(report, config.plot_kinds, out, spec)
    return report


def summarize(report: ExperimentReport) -> Dict[str, Any]:
    """命令行输出用的简要摘要"""
    return {
        "experiment": report.experiment,
        "status": report.status,
        "traces": [
            {
                "delta": t["delta"],
                "state": t["verdict"]["state"],
                "error": t["verdict"]["achieved_error"],
            }
            for t in report.traces
        ],
        "claims": {c["name"]: c["holds"] for c in report.claims},
    }
