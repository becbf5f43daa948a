"""
ShadowLab 命令行接口

提供积分、吸引子采样、链构造、追踪判定、单侧点分类、路标、增长率与完整实验等子命令。
退出码：0 成功，2 配置错误，3 数值阶段错误，4 判定不确定。
"""

import json
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import click
import numpy as np
import pandas as pd

from . import __version__
from .config import load_config
from .config.config_manager import CHAIN_BUILDERS, PLOT_KINDS, TRACE_CLASSES, ShadowLabConfig
from .errors import ConfigurationError, ShadowLabError, exit_code_for
from .logger_config import setup_logging


def handle_errors(func: Callable) -> Callable:
    """把 ShadowLab 错误转换为对应的退出码"""

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (ShadowLabError, ValueError) as e:
            click.echo(f"❌ {e}", err=True)
            sys.exit(exit_code_for(e))

    return wrapper


def config_options(func: Callable) -> Callable:
    """所有子命令共用的配置选项"""
    func = click.option("--out", "-o", type=click.Path(), help="输出目录（默认取 output_dir）")(func)
    func = click.option("--workers", "-w", type=int, help="并行进程数")(func)
    func = click.option("--seed", type=int, help="随机种子")(func)
    func = click.option("--recipe", "-r", help="实验配方名称")(func)
    func = click.option("--config", "-c", "config_path", type=click.Path(), help="配置文件 (YAML/JSON)")(func)
    return func


def _load(
    config_path: Optional[str],
    recipe: Optional[str],
    seed: Optional[int],
    workers: Optional[int],
    **overrides: Any,
) -> ShadowLabConfig:
    kwargs: Dict[str, Any] = {k: v for k, v in overrides.items() if v is not None}
    if recipe is not None:
        kwargs["recipe"] = recipe
    if seed is not None:
        kwargs["seed"] = seed
    if workers is not None:
        kwargs["workers"] = workers
    return load_config(config_path, **kwargs)


def _out_file(config: ShadowLabConfig, out: Optional[str], default_name: str) -> Path:
    """--out 为带后缀的路径时直接使用，否则视为目录"""
    base = Path(out) if out else Path(config.output_dir)
    return base if base.suffix else base / default_name


def _write_json(data: Any, path: Path) -> Path:
    from .core.reports import to_jsonable

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write("\n")
    return path


def _point(value: Optional[Tuple[float, float, float]]) -> Optional[np.ndarray]:
    return None if value is None else np.asarray(value, dtype=float)


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--log-level",
    default="info",
    type=click.Choice(["debug", "info", "production", "silent", "warning", "error"]),
    help="日志模式",
)
@click.option("--log-file", type=click.Path(), help="额外的日志文件")
def cli(log_level: str, log_file: Optional[str]):
    """ShadowLab - 流的伪轨道追踪实验工具"""
    setup_logging(log_level, log_file)


@cli.command()
@config_options
@click.option("--x0", nargs=3, type=float, help="初始点（默认取 attractor.x0）")
@click.option("--time", "-t", "horizon", type=float, required=True, help="积分时长，可为负")
@click.option("--samples", "-n", default=1001, help="输出的等间隔样本数")
@handle_errors
def simulate(config_path, recipe, seed, workers, out, x0, horizon, samples):
    """积分一条轨道并写出 CSV"""
    from .flow import integrate
    from .models import make_model

    config = _load(config_path, recipe, seed, workers)
    spec = make_model(config.model.name, **config.model.params)
    start = _point(x0) if x0 else np.asarray(config.attractor.x0, dtype=float)
    field = spec.reversed() if horizon < 0 else spec
    traj = integrate(field, start, abs(horizon), config.integrator.to_tolerance())
    ts = np.linspace(0.0, traj.T, max(samples, 2))
    states = traj.sample(ts)
    sign = -1.0 if horizon < 0 else 1.0
    table = pd.DataFrame({"t": sign * ts, "x": states[:, 0], "y": states[:, 1], "z": states[:, 2]})
    path = _out_file(config, out, "trajectory.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    click.echo(f"✅ 积分完成: X_{horizon:g}(x0) = {traj.endpoint.tolist()}")
    click.echo(f"📄 轨道样本: {path}")


@cli.command("sample-attractor")
@config_options
@handle_errors
def sample_attractor_cmd(config_path, recipe, seed, workers, out):
    """采样吸引子并写出二进制点云"""
    from .core.experiment import open_run
    from .geometry import save_point_cloud

    config = _load(config_path, recipe, seed, workers)
    sample = open_run(config).sample()
    path = save_point_cloud(sample, _out_file(config, out, "attractor.shlb"))
    click.echo(f"✅ 采样完成: {len(sample)} 点 -> {path}")


@cli.command("build-chain")
@config_options
@click.option("--delta", "-d", type=float, required=True, help="跳跃上界 δ")
@click.option("--builder", "-b", type=click.Choice(CHAIN_BUILDERS), help="链构造器（默认取 chain.builder）")
@handle_errors
def build_chain(config_path, recipe, seed, workers, out, delta, builder):
    """构造一条 (δ,T)-链并写出链文件"""
    from .chains import save_chain, validate_chain
    from .core.experiment import build_configured_chain, open_run

    config = _load(config_path, recipe, seed, workers, **{"chain.builder": builder})
    chain = build_configured_chain(open_run(config), delta)
    path = save_chain(chain, _out_file(config, out, "chain.txt"))
    validation = validate_chain(chain)
    click.echo(f"✅ 链构造完成: {chain.k + 1} 段, 最大跳跃 {validation.max_defect:.3g} -> {path}")
    if not validation.passed:
        click.echo(f"⚠️  链校验未通过: {validation.to_dict()}")


@cli.command("verify-trace")
@config_options
@click.argument("chain_file", type=click.Path(exists=True))
@click.option("--eps", "-e", type=float, help="追踪精度 ε（默认取 tracing.epsilon）")
@click.option("--trace-class", type=click.Choice(TRACE_CLASSES), help="追踪类")
@click.option("--sample", "-s", "sample_path", type=click.Path(exists=True), help="候选点来源的点云文件")
@handle_errors
def verify_trace_cmd(config_path, recipe, seed, workers, out, chain_file, eps, trace_class, sample_path):
    """判定链文件中的链能否被 ε-追踪"""
    from .chains import load_chain
    from .core.rng import SeedStream
    from .geometry import load_point_cloud
    from .tracing import verify_trace

    config = _load(config_path, recipe, seed, workers, **{"tracing.trace_class": trace_class})
    eps = eps if eps is not None else config.tracing.epsilon
    if eps is None:
        raise ConfigurationError("需要 --eps 或 tracing.epsilon")
    tol = config.integrator.to_tolerance()
    chain = load_chain(chain_file, tol=tol)
    sample = load_point_cloud(sample_path) if sample_path else None
    verdict = verify_trace(
        chain,
        eps,
        trace_class=config.tracing.trace_class,
        candidates=None if sample is not None else [chain.points[0]],
        sample=sample,
        eps_rep=config.tracing.eps_rep,
        budget=config.tracing.to_budget(),
        workers=config.workers,
        rng=SeedStream(config.seed).spawn("verify-trace"),
        tol=tol,
    )
    path = _write_json(verdict.to_dict(), _out_file(config, out, "verdict.json"))
    click.echo(f"🔍 判定: {verdict.state}, 误差 {verdict.achieved_error:.4g} (ε={eps:g}) -> {path}")
    if verdict.inconclusive:
        sys.exit(4)


@cli.command("classify-side")
@config_options
@click.option("--point", "-p", nargs=3, type=float, required=True, help="待分类点")
@click.option("--sample", "-s", "sample_path", type=click.Path(exists=True), help="吸引子点云（默认现场采样）")
@click.option("--eps", "-e", type=float, help="最大探测半径（默认取 geometry.side_eps）")
@handle_errors
def classify_side_cmd(config_path, recipe, seed, workers, out, point, sample_path, eps):
    """对一个点做单侧/双侧分类"""
    from .core.experiment import open_run
    from .geometry import classify_side, load_point_cloud

    config = _load(config_path, recipe, seed, workers, **{"geometry.side_eps": eps})
    run = open_run(config)
    sample = load_point_cloud(sample_path) if sample_path else run.sample()
    geo = config.geometry
    result = classify_side(
        run.spec, _point(point), sample, geo.side_eps, n_radii=geo.side_radii,
        threshold=geo.side_threshold, tol=run.tol,
    )
    path = _write_json(result.to_dict(), _out_file(config, out, "side.json"))
    click.echo(f"✅ 分类结果: {result.verdict.value} -> {path}")


@cli.command()
@config_options
@handle_errors
def landmarks(config_path, recipe, seed, workers, out):
    """计算奇异截面、不稳定分支与路标"""
    from .core.experiment import open_run

    config = _load(config_path, recipe, seed, workers)
    run = open_run(config)
    _, branches = run.landmarks(run.sigma())
    path = _write_json(run.report.landmarks, _out_file(config, out, "landmarks.json"))
    certified = branches.certificate.get("launches", {}).get("certified")
    click.echo(f"✅ β_σ = {branches.beta:.6g}, 认证{'通过' if certified else '未通过'} -> {path}")


@cli.command()
@config_options
@click.option("--point", "-p", nargs=3, type=float, help="测量起点（默认取吸引子样本点）")
@handle_errors
def growth(config_path, recipe, seed, workers, out, point):
    """截面扩张与支配分解测量"""
    from .core.experiment import open_run
    from .hyperbolicity import sectional_growth

    config = _load(config_path, recipe, seed, workers)
    run = open_run(config)
    if point:
        cfg = config.growth
        run.report.growth.append(
            sectional_growth(run.spec, _point(point), cfg.horizon, cfg.renorm, tol=run.tol).to_dict()
        )
    else:
        run.growth(run.sample())
    path = _write_json(run.report.growth, _out_file(config, out, "growth.json"))
    for entry in run.report.growth:
        click.echo(f"  📈 x={entry['x']}: 面积速率 {entry['area_rate']}, 支配间隙 {entry['domination_gap']}")
    click.echo(f"✅ 增长率报告 -> {path}")


@cli.command("run-experiment")
@config_options
@handle_errors
def run_experiment_cmd(config_path, recipe, seed, workers, out):
    """运行完整实验，写出报告与绘图数据"""
    from .core.experiment import run_experiment, summarize

    config = _load(config_path, recipe, seed, workers)
    out_dir = Path(out) if out else Path(config.output_dir)
    click.echo(f"🚀 运行实验: {config.experiment}")
    report = run_experiment(config, out_dir=out_dir)
    summary = summarize(report)
    for trace in summary["traces"]:
        click.echo(f"  δ={trace['delta']:g}: {trace['state']}, 误差 {trace['error']}")
    for name, holds in summary["claims"].items():
        click.echo(f"  {'✅' if holds else '❌'} {name}")
    click.echo(f"📊 状态: {summary['status']} -> {out_dir / 'report.json'}")
    if report.inconclusive:
        sys.exit(4)


@cli.command("emit-plot-data")
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--kind", "-k", "kinds", multiple=True, type=click.Choice(PLOT_KINDS), help="绘图数据类型，可多次给出")
@click.option("--out", "-o", type=click.Path(), help="输出目录（默认为报告所在目录）")
@handle_errors
def emit_plot_data_cmd(report_path, kinds, out):
    """从报告导出绘图 CSV"""
    from .core.plotting import emit_all
    from .core.reports import load_report

    report = load_report(report_path)
    kinds = list(kinds) or list(report.config.get("plot_kinds") or PLOT_KINDS)
    paths = emit_all(report, kinds, out or Path(report_path).parent)
    for path in paths:
        click.echo(f"📄 {path}")


@cli.command("recheck-report")
@click.argument("report_path", type=click.Path(exists=True))
@handle_errors
def recheck_report_cmd(report_path):
    """由序列化的见证复核报告中的追踪证书"""
    from .core.reports import load_report, recheck_report

    results = recheck_report(load_report(report_path))
    failed = [r for r in results if not r["holds"]]
    for r in results:
        click.echo(f"  {'✅' if r['holds'] else '❌'} δ={r['delta']}: {r['recheck']:.4g} ≤ {r['bound']:.4g}")
    if failed:
        click.echo(f"❌ {len(failed)}/{len(results)} 条证书复核失败", err=True)
        sys.exit(3)
    click.echo(f"✅ 证书复核通过: {len(results)} 条")


def main():
    """主入口函数"""
    cli()


if __name__ == "__main__":
    main()
