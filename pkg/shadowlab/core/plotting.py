"""
绘图数据导出

把报告中的结果整理成 CSV 表，供外部绘图工具使用。
"""

from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..errors import ConfigurationError
from .reports import ExperimentReport


def _model_spec(report: ExperimentReport):
    from ..models.catalog import make_model

    model = report.config.get("model", {})
    return make_model(model.get("name", "lorenz"), **model.get("params", {}))


def trace_distance_table(report: ExperimentReport, spec=None) -> pd.DataFrame:
    """每条带见证的判定：t 与 d(x₀*t, X_{g(t)}(z))"""
    from ..chains.chain import FiniteChain, chain_sample
    from ..flow.integrator import integrate
    from ..tracing.verifier import TraceVerdict

    spec = spec or _model_spec(report)
    frames = []
    for index, entry in enumerate(report.traces):
        verdict = TraceVerdict.from_dict(entry["verdict"])
        if verdict.best_z is None or verdict.best_g is None or verdict.grid_times is None:
            continue
        summary = entry["chain"]
        chain = FiniteChain.create(spec, summary["points"], summary["durations"], summary["delta"], summary["T"])
        tau = verdict.grid_times
        s = np.asarray(verdict.best_g(tau), dtype=float)
        orbit = integrate(spec, verdict.best_z, float(np.max(s)))
        dist = np.linalg.norm(chain_sample(chain, tau) - orbit.sample(np.clip(s, 0.0, orbit.T)), axis=1)
        frames.append(
            pd.DataFrame({"trace": index, "delta": entry.get("delta"), "t": tau, "g": s, "distance": dist})
        )
    if not frames:
        return pd.DataFrame(columns=["trace", "delta", "t", "g", "distance"])
    return pd.concat(frames, ignore_index=True)


def error_vs_delta_table(report: ExperimentReport) -> pd.DataFrame:
    rows = []
    for entry in report.traces:
        v = entry["verdict"]
        rows.append(
            {
                "delta": entry.get("delta"),
                "eps": v["eps"],
                "achieved_error": v["achieved_error"],
                "traced": v["traced"],
                "state": v["state"],
                "candidate_count": v["candidate_count"],
                "evaluated": v["evaluated"],
                "modulus": v["modulus"],
            }
        )
    return pd.DataFrame(rows, columns=["delta", "eps", "achieved_error", "traced", "state",
                                       "candidate_count", "evaluated", "modulus"])


def branches_table(report: ExperimentReport) -> pd.DataFrame:
    """W^l_γ、W^r_γ 折线与路标"""
    landmarks = report.landmarks or {}
    rows = []
    for name, points in (landmarks.get("polylines") or {}).items():
        for i, p in enumerate(points):
            rows.append({"branch": name, "kind": "curve", "index": i, "x": p[0], "y": p[1], "z": p[2]})
    for name, key in (("l", "y_left"), ("r", "y_right")):
        y = (landmarks.get("branches") or {}).get(key)
        if y is not None:
            rows.append({"branch": name, "kind": "landmark", "index": 0, "x": y[0], "y": y[1], "z": y[2]})
    return pd.DataFrame(rows, columns=["branch", "kind", "index", "x", "y", "z"])


def side_map_table(report: ExperimentReport) -> pd.DataFrame:
    rows = []
    for entry in report.sides:
        x, y, z = entry["point"]
        rows.append(
            {
                "label": entry.get("label", ""),
                "x": x,
                "y": y,
                "z": z,
                "verdict": entry["verdict"],
                "component": entry.get("component"),
            }
        )
    return pd.DataFrame(rows, columns=["label", "x", "y", "z", "verdict", "component"])


def growth_table(report: ExperimentReport) -> pd.DataFrame:
    rows = []
    for entry in report.growth:
        rates = entry.get("log_rates") or [None, None, None]
        rows.append(
            {
                "x": entry["x"][0],
                "y": entry["x"][1],
                "z": entry["x"][2],
                "rate_1": rates[0],
                "rate_2": rates[1],
                "rate_3": rates[2],
                "area_rate": entry.get("area_rate"),
                "stable_rate": entry.get("stable_rate"),
                "domination_gap": entry.get("domination_gap"),
            }
        )
    return pd.DataFrame(rows, columns=["x", "y", "z", "rate_1", "rate_2", "rate_3",
                                       "area_rate", "stable_rate", "domination_gap"])


PLOT_TABLES: Dict[str, Callable[..., pd.DataFrame]] = {
    "trace-distance": trace_distance_table,
    "error-vs-delta": error_vs_delta_table,
    "branches": branches_table,
    "side-map": side_map_table,
    "growth": growth_table,
}


def plot_table(report: ExperimentReport, kind: str, spec=None) -> pd.DataFrame:
    """
    生成指定类型的表

    Raises:
        ConfigurationError: 未知的类型
    """
    if kind not in PLOT_TABLES:
        raise ConfigurationError(f"未知的绘图数据类型: {kind}，可选: {list(PLOT_TABLES)}")
    if kind == "trace-distance":
        return trace_distance_table(report, spec)
    return PLOT_TABLES[kind](report)


def emit_plot_data(
    report: ExperimentReport,
    kind: str,
    out: Union[str, Path],
    spec=None,
) -> Path:
    """
    写出 CSV

    Args:
        report: 实验报告
        kind: trace-distance / error-vs-delta / branches / side-map / growth
        out: 目录（写入 <kind>.csv）或文件路径

    Returns:
        CSV 路径
    """
    table = plot_table(report, kind, spec)
    out = Path(out)
    path = out / f"{kind}.csv" if out.suffix.lower() != ".csv" else out
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    logger.info(f"绘图数据 {kind}: {len(table)} 行 -> {path}")
    return path


def emit_all(report: ExperimentReport, kinds: List[str], out: Union[str, Path], spec=None) -> List[Path]:
    return [emit_plot_data(report, kind, out, spec) for kind in kinds]
