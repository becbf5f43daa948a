"""
实验报告

JSON 报告带 schema_version 与生成器信息，按键排序写出；body_digest 是去掉计时字段后
报告主体的 sha256，用于逐字节一致性检查。
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from loguru import logger

from ..errors import ConfigurationError

SCHEMA_VERSION = "1.0"
# 不参与 body_digest 的字段
TIMING_FIELDS = ("timings", "created_at", "body_digest")


def to_jsonable(value: Any) -> Any:
    """numpy 标量与数组转为内置类型，非有限浮点数转为 None"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(to_jsonable(data), sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass
class ExperimentReport:
    """
    实验报告

    Attributes:
        experiment: 实验类型
        config: 配置回显
        generator: 生成器名称、版本与随机数流信息
        landmarks: 截面与分支路标证书
        traces: 每个 δ 的链摘要与 TraceVerdict
        sides: 单侧点分类
        growth: 增长率报告
        audits: 各类审计结果
        claims: 实验断言及其是否成立
        budget: 候选与评估计数
        timings: 各阶段耗时（秒）
    """

    experiment: str
    config: Dict[str, Any]
    generator: Dict[str, Any] = field(default_factory=dict)
    landmarks: Optional[Dict[str, Any]] = None
    traces: List[Dict[str, Any]] = field(default_factory=list)
    sides: List[Dict[str, Any]] = field(default_factory=list)
    growth: List[Dict[str, Any]] = field(default_factory=list)
    audits: Dict[str, Any] = field(default_factory=dict)
    claims: List[Dict[str, Any]] = field(default_factory=list)
    budget: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def add_claim(self, name: str, holds: bool, **detail: Any) -> None:
        self.claims.append({"name": name, "holds": bool(holds), **detail})
        if not holds:
            logger.warning(f"实验断言不成立: {name} {detail}")

    @property
    def inconclusive(self) -> bool:
        return any(t["verdict"].get("inconclusive") for t in self.traces)

    @property
    def status(self) -> str:
        if self.inconclusive:
            return "inconclusive"
        return "ok" if all(c["holds"] for c in self.claims) else "claims-failed"

    def body(self) -> Dict[str, Any]:
        data = self.to_dict()
        return {k: v for k, v in data.items() if k not in TIMING_FIELDS}

    def body_digest(self) -> str:
        return hashlib.sha256(canonical_json(self.body()).encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(
            {
                "schema_version": self.schema_version,
                "experiment": self.experiment,
                "generator": self.generator,
                "config": self.config,
                "landmarks": self.landmarks,
                "traces": self.traces,
                "sides": self.sides,
                "growth": self.growth,
                "audits": self.audits,
                "claims": self.claims,
                "budget": self.budget,
                "status": self.status,
                "timings": self.timings,
            }
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentReport":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"不支持的报告版本: {version}，期望 {SCHEMA_VERSION}")
        return cls(
            experiment=data["experiment"],
            config=data.get("config", {}),
            generator=data.get("generator", {}),
            landmarks=data.get("landmarks"),
            traces=data.get("traces", []),
            sides=data.get("sides", []),
            growth=data.get("growth", []),
            audits=data.get("audits", {}),
            claims=data.get("claims", []),
            budget=data.get("budget", {}),
            timings=data.get("timings", {}),
            schema_version=version,
        )


def write_report(report: ExperimentReport, path: Union[str, Path]) -> Path:
    """写出报告 JSON（键排序，附 body_digest）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    data["body_digest"] = report.body_digest()
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
        f.write("\n")
    logger.info(f"报告已写入: {path}")
    return path


def load_report(path: Union[str, Path]) -> ExperimentReport:
    """
    读取报告

    Raises:
        ConfigurationError: 文件无法解析、版本不符或 body_digest 不一致
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"无法读取报告 {path}: {e}") from e
    report = ExperimentReport.from_dict(data)
    stored = data.get("body_digest")
    if stored is not None and stored != report.body_digest():
        raise ConfigurationError(f"报告 {path} 的 body_digest 不一致")
    return report


def recheck_report(report: ExperimentReport, spec=None, tol=None) -> List[Dict[str, Any]]:
    """
    由序列化的见证复核报告中每个 traced=True 的证书

    Returns:
        每条记录 {"index", "delta", "recheck", "bound", "in_class", "holds"}；
        holds 要求复核距离不超过 bound 且见证属于所声明的类
    """
    from ..chains.chain import FiniteChain
    from ..models.catalog import make_model
    from ..tracing.verifier import TraceVerdict, recheck_certificate, verdict_class_ok

    if spec is None:
        model = report.config.get("model", {})
        spec = make_model(model.get("name", "lorenz"), **model.get("params", {}))
    results = []
    for index, entry in enumerate(report.traces):
        verdict = TraceVerdict.from_dict(entry["verdict"])
        if not verdict.traced:
            continue
        summary = entry["chain"]
        chain = FiniteChain.create(
            spec,
            summary["points"],
            summary["durations"],
            delta=summary["delta"],
            T=summary["T"],
            tol=tol,
        )
        value = recheck_certificate(chain, verdict, spec, tol)
        bound = verdict.eps + verdict.modulus + 1e-6
        in_class = verdict_class_ok(verdict)
        results.append(
            {
                "index": index,
                "delta": entry.get("delta"),
                "recheck": value,
                "bound": bound,
                "in_class": in_class,
                "holds": bool(value <= bound and in_class),
            }
        )
    failed = sum(not r["holds"] for r in results)
    if failed:
        logger.warning(f"证书复核失败 {failed}/{len(results)}")
    else:
        logger.info(f"证书复核通过: {len(results)} 条")
    return results
