"""
链文件读写

文本格式：若干 `# key=value` 头部行（δ、T、场名、参数、种子等），
之后每段一行 `x y z t`。浮点数以 repr 写出，读回逐位一致。
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from loguru import logger

from ..flow.field import VectorFieldSpec
from ..flow.integrator import Tolerance
from ..models.catalog import make_model
from .chain import FiniteChain

CHAIN_FORMAT_VERSION = "1"


def _format_float(value: float) -> str:
    return repr(float(value))


def save_chain(chain: FiniteChain, path: Union[str, Path]) -> Path:
    """
    写出链文件

    Args:
        chain: 有限链
        path: 输出路径

    Returns:
        写出的路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header: Dict[str, Any] = {
        "format": CHAIN_FORMAT_VERSION,
        "delta": _format_float(chain.delta),
        "T": _format_float(chain.T),
        "field": chain.spec.name,
        "params": json.dumps(chain.spec.params, sort_keys=True),
        "seed": "" if chain.seed is None else str(chain.seed),
        "metadata": json.dumps(chain.metadata, sort_keys=True, default=str),
    }
    lines = [f"# {key}={value}" for key, value in header.items()]
    for x, t in zip(chain.points, chain.durations):
        lines.append(" ".join(_format_float(v) for v in (*x, t)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug(f"链已写出: {path} ({chain.k + 1} 段)")
    return path


def read_chain_records(path: Union[str, Path]) -> Dict[str, Any]:
    """
    解析链文件，不积分

    Returns:
        {"header": {...}, "points": (k+1, 3), "durations": (k+1,)}

    Raises:
        ValueError: 记录行格式错误
    """
    header: Dict[str, str] = {}
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ValueError(f"{path}:{lineno} 需要 4 个数值，得到 {len(fields)}")
        rows.append([float(v) for v in fields])
    if not rows:
        raise ValueError(f"{path} 中没有链记录")
    data = np.array(rows, dtype=float)
    return {"header": header, "points": data[:, :3], "durations": data[:, 3]}


def load_chain(
    path: Union[str, Path],
    spec: Optional[VectorFieldSpec] = None,
    tol: Optional[Tolerance] = None,
) -> FiniteChain:
    """
    读取链文件并重新积分各段

    Args:
        path: 链文件
        spec: 向量场；为空时按头部的场名与参数重建
        tol: 积分误差目标

    Returns:
        FiniteChain
    """
    records = read_chain_records(path)
    header = records["header"]
    if spec is None:
        spec = make_model(header["field"], **json.loads(header.get("params", "{}")))
    seed = header.get("seed", "")
    return FiniteChain.create(
        spec,
        records["points"],
        records["durations"],
        delta=float(header["delta"]),
        T=float(header["T"]),
        tol=tol,
        seed=int(seed) if seed else None,
        metadata=json.loads(header.get("metadata", "{}")),
    )
