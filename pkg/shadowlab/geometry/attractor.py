"""
吸引子采样

长轨道去掉暂态后等时间间隔下采样，并建立 KD 树用于邻近查询；
采样可缓存为二进制点云文件。
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from ..flow.field import VectorFieldSpec
from ..flow.integrator import Tolerance, Trajectory, integrate

POINT_CLOUD_MAGIC = b"SHLB"


@dataclass(eq=False)
class AttractorSample:
    """
    吸引子点样本

    Attributes:
        points: (n, 3) 样本点
        times: 样本在长轨道上的时间（相对去暂态后的起点）
        metadata: 场名、参数、暂态时长、采样时长、种子等
        trajectory: 去暂态后的长轨道（仅内存中保留，用于候选轨道段）
    """

    points: np.ndarray
    times: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)
    trajectory: Optional[Trajectory] = None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self._tree = cKDTree(self.points) if len(self.points) else None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def tree(self) -> Optional[cKDTree]:
        return self._tree

    def count_within(self, x: np.ndarray, radius: float) -> int:
        if self._tree is None:
            return 0
        return len(self._tree.query_ball_point(np.asarray(x, dtype=float), radius))

    def indices_within(self, x: np.ndarray, radius: float) -> np.ndarray:
        if self._tree is None:
            return np.array([], dtype=int)
        idx = self._tree.query_ball_point(np.asarray(x, dtype=float), radius)
        return np.array(sorted(idx), dtype=int)

    def nearest_distance(self, xs: np.ndarray) -> np.ndarray:
        """每个查询点到样本的最近距离"""
        if self._tree is None:
            return np.full(len(np.atleast_2d(xs)), np.inf)
        dist, _ = self._tree.query(np.atleast_2d(xs))
        return np.asarray(dist)

    def snap(self, xs: np.ndarray, resolution: float) -> np.ndarray:
        """到样本距离不超过 resolution 的查询点换成最近的样本点，返回去重后的样本下标"""
        if self._tree is None:
            return np.array([], dtype=int)
        dist, idx = self._tree.query(np.atleast_2d(xs))
        return np.unique(np.asarray(idx)[np.asarray(dist) <= resolution])


def sample_attractor(
    spec: VectorFieldSpec,
    x0: Sequence[float],
    transient: float = 100.0,
    duration: float = 1000.0,
    count: int = 100_000,
    tol: Optional[Tolerance] = None,
    seed: Optional[int] = None,
) -> AttractorSample:
    """
    长轨道采样

    Args:
        spec: 向量场
        x0: 初始状态
        transient: 丢弃的暂态时长
        duration: 采样时长
        count: 样本数
        tol: 积分误差目标
        seed: 记录到元数据中的种子

    Returns:
        AttractorSample
    """
    if transient < 0 or duration <= 0 or count <= 0:
        raise ValueError(f"非法采样参数: transient={transient}, duration={duration}, count={count}")
    logger.info(f"采样吸引子 {spec.name}: 暂态 {transient}, 时长 {duration}, 样本 {count}")
    start = integrate(spec, x0, transient, tol).endpoint if transient > 0 else np.asarray(x0, dtype=float)
    traj = integrate(spec, start, duration, tol)
    times = np.linspace(0.0, duration, count)
    points = traj.sample(times)
    metadata = {
        "field": spec.name,
        "params": spec.describe()["params"],
        "transient": float(transient),
        "duration": float(duration),
        "count": int(count),
        "x0": [float(v) for v in np.asarray(x0, dtype=float)],
        "seed": seed,
    }
    return AttractorSample(points=points, times=times, metadata=metadata, trajectory=traj)


def save_point_cloud(sample: AttractorSample, path: Union[str, Path]) -> Path:
    """
    写出二进制点云

    格式：魔数 SHLB，uint32 小端头长度，UTF-8 JSON 头，
    然后是小端 float64 的 (x, y, z) 三元组。
    样本时间不写入文件，读取时由头中的 duration 与 count 重建。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dict(sample.metadata)
    header["count"] = len(sample)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(POINT_CLOUD_MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(np.ascontiguousarray(sample.points, dtype="<f8").tobytes())
    logger.info(f"点云已写出: {path} ({len(sample)} 点)")
    return path


def load_point_cloud(path: Union[str, Path]) -> AttractorSample:
    """
    读取二进制点云

    Raises:
        ValueError: 魔数或长度不匹配
    """
    data = Path(path).read_bytes()
    if data[:4] != POINT_CLOUD_MAGIC:
        raise ValueError(f"不是点云文件: {path}")
    (header_len,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    count = int(header["count"])
    body = np.frombuffer(data, dtype="<f8", offset=8 + header_len)
    if len(body) != 3 * count:
        raise ValueError(f"点云长度不匹配: 期望 {3 * count} 个浮点数, 实际 {len(body)}")
    points = body.reshape(count, 3).astype(float)
    times = np.linspace(0.0, float(header.get("duration", count - 1)), count)
    return AttractorSample(points=points, times=times, metadata=header)
