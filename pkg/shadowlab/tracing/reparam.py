"""
重参数化

分段线性、严格递增、g(0)=0 的时间重参数化 g，以及 Rep、Rep*、Rep(ε)
三类成员判定。端点之外按声明的端斜率线性延拓。
"""

from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np

# 斜率比较的相对容差
SLOPE_RTOL = 1e-12


@dataclass(frozen=True)
class RepClasses:
    """类成员判定结果"""

    in_rep: bool
    in_rep_star: bool
    in_rep_eps: bool

    def to_dict(self) -> Dict[str, bool]:
        return {
            "in_rep": self.in_rep,
            "in_rep_star": self.in_rep_star,
            "in_rep_eps": self.in_rep_eps,
        }


@dataclass(frozen=True, eq=False)
class Reparametrization:
    """
    分段线性重参数化

    Attributes:
        breakpoints: 严格递增的断点 u_0 < … < u_m，其中必含 0
        values: 断点处的值 g(u_j)
        left_slope: u_0 左侧的延拓斜率（≥ 0）
        right_slope: u_m 右侧的延拓斜率（≥ 0）
    """

    breakpoints: np.ndarray
    values: np.ndarray
    left_slope: float = 1.0
    right_slope: float = 1.0

    def __post_init__(self) -> None:
        u = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if u.ndim != 1 or u.shape != v.shape or len(u) == 0:
            raise ValueError("断点与取值必须是等长的一维序列")
        if np.any(np.diff(u) <= 0):
            raise ValueError("断点必须严格递增")
        if self.left_slope < 0 or self.right_slope < 0:
            raise ValueError("端斜率必须非负")
        object.__setattr__(self, "breakpoints", u)
        object.__setattr__(self, "values", v)

    @classmethod
    def identity(cls) -> "Reparametrization":
        return cls(np.array([0.0]), np.array([0.0]), 1.0, 1.0)

    @classmethod
    def linear(cls, slope: float) -> "Reparametrization":
        return cls(np.array([0.0]), np.array([0.0]), slope, slope)

    @classmethod
    def from_pairs(
        cls,
        pairs: Sequence[Tuple[float, float]],
        left_slope: float = 1.0,
        right_slope: float = 1.0,
    ) -> "Reparametrization":
        u, v = zip(*pairs)
        return cls(np.array(u, dtype=float), np.array(v, dtype=float), left_slope, right_slope)

    def __call__(self, t: Any) -> Any:
        return rep_eval(self, t)

    def segment_slopes(self) -> np.ndarray:
        """全部线性片的斜率（含两端延拓）"""
        inner = np.diff(self.values) / np.diff(self.breakpoints)
        return np.concatenate([[self.left_slope], inner, [self.right_slope]])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "values": self.values.tolist(),
            "left_slope": float(self.left_slope),
            "right_slope": float(self.right_slope),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Reparametrization":
        return cls(
            np.asarray(data["breakpoints"], dtype=float),
            np.asarray(data["values"], dtype=float),
            float(data["left_slope"]),
            float(data["right_slope"]),
        )


def rep_eval(g: Reparametrization, t: Any) -> Any:
    """
    求 g(t)

    断点之间线性插值，两端按端斜率线性延拓。
    """
    ts = np.asarray(t, dtype=float)
    u, v = g.breakpoints, g.values
    out = np.interp(ts, u, v)
    out = np.where(ts < u[0], v[0] + g.left_slope * (ts - u[0]), out)
    out = np.where(ts > u[-1], v[-1] + g.right_slope * (ts - u[-1]), out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def classify(g: Reparametrization, eps: float) -> RepClasses:
    """
    判定 g 属于哪些重参数化类

    分段线性函数的弦斜率介于各线性片斜率的最小值与最大值之间，
    因此只需检查各片斜率。

    Args:
        g: 重参数化
        eps: Rep(ε) 的参数，ε ≥ 0

    Returns:
        RepClasses
    """
    if eps < 0:
        raise ValueError(f"eps 必须非负: {eps}")
    slopes = g.segment_slopes()
    zero_index = np.flatnonzero(g.breakpoints == 0.0)
    anchored = len(zero_index) == 1 and g.values[zero_index[0]] == 0.0
    inner = slopes[1:-1]
    increasing = bool(np.all(inner > 0)) and g.left_slope >= 0 and g.right_slope >= 0
    in_rep = anchored and increasing
    in_rep_star = in_rep and g.left_slope > 0 and g.right_slope > 0
    slack = SLOPE_RTOL * (1.0 + eps)
    in_rep_eps = in_rep_star and bool(np.all(np.abs(slopes - 1.0) <= eps + slack))
    return RepClasses(in_rep=in_rep, in_rep_star=in_rep_star, in_rep_eps=in_rep_eps)
